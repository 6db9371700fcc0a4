#ifndef OLAB_CLASSIFIER_HPP
#define OLAB_CLASSIFIER_HPP

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "olab/types.hpp"

namespace olab {

// Override taxonomy: I context, II judgment, III workflow, IV protocol,
// V capability.
enum class OverrideType { CONTEXT = 0, JUDGMENT = 1, WORKFLOW = 2, PROTOCOL = 3, CAPABILITY = 4 };

constexpr std::size_t kNumOverrideTypes = 5;

// Probability distribution over the five override types for one interaction.
struct TypePosterior {
  std::array<double, kNumOverrideTypes> probs{0.2, 0.2, 0.2, 0.2, 0.2};

  double operator[](OverrideType t) const { return probs[static_cast<std::size_t>(t)]; }
  OverrideType argmax() const;
  bool valid(double tol = 1e-9) const;
};

// Observable signals extracted from one override record.
struct OverrideSignals {
  std::optional<double> proximity;  // |psi(alt) - psi(rec)|, absent without an alternative
  bool class_preserved = false;     // alternative stays in the recommendation's action class
  double clinician_domain_override_rate = 0.0;
  double cohort_high_kappa_accept_rate = 0.0;
  std::optional<ReasonCode> structured_reason;
};

// Linear-softmax scorer parameters. Signal features are
// [bias, proximity closeness, class preserved, clinician domain override
// rate, cohort high-kappa accept rate]; a present structured reason adds
// `reason_bonus` to the logit of its matching type. Fixed per run (slow
// outer loop): never updated inside a dual-learner inner run.
struct ClassifierParams {
  static constexpr std::size_t kNumSignals = 5;
  std::array<std::array<double, kNumSignals>, kNumOverrideTypes> weights{};
  double reason_bonus = 3.0;

  static ClassifierParams defaults();
};

// Per-type (reward, capability) weights; posteriors are averaged through
// this table.
struct TypeWeightTable {
  std::array<double, kNumOverrideTypes> reward{};
  std::array<double, kNumOverrideTypes> capability{};

  static TypeWeightTable defaults();
};

// Per-clinician-per-domain and per-state-cluster aggregates backing the
// override-history and cross-clinician comparison signals, plus the action
// catalog metadata needed for proximity/class checks.
struct SignalContext {
  struct ActionMeta {
    Vec features;
    int class_tag = 0;  // catalog class index
  };
  std::vector<ActionMeta> actions;                        // by action_id
  std::map<std::pair<int, int>, double> override_rate;    // (clinician, domain) -> rate
  std::map<int, double> cohort_high_kappa_accept;         // cluster -> accept rate
  std::map<int, int> record_cluster;                      // record index -> cluster (for lookups)
};

// Builds the SignalContext aggregates from a record stream. `kappa` maps
// clinician id to the capability estimate used for the high-kappa cohort cut
// (threshold `high_kappa_cut`).
SignalContext build_signal_context(const std::vector<InteractionRecord>& records,
                                   const std::vector<int>& record_clusters,
                                   const std::vector<SignalContext::ActionMeta>& actions,
                                   const std::map<int, double>& kappa,
                                   double high_kappa_cut = 0.7);

// Deterministic signal extraction for one override record. Throws if called
// on an ACCEPT record. `record_index` selects the cluster entry in `ctx`.
OverrideSignals extract_signals(const InteractionRecord& record, const SignalContext& ctx,
                                int record_index);

// Softmax over five per-type linear scores of the signals.
TypePosterior classify_override(const OverrideSignals& signals, const ClassifierParams& params);

// Posterior-probability-weighted average of the per-type configured weights.
// Returns (reward_class_weight, capability_class_weight).
std::pair<double, double> class_weights(const TypePosterior& posterior,
                                        const TypeWeightTable& table);

// One classifier pass over a record stream: posteriors and class weights for
// every override, weight (1,1) for accepts. Shared by pair building, the
// capability estimator, and the audit reports so they always agree.
struct RecordClassification {
  std::vector<std::pair<double, double>> weights;   // per record (reward, capability)
  std::vector<TypePosterior> posteriors;            // override records only
  std::vector<std::size_t> posterior_record;        // record index per posterior
};

RecordClassification classify_records(const std::vector<InteractionRecord>& records,
                                      const std::vector<int>& record_clusters,
                                      const std::vector<SignalContext::ActionMeta>& actions,
                                      const ClassifierParams& params, const TypeWeightTable& table,
                                      const std::map<int, double>& kappa_by_clinician,
                                      double high_kappa_cut);

}  // namespace olab

#endif  // OLAB_CLASSIFIER_HPP
