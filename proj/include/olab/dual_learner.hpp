#ifndef OLAB_DUAL_LEARNER_HPP
#define OLAB_DUAL_LEARNER_HPP

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "olab/classifier.hpp"
#include "olab/preference.hpp"
#include "olab/scenario.hpp"
#include "olab/types.hpp"

namespace olab {

// Beta-distribution evidence counters per (clinician, domain); the posterior
// mean is the working capability estimate.
struct CapabilityEstimate {
  int clinician_id = 0;
  int domain_id = 0;
  double alpha = 2.0;
  double beta = 2.0;

  double mean() const { return alpha / (alpha + beta); }
};

using CapabilityMap = std::map<std::pair<int, int>, CapabilityEstimate>;

// Preference pairs plus the bookkeeping the trainer needs: which record each
// pair came from, and which records produced none (rejects without an
// observed alternative).
struct PairSet {
  std::vector<PreferencePair> pairs;
  std::vector<std::size_t> source_record;  // aligned with pairs
  std::size_t dropped_rejects = 0;         // REJECT with unobserved alternative
  std::size_t zero_weight_pairs = 0;       // class-weighted to zero in both losses
};

struct RoundTrace {
  int round = 0;
  double loglik = 0.0;
  double theta_delta = 0.0;
  double kappa_delta = 0.0;
  int m_iterations = 0;
};

struct TrainState {
  RewardModel model;
  CapabilityMap kappa_estimates;
  int rounds_completed = 0;
  bool converged = false;
  bool oscillation = false;        // round deltas grew three rounds in a row
  bool non_identifiable = false;   // converged with near-zero kappa spread
  double final_kappa_spread = 0.0;  // std. deviation of the posterior means
  std::vector<RoundTrace> trace;
};

struct AnchorReport {
  double concordance = 0.0;  // rank correlation, margins vs outcome differences
  double threshold = 0.25;
  bool pass = false;
  std::size_t pairs_used = 0;
};

struct MStepResult {
  RewardModel model;
  double loglik = 0.0;  // weighted mean log-likelihood at the optimum
  int iterations = 0;
};

// Turns a record stream into weighted preference pairs. ACCEPT becomes
// (recommendation over the catalog default); an override with an observed
// alternative becomes (alternative over recommendation); a REJECT without one
// is counted in dropped_rejects. capability_weight on each pair is
// beta(kappa-hat) under the supplied schedule; class weights come from the
// classifier unless disabled in `training`.
PairSet build_pairs(const std::vector<InteractionRecord>& records,
                    const std::vector<int>& record_clusters, const ScenarioConfig& config,
                    const CapabilityMap& kappa, const TrainingConfig& training);

// Maximizes the weighted pair log-likelihood minus a ridge penalty by
// gradient ascent with backtracking line search. The objective is concave in
// theta, so the line search only guards step size. Throws std::runtime_error
// if every pair has zero weight or the objective goes non-finite.
MStepResult m_step(const std::vector<PreferencePair>& pairs, const RewardModel& init,
                   const TrainingConfig& training);

// Objective evaluated by m_step, exposed for oracle tests: mean weighted pair
// log-likelihood minus ridge_lambda * |theta|^2.
double m_objective(const std::vector<PreferencePair>& pairs, const RewardModel& model,
                   double ridge_lambda);

// Re-scores every clinician against a fixed model. Agreement rule per record:
// ACCEPT agrees when margin(rec, default) >= 0; an override with an observed
// alternative agrees when margin(alt, rec) > 0; a bare REJECT agrees when
// margin(rec, default) < 0. Ties at zero side with accepting. Each increment
// is scaled by the record's capability class weight. Starts from `priors`
// (not from the running estimates), so repeated E-steps do not double-count.
CapabilityMap e_step(const std::vector<InteractionRecord>& records,
                     const std::vector<int>& record_clusters, const ScenarioConfig& config,
                     const RewardModel& model, const CapabilityMap& priors,
                     const TrainingConfig& training);

// Diffuse Beta priors, optionally shifted toward a bounded proxy score.
CapabilityMap cold_start_priors(const std::vector<ClinicianProxy>& clinicians,
                                const std::vector<int>& domains, const TrainingConfig& training);

// Alternates m_step / e_step from cold-start priors until both the kappa and
// theta deltas fall under tolerance or max_rounds is hit. Round one fits the
// reward model at prior-mean kappa. Flags (not throws) oscillation and
// non-identifiability.
TrainState alternate(const std::vector<InteractionRecord>& records,
                     const std::vector<int>& record_clusters, const ScenarioConfig& config,
                     const CapabilityMap& priors, const TrainingConfig& training);

// Rank correlation between model margins and outcome-quality differences on
// held-out pairs whose outcome_label is set. Throws std::runtime_error when
// fewer than training.min_anchor_pairs labelled pairs are supplied.
AnchorReport anchor_validate(const RewardModel& model, const std::vector<PreferencePair>& heldout,
                             const TrainingConfig& training);

// Multiplies every prior's evidence mass by training.reinit_prior_factor,
// keeping the mean; the anchor-failure recovery path.
CapabilityMap strengthen_priors(const CapabilityMap& priors, double factor);

// Spearman rank correlation with average-rank tie handling. Returns 0 when
// either input is constant. Exposed for the monitor and test layers too.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

// Stamps outcome labels (executed minus counterfactual quality, simulator
// side-channel) onto pairs whose source record has an observed outcome.
void attach_outcome_labels(PairSet& pairs, const std::vector<InteractionRecord>& records,
                           const std::vector<double>& executed_quality,
                           const std::vector<double>& counterfactual_quality);

// Deterministic train/held-out split for anchoring: every floor(1/fraction)-th
// labelled pair is held out; unlabelled pairs always train.
struct AnchorSplit {
  std::vector<PreferencePair> train;
  std::vector<PreferencePair> heldout;
};
AnchorSplit split_for_anchor(const PairSet& pairs, double heldout_fraction);

}  // namespace olab

#endif  // OLAB_DUAL_LEARNER_HPP
