#ifndef OLAB_WORLD_SIM_HPP
#define OLAB_WORLD_SIM_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "olab/rng.hpp"
#include "olab/scenario.hpp"
#include "olab/types.hpp"

namespace olab {

// Simulator-side truth that never reaches the learner: counterfactual
// outcome qualities, state cluster assignments, and capability trajectories.
struct GroundTruth {
  std::size_t n_clusters = 0;
  std::size_t n_actions = 0;
  std::size_t n_domains = 0;
  std::size_t n_clinicians = 0;
  std::size_t horizon = 0;

  // Per-record simulator annotations, aligned with the record vector.
  struct RecordSide {
    int cluster = 0;
    double executed_quality = 0.0;        // realized quality, observed or not
    double counterfactual_quality = 0.0;  // quality of the non-taken arm
    int counterfactual_action = 0;
    double kappa_at_decision = 0.5;
  };
  std::vector<RecordSide> per_record;

  // kappa(k, d, t) for t in [0, horizon] (index horizon = post-run value),
  // flattened clinician-major; exec/align mirrored in the same layout.
  std::vector<double> kappa_traj;
  std::vector<double> exec_traj;
  std::vector<double> align_traj;

  std::size_t traj_index(std::size_t clinician, std::size_t domain, std::size_t t) const;
  double kappa(std::size_t clinician, std::size_t domain, std::size_t t) const;
  std::vector<int> clusters() const;  // per-record cluster ids, extracted
};

struct SimResult {
  std::vector<InteractionRecord> records;
  GroundTruth truth;
  std::vector<CapabilityProfile> final_profiles;
};

// Per-clinician realized parameters after jitter.
struct ClinicianState {
  int clinician_id = 0;
  ClinicianArchetype archetype;
  std::vector<double> exec;   // per domain
  std::vector<double> align;  // per domain
  double proxy_score = -1.0;

  double kappa(std::size_t domain) const { return exec[domain] * align[domain]; }
};

// Replaces the default truth-argmax recommender; used to close the loop when
// a learned model drives the next data-collection round.
using RecommendPolicy = std::function<int(const PatientState&, int cluster,
                                          const ContractContext&)>;

// One capability update: kappa' = kappa + eta * scaffolding * [success] *
// (1 - kappa). Requires eta in (0,1); never decreases kappa.
CapabilityProfile evolve_capability(const CapabilityProfile& profile, double scaffolding,
                                    bool executed_successfully, double eta);

class WorldSim {
 public:
  // Validates the config up front; throws std::invalid_argument on bad shapes.
  explicit WorldSim(const ScenarioConfig& config);

  // Runs the full horizon. Deterministic given (config, config.seed):
  // clinicians are visited in id order, each with its own derived RNG
  // substream, so identical inputs give byte-identical record streams.
  SimResult run(const RecommendPolicy& policy = {});

  // One decision. `case_effects` holds the per-action case-specific quality
  // shifts for this interaction (visible only to private-info clinicians).
  // Mutates `rng` only; exposed for behavioral unit tests.
  Decision decide(const ClinicianState& clin, std::size_t domain, int cluster, int rec_action,
                  ContractKind kind, const Vec& case_effects, Rng& rng) const;

  // Believed reward: true reward shifted by archetype bias, alignment-scaled
  // belief noise, and (for private-info clinicians) the case effect.
  double believed_reward(const ClinicianState& clin, std::size_t domain, int cluster, int action,
                         ContractKind kind, const Vec& case_effects, Rng& rng) const;

  // Outcome quality for one arm: clamp01(base + gain * normalized true
  // reward (case effect included) + observation noise).
  double outcome_quality(int cluster, int action, ContractKind kind, double case_effect,
                         Rng& rng) const;

  // Default recommender: argmax of true reward for the cluster/contract,
  // blind to clinician context (the gap overrides carry information about).
  int recommend(int cluster, ContractKind kind) const;

  const std::vector<ClinicianState>& clinicians() const { return clinicians_; }
  const ScenarioConfig& config() const { return cfg_; }

 private:
  ScenarioConfig cfg_;
  std::vector<ClinicianState> clinicians_;
  int default_action_ = 0;
  double reward_min_ = 0.0;
  double reward_max_ = 1.0;

  double normalized_reward(double raw) const;
  void make_population(Rng& rng);
};

// Convenience wrapper: construct, run, return.
SimResult generate_dataset(const ScenarioConfig& config);

}  // namespace olab

#endif  // OLAB_WORLD_SIM_HPP
