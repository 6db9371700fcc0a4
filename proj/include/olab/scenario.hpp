#ifndef OLAB_SCENARIO_HPP
#define OLAB_SCENARIO_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "olab/classifier.hpp"
#include "olab/preference.hpp"
#include "olab/types.hpp"

namespace olab {

enum class ArchetypeName { EXPERT, HESITANT, AUTOMATION_BIASED, CUSTOM };

// Behavioral parameters for one clinician template. exec/align are the two
// multiplicative components of true capability.
struct ClinicianArchetype {
  ArchetypeName name = ArchetypeName::CUSTOM;
  double exec = 0.5;
  double align = 0.5;
  std::optional<double> accept_floor;   // AUTOMATION_BIASED: accept at least this often
  int default_action_on_low_exec = 0;   // escape-hatch catalog index when exec is low
  std::optional<double> forced_override_prob;  // habitual override rate regardless of merit
  Vec action_bias;            // believed-reward offset per catalog action; empty = none
  bool sees_private_info = false;  // observes a per-case outcome-relevant signal
};

// A group of `count` clinicians stamped from one archetype, with per-clinician
// jitter on exec/align.
struct PopulationGroup {
  ClinicianArchetype archetype;
  int count = 1;
  double jitter_sd = 0.03;
  double proxy_score = -1.0;  // cold-start capability proxy in [0,1]; negative = absent
};

struct ActionSpec {
  std::string id;
  int class_tag = 0;  // action class for proximity/class-preservation checks
  Vec features;
  double complexity = 0.0;
  bool is_default = false;            // comparison baseline for accept/reject pairs
  bool guideline_first_line = false;  // audited by the suppression monitor
};

struct ClusterSpec {
  std::string id;
  int domain = 0;
  Vec features;  // cluster center; states are drawn around it
};

struct ContractSpec {
  std::string id;
  ContractKind kind = ContractKind::FFS;
  Vec features;
};

// Training-side configuration shared by the learner and the CLI.
struct TrainingConfig {
  double beta0 = 1.0;  // naive runs pin beta1 = 0 so every pair weighs the same
  double beta1 = 2.0;
  BetaForm beta_form = BetaForm::LINEAR;
  double ridge_lambda = 0.05;
  int m_max_iters = 400;
  double m_tol_grad = 1e-8;
  double prior_strength = 4.0;  // pseudo-count mass behind the capability prior
  double prior_mean = 0.5;      // used when a group has no proxy score
  double proxy_gain = 0.5;      // how far a proxy score moves the prior mean
  double prior_ceiling = 0.7;   // proxy-informed prior mean is clamped to this
  int max_rounds = 12;
  double tol_kappa = 1e-3;
  double tol_theta = 1e-3;
  double heldout_fraction = 0.2;   // outcome-labelled pairs reserved for anchoring
  double anchor_threshold = 0.25;  // minimum rank correlation with outcomes
  int min_anchor_pairs = 10;
  double reinit_prior_factor = 4.0;
  double homogeneity_spread = 0.05;  // kappa spread below this flags non-identifiability
  bool use_class_weights = true;
  bool soft_agreement = false;  // fractional alpha/beta increments instead of sign matches
  // Weight pairs by simulator ground-truth kappa instead of running the
  // estimator; used by reproductions that isolate the weighting mechanism.
  bool use_true_kappa = false;
};

// Thresholds for the failure-mode monitors.
struct MonitorConfig {
  double kappa_low_cut = 0.4;
  double kappa_high_cut = 0.7;
  int window_steps = 13;  // time-window width for stratified rates / trends
  double entropy_floor_bits = 0.4;
  double accept_rate_ceiling = 0.8;
  double surfacing_floor = 0.02;
  double probe_rate = 0.01;  // deterministic probe schedule for suppressed actions
  double min_concordance_weight = 20.0;  // posterior mass needed per type row
};

// Full description of one synthetic world + learning run.
struct ScenarioConfig {
  int schema_version = 1;
  std::string name = "custom";
  std::uint64_t seed = 1;

  int horizon_steps = 26;
  int interactions_per_step = 3;  // per clinician
  int outcome_lag = 4;
  double observability_rate = 0.8;
  double state_noise_sd = 0.15;

  std::vector<std::string> domains{"general"};
  std::vector<ActionSpec> actions;
  std::vector<ClusterSpec> clusters;
  std::vector<ContractSpec> contracts;
  std::vector<double> true_rewards;  // [cluster][action][contract kind], flattened

  std::vector<PopulationGroup> population;

  // Decision model of the simulated clinicians.
  double behavior_beta0 = 0.5;
  double behavior_beta1 = 2.5;
  double low_exec_threshold = 0.3;
  double low_exec_escape_rate = 0.85;  // referral rate on complex actions when exec is low
  double complexity_hard_cut = 0.5;    // actions above this count as complex
  double modify_fraction = 0.5;        // overrides that land as MODIFY vs REJECT
  double modify_radius = 1.0;          // max psi-distance of a MODIFY alternative
  double reject_alt_observed_rate = 0.7;  // rejected-with-alternative capture rate
  double workflow_noise_rate = 0.03;   // random non-clinical overrides
  double reason_emission_rate = 0.7;
  double private_info_sd = 0.4;        // spread of the expert-only case signal
  double belief_noise_sd = 0.2;        // clinician-side misjudgement of true reward

  // Outcome generation.
  double outcome_base = 0.2;
  double outcome_gain = 0.6;
  double outcome_noise_sd = 0.08;
  double adverse_event_threshold = 0.15;

  // Capability evolution.
  double scaffolding_level = 0.0;
  double evolve_eta = 0.0;
  double success_quality_threshold = 0.5;

  TrainingConfig training;
  ClassifierParams classifier_params = ClassifierParams::defaults();
  TypeWeightTable type_weights = TypeWeightTable::defaults();
  MonitorConfig monitors;

  std::size_t n_reward_kinds() const { return 3; }
  double true_reward(std::size_t cluster, std::size_t action, ContractKind kind) const;
  int default_action() const;  // index of the unique is_default action; throws if not unique
  int clinician_count() const;

  // Throws std::invalid_argument with a field-naming message on bad shapes,
  // out-of-range rates, or a missing/duplicated default action.
  void validate() const;
};

// Named, fully pinned configurations for the reproduction suite. Throws on
// unknown names; `scenario_names()` lists valid ones.
ScenarioConfig canonical_scenario(const std::string& name);
std::vector<std::string> scenario_names();

}  // namespace olab

#endif  // OLAB_SCENARIO_HPP
