#ifndef OLAB_TEST_SUPPORT_HPP
#define OLAB_TEST_SUPPORT_HPP

#include <string>
#include <vector>

#include "olab/preference.hpp"
#include "olab/rng.hpp"
#include "olab/scenario.hpp"
#include "olab/types.hpp"

namespace olab::test {

inline ClinicalAction make_action(int id, Vec psi, double complexity = 0.0) {
  return ClinicalAction{id, std::move(psi), complexity};
}

inline PatientState make_state(Vec phi, int patient = 0, int domain = 0, int t = 0) {
  PatientState s;
  s.patient_id = patient;
  s.domain_id = domain;
  s.features = std::move(phi);
  s.time_index = t;
  return s;
}

inline ContractContext make_contract(Vec gamma, int id = 0,
                                     ContractKind kind = ContractKind::OUTCOME_BASED) {
  return ContractContext{id, kind, std::move(gamma)};
}

inline Vec random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  Vec v(n);
  for (double& x : v) x = scale * rng.uniform(-1.0, 1.0);
  return v;
}

// A pair over random features with independent random weights; dimensions
// follow `spec`.
inline PreferencePair random_pair(Rng& rng, const FeatureMapSpec& spec) {
  PreferencePair p;
  p.state = make_state(random_vec(rng, spec.state_dim));
  p.contract = make_contract(random_vec(rng, spec.contract_dim));
  p.preferred = make_action(0, random_vec(rng, spec.action_dim));
  p.dispreferred = make_action(1, random_vec(rng, spec.action_dim));
  p.capability_weight = rng.uniform(0.2, 3.0);
  p.reward_class_weight = rng.uniform(0.0, 1.0);
  p.capability_class_weight = rng.uniform(0.0, 1.0);
  return p;
}

inline RewardModel random_model(Rng& rng, const FeatureMapSpec& spec, double scale = 1.0) {
  RewardModel m = RewardModel::zeros(spec);
  for (double& t : m.theta) t = scale * rng.uniform(-1.0, 1.0);
  return m;
}

// Minimal two-action, one-cluster world: default "usual" vs a beneficial
// "treat" action. Used wherever a full scenario would be noise.
inline ScenarioConfig tiny_config() {
  ScenarioConfig cfg;
  cfg.name = "tiny";
  cfg.seed = 7;
  cfg.horizon_steps = 8;
  cfg.interactions_per_step = 2;
  cfg.outcome_lag = 1;
  cfg.observability_rate = 1.0;
  cfg.domains = {"general"};

  ActionSpec usual;
  usual.id = "usual";
  usual.class_tag = 0;
  usual.features = {0.0, 0.0};
  usual.complexity = 0.1;
  usual.is_default = true;
  ActionSpec treat;
  treat.id = "treat";
  treat.class_tag = 1;
  treat.features = {1.0, 0.5};
  treat.complexity = 0.7;
  treat.guideline_first_line = true;
  cfg.actions = {usual, treat};

  ClusterSpec cl;
  cl.id = "main";
  cl.domain = 0;
  cl.features = {1.0, 0.2};
  cfg.clusters = {cl};

  ContractSpec con;
  con.id = "vbc";
  con.kind = ContractKind::OUTCOME_BASED;
  con.features = {1.0};
  cfg.contracts = {con};

  cfg.true_rewards.assign(cfg.clusters.size() * cfg.actions.size() * cfg.n_reward_kinds(), 0.0);
  for (std::size_t k = 0; k < cfg.n_reward_kinds(); ++k) {
    cfg.true_rewards[0 * cfg.n_reward_kinds() + k] = 0.2;  // usual
    cfg.true_rewards[1 * cfg.n_reward_kinds() + k] = 0.8;  // treat
  }

  ClinicianArchetype arch;
  arch.name = ArchetypeName::CUSTOM;
  arch.exec = 0.8;
  arch.align = 0.8;
  PopulationGroup g;
  g.archetype = arch;
  g.count = 2;
  g.jitter_sd = 0.0;
  cfg.population = {g};

  cfg.workflow_noise_rate = 0.0;
  cfg.modify_fraction = 0.0;
  cfg.reject_alt_observed_rate = 1.0;
  cfg.private_info_sd = 0.0;
  cfg.belief_noise_sd = 0.1;
  return cfg;
}

// An ACCEPT record for `cfg`'s catalog at the cluster-0 center.
inline InteractionRecord accept_record(const ScenarioConfig& cfg, int clinician, int t = 0,
                                       int rec_action = 1) {
  InteractionRecord r;
  r.state = make_state(cfg.clusters[0].features, /*patient=*/t, cfg.clusters[0].domain, t);
  r.recommendation = make_action(rec_action, cfg.actions[rec_action].features,
                                 cfg.actions[rec_action].complexity);
  r.executed = r.recommendation;
  r.clinician_id = clinician;
  r.contract = ContractContext{0, cfg.contracts[0].kind, cfg.contracts[0].features};
  return r;
}

}  // namespace olab::test

#endif  // OLAB_TEST_SUPPORT_HPP
