#include "olab/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace olab {
namespace {

void fail(const std::string& what) { throw std::invalid_argument(what); }

void check_unit(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) fail(std::string(field) + " must lie in [0,1]");
}

std::size_t kind_index(ContractKind kind) { return static_cast<std::size_t>(kind); }

// --- registry helpers -------------------------------------------------------

ActionSpec action(std::string id, int class_tag, Vec psi, double complexity, bool is_default,
                  bool guideline) {
  ActionSpec a;
  a.id = std::move(id);
  a.class_tag = class_tag;
  a.features = std::move(psi);
  a.complexity = complexity;
  a.is_default = is_default;
  a.guideline_first_line = guideline;
  return a;
}

ClusterSpec cluster(std::string id, int domain, Vec phi) {
  ClusterSpec c;
  c.id = std::move(id);
  c.domain = domain;
  c.features = std::move(phi);
  return c;
}

ContractSpec contract(std::string id, ContractKind kind, Vec gamma) {
  ContractSpec c;
  c.id = std::move(id);
  c.kind = kind;
  c.features = std::move(gamma);
  return c;
}

// Same reward for all three contract kinds unless a scenario overrides cells.
void set_reward(ScenarioConfig& cfg, std::size_t cl, std::size_t ac, double value) {
  for (std::size_t k = 0; k < cfg.n_reward_kinds(); ++k)
    cfg.true_rewards[(cl * cfg.actions.size() + ac) * cfg.n_reward_kinds() + k] = value;
}

void size_rewards(ScenarioConfig& cfg) {
  cfg.true_rewards.assign(cfg.clusters.size() * cfg.actions.size() * cfg.n_reward_kinds(), 0.0);
}

PopulationGroup group(ClinicianArchetype a, int count, double jitter = 0.03,
                      double proxy = -1.0) {
  PopulationGroup g;
  g.archetype = std::move(a);
  g.count = count;
  g.jitter_sd = jitter;
  g.proxy_score = proxy;
  return g;
}

ClinicianArchetype archetype(ArchetypeName name, double exec, double align) {
  ClinicianArchetype a;
  a.name = name;
  a.exec = exec;
  a.align = align;
  return a;
}

// The suppression-bias demonstration: one heart-failure cluster where a
// guideline-backed but execution-heavy therapy beats both referral and usual
// care. Referral is the catalog default, so accepted recommendations and
// capability-driven referrals pull the learned (therapy vs referral) margin
// in exactly opposite directions.
ScenarioConfig fig1_scenario() {
  ScenarioConfig cfg;
  cfg.name = "fig1";
  cfg.seed = 20260101;
  cfg.horizon_steps = 26;
  cfg.interactions_per_step = 1;
  cfg.domains = {"cardiology"};
  cfg.actions = {
      action("referral", 1, {0.0, 0.0}, 0.30, true, false),
      action("sglt2i", 0, {1.0, 0.6}, 0.80, false, true),
      action("usual_care", 2, {0.2, -0.5}, 0.10, false, false),
  };
  cfg.clusters = {cluster("hfref", 0, {1.0, 0.5})};
  cfg.contracts = {contract("vbc", ContractKind::OUTCOME_BASED, {1.0, 0.3})};
  size_rewards(cfg);
  set_reward(cfg, 0, 0, 0.10);  // referral
  set_reward(cfg, 0, 1, 0.90);  // sglt2i: correct but demanding
  set_reward(cfg, 0, 2, 0.30);  // usual care

  auto hesitant = archetype(ArchetypeName::HESITANT, 0.22, 0.90);
  hesitant.default_action_on_low_exec = 0;
  auto expert = archetype(ArchetypeName::EXPERT, 0.95, 0.95);
  cfg.population = {group(hesitant, 35, 0.02), group(expert, 15, 0.02)};

  cfg.low_exec_threshold = 0.3;
  cfg.low_exec_escape_rate = 0.90;
  cfg.complexity_hard_cut = 0.5;
  cfg.modify_fraction = 0.0;          // overrides land as plain rejects
  cfg.reject_alt_observed_rate = 1.0; // every override's alternative is captured
  cfg.workflow_noise_rate = 0.0;
  cfg.belief_noise_sd = 0.05;
  cfg.observability_rate = 0.9;

  cfg.training.beta0 = 0.5;
  cfg.training.beta1 = 2.0;
  cfg.training.use_class_weights = false;  // isolate the beta(kappa) mechanism
  cfg.training.use_true_kappa = true;
  return cfg;
}

// Shared catalog for the heterogeneous-population family: a default, an easy
// medication, a demanding guideline medication (same class), and referral.
void hetero_catalog(ScenarioConfig& cfg) {
  cfg.actions = {
      action("usual_care", 0, {0.0, 0.0}, 0.10, true, false),
      action("med_a", 1, {0.8, 0.2}, 0.35, false, false),
      action("med_b", 1, {0.5, 0.9}, 0.75, false, true),
      action("referral", 2, {-0.6, 0.4}, 0.30, false, false),
  };
  cfg.clusters = {
      cluster("uncomplicated", 0, {1.0, 0.2}),
      cluster("advanced", 0, {0.1, 1.0}),
      cluster("comorbid", 0, {-0.8, 0.6}),
  };
  cfg.contracts = {
      contract("ffs", ContractKind::FFS, {1.0, 0.0}),
      contract("vbc", ContractKind::OUTCOME_BASED, {0.0, 1.0}),
  };
  size_rewards(cfg);
  // uncomplicated: easy medication is the right call
  set_reward(cfg, 0, 0, 0.25);
  set_reward(cfg, 0, 1, 0.75);
  set_reward(cfg, 0, 2, 0.45);
  set_reward(cfg, 0, 3, 0.15);
  // advanced: the demanding medication wins
  set_reward(cfg, 1, 0, 0.20);
  set_reward(cfg, 1, 1, 0.45);
  set_reward(cfg, 1, 2, 0.85);
  set_reward(cfg, 1, 3, 0.40);
  // comorbid: refer out
  set_reward(cfg, 2, 0, 0.30);
  set_reward(cfg, 2, 1, 0.35);
  set_reward(cfg, 2, 2, 0.25);
  set_reward(cfg, 2, 3, 0.80);
}

ScenarioConfig hetero_scenario() {
  ScenarioConfig cfg;
  cfg.name = "hetero";
  cfg.seed = 41;
  cfg.horizon_steps = 52;
  cfg.interactions_per_step = 3;
  cfg.domains = {"cardiology"};
  hetero_catalog(cfg);

  auto expert = archetype(ArchetypeName::EXPERT, 0.92, 0.90);
  expert.sees_private_info = true;
  auto mid = archetype(ArchetypeName::CUSTOM, 0.65, 0.70);
  auto hesitant = archetype(ArchetypeName::HESITANT, 0.28, 0.75);
  hesitant.default_action_on_low_exec = 3;  // referral
  auto contrarian = archetype(ArchetypeName::CUSTOM, 0.70, 0.35);
  contrarian.action_bias = {0.0, 0.3, -0.8, 0.0};  // distrusts the demanding med

  cfg.population = {
      group(expert, 8, 0.03, 0.9),
      group(mid, 12, 0.03, 0.5),
      group(hesitant, 10, 0.03, 0.3),
      group(contrarian, 10, 0.03, 0.5),
  };
  return cfg;
}

ScenarioConfig homog_scenario() {
  ScenarioConfig cfg = hetero_scenario();
  cfg.name = "homog";
  cfg.seed = 43;
  cfg.population = {group(archetype(ArchetypeName::CUSTOM, 0.65, 0.70), 30, 0.01)};
  return cfg;
}

ScenarioConfig flywheel_scenario() {
  ScenarioConfig cfg;
  cfg.name = "flywheel";
  cfg.seed = 47;
  cfg.horizon_steps = 52;  // four 13-step quarters
  cfg.interactions_per_step = 3;
  cfg.domains = {"cardiology"};
  hetero_catalog(cfg);

  auto expert = archetype(ArchetypeName::EXPERT, 0.92, 0.90);
  auto hesitant = archetype(ArchetypeName::HESITANT, 0.24, 0.80);
  hesitant.default_action_on_low_exec = 3;
  cfg.population = {group(expert, 10, 0.02), group(hesitant, 20, 0.02)};

  cfg.scaffolding_level = 1.0;
  cfg.evolve_eta = 0.02;
  cfg.success_quality_threshold = 0.45;
  cfg.monitors.window_steps = 13;
  return cfg;
}

// Practice-pattern lock-in against referral: most clinicians habitually
// redirect referral recommendations, so unweighted retraining sinks the
// referral margin and the next-round policy stops surfacing it.
ScenarioConfig stacking_scenario() {
  ScenarioConfig cfg;
  cfg.name = "stacking";
  cfg.seed = 53;
  cfg.horizon_steps = 26;
  cfg.interactions_per_step = 3;
  cfg.domains = {"cardiology"};
  hetero_catalog(cfg);
  for (auto& a : cfg.actions) a.guideline_first_line = (a.id == "referral");

  auto keeper = archetype(ArchetypeName::CUSTOM, 0.70, 0.45);
  keeper.forced_override_prob = 0.75;
  keeper.action_bias = {0.0, 0.9, 0.0, -1.5};  // keeps the patient, trusts med_a
  auto expert = archetype(ArchetypeName::EXPERT, 0.92, 0.90);
  cfg.population = {group(keeper, 35, 0.03), group(expert, 5, 0.02)};

  cfg.training.beta1 = 0.0;  // the failure needs the unweighted pipeline
  cfg.training.use_class_weights = false;
  return cfg;
}

// Shared blind spot among otherwise high-capability clinicians: they override
// the demanding medication toward the easy one on advanced cases, where the
// true margin is small enough that overrides dominate the pair stream.
ScenarioConfig amplification_scenario() {
  ScenarioConfig cfg;
  cfg.name = "amplification";
  cfg.seed = 59;
  cfg.horizon_steps = 52;
  cfg.interactions_per_step = 3;
  cfg.domains = {"cardiology"};
  hetero_catalog(cfg);
  // Narrow the advanced-case margin so high-beta acceptance does not swamp
  // the biased overrides.
  set_reward(cfg, 1, 1, 0.52);
  set_reward(cfg, 1, 2, 0.62);

  // The habit also suppresses referral, so the biased pairs span every
  // cluster instead of leaving two-thirds of the stream clean.
  auto biased_expert = archetype(ArchetypeName::EXPERT, 0.92, 0.90);
  biased_expert.action_bias = {0.0, 0.8, -1.2, -1.0};
  biased_expert.forced_override_prob = 0.55;
  auto mid = archetype(ArchetypeName::CUSTOM, 0.65, 0.70);
  cfg.population = {group(biased_expert, 25, 0.02, 0.9), group(mid, 5, 0.03, 0.5)};

  cfg.training.use_true_kappa = true;  // amplification needs the high weights
  cfg.training.use_class_weights = false;
  cfg.observability_rate = 1.0;
  return cfg;
}

// Three capability tiers with pinned habitual override rates; everything else
// is tuned so the non-habitual path accepts, making the configured rates the
// ground truth the stratified monitor must recover.
ScenarioConfig rates_scenario() {
  ScenarioConfig cfg;
  cfg.name = "rates";
  cfg.seed = 61;
  cfg.horizon_steps = 50;
  cfg.interactions_per_step = 10;
  cfg.domains = {"cardiology"};
  cfg.actions = {
      action("usual_care", 0, {0.0, 0.0}, 0.10, true, false),
      action("sglt2i", 1, {1.0, 0.5}, 0.60, false, true),
  };
  cfg.clusters = {cluster("hfref", 0, {1.0, 0.4})};
  cfg.contracts = {contract("vbc", ContractKind::OUTCOME_BASED, {1.0, 0.0})};
  size_rewards(cfg);
  set_reward(cfg, 0, 0, 0.10);
  set_reward(cfg, 0, 1, 2.60);  // huge margin: the free-choice path always accepts

  auto tier = [&](double kappa_part, double rate) {
    auto a = archetype(ArchetypeName::CUSTOM, kappa_part, 1.0);
    a.forced_override_prob = rate;
    return a;
  };
  cfg.population = {
      group(tier(0.75, 0.15), 10, 0.0),
      group(tier(0.50, 0.55), 10, 0.0),
      group(tier(0.25, 0.80), 10, 0.0),
  };

  cfg.behavior_beta0 = 1.0;
  cfg.behavior_beta1 = 2.0;
  cfg.workflow_noise_rate = 0.0;
  cfg.low_exec_threshold = 0.0;  // no escape-hatch channel
  return cfg;
}

}  // namespace

double ScenarioConfig::true_reward(std::size_t cl, std::size_t ac, ContractKind kind) const {
  const std::size_t idx = (cl * actions.size() + ac) * n_reward_kinds() + kind_index(kind);
  if (cl >= clusters.size() || ac >= actions.size() || idx >= true_rewards.size())
    fail("true_reward index out of range");
  return true_rewards[idx];
}

int ScenarioConfig::default_action() const {
  int found = -1;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!actions[i].is_default) continue;
    if (found >= 0) fail("actions: more than one default action");
    found = static_cast<int>(i);
  }
  if (found < 0) fail("actions: no default action designated");
  return found;
}

int ScenarioConfig::clinician_count() const {
  int n = 0;
  for (const auto& g : population) n += g.count;
  return n;
}

void ScenarioConfig::validate() const {
  if (actions.empty()) fail("actions: empty catalog");
  if (clusters.empty()) fail("clusters: empty");
  if (contracts.empty()) fail("contracts: empty");
  if (population.empty()) fail("population: empty");
  if (domains.empty()) fail("domains: empty");
  if (horizon_steps < 0) fail("horizon_steps must be >= 0");
  if (interactions_per_step <= 0) fail("interactions_per_step must be > 0");
  if (outcome_lag < 0) fail("outcome_lag must be >= 0");
  (void)default_action();

  const std::size_t state_dim = clusters.front().features.size();
  const std::size_t action_dim = actions.front().features.size();
  const std::size_t contract_dim = contracts.front().features.size();
  for (const auto& c : clusters)
    if (c.features.size() != state_dim) fail("clusters: inconsistent feature dimension");
  for (const auto& a : actions)
    if (a.features.size() != action_dim) fail("actions: inconsistent feature dimension");
  for (const auto& c : contracts)
    if (c.features.size() != contract_dim) fail("contracts: inconsistent feature dimension");
  for (const auto& c : clusters)
    if (c.domain < 0 || c.domain >= static_cast<int>(domains.size()))
      fail("clusters: domain index out of range");

  if (true_rewards.size() != clusters.size() * actions.size() * n_reward_kinds())
    fail("true_rewards: wrong table size");
  for (double r : true_rewards)
    if (!std::isfinite(r)) fail("true_rewards: non-finite entry");

  check_unit(observability_rate, "observability_rate");
  check_unit(low_exec_escape_rate, "low_exec_escape_rate");
  check_unit(modify_fraction, "modify_fraction");
  if (!(modify_radius >= 0.0)) fail("modify_radius must be >= 0");
  check_unit(reject_alt_observed_rate, "reject_alt_observed_rate");
  check_unit(workflow_noise_rate, "workflow_noise_rate");
  check_unit(reason_emission_rate, "reason_emission_rate");
  check_unit(scaffolding_level, "scaffolding_level");
  if (!(evolve_eta >= 0.0 && evolve_eta < 1.0)) fail("evolve_eta must lie in [0,1)");

  for (std::size_t gi = 0; gi < population.size(); ++gi) {
    const auto& g = population[gi];
    const auto& a = g.archetype;
    const std::string where = "population[" + std::to_string(gi) + "]";
    if (g.count < 0) fail(where + ".count must be >= 0");
    if (!(a.exec >= 0 && a.exec <= 1)) fail(where + ".archetype.exec must lie in [0,1]");
    if (!(a.align >= 0 && a.align <= 1)) fail(where + ".archetype.align must lie in [0,1]");
    if (a.accept_floor.has_value() != (a.name == ArchetypeName::AUTOMATION_BIASED))
      fail(where + ".archetype.accept_floor is for AUTOMATION_BIASED archetypes only");
    if (a.accept_floor && !(*a.accept_floor >= 0 && *a.accept_floor <= 1))
      fail(where + ".archetype.accept_floor must lie in [0,1]");
    if (a.default_action_on_low_exec < 0 ||
        a.default_action_on_low_exec >= static_cast<int>(actions.size()))
      fail(where + ".archetype.default_action_on_low_exec out of catalog range");
    if (a.forced_override_prob && !(*a.forced_override_prob >= 0 && *a.forced_override_prob <= 1))
      fail(where + ".archetype.forced_override_prob must lie in [0,1]");
    if (!a.action_bias.empty() && a.action_bias.size() != actions.size())
      fail(where + ".archetype.action_bias must match the catalog size");
    if (g.proxy_score > 1.0) fail(where + ".proxy_score must lie in [0,1] or be negative");
  }
  if (clinician_count() == 0) fail("population: zero clinicians");

  if (!(training.beta0 > 0)) fail("training.beta0 must be > 0");
  if (training.beta1 < 0) fail("training.beta1 must be >= 0");
  if (training.ridge_lambda < 0) fail("training.ridge_lambda must be >= 0");
  if (training.max_rounds < 0) fail("training.max_rounds must be >= 0");
  check_unit(training.heldout_fraction, "training.heldout_fraction");
  if (!(behavior_beta0 > 0)) fail("behavior_beta0 must be > 0");
  if (behavior_beta1 < 0) fail("behavior_beta1 must be >= 0");

  if (!(monitors.kappa_low_cut > 0 && monitors.kappa_high_cut < 1 &&
        monitors.kappa_low_cut < monitors.kappa_high_cut))
    fail("monitors: kappa band cuts must satisfy 0 < low < high < 1");
  if (monitors.window_steps <= 0) fail("monitors.window_steps must be > 0");
}

ScenarioConfig canonical_scenario(const std::string& name) {
  ScenarioConfig cfg;
  if (name == "fig1") cfg = fig1_scenario();
  else if (name == "hetero") cfg = hetero_scenario();
  else if (name == "homog") cfg = homog_scenario();
  else if (name == "flywheel") cfg = flywheel_scenario();
  else if (name == "stacking") cfg = stacking_scenario();
  else if (name == "amplification") cfg = amplification_scenario();
  else if (name == "rates") cfg = rates_scenario();
  else fail("unknown scenario name: " + name);
  cfg.validate();
  return cfg;
}

std::vector<std::string> scenario_names() {
  return {"fig1", "hetero", "homog", "flywheel", "stacking", "amplification", "rates"};
}

}  // namespace olab
