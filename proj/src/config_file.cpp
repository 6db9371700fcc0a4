#include "olab/config_file.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace olab {
namespace {

using Json = nlohmann::ordered_json;

// Wraps one JSON object; tracks which keys were consumed so leftovers can be
// reported as typos instead of silently ignored.
class Obj {
 public:
  Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_);
  }

  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& req(const std::string& key) {
    if (!j_.contains(key)) throw ConfigError("missing required key", sub(key));
    seen_.insert(key);
    return j_.at(key);
  }

  const Json* opt(const std::string& key) {
    if (!j_.contains(key)) return nullptr;
    seen_.insert(key);
    return &j_.at(key);
  }

  void get(const std::string& key, double& out) {
    if (const Json* v = opt(key)) out = as_double(*v, sub(key));
  }
  void get(const std::string& key, int& out) {
    if (const Json* v = opt(key)) out = as_int(*v, sub(key));
  }
  void get(const std::string& key, bool& out) {
    if (const Json* v = opt(key)) {
      if (!v->is_boolean()) throw ConfigError("expected a boolean", sub(key));
      out = v->get<bool>();
    }
  }
  void get(const std::string& key, std::string& out) {
    if (const Json* v = opt(key)) out = as_string(*v, sub(key));
  }
  void get(const std::string& key, Vec& out) {
    if (const Json* v = opt(key)) out = as_vec(*v, sub(key));
  }
  void get(const std::string& key, std::optional<double>& out) {
    if (const Json* v = opt(key)) out = as_double(*v, sub(key));
  }

  // Call after all expected keys were pulled; anything left is unknown.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        throw ConfigError("unknown key", sub(it.key()));
  }

  static double as_double(const Json& v, const std::string& path) {
    if (!v.is_number()) throw ConfigError("expected a number", path);
    return v.get<double>();
  }
  static int as_int(const Json& v, const std::string& path) {
    if (!v.is_number_integer()) throw ConfigError("expected an integer", path);
    return v.get<int>();
  }
  static std::string as_string(const Json& v, const std::string& path) {
    if (!v.is_string()) throw ConfigError("expected a string", path);
    return v.get<std::string>();
  }
  static Vec as_vec(const Json& v, const std::string& path) {
    if (!v.is_array()) throw ConfigError("expected an array of numbers", path);
    Vec out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      out.push_back(as_double(v[i], path + "[" + std::to_string(i) + "]"));
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string kind_name(ContractKind k) {
  switch (k) {
    case ContractKind::FFS: return "ffs";
    case ContractKind::OUTCOME_BASED: return "outcome_based";
    case ContractKind::CUSTOM: return "custom";
  }
  return "ffs";
}

ContractKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "ffs") return ContractKind::FFS;
  if (s == "outcome_based") return ContractKind::OUTCOME_BASED;
  if (s == "custom") return ContractKind::CUSTOM;
  throw ConfigError("unknown contract kind '" + s + "'", path);
}

std::string archetype_name(ArchetypeName n) {
  switch (n) {
    case ArchetypeName::EXPERT: return "expert";
    case ArchetypeName::HESITANT: return "hesitant";
    case ArchetypeName::AUTOMATION_BIASED: return "automation_biased";
    case ArchetypeName::CUSTOM: return "custom";
  }
  return "custom";
}

ArchetypeName parse_archetype_name(const std::string& s, const std::string& path) {
  if (s == "expert") return ArchetypeName::EXPERT;
  if (s == "hesitant") return ArchetypeName::HESITANT;
  if (s == "automation_biased") return ArchetypeName::AUTOMATION_BIASED;
  if (s == "custom") return ArchetypeName::CUSTOM;
  throw ConfigError("unknown archetype '" + s + "'", path);
}

std::string beta_form_name(BetaForm f) {
  return f == BetaForm::LINEAR ? "linear" : "sigmoid_bounded";
}

BetaForm parse_beta_form(const std::string& s, const std::string& path) {
  if (s == "linear") return BetaForm::LINEAR;
  if (s == "sigmoid_bounded") return BetaForm::SIGMOID_BOUNDED;
  throw ConfigError("unknown beta form '" + s + "'", path);
}

ClinicianArchetype parse_clinician(const Json& j, const std::string& path) {
  Obj o(j, path);
  ClinicianArchetype a;
  if (const Json* v = o.opt("name"))
    a.name = parse_archetype_name(Obj::as_string(*v, o.sub("name")), o.sub("name"));
  o.get("exec", a.exec);
  o.get("align", a.align);
  o.get("accept_floor", a.accept_floor);
  o.get("default_action_on_low_exec", a.default_action_on_low_exec);
  o.get("forced_override_prob", a.forced_override_prob);
  o.get("action_bias", a.action_bias);
  o.get("sees_private_info", a.sees_private_info);
  o.finish();
  return a;
}

Json dump_clinician(const ClinicianArchetype& a) {
  Json j;
  j["name"] = archetype_name(a.name);
  j["exec"] = a.exec;
  j["align"] = a.align;
  if (a.accept_floor) j["accept_floor"] = *a.accept_floor;
  j["default_action_on_low_exec"] = a.default_action_on_low_exec;
  if (a.forced_override_prob) j["forced_override_prob"] = *a.forced_override_prob;
  j["action_bias"] = a.action_bias;
  j["sees_private_info"] = a.sees_private_info;
  return j;
}

TrainingConfig parse_training(const Json& j, const std::string& path) {
  Obj o(j, path);
  TrainingConfig t;
  o.get("beta0", t.beta0);
  o.get("beta1", t.beta1);
  if (const Json* v = o.opt("beta_form"))
    t.beta_form = parse_beta_form(Obj::as_string(*v, o.sub("beta_form")), o.sub("beta_form"));
  o.get("ridge_lambda", t.ridge_lambda);
  o.get("m_max_iters", t.m_max_iters);
  o.get("m_tol_grad", t.m_tol_grad);
  o.get("prior_strength", t.prior_strength);
  o.get("prior_mean", t.prior_mean);
  o.get("proxy_gain", t.proxy_gain);
  o.get("prior_ceiling", t.prior_ceiling);
  o.get("max_rounds", t.max_rounds);
  o.get("tol_kappa", t.tol_kappa);
  o.get("tol_theta", t.tol_theta);
  o.get("heldout_fraction", t.heldout_fraction);
  o.get("anchor_threshold", t.anchor_threshold);
  o.get("min_anchor_pairs", t.min_anchor_pairs);
  o.get("reinit_prior_factor", t.reinit_prior_factor);
  o.get("homogeneity_spread", t.homogeneity_spread);
  o.get("use_class_weights", t.use_class_weights);
  o.get("soft_agreement", t.soft_agreement);
  o.get("use_true_kappa", t.use_true_kappa);
  o.finish();
  return t;
}

Json dump_training(const TrainingConfig& t) {
  Json j;
  j["beta0"] = t.beta0;
  j["beta1"] = t.beta1;
  j["beta_form"] = beta_form_name(t.beta_form);
  j["ridge_lambda"] = t.ridge_lambda;
  j["m_max_iters"] = t.m_max_iters;
  j["m_tol_grad"] = t.m_tol_grad;
  j["prior_strength"] = t.prior_strength;
  j["prior_mean"] = t.prior_mean;
  j["proxy_gain"] = t.proxy_gain;
  j["prior_ceiling"] = t.prior_ceiling;
  j["max_rounds"] = t.max_rounds;
  j["tol_kappa"] = t.tol_kappa;
  j["tol_theta"] = t.tol_theta;
  j["heldout_fraction"] = t.heldout_fraction;
  j["anchor_threshold"] = t.anchor_threshold;
  j["min_anchor_pairs"] = t.min_anchor_pairs;
  j["reinit_prior_factor"] = t.reinit_prior_factor;
  j["homogeneity_spread"] = t.homogeneity_spread;
  j["use_class_weights"] = t.use_class_weights;
  j["soft_agreement"] = t.soft_agreement;
  j["use_true_kappa"] = t.use_true_kappa;
  return j;
}

MonitorConfig parse_monitors(const Json& j, const std::string& path) {
  Obj o(j, path);
  MonitorConfig m;
  o.get("kappa_low_cut", m.kappa_low_cut);
  o.get("kappa_high_cut", m.kappa_high_cut);
  o.get("window_steps", m.window_steps);
  o.get("entropy_floor_bits", m.entropy_floor_bits);
  o.get("accept_rate_ceiling", m.accept_rate_ceiling);
  o.get("surfacing_floor", m.surfacing_floor);
  o.get("probe_rate", m.probe_rate);
  o.get("min_concordance_weight", m.min_concordance_weight);
  o.finish();
  return m;
}

Json dump_monitors(const MonitorConfig& m) {
  Json j;
  j["kappa_low_cut"] = m.kappa_low_cut;
  j["kappa_high_cut"] = m.kappa_high_cut;
  j["window_steps"] = m.window_steps;
  j["entropy_floor_bits"] = m.entropy_floor_bits;
  j["accept_rate_ceiling"] = m.accept_rate_ceiling;
  j["surfacing_floor"] = m.surfacing_floor;
  j["probe_rate"] = m.probe_rate;
  j["min_concordance_weight"] = m.min_concordance_weight;
  return j;
}

ClassifierParams parse_classifier(const Json& j, const std::string& path) {
  Obj o(j, path);
  ClassifierParams p = ClassifierParams::defaults();
  if (const Json* v = o.opt("weights")) {
    const std::string wp = o.sub("weights");
    if (!v->is_array() || v->size() != kNumOverrideTypes)
      throw ConfigError("expected " + std::to_string(kNumOverrideTypes) + " rows", wp);
    for (std::size_t r = 0; r < kNumOverrideTypes; ++r) {
      const std::string rp = wp + "[" + std::to_string(r) + "]";
      const Json& row = (*v)[r];
      if (!row.is_array() || row.size() != ClassifierParams::kNumSignals)
        throw ConfigError("expected " + std::to_string(ClassifierParams::kNumSignals) + " weights",
                          rp);
      for (std::size_t c = 0; c < ClassifierParams::kNumSignals; ++c)
        p.weights[r][c] = Obj::as_double(row[c], rp + "[" + std::to_string(c) + "]");
    }
  }
  o.get("reason_bonus", p.reason_bonus);
  o.finish();
  return p;
}

Json dump_classifier(const ClassifierParams& p) {
  Json j;
  Json rows = Json::array();
  for (const auto& row : p.weights) {
    Json r = Json::array();
    for (double w : row) r.push_back(w);
    rows.push_back(std::move(r));
  }
  j["weights"] = std::move(rows);
  j["reason_bonus"] = p.reason_bonus;
  return j;
}

std::array<double, kNumOverrideTypes> parse_type_row(const Json& v, const std::string& path) {
  if (!v.is_array() || v.size() != kNumOverrideTypes)
    throw ConfigError("expected " + std::to_string(kNumOverrideTypes) + " numbers", path);
  std::array<double, kNumOverrideTypes> out{};
  for (std::size_t i = 0; i < kNumOverrideTypes; ++i)
    out[i] = Obj::as_double(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

TypeWeightTable parse_type_weights(const Json& j, const std::string& path) {
  Obj o(j, path);
  TypeWeightTable t = TypeWeightTable::defaults();
  if (const Json* v = o.opt("reward")) t.reward = parse_type_row(*v, o.sub("reward"));
  if (const Json* v = o.opt("capability")) t.capability = parse_type_row(*v, o.sub("capability"));
  o.finish();
  return t;
}

Json dump_type_weights(const TypeWeightTable& t) {
  Json j;
  j["reward"] = std::vector<double>(t.reward.begin(), t.reward.end());
  j["capability"] = std::vector<double>(t.capability.begin(), t.capability.end());
  return j;
}

}  // namespace

ConfigError::ConfigError(const std::string& message, const std::string& field_path)
    : std::runtime_error(field_path + ": " + message), field_path_(field_path) {}

ScenarioConfig parse_config(const std::string& text, const std::string& origin) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what(), origin);
  }
  Obj o(root, "");

  ScenarioConfig c;
  const int schema = Obj::as_int(o.req("schema_version"), "schema_version");
  if (schema != 1)
    throw ConfigError("unsupported schema_version " + std::to_string(schema), "schema_version");
  c.schema_version = schema;
  c.name = Obj::as_string(o.req("name"), "name");
  {
    const Json& s = o.req("seed");
    if (!s.is_number_integer() && !s.is_number_unsigned())
      throw ConfigError("expected an integer", "seed");
    c.seed = s.get<std::uint64_t>();
  }

  o.get("horizon_steps", c.horizon_steps);
  o.get("interactions_per_step", c.interactions_per_step);
  o.get("outcome_lag", c.outcome_lag);
  o.get("observability_rate", c.observability_rate);
  o.get("state_noise_sd", c.state_noise_sd);

  if (const Json* v = o.opt("domains")) {
    if (!v->is_array()) throw ConfigError("expected an array of strings", "domains");
    c.domains.clear();
    for (std::size_t i = 0; i < v->size(); ++i)
      c.domains.push_back(Obj::as_string((*v)[i], "domains[" + std::to_string(i) + "]"));
  }

  {
    const Json& v = o.req("actions");
    if (!v.is_array()) throw ConfigError("expected an array", "actions");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = "actions[" + std::to_string(i) + "]";
      Obj ao(v[i], p);
      ActionSpec a;
      a.id = Obj::as_string(ao.req("id"), ao.sub("id"));
      ao.get("class_tag", a.class_tag);
      a.features = Obj::as_vec(ao.req("features"), ao.sub("features"));
      ao.get("complexity", a.complexity);
      ao.get("is_default", a.is_default);
      ao.get("guideline_first_line", a.guideline_first_line);
      ao.finish();
      c.actions.push_back(std::move(a));
    }
  }

  {
    const Json& v = o.req("clusters");
    if (!v.is_array()) throw ConfigError("expected an array", "clusters");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = "clusters[" + std::to_string(i) + "]";
      Obj co(v[i], p);
      ClusterSpec s;
      s.id = Obj::as_string(co.req("id"), co.sub("id"));
      co.get("domain", s.domain);
      s.features = Obj::as_vec(co.req("features"), co.sub("features"));
      co.finish();
      c.clusters.push_back(std::move(s));
    }
  }

  {
    const Json& v = o.req("contracts");
    if (!v.is_array()) throw ConfigError("expected an array", "contracts");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = "contracts[" + std::to_string(i) + "]";
      Obj co(v[i], p);
      ContractSpec s;
      s.id = Obj::as_string(co.req("id"), co.sub("id"));
      if (const Json* k = co.opt("kind"))
        s.kind = parse_kind(Obj::as_string(*k, co.sub("kind")), co.sub("kind"));
      s.features = Obj::as_vec(co.req("features"), co.sub("features"));
      co.finish();
      c.contracts.push_back(std::move(s));
    }
  }

  {
    // Nested [cluster][action][contract-kind]; flattened for storage.
    const Json& v = o.req("true_rewards");
    if (!v.is_array()) throw ConfigError("expected a nested array", "true_rewards");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string pi = "true_rewards[" + std::to_string(i) + "]";
      if (!v[i].is_array()) throw ConfigError("expected an array per cluster", pi);
      for (std::size_t a = 0; a < v[i].size(); ++a) {
        const std::string pa = pi + "[" + std::to_string(a) + "]";
        const Json& cell = v[i][a];
        if (!cell.is_array() || cell.size() != c.n_reward_kinds())
          throw ConfigError("expected " + std::to_string(c.n_reward_kinds()) +
                                " per-contract-kind rewards",
                            pa);
        for (std::size_t k = 0; k < cell.size(); ++k)
          c.true_rewards.push_back(
              Obj::as_double(cell[k], pa + "[" + std::to_string(k) + "]"));
      }
      if (v[i].size() != c.actions.size())
        throw ConfigError("reward row length must equal the action count", pi);
    }
    if (v.size() != c.clusters.size())
      throw ConfigError("reward rows must equal the cluster count", "true_rewards");
  }

  {
    const Json& v = o.req("population");
    if (!v.is_array()) throw ConfigError("expected an array", "population");
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string p = "population[" + std::to_string(i) + "]";
      Obj go(v[i], p);
      PopulationGroup g;
      g.archetype = parse_clinician(go.req("archetype"), go.sub("archetype"));
      go.get("count", g.count);
      go.get("jitter_sd", g.jitter_sd);
      go.get("proxy_score", g.proxy_score);
      go.finish();
      c.population.push_back(std::move(g));
    }
  }

  o.get("behavior_beta0", c.behavior_beta0);
  o.get("behavior_beta1", c.behavior_beta1);
  o.get("low_exec_threshold", c.low_exec_threshold);
  o.get("low_exec_escape_rate", c.low_exec_escape_rate);
  o.get("complexity_hard_cut", c.complexity_hard_cut);
  o.get("modify_fraction", c.modify_fraction);
  o.get("modify_radius", c.modify_radius);
  o.get("reject_alt_observed_rate", c.reject_alt_observed_rate);
  o.get("workflow_noise_rate", c.workflow_noise_rate);
  o.get("reason_emission_rate", c.reason_emission_rate);
  o.get("private_info_sd", c.private_info_sd);
  o.get("belief_noise_sd", c.belief_noise_sd);
  o.get("outcome_base", c.outcome_base);
  o.get("outcome_gain", c.outcome_gain);
  o.get("outcome_noise_sd", c.outcome_noise_sd);
  o.get("adverse_event_threshold", c.adverse_event_threshold);
  o.get("scaffolding_level", c.scaffolding_level);
  o.get("evolve_eta", c.evolve_eta);
  o.get("success_quality_threshold", c.success_quality_threshold);

  if (const Json* v = o.opt("training")) c.training = parse_training(*v, "training");
  if (const Json* v = o.opt("classifier")) c.classifier_params = parse_classifier(*v, "classifier");
  if (const Json* v = o.opt("type_weights"))
    c.type_weights = parse_type_weights(*v, "type_weights");
  if (const Json* v = o.opt("monitors")) c.monitors = parse_monitors(*v, "monitors");

  o.finish();
  return c;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

std::string serialize_config(const ScenarioConfig& c) {
  Json j;
  j["schema_version"] = c.schema_version;
  j["name"] = c.name;
  j["seed"] = c.seed;
  j["horizon_steps"] = c.horizon_steps;
  j["interactions_per_step"] = c.interactions_per_step;
  j["outcome_lag"] = c.outcome_lag;
  j["observability_rate"] = c.observability_rate;
  j["state_noise_sd"] = c.state_noise_sd;
  j["domains"] = c.domains;

  Json actions = Json::array();
  for (const auto& a : c.actions) {
    Json aj;
    aj["id"] = a.id;
    aj["class_tag"] = a.class_tag;
    aj["features"] = a.features;
    aj["complexity"] = a.complexity;
    aj["is_default"] = a.is_default;
    aj["guideline_first_line"] = a.guideline_first_line;
    actions.push_back(std::move(aj));
  }
  j["actions"] = std::move(actions);

  Json clusters = Json::array();
  for (const auto& s : c.clusters) {
    Json cj;
    cj["id"] = s.id;
    cj["domain"] = s.domain;
    cj["features"] = s.features;
    clusters.push_back(std::move(cj));
  }
  j["clusters"] = std::move(clusters);

  Json contracts = Json::array();
  for (const auto& s : c.contracts) {
    Json cj;
    cj["id"] = s.id;
    cj["kind"] = kind_name(s.kind);
    cj["features"] = s.features;
    contracts.push_back(std::move(cj));
  }
  j["contracts"] = std::move(contracts);

  Json rewards = Json::array();
  for (std::size_t i = 0; i < c.clusters.size(); ++i) {
    Json row = Json::array();
    for (std::size_t a = 0; a < c.actions.size(); ++a) {
      Json cell = Json::array();
      for (std::size_t k = 0; k < c.n_reward_kinds(); ++k)
        cell.push_back(c.true_rewards[(i * c.actions.size() + a) * c.n_reward_kinds() + k]);
      row.push_back(std::move(cell));
    }
    rewards.push_back(std::move(row));
  }
  j["true_rewards"] = std::move(rewards);

  Json population = Json::array();
  for (const auto& g : c.population) {
    Json gj;
    gj["archetype"] = dump_clinician(g.archetype);
    gj["count"] = g.count;
    gj["jitter_sd"] = g.jitter_sd;
    gj["proxy_score"] = g.proxy_score;
    population.push_back(std::move(gj));
  }
  j["population"] = std::move(population);

  j["behavior_beta0"] = c.behavior_beta0;
  j["behavior_beta1"] = c.behavior_beta1;
  j["low_exec_threshold"] = c.low_exec_threshold;
  j["low_exec_escape_rate"] = c.low_exec_escape_rate;
  j["complexity_hard_cut"] = c.complexity_hard_cut;
  j["modify_fraction"] = c.modify_fraction;
  j["modify_radius"] = c.modify_radius;
  j["reject_alt_observed_rate"] = c.reject_alt_observed_rate;
  j["workflow_noise_rate"] = c.workflow_noise_rate;
  j["reason_emission_rate"] = c.reason_emission_rate;
  j["private_info_sd"] = c.private_info_sd;
  j["belief_noise_sd"] = c.belief_noise_sd;
  j["outcome_base"] = c.outcome_base;
  j["outcome_gain"] = c.outcome_gain;
  j["outcome_noise_sd"] = c.outcome_noise_sd;
  j["adverse_event_threshold"] = c.adverse_event_threshold;
  j["scaffolding_level"] = c.scaffolding_level;
  j["evolve_eta"] = c.evolve_eta;
  j["success_quality_threshold"] = c.success_quality_threshold;
  j["training"] = dump_training(c.training);
  j["classifier"] = dump_classifier(c.classifier_params);
  j["type_weights"] = dump_type_weights(c.type_weights);
  j["monitors"] = dump_monitors(c.monitors);

  return j.dump(2) + "\n";
}

void save_config(const ScenarioConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open file for writing", path.string());
  out << serialize_config(config);
}

}  // namespace olab
