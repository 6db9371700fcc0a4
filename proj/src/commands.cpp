#include "olab/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <vector>

#include "json.hpp"

#include "olab/classifier.hpp"
#include "olab/config_file.hpp"
#include "olab/csv.hpp"
#include "olab/dual_learner.hpp"
#include "olab/manifest.hpp"
#include "olab/monitors.hpp"
#include "olab/scenario.hpp"
#include "olab/sha256.hpp"
#include "olab/world_sim.hpp"

namespace olab {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

constexpr const char* kToolVersion = "override_lab 0.1.0";

const char* type_name(OverrideType t) {
  switch (t) {
    case OverrideType::CONTEXT: return "context";
    case OverrideType::JUDGMENT: return "judgment";
    case OverrideType::WORKFLOW: return "workflow";
    case OverrideType::PROTOCOL: return "protocol";
    case OverrideType::CAPABILITY: return "capability";
  }
  return "?";
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json_file(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json load_json_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return Json::parse(buf.str());
}

// ---------------------------------------------------------------------------
// Dataset assembly: simulator output or a directory written by cmd_simulate.

struct Dataset {
  ScenarioConfig config;
  std::vector<InteractionRecord> records;
  std::vector<int> clusters;  // per record; learner-visible via states.csv

  bool has_truth = false;
  std::vector<double> exec_quality;   // realized quality of the executed arm
  std::vector<double> cf_quality;     // realized quality of the other arm
  std::vector<int> cf_action;
  std::vector<double> kappa_at_decision;
  std::vector<std::vector<double>> kappa0;       // [clinician][domain], pre-run
  std::vector<std::vector<double>> kappa_final;  // [clinician][domain], post-run
};

FeatureMapSpec feature_spec_of(const Dataset& ds) {
  FeatureMapSpec spec;
  spec.state_dim = ds.records.empty() ? ds.config.clusters.front().features.size()
                                      : ds.records.front().state.features.size();
  spec.action_dim = ds.config.actions.front().features.size();
  spec.contract_dim = ds.config.contracts.front().features.size();
  return spec;
}

void write_ground_truth(const fs::path& path, const SimResult& sim) {
  const GroundTruth& t = sim.truth;
  Json j;
  j["n_clusters"] = t.n_clusters;
  j["n_actions"] = t.n_actions;
  j["n_domains"] = t.n_domains;
  j["n_clinicians"] = t.n_clinicians;
  j["horizon"] = t.horizon;

  Json cluster = Json::array(), exec_q = Json::array(), cf_q = Json::array(),
       cf_a = Json::array(), kap = Json::array();
  for (const auto& s : t.per_record) {
    cluster.push_back(s.cluster);
    exec_q.push_back(s.executed_quality);
    cf_q.push_back(s.counterfactual_quality);
    cf_a.push_back(s.counterfactual_action);
    kap.push_back(s.kappa_at_decision);
  }
  j["cluster"] = std::move(cluster);
  j["executed_quality"] = std::move(exec_q);
  j["counterfactual_quality"] = std::move(cf_q);
  j["counterfactual_action"] = std::move(cf_a);
  j["kappa_at_decision"] = std::move(kap);

  Json k0 = Json::array(), kf = Json::array();
  for (std::size_t k = 0; k < t.n_clinicians; ++k) {
    Json r0 = Json::array(), rf = Json::array();
    for (std::size_t d = 0; d < t.n_domains; ++d) {
      r0.push_back(t.kappa(k, d, 0));
      rf.push_back(t.kappa(k, d, t.horizon));
    }
    k0.push_back(std::move(r0));
    kf.push_back(std::move(rf));
  }
  j["kappa0"] = std::move(k0);
  j["kappa_final"] = std::move(kf);
  j["kappa_traj"] = t.kappa_traj;  // clinician-major, horizon+1 points per domain
  write_json_file(path, j);
}

Dataset dataset_from_sim(const ScenarioConfig& config, SimResult&& sim) {
  Dataset ds;
  ds.config = config;
  ds.clusters = sim.truth.clusters();
  ds.has_truth = true;
  ds.exec_quality.reserve(sim.truth.per_record.size());
  for (const auto& s : sim.truth.per_record) {
    ds.exec_quality.push_back(s.executed_quality);
    ds.cf_quality.push_back(s.counterfactual_quality);
    ds.cf_action.push_back(s.counterfactual_action);
    ds.kappa_at_decision.push_back(s.kappa_at_decision);
  }
  const auto& t = sim.truth;
  ds.kappa0.assign(t.n_clinicians, std::vector<double>(t.n_domains, 0.0));
  ds.kappa_final = ds.kappa0;
  for (std::size_t k = 0; k < t.n_clinicians; ++k)
    for (std::size_t d = 0; d < t.n_domains; ++d) {
      ds.kappa0[k][d] = t.kappa(k, d, 0);
      ds.kappa_final[k][d] = t.kappa(k, d, t.horizon);
    }
  ds.records = std::move(sim.records);
  return ds;
}

Dataset load_dataset(const fs::path& dir, const std::optional<ScenarioConfig>& override_config) {
  Dataset ds;
  ds.config = override_config ? *override_config : load_config(dir / "config.json");
  ds.config.validate();
  ds.records = read_records_csv(dir / "records.csv", ds.config);

  const StateRows states = read_states_csv(dir / "states.csv");
  if (states.features.size() != ds.records.size())
    throw std::runtime_error("states.csv rows (" + std::to_string(states.features.size()) +
                             ") do not match records.csv rows (" +
                             std::to_string(ds.records.size()) + ")");
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    ds.records[i].state.features = states.features[i];
    if (states.clusters[i] < 0 ||
        states.clusters[i] >= static_cast<int>(ds.config.clusters.size()))
      throw std::runtime_error("states.csv row " + std::to_string(i + 2) +
                               ": cluster index out of range");
  }
  ds.clusters = states.clusters;

  const fs::path gt = dir / "ground_truth.json";
  if (fs::exists(gt)) {
    const Json j = load_json_file(gt);
    ds.exec_quality = j.at("executed_quality").get<std::vector<double>>();
    ds.cf_quality = j.at("counterfactual_quality").get<std::vector<double>>();
    ds.cf_action = j.at("counterfactual_action").get<std::vector<int>>();
    ds.kappa_at_decision = j.at("kappa_at_decision").get<std::vector<double>>();
    ds.kappa0 = j.at("kappa0").get<std::vector<std::vector<double>>>();
    ds.kappa_final = j.at("kappa_final").get<std::vector<std::vector<double>>>();
    if (ds.exec_quality.size() != ds.records.size())
      throw std::runtime_error("ground_truth.json does not align with records.csv");
    ds.has_truth = true;
  }
  return ds;
}

std::vector<ClinicianProxy> proxies_from_config(const ScenarioConfig& c) {
  std::vector<ClinicianProxy> out;
  int id = 0;
  for (const auto& g : c.population)
    for (int i = 0; i < g.count; ++i) out.push_back({id++, g.proxy_score});
  return out;
}

std::vector<int> domain_ids(const ScenarioConfig& c) {
  std::vector<int> out(c.domains.size());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = static_cast<int>(d);
  return out;
}

// ---------------------------------------------------------------------------
// Training pipeline shared by cmd_train and cmd_reproduce.

// Held-out records for outcome anchoring: every stride-th outcome-observed
// record, stride = floor(1 / heldout_fraction); everything else trains.
struct RecordSplit {
  std::vector<InteractionRecord> train, heldout;
  std::vector<int> train_clusters, heldout_clusters;
  std::vector<std::size_t> heldout_index;  // original record index
};

RecordSplit split_records(const Dataset& ds, double fraction) {
  RecordSplit s;
  const std::size_t stride =
      fraction > 0.0 ? std::max<std::size_t>(1, static_cast<std::size_t>(1.0 / fraction)) : 0;
  std::size_t labelled_seen = 0;
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    const bool labelled = r.outcome && r.outcome->observed && r.outcome->quality;
    if (labelled && stride > 0 && (++labelled_seen % stride) == 0) {
      s.heldout.push_back(r);
      s.heldout_clusters.push_back(ds.clusters[i]);
      s.heldout_index.push_back(i);
    } else {
      s.train.push_back(r);
      s.train_clusters.push_back(ds.clusters[i]);
    }
  }
  return s;
}

CapabilityMap kappa_map_from_truth(const Dataset& ds, double strength) {
  CapabilityMap m;
  for (std::size_t k = 0; k < ds.kappa0.size(); ++k)
    for (std::size_t d = 0; d < ds.kappa0[k].size(); ++d) {
      const double mean = std::clamp(ds.kappa0[k][d], 1e-3, 1.0 - 1e-3);
      CapabilityEstimate est;
      est.clinician_id = static_cast<int>(k);
      est.domain_id = static_cast<int>(d);
      est.alpha = mean * strength;
      est.beta = (1.0 - mean) * strength;
      m[{est.clinician_id, est.domain_id}] = est;
    }
  return m;
}

struct TrainOutput {
  Weighting weighting = Weighting::KAPPA;
  TrainingConfig training;
  TrainState state;
  std::vector<std::vector<RoundTrace>> phases;  // [0] first fit, [1] after reinit

  std::size_t n_train_pairs = 0;
  std::size_t dropped_rejects = 0;
  std::size_t zero_weight_pairs = 0;

  bool anchor_computed = false;
  bool anchor_reinit = false;
  std::string anchor_skip_reason;
  AnchorReport anchor;
  PairSet heldout_pairs;                    // outcome labels attached
  std::vector<std::size_t> heldout_index;   // record index per held-out record
};

TrainOutput run_training(const Dataset& ds, Weighting weighting, std::optional<int> rounds) {
  if (ds.records.empty()) throw std::runtime_error("dataset has no records to train on");

  TrainOutput out;
  out.weighting = weighting;
  TrainingConfig t = ds.config.training;
  if (rounds) t.max_rounds = *rounds;
  if (weighting == Weighting::NAIVE) {
    // Uniform weighting: every pair counts the same, no capability machinery.
    t.beta1 = 0.0;
    t.use_class_weights = false;
    t.use_true_kappa = false;
  }
  out.training = t;

  const RecordSplit split = split_records(ds, t.heldout_fraction);
  out.heldout_index = split.heldout_index;
  const CapabilityMap priors = cold_start_priors(proxies_from_config(ds.config),
                                                 domain_ids(ds.config), t);

  const auto fit_fixed = [&](const CapabilityMap& km) {
    const PairSet ps = build_pairs(split.train, split.train_clusters, ds.config, km, t);
    const MStepResult m = m_step(ps.pairs, RewardModel::zeros(feature_spec_of(ds)), t);
    TrainState st;
    st.model = m.model;
    st.kappa_estimates = km;
    st.rounds_completed = 1;
    st.converged = true;
    double theta_delta = 0.0;
    for (double v : m.model.theta) theta_delta = std::max(theta_delta, std::abs(v));
    st.trace.push_back({1, m.loglik, theta_delta, 0.0, m.iterations});
    out.n_train_pairs = ps.pairs.size();
    out.dropped_rejects = ps.dropped_rejects;
    out.zero_weight_pairs = ps.zero_weight_pairs;
    return st;
  };

  const bool fixed_kappa = weighting == Weighting::NAIVE || t.use_true_kappa;

  if (t.max_rounds <= 0) {
    // Cold-start snapshot: priors and a zero model, nothing fitted.
    out.state.model = RewardModel::zeros(feature_spec_of(ds));
    out.state.kappa_estimates = priors;
    out.phases.push_back({});
    out.anchor_skip_reason = "rounds = 0, nothing fitted";
    return out;
  }

  if (weighting == Weighting::NAIVE) {
    out.state = fit_fixed(priors);
  } else if (t.use_true_kappa) {
    if (!ds.has_truth)
      throw std::runtime_error("true-kappa weighting needs ground_truth.json in the dataset");
    out.state = fit_fixed(kappa_map_from_truth(ds, t.prior_strength));
  } else {
    out.state = alternate(split.train, split.train_clusters, ds.config, priors, t);
    const PairSet ps =
        build_pairs(split.train, split.train_clusters, ds.config, out.state.kappa_estimates, t);
    out.n_train_pairs = ps.pairs.size();
    out.dropped_rejects = ps.dropped_rejects;
    out.zero_weight_pairs = ps.zero_weight_pairs;
  }
  out.phases.push_back(out.state.trace);

  const auto compute_anchor = [&](const TrainState& st) -> std::optional<AnchorReport> {
    if (!ds.has_truth) {
      out.anchor_skip_reason = "no ground-truth counterfactuals for outcome labels";
      return std::nullopt;
    }
    if (split.heldout.empty()) {
      out.anchor_skip_reason = "no outcome-labelled records to hold out";
      return std::nullopt;
    }
    PairSet hp = build_pairs(split.heldout, split.heldout_clusters, ds.config,
                             st.kappa_estimates, t);
    std::vector<double> ex(split.heldout.size()), cf(split.heldout.size());
    for (std::size_t i = 0; i < split.heldout.size(); ++i) {
      ex[i] = ds.exec_quality[split.heldout_index[i]];
      cf[i] = ds.cf_quality[split.heldout_index[i]];
    }
    attach_outcome_labels(hp, split.heldout, ex, cf);
    out.heldout_pairs = hp;
    try {
      return anchor_validate(st.model, hp.pairs, t);
    } catch (const std::runtime_error&) {
      out.anchor_skip_reason =
          "fewer than " + std::to_string(t.min_anchor_pairs) + " labelled held-out pairs";
      return std::nullopt;
    }
  };

  if (auto first = compute_anchor(out.state)) {
    out.anchor_computed = true;
    out.anchor = *first;
    if (!first->pass && !fixed_kappa) {
      // Anchor rejected the converged model: restart the alternation from
      // strengthened priors and re-validate.
      out.anchor_reinit = true;
      const CapabilityMap strong = strengthen_priors(priors, t.reinit_prior_factor);
      out.state = alternate(split.train, split.train_clusters, ds.config, strong, t);
      out.phases.push_back(out.state.trace);
      if (auto second = compute_anchor(out.state)) out.anchor = *second;
    }
  }
  return out;
}

Json margins_json(const Dataset& ds, const RewardModel& model) {
  Json out = Json::array();
  const int def = ds.config.default_action();
  const ClinicalAction def_action{def, ds.config.actions[def].features,
                                  ds.config.actions[def].complexity};
  for (std::size_t ci = 0; ci < ds.config.clusters.size(); ++ci) {
    PatientState s;
    s.patient_id = -1;
    s.domain_id = ds.config.clusters[ci].domain;
    s.features = ds.config.clusters[ci].features;
    for (std::size_t con = 0; con < ds.config.contracts.size(); ++con) {
      const auto& cs = ds.config.contracts[con];
      const ContractContext ctx{static_cast<int>(con), cs.kind, cs.features};
      for (std::size_t a = 0; a < ds.config.actions.size(); ++a) {
        if (static_cast<int>(a) == def) continue;
        const ClinicalAction act{static_cast<int>(a), ds.config.actions[a].features,
                                 ds.config.actions[a].complexity};
        Json row;
        row["cluster"] = ds.config.clusters[ci].id;
        row["contract"] = cs.id;
        row["action"] = ds.config.actions[a].id;
        row["margin_vs_default"] = model.margin(s, act, def_action, ctx);
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

RunManifest start_manifest(const ScenarioConfig& config, const std::string& command) {
  RunManifest man;
  man.tool_version = kToolVersion;
  man.command = command;
  man.resolved_config = serialize_config(config);
  man.config_digest = sha256_hex(man.resolved_config);
  man.seed = config.seed;
  man.started_utc = utc_now_iso8601();
  return man;
}

int write_train_artifacts(const fs::path& out_dir, const TrainOutput& tr, const Dataset& ds,
                          const std::string& command) {
  fs::create_directories(out_dir);
  RunManifest man = start_manifest(ds.config, command);

  {
    std::ostringstream csv;
    csv << "phase,round,loglik,theta_delta,kappa_delta,m_iterations\n";
    for (std::size_t p = 0; p < tr.phases.size(); ++p)
      for (const auto& row : tr.phases[p])
        csv << p << ',' << row.round << ',' << fmt(row.loglik) << ',' << fmt(row.theta_delta)
            << ',' << fmt(row.kappa_delta) << ',' << row.m_iterations << '\n';
    write_text(out_dir / "trace.csv", csv.str());
  }

  {
    std::ostringstream csv;
    csv << "clinician,domain,alpha,beta,mean" << (ds.has_truth ? ",kappa_true\n" : "\n");
    for (const auto& [key, est] : tr.state.kappa_estimates) {
      csv << key.first << ',' << key.second << ',' << fmt(est.alpha) << ',' << fmt(est.beta)
          << ',' << fmt(est.mean());
      if (ds.has_truth) csv << ',' << fmt(ds.kappa0[key.first][key.second]);
      csv << '\n';
    }
    write_text(out_dir / "kappa.csv", csv.str());
  }

  Json summary;
  summary["tool_version"] = kToolVersion;
  summary["scenario"] = ds.config.name;
  summary["weighting"] = tr.weighting == Weighting::NAIVE ? "naive" : "kappa";
  summary["use_true_kappa"] = tr.training.use_true_kappa;
  summary["rounds_completed"] = tr.state.rounds_completed;
  summary["converged"] = tr.state.converged;
  summary["oscillation"] = tr.state.oscillation;
  summary["non_identifiable"] = tr.state.non_identifiable;
  summary["final_kappa_spread"] = tr.state.final_kappa_spread;
  summary["loglik"] = tr.state.trace.empty() ? 0.0 : tr.state.trace.back().loglik;
  {
    Json pairs;
    pairs["train"] = tr.n_train_pairs;
    pairs["heldout"] = tr.heldout_pairs.pairs.size();
    pairs["dropped_rejects"] = tr.dropped_rejects;
    pairs["zero_weight"] = tr.zero_weight_pairs;
    summary["pairs"] = std::move(pairs);
  }
  {
    Json anchor;
    anchor["computed"] = tr.anchor_computed;
    if (tr.anchor_computed) {
      anchor["concordance"] = tr.anchor.concordance;
      anchor["threshold"] = tr.anchor.threshold;
      anchor["pass"] = tr.anchor.pass;
      anchor["pairs_used"] = tr.anchor.pairs_used;
    } else {
      anchor["skip_reason"] = tr.anchor_skip_reason;
    }
    anchor["reinit"] = tr.anchor_reinit;
    anchor["counterfactual_source"] = "simulator";
    summary["anchor"] = std::move(anchor);
  }
  summary["margins"] = margins_json(ds, tr.state.model);
  {
    Json kt = Json::array();
    for (const auto& [key, est] : tr.state.kappa_estimates) {
      Json row;
      row["clinician"] = key.first;
      row["domain"] = key.second;
      row["alpha"] = est.alpha;
      row["beta"] = est.beta;
      row["mean"] = est.mean();
      kt.push_back(std::move(row));
    }
    summary["kappa"] = std::move(kt);
  }
  summary["theta"] = tr.state.model.theta;
  write_json_file(out_dir / "summary.json", summary);

  man.add_file(out_dir, "trace.csv");
  man.add_file(out_dir, "kappa.csv");
  man.add_file(out_dir, "summary.json");
  man.finished_utc = utc_now_iso8601();
  write_manifest(man, out_dir / "manifest.json");

  // An anchor-rejected model is not a usable result.
  return tr.anchor_computed && !tr.anchor.pass ? kExitVerdictFail : kExitOk;
}

// ---------------------------------------------------------------------------
// Simulation and audit pipelines.

Dataset simulate_into(const ScenarioConfig& config, const fs::path& out_dir,
                      const std::string& command) {
  fs::create_directories(out_dir);
  RunManifest man = start_manifest(config, command);

  SimResult sim = generate_dataset(config);
  save_config(config, out_dir / "config.json");
  write_records_csv(out_dir / "records.csv", sim.records, config);
  write_states_csv(out_dir / "states.csv", sim.records, sim.truth.clusters());
  write_ground_truth(out_dir / "ground_truth.json", sim);

  man.add_file(out_dir, "config.json");
  man.add_file(out_dir, "records.csv");
  man.add_file(out_dir, "states.csv");
  man.add_file(out_dir, "ground_truth.json");
  man.finished_utc = utc_now_iso8601();
  write_manifest(man, out_dir / "manifest.json");
  return dataset_from_sim(config, std::move(sim));
}

std::map<std::pair<int, int>, double> kappa_means_from_truth(const Dataset& ds) {
  std::map<std::pair<int, int>, double> m;
  for (std::size_t k = 0; k < ds.kappa0.size(); ++k)
    for (std::size_t d = 0; d < ds.kappa0[k].size(); ++d)
      m[{static_cast<int>(k), static_cast<int>(d)}] = ds.kappa0[k][d];
  return m;
}

MonitorReport audit_into(const Dataset& ds, const std::map<std::pair<int, int>, double>& kappa,
                         const std::string& kappa_source,
                         const std::vector<std::vector<std::size_t>>& round_counts,
                         const fs::path& out_dir, const std::string& command) {
  fs::create_directories(out_dir);
  RunManifest man = start_manifest(ds.config, command);

  std::vector<SignalContext::ActionMeta> metas;
  for (const auto& a : ds.config.actions) metas.push_back({a.features, a.class_tag});
  std::map<int, double> kappa_by_clinician;
  {
    std::map<int, std::pair<double, int>> acc;
    for (const auto& [key, v] : kappa) {
      acc[key.first].first += v;
      acc[key.first].second += 1;
    }
    for (const auto& [k, sum] : acc) kappa_by_clinician[k] = sum.first / sum.second;
  }
  const RecordClassification cls =
      classify_records(ds.records, ds.clusters, metas, ds.config.classifier_params,
                       ds.config.type_weights, kappa_by_clinician,
                       ds.config.monitors.kappa_high_cut);

  const MonitorReport report =
      run_monitors(ds.records, ds.cf_quality, cls.posteriors, cls.posterior_record, kappa,
                   round_counts, ds.config);

  {
    std::ostringstream csv;
    csv << "band,domain,window,interactions,overrides,rate\n";
    for (const auto& s : report.rates.strata)
      csv << s.band << ',' << s.domain << ',' << s.window << ',' << s.interactions << ','
          << s.overrides << ',' << fmt(s.rate) << '\n';
    write_text(out_dir / "stratified_rates.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "domain,window,high_rate,low_rate,gap\n";
    for (const auto& g : report.rates.gaps)
      csv << g.domain << ',' << g.window << ',' << fmt(g.high_rate) << ',' << fmt(g.low_rate)
          << ',' << fmt(g.gap) << '\n';
    write_text(out_dir / "gaps.csv", csv.str());
  }
  {
    std::ostringstream csv;
    csv << "type,weight_mass,concordance,sufficient\n";
    for (const auto& row : report.concordance)
      csv << type_name(row.type) << ',' << fmt(row.weight_mass) << ',' << fmt(row.concordance)
          << ',' << (row.sufficient ? 1 : 0) << '\n';
    write_text(out_dir / "concordance.csv", csv.str());
  }

  Json j;
  j["tool_version"] = kToolVersion;
  j["scenario"] = ds.config.name;
  j["no_data"] = ds.records.empty();
  j["kappa_source"] = kappa_source;
  j["counterfactual_source"] = ds.has_truth ? "simulator" : "none";
  {
    Json flags = Json::array();
    for (const auto& f : report.automation_flags) {
      Json row;
      row["clinician"] = f.clinician_id;
      row["window"] = f.window;
      row["accept_rate"] = f.accept_rate;
      row["entropy_bits"] = f.entropy_bits;
      flags.push_back(std::move(row));
    }
    j["automation_flags"] = std::move(flags);
  }
  {
    Json sup;
    sup["rounds_logged"] = round_counts.size();
    Json actions = Json::array();
    for (const auto& s : report.suppression.suppressed) {
      Json row;
      row["action"] = ds.config.actions[s.action_id].id;
      row["round"] = s.round;
      row["surfacing"] = s.surfacing;
      actions.push_back(std::move(row));
    }
    sup["suppressed_actions"] = std::move(actions);
    Json probes = Json::array();
    for (const auto& p : report.suppression.probes) {
      Json row;
      row["round"] = p.round;
      row["state_index"] = p.state_index;
      row["action"] = ds.config.actions[p.action_id].id;
      probes.push_back(std::move(row));
    }
    sup["probes"] = std::move(probes);
    j["suppression"] = std::move(sup);
  }
  j["complexity_trend"] = report.complexity_trend;
  {
    Json obs;
    for (const auto& [d, rate] : report.observability_by_domain)
      obs[ds.config.domains[d]] = rate;
    j["observability_by_domain"] = std::move(obs);
  }
  {
    Json rows = Json::array();
    for (const auto& row : report.concordance) {
      Json r;
      r["type"] = type_name(row.type);
      r["weight_mass"] = row.weight_mass;
      r["concordance"] = row.concordance;
      r["sufficient"] = row.sufficient;
      rows.push_back(std::move(r));
    }
    j["concordance"] = std::move(rows);
  }
  write_json_file(out_dir / "monitor_report.json", j);

  man.add_file(out_dir, "stratified_rates.csv");
  man.add_file(out_dir, "gaps.csv");
  man.add_file(out_dir, "concordance.csv");
  man.add_file(out_dir, "monitor_report.json");
  man.finished_utc = utc_now_iso8601();
  write_manifest(man, out_dir / "manifest.json");
  return report;
}

// ---------------------------------------------------------------------------
// Reproductions.

struct Check {
  std::string name;
  bool pass = false;
  std::optional<double> value;
};

int finish_verdict(const fs::path& out_dir, const std::string& name,
                   const std::vector<Check>& checks) {
  bool all = true;
  Json j;
  j["reproduction"] = name;
  j["tool_version"] = kToolVersion;
  Json rows = Json::array();
  for (const auto& c : checks) {
    all = all && c.pass;
    Json row;
    row["check"] = c.name;
    row["pass"] = c.pass;
    if (c.value) row["value"] = *c.value;
    rows.push_back(std::move(row));
  }
  j["checks"] = std::move(rows);
  j["pass"] = all;
  write_json_file(out_dir / "verdict.json", j);

  // Digest inventory of every artifact except the (timestamped) manifests;
  // two runs of the same reproduction must produce identical digests.txt.
  std::vector<std::string> lines;
  for (auto it = fs::recursive_directory_iterator(out_dir);
       it != fs::recursive_directory_iterator(); ++it) {
    if (!it->is_regular_file()) continue;
    const std::string rel = fs::relative(it->path(), out_dir).generic_string();
    if (rel == "digests.txt" || it->path().filename() == "manifest.json") continue;
    lines.push_back(sha256_file(it->path()) + "  " + rel);
  }
  std::sort(lines.begin(), lines.end(),
            [](const std::string& a, const std::string& b) {
              return a.substr(64) < b.substr(64);  // order by path
            });
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(out_dir / "digests.txt", text);

  return all ? kExitOk : kExitVerdictFail;
}

// Margin of the guideline first-line action over the catalog default, at the
// first cluster's center under the first outcome-based contract.
double star_margin(const Dataset& ds, const RewardModel& model) {
  const auto& cfg = ds.config;
  int star = -1;
  for (std::size_t a = 0; a < cfg.actions.size(); ++a)
    if (cfg.actions[a].guideline_first_line) {
      star = static_cast<int>(a);
      break;
    }
  if (star < 0) throw std::runtime_error("no guideline first-line action in catalog");
  const int def = cfg.default_action();

  std::size_t con = 0;
  for (std::size_t i = 0; i < cfg.contracts.size(); ++i)
    if (cfg.contracts[i].kind == ContractKind::OUTCOME_BASED) {
      con = i;
      break;
    }
  PatientState s;
  s.patient_id = -1;
  s.domain_id = cfg.clusters[0].domain;
  s.features = cfg.clusters[0].features;
  const ContractContext ctx{static_cast<int>(con), cfg.contracts[con].kind,
                            cfg.contracts[con].features};
  const ClinicalAction sa{star, cfg.actions[star].features, cfg.actions[star].complexity};
  const ClinicalAction da{def, cfg.actions[def].features, cfg.actions[def].complexity};
  return model.margin(s, sa, da, ctx);
}

ScenarioConfig scenario_with_seed(const std::string& name, const RunOptions& opts,
                                  std::uint64_t shift = 0) {
  ScenarioConfig cfg = canonical_scenario(name);
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.seed += shift;
  return cfg;
}

int reproduce_fig1(const RunOptions& opts) {
  const ScenarioConfig cfg = scenario_with_seed("fig1", opts);
  const Dataset ds = simulate_into(cfg, opts.out_dir / "dataset", "reproduce fig1: simulate");

  const TrainOutput naive = run_training(ds, Weighting::NAIVE, opts.rounds);
  write_train_artifacts(opts.out_dir / "train_naive", naive, ds,
                        "reproduce fig1: train --weighting naive");
  const TrainOutput kappa = run_training(ds, Weighting::KAPPA, opts.rounds);
  write_train_artifacts(opts.out_dir / "train_kappa", kappa, ds,
                        "reproduce fig1: train --weighting kappa");
  audit_into(ds, kappa_means_from_truth(ds), "ground_truth", {}, opts.out_dir / "audit",
             "reproduce fig1: audit");

  const double m_naive = star_margin(ds, naive.state.model);
  const double m_kappa = star_margin(ds, kappa.state.model);
  return finish_verdict(opts.out_dir, "fig1",
                        {{"naive_margin_negative", m_naive < 0.0, m_naive},
                         {"kappa_margin_positive", m_kappa > 0.0, m_kappa}});
}

int reproduce_identifiability(const RunOptions& opts) {
  const ScenarioConfig hetero = scenario_with_seed("hetero", opts);
  const ScenarioConfig homog = scenario_with_seed("homog", opts, opts.seed ? 1 : 0);

  const Dataset dh = simulate_into(hetero, opts.out_dir / "hetero" / "dataset",
                                   "reproduce identifiability: simulate hetero");
  const TrainOutput th = run_training(dh, Weighting::KAPPA, opts.rounds);
  write_train_artifacts(opts.out_dir / "hetero" / "train", th, dh,
                        "reproduce identifiability: train hetero");

  const Dataset dm = simulate_into(homog, opts.out_dir / "homog" / "dataset",
                                   "reproduce identifiability: simulate homog");
  const TrainOutput tm = run_training(dm, Weighting::KAPPA, opts.rounds);
  write_train_artifacts(opts.out_dir / "homog" / "train", tm, dm,
                        "reproduce identifiability: train homog");

  std::vector<double> est, truth;
  for (const auto& [key, e] : th.state.kappa_estimates) {
    est.push_back(e.mean());
    truth.push_back(dh.kappa0[key.first][key.second]);
  }
  const double rho = spearman(est, truth);

  return finish_verdict(opts.out_dir, "identifiability",
                        {{"hetero_kappa_spearman_ge_0.8", rho >= 0.8, rho},
                         {"hetero_not_flagged", !th.state.non_identifiable,
                          th.state.final_kappa_spread},
                         {"homog_flag_fires", tm.state.non_identifiable,
                          tm.state.final_kappa_spread}});
}

int reproduce_flywheel(const RunOptions& opts) {
  const ScenarioConfig cfg = scenario_with_seed("flywheel", opts);
  const Dataset ds = simulate_into(cfg, opts.out_dir / "dataset",
                                   "reproduce flywheel: simulate");
  const TrainOutput tr = run_training(ds, Weighting::KAPPA, opts.rounds);
  write_train_artifacts(opts.out_dir / "train", tr, ds, "reproduce flywheel: train");

  // Strata keyed by pre-run kappa: cohorts stay fixed while rates move.
  const MonitorReport report =
      audit_into(ds, kappa_means_from_truth(ds), "ground_truth_initial", {},
                 opts.out_dir / "audit", "reproduce flywheel: audit");

  const int windows =
      (cfg.horizon_steps + cfg.monitors.window_steps - 1) / cfg.monitors.window_steps;
  const auto first = report.rates.gap(0, 0);
  const auto last = report.rates.gap(0, windows - 1);
  std::vector<Check> checks;
  checks.push_back({"first_quarter_gap_present", first.has_value(), first});
  checks.push_back({"final_quarter_gap_present", last.has_value(), last});
  const bool narrowed =
      first && last && std::abs(*last) < std::abs(*first);
  checks.push_back({"gap_narrowed", narrowed,
                    first && last ? std::optional<double>(std::abs(*first) - std::abs(*last))
                                  : std::nullopt});
  return finish_verdict(opts.out_dir, "flywheel", checks);
}

int reproduce_stacking(const RunOptions& opts) {
  const ScenarioConfig base = scenario_with_seed("stacking", opts);
  constexpr int kPolicyRounds = 3;

  std::vector<std::vector<std::size_t>> round_counts;
  RecommendPolicy policy;  // round 0: simulator's own truth-argmax

  for (int r = 0; r < kPolicyRounds; ++r) {
    ScenarioConfig cfg = base;
    cfg.seed = base.seed + static_cast<std::uint64_t>(r);
    const fs::path round_dir = opts.out_dir / ("round" + std::to_string(r));

    WorldSim sim(cfg);
    SimResult res = sim.run(policy);
    std::vector<std::size_t> counts(cfg.actions.size(), 0);
    for (const auto& rec : res.records) counts[rec.recommendation.action_id]++;
    round_counts.push_back(std::move(counts));

    Dataset ds = dataset_from_sim(cfg, std::move(res));
    {
      // Persist each round's dataset the same way cmd_simulate would.
      fs::create_directories(round_dir / "dataset");
      RunManifest man = start_manifest(cfg, "reproduce stacking: simulate round " +
                                                std::to_string(r));
      save_config(cfg, round_dir / "dataset" / "config.json");
      write_records_csv(round_dir / "dataset" / "records.csv", ds.records, cfg);
      write_states_csv(round_dir / "dataset" / "states.csv", ds.records, ds.clusters);
      man.add_file(round_dir / "dataset", "config.json");
      man.add_file(round_dir / "dataset", "records.csv");
      man.add_file(round_dir / "dataset", "states.csv");
      man.finished_utc = utc_now_iso8601();
      write_manifest(man, round_dir / "dataset" / "manifest.json");
    }

    TrainOutput tr = run_training(ds, Weighting::NAIVE, opts.rounds);
    write_train_artifacts(round_dir / "train", tr, ds,
                          "reproduce stacking: train round " + std::to_string(r));

    // Next round's recommender: argmax of the fitted reward model.
    const RewardModel model = tr.state.model;
    const ScenarioConfig actions_cfg = cfg;
    policy = [model, actions_cfg](const PatientState& s, int, const ContractContext& con) {
      int best = 0;
      double best_v = -1e300;
      for (std::size_t a = 0; a < actions_cfg.actions.size(); ++a) {
        const ClinicalAction act{static_cast<int>(a), actions_cfg.actions[a].features,
                                 actions_cfg.actions[a].complexity};
        const double v = model.value(s, act, con);
        if (v > best_v) {
          best_v = v;
          best = static_cast<int>(a);
        }
      }
      return best;
    };
  }

  std::vector<bool> guideline;
  for (const auto& a : base.actions) guideline.push_back(a.guideline_first_line);
  const SuppressionAudit audit = suppression_audit(round_counts, guideline,
                                                   base.monitors.surfacing_floor,
                                                   base.monitors.probe_rate);
  {
    Json j;
    j["rounds"] = kPolicyRounds;
    Json counts = Json::array();
    for (const auto& row : round_counts) counts.push_back(row);
    j["recommendation_counts"] = std::move(counts);
    Json sup = Json::array();
    for (const auto& s : audit.suppressed) {
      Json row;
      row["action"] = base.actions[s.action_id].id;
      row["round"] = s.round;
      row["surfacing"] = s.surfacing;
      sup.push_back(std::move(row));
    }
    j["suppressed_actions"] = std::move(sup);
    j["probe_slots"] = audit.probes.size();
    write_json_file(opts.out_dir / "suppression.json", j);
  }

  int star = -1;
  for (std::size_t a = 0; a < base.actions.size(); ++a)
    if (base.actions[a].guideline_first_line) star = static_cast<int>(a);
  bool suppressed = false;
  for (const auto& s : audit.suppressed) suppressed = suppressed || s.action_id == star;
  bool probed = false;
  for (const auto& p : audit.probes) probed = probed || p.action_id == star;

  return finish_verdict(opts.out_dir, "stacking",
                        {{"guideline_action_suppressed", suppressed, std::nullopt},
                         {"probe_schedule_covers_it", probed,
                          static_cast<double>(audit.probes.size())}});
}

int reproduce_amplification(const RunOptions& opts) {
  const ScenarioConfig cfg = scenario_with_seed("amplification", opts);
  const Dataset ds = simulate_into(cfg, opts.out_dir / "dataset",
                                   "reproduce amplification: simulate");
  const TrainOutput tr = run_training(ds, Weighting::KAPPA, opts.rounds);
  write_train_artifacts(opts.out_dir / "train", tr, ds, "reproduce amplification: train");

  // Probe: concordance of the ground-truth reward table's margins on the same
  // held-out pairs the fitted model was anchored on.
  std::vector<double> true_margins, labels;
  for (std::size_t j = 0; j < tr.heldout_pairs.pairs.size(); ++j) {
    const auto& p = tr.heldout_pairs.pairs[j];
    if (!p.outcome_label) continue;
    const std::size_t rec = tr.heldout_index[tr.heldout_pairs.source_record[j]];
    const int cluster = ds.clusters[rec];
    const double m = cfg.true_reward(cluster, p.preferred.action_id, p.contract.kind) -
                     cfg.true_reward(cluster, p.dispreferred.action_id, p.contract.kind);
    true_margins.push_back(m);
    labels.push_back(*p.outcome_label);
  }
  const double true_conc = spearman(true_margins, labels);

  std::vector<Check> checks;
  checks.push_back({"anchor_computed", tr.anchor_computed,
                    static_cast<double>(tr.anchor.pairs_used)});
  checks.push_back({"biased_model_fails_anchor", tr.anchor_computed && !tr.anchor.pass,
                    tr.anchor.concordance});
  checks.push_back({"true_reward_concordance_higher",
                    tr.anchor_computed && true_conc > tr.anchor.concordance, true_conc});
  return finish_verdict(opts.out_dir, "amplification", checks);
}

ScenarioConfig resolve_config(const RunOptions& opts) {
  if (opts.scenario && opts.config_path)
    throw std::runtime_error("pass either --scenario or --config, not both");
  ScenarioConfig cfg;
  if (opts.scenario) cfg = canonical_scenario(*opts.scenario);
  else if (opts.config_path) cfg = load_config(*opts.config_path);
  else throw std::runtime_error("a --scenario name or --config file is required");
  if (opts.seed) cfg.seed = *opts.seed;
  cfg.validate();
  return cfg;
}

std::optional<ScenarioConfig> optional_config(const RunOptions& opts) {
  if (!opts.scenario && !opts.config_path) return std::nullopt;
  return resolve_config(opts);
}

template <typename Body>
int guarded(Body&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace

std::filesystem::path default_out_dir() {
  if (const char* env = std::getenv("OVERRIDE_LAB_OUT")) return fs::path(env);
  return fs::path("out");
}

int cmd_simulate(const RunOptions& opts) {
  return guarded([&] {
    const ScenarioConfig cfg = resolve_config(opts);
    std::string cmd = "simulate";
    if (opts.scenario) cmd += " --scenario " + *opts.scenario;
    if (opts.config_path) cmd += " --config " + opts.config_path->string();
    cmd += " --seed " + std::to_string(cfg.seed);
    simulate_into(cfg, opts.out_dir, cmd);
    return kExitOk;
  });
}

int cmd_train(const RunOptions& opts) {
  return guarded([&] {
    const Dataset ds = load_dataset(opts.dataset_dir, optional_config(opts));
    const Weighting w = opts.weighting.value_or(Weighting::KAPPA);
    const TrainOutput tr = run_training(ds, w, opts.rounds);
    std::string cmd = "train " + opts.dataset_dir.string() + " --weighting " +
                      (w == Weighting::NAIVE ? std::string("naive") : std::string("kappa"));
    if (opts.rounds) cmd += " --rounds " + std::to_string(*opts.rounds);
    return write_train_artifacts(opts.out_dir, tr, ds, cmd);
  });
}

int cmd_audit(const RunOptions& opts) {
  return guarded([&] {
    const Dataset ds = load_dataset(opts.dataset_dir, optional_config(opts));

    std::map<std::pair<int, int>, double> kappa;
    std::string source;
    if (opts.train_dir) {
      const Json summary = load_json_file(*opts.train_dir / "summary.json");
      for (const auto& row : summary.at("kappa"))
        kappa[{row.at("clinician").get<int>(), row.at("domain").get<int>()}] =
            row.at("mean").get<double>();
      source = "train_summary";
    } else if (ds.has_truth) {
      kappa = kappa_means_from_truth(ds);
      source = "ground_truth";
    } else {
      for (const auto& r : ds.records)
        for (std::size_t d = 0; d < ds.config.domains.size(); ++d)
          kappa[{r.clinician_id, static_cast<int>(d)}] = ds.config.training.prior_mean;
      source = "prior_mean";
    }

    std::string cmd = "audit " + opts.dataset_dir.string();
    if (opts.train_dir) cmd += " --train " + opts.train_dir->string();
    audit_into(ds, kappa, source, {}, opts.out_dir, cmd);
    return kExitOk;
  });
}

int cmd_reproduce(const RunOptions& opts) {
  return guarded([&] {
    if (!opts.scenario) throw std::runtime_error("reproduce needs an experiment name");
    fs::create_directories(opts.out_dir);
    const std::string& name = *opts.scenario;
    if (name == "fig1") return reproduce_fig1(opts);
    if (name == "identifiability") return reproduce_identifiability(opts);
    if (name == "flywheel") return reproduce_flywheel(opts);
    if (name == "stacking") return reproduce_stacking(opts);
    if (name == "amplification") return reproduce_amplification(opts);
    throw std::runtime_error(
        "unknown reproduction '" + name +
        "'; expected fig1, identifiability, flywheel, stacking, or amplification");
  });
}

}  // namespace olab
