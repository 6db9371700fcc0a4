#include "olab/world_sim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "olab/preference.hpp"

namespace olab {
namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

constexpr std::uint64_t kPopulationStream = 1;
constexpr std::uint64_t kClinicianStreamBase = 1000;

}  // namespace

std::size_t GroundTruth::traj_index(std::size_t clinician, std::size_t domain,
                                    std::size_t t) const {
  return (clinician * n_domains + domain) * (horizon + 1) + t;
}

double GroundTruth::kappa(std::size_t clinician, std::size_t domain, std::size_t t) const {
  return kappa_traj.at(traj_index(clinician, domain, t));
}

std::vector<int> GroundTruth::clusters() const {
  std::vector<int> out;
  out.reserve(per_record.size());
  for (const auto& side : per_record) out.push_back(side.cluster);
  return out;
}

CapabilityProfile evolve_capability(const CapabilityProfile& profile, double scaffolding,
                                    bool executed_successfully, double eta) {
  if (!(eta > 0.0 && eta < 1.0))
    throw std::invalid_argument("evolve_capability: eta must lie in (0,1)");
  if (!(scaffolding >= 0.0 && scaffolding <= 1.0))
    throw std::invalid_argument("evolve_capability: scaffolding must lie in [0,1]");
  CapabilityProfile next = profile;
  const double gain = executed_successfully ? 1.0 : 0.0;
  next.kappa = clamp01(profile.kappa + eta * scaffolding * gain * (1.0 - profile.kappa));
  if (profile.ground_truth_parts) {
    // Spread the kappa gain across both components, capping each at 1 so the
    // product stays exactly kappa.
    double exec = profile.ground_truth_parts->first;
    double align = profile.ground_truth_parts->second;
    const double old = exec * align;
    if (old > 0.0 && next.kappa > 0.0) {
      const double scale = std::sqrt(next.kappa / old);
      exec = std::min(1.0, exec * scale);
      align = next.kappa / exec;
      if (align > 1.0) {
        align = 1.0;
        exec = next.kappa;
      }
    }
    next.ground_truth_parts = {exec, align};
  }
  next.time_index = profile.time_index + 1;
  return next;
}

WorldSim::WorldSim(const ScenarioConfig& config) : cfg_(config) {
  cfg_.validate();
  default_action_ = cfg_.default_action();
  reward_min_ = *std::min_element(cfg_.true_rewards.begin(), cfg_.true_rewards.end());
  reward_max_ = *std::max_element(cfg_.true_rewards.begin(), cfg_.true_rewards.end());
  Rng rng(cfg_.seed);
  make_population(rng);
}

void WorldSim::make_population(Rng& rng) {
  Rng pop = rng.substream(kPopulationStream);
  const std::size_t n_domains = cfg_.domains.size();
  int id = 0;
  for (const auto& g : cfg_.population) {
    for (int i = 0; i < g.count; ++i) {
      ClinicianState c;
      c.clinician_id = id++;
      c.archetype = g.archetype;
      c.proxy_score = g.proxy_score;
      c.exec.resize(n_domains);
      c.align.resize(n_domains);
      for (std::size_t d = 0; d < n_domains; ++d) {
        c.exec[d] = std::clamp(g.archetype.exec + g.jitter_sd * pop.normal(), 0.01, 1.0);
        c.align[d] = std::clamp(g.archetype.align + g.jitter_sd * pop.normal(), 0.01, 1.0);
      }
      clinicians_.push_back(std::move(c));
    }
  }
  if (clinicians_.empty()) throw std::invalid_argument("make_population: empty population");
}

double WorldSim::normalized_reward(double raw) const {
  const double span = reward_max_ - reward_min_;
  if (span <= 0.0) return 0.5;
  return (raw - reward_min_) / span;
}

int WorldSim::recommend(int cluster, ContractKind kind) const {
  int best = 0;
  double best_r = -1e300;
  for (std::size_t a = 0; a < cfg_.actions.size(); ++a) {
    const double r = cfg_.true_reward(cluster, a, kind);
    if (r > best_r) {
      best_r = r;
      best = static_cast<int>(a);
    }
  }
  return best;
}

double WorldSim::believed_reward(const ClinicianState& clin, std::size_t domain, int cluster,
                                 int action, ContractKind kind, const Vec& case_effects,
                                 Rng& rng) const {
  double r = cfg_.true_reward(cluster, action, kind);
  if (!clin.archetype.action_bias.empty()) r += clin.archetype.action_bias[action];
  r += (1.0 - clin.align[domain]) * cfg_.belief_noise_sd * rng.normal();
  if (clin.archetype.sees_private_info && action < static_cast<int>(case_effects.size()))
    r += case_effects[action];
  return r;
}

double WorldSim::outcome_quality(int cluster, int action, ContractKind kind, double case_effect,
                                 Rng& rng) const {
  const double shifted = cfg_.true_reward(cluster, action, kind) + case_effect;
  return clamp01(cfg_.outcome_base + cfg_.outcome_gain * normalized_reward(shifted) +
                 cfg_.outcome_noise_sd * rng.normal());
}

Decision WorldSim::decide(const ClinicianState& clin, std::size_t domain, int cluster,
                          int rec_action, ContractKind kind, const Vec& case_effects,
                          Rng& rng) const {
  const auto& arch = clin.archetype;
  const auto make_reject = [&](std::optional<int> alt, std::optional<ReasonCode> reason,
                               bool always_reason = false) {
    Decision d;
    d.kind = DecisionKind::REJECT;
    if (alt && *alt != rec_action) {
      d.alternative = ClinicalAction{*alt, cfg_.actions[*alt].features,
                                     cfg_.actions[*alt].complexity};
    }
    if (reason && (always_reason || rng.bernoulli(cfg_.reason_emission_rate)))
      d.reason = reason;
    return d;
  };

  // Pure workflow noise: decision replaced wholesale, reason always recorded.
  if (cfg_.workflow_noise_rate > 0.0 && rng.bernoulli(cfg_.workflow_noise_rate))
    return make_reject(std::nullopt, ReasonCode::NO_TIME, /*always_reason=*/true);

  // Habitual redirects fire before any merit evaluation.
  if (arch.forced_override_prob && rng.bernoulli(*arch.forced_override_prob)) {
    int best = -1;
    double best_r = -1e300;
    for (std::size_t a = 0; a < cfg_.actions.size(); ++a) {
      if (static_cast<int>(a) == rec_action) continue;
      const double r = believed_reward(clin, domain, cluster, static_cast<int>(a), kind,
                                       case_effects, rng);
      if (r > best_r) {
        best_r = r;
        best = static_cast<int>(a);
      }
    }
    return make_reject(best, ReasonCode::PROTOCOL);
  }

  bool accepted;
  if (arch.name == ArchetypeName::AUTOMATION_BIASED && arch.accept_floor) {
    accepted = rng.bernoulli(*arch.accept_floor);
  } else {
    // Capability-driven escape hatch on demanding recommendations.
    if (clin.exec[domain] < cfg_.low_exec_threshold &&
        cfg_.actions[rec_action].complexity >= cfg_.complexity_hard_cut &&
        rng.bernoulli(cfg_.low_exec_escape_rate))
      return make_reject(arch.default_action_on_low_exec, ReasonCode::NOT_COMFORTABLE);

    const double margin = cfg_.true_reward(cluster, rec_action, kind) -
                          cfg_.true_reward(cluster, default_action_, kind);
    const double beta =
        BetaSchedule::beta_of_kappa(clin.kappa(domain), cfg_.behavior_beta0, cfg_.behavior_beta1,
                                    BetaForm::LINEAR);
    accepted = rng.bernoulli(logistic(beta * margin));
  }
  if (accepted) return Decision{};  // ACCEPT

  // Override: pick the believed-best alternative, full catalog for rejects,
  // a proximity ball around the recommendation for modifies.
  std::vector<double> believed(cfg_.actions.size());
  for (std::size_t a = 0; a < cfg_.actions.size(); ++a)
    believed[a] = believed_reward(clin, domain, cluster, static_cast<int>(a), kind, case_effects,
                                  rng);

  const bool try_modify = rng.bernoulli(cfg_.modify_fraction);
  if (try_modify) {
    int best = -1;
    double best_r = -1e300;
    const Vec& rec_psi = cfg_.actions[rec_action].features;
    for (std::size_t a = 0; a < cfg_.actions.size(); ++a) {
      if (static_cast<int>(a) == rec_action) continue;
      double dist = 0.0;
      for (std::size_t j = 0; j < rec_psi.size(); ++j) {
        const double dj = cfg_.actions[a].features[j] - rec_psi[j];
        dist += dj * dj;
      }
      if (std::sqrt(dist) > cfg_.modify_radius) continue;
      if (believed[a] > best_r) {
        best_r = believed[a];
        best = static_cast<int>(a);
      }
    }
    if (best >= 0) {
      Decision d;
      d.kind = DecisionKind::MODIFY;
      d.alternative =
          ClinicalAction{best, cfg_.actions[best].features, cfg_.actions[best].complexity};
      if (rng.bernoulli(cfg_.reason_emission_rate)) d.reason = ReasonCode::OTHER;
      return d;
    }
  }

  int best = rec_action;
  double best_r = believed[rec_action];
  for (std::size_t a = 0; a < cfg_.actions.size(); ++a) {
    if (believed[a] > best_r) {
      best_r = believed[a];
      best = static_cast<int>(a);
    }
  }
  if (best == rec_action) {
    // Disagrees but has no better idea: bare reject, nothing executed in place.
    return make_reject(std::nullopt, ReasonCode::OTHER);
  }
  return make_reject(best, ReasonCode::OTHER);
}

SimResult WorldSim::run(const RecommendPolicy& policy) {
  SimResult out;
  const std::size_t n_dom = cfg_.domains.size();
  const std::size_t n_clin = clinicians_.size();
  const std::size_t horizon = static_cast<std::size_t>(cfg_.horizon_steps);

  GroundTruth& truth = out.truth;
  truth.n_clusters = cfg_.clusters.size();
  truth.n_actions = cfg_.actions.size();
  truth.n_domains = n_dom;
  truth.n_clinicians = n_clin;
  truth.horizon = horizon;
  truth.kappa_traj.assign(n_clin * n_dom * (horizon + 1), 0.0);
  truth.exec_traj.assign(truth.kappa_traj.size(), 0.0);
  truth.align_traj.assign(truth.kappa_traj.size(), 0.0);

  Rng master(cfg_.seed);
  std::vector<Rng> streams;
  streams.reserve(n_clin);
  for (std::size_t k = 0; k < n_clin; ++k)
    streams.push_back(master.substream(kClinicianStreamBase + k));

  const std::size_t per_step = static_cast<std::size_t>(cfg_.interactions_per_step);
  out.records.reserve(n_clin * horizon * per_step);
  truth.per_record.reserve(n_clin * horizon * per_step);

  int patient_counter = 0;
  const bool evolve_on = cfg_.evolve_eta > 0.0 && cfg_.scaffolding_level > 0.0;

  for (std::size_t t = 0; t < horizon + 1; ++t) {
    for (std::size_t k = 0; k < n_clin; ++k)
      for (std::size_t d = 0; d < n_dom; ++d) {
        const std::size_t idx = truth.traj_index(k, d, t);
        truth.kappa_traj[idx] = clinicians_[k].kappa(d);
        truth.exec_traj[idx] = clinicians_[k].exec[d];
        truth.align_traj[idx] = clinicians_[k].align[d];
      }
    if (t == horizon) break;

    for (std::size_t k = 0; k < n_clin; ++k) {
      ClinicianState& clin = clinicians_[k];
      Rng& rng = streams[k];
      for (std::size_t i = 0; i < per_step; ++i) {
        const int cluster = static_cast<int>(rng.uniform_index(cfg_.clusters.size()));
        const auto& cl = cfg_.clusters[cluster];
        const std::size_t domain = static_cast<std::size_t>(cl.domain);

        PatientState state;
        state.patient_id = patient_counter++;
        state.domain_id = cl.domain;
        state.time_index = static_cast<int>(t);
        state.features.resize(cl.features.size());
        for (std::size_t j = 0; j < cl.features.size(); ++j)
          state.features[j] = cl.features[j] + cfg_.state_noise_sd * rng.normal();

        const std::size_t ci = rng.uniform_index(cfg_.contracts.size());
        const ContractSpec& con = cfg_.contracts[ci];
        ContractContext contract{static_cast<int>(ci), con.kind, con.features};

        int rec = policy ? policy(state, cluster, contract) : recommend(cluster, con.kind);
        rec = std::clamp(rec, 0, static_cast<int>(cfg_.actions.size()) - 1);

        // Case-specific quality shifts, one per action; drawn up front so
        // beliefs and realized outcomes share them.
        Vec case_effects(cfg_.actions.size(), 0.0);
        if (cfg_.private_info_sd > 0.0)
          for (double& e : case_effects) e = cfg_.private_info_sd * rng.normal();

        Decision decision = decide(clin, domain, cluster, rec, con.kind, case_effects, rng);

        InteractionRecord record;
        record.state = state;
        record.recommendation =
            ClinicalAction{rec, cfg_.actions[rec].features, cfg_.actions[rec].complexity};
        record.decision = decision;
        record.clinician_id = clin.clinician_id;
        record.contract = contract;

        int executed_id;
        if (!decision.is_override()) executed_id = rec;
        else if (decision.alternative) executed_id = decision.alternative->action_id;
        else executed_id = default_action_;  // walked away; baseline care happens
        record.executed = ClinicalAction{executed_id, cfg_.actions[executed_id].features,
                                         cfg_.actions[executed_id].complexity};

        // Off-platform rejects: the replacement happens, but the log loses it.
        // Outcomes still reflect what was actually done.
        if (decision.kind == DecisionKind::REJECT && decision.alternative &&
            cfg_.reject_alt_observed_rate < 1.0 &&
            !rng.bernoulli(cfg_.reject_alt_observed_rate))
          record.decision.alternative.reset();

        const int cf_action = decision.is_override() ? rec : default_action_;
        const double q_exec = outcome_quality(cluster, executed_id, con.kind,
                                              case_effects[executed_id], rng);
        const double q_cf =
            outcome_quality(cluster, cf_action, con.kind, case_effects[cf_action], rng);

        if (t + static_cast<std::size_t>(cfg_.outcome_lag) < horizon) {
          Outcome o;
          o.lag = cfg_.outcome_lag;
          o.observed = rng.bernoulli(cfg_.observability_rate);
          if (o.observed) {
            o.quality = q_exec;
            o.event_flag = q_exec < cfg_.adverse_event_threshold;
          }
          record.outcome = o;
        }

        GroundTruth::RecordSide side;
        side.cluster = cluster;
        side.executed_quality = q_exec;
        side.counterfactual_quality = q_cf;
        side.counterfactual_action = cf_action;
        side.kappa_at_decision = clin.kappa(domain);
        truth.per_record.push_back(side);
        out.records.push_back(std::move(record));

        if (evolve_on) {
          CapabilityProfile prof;
          prof.clinician_id = clin.clinician_id;
          prof.domain_id = static_cast<int>(domain);
          prof.kappa = clin.kappa(domain);
          prof.ground_truth_parts = {clin.exec[domain], clin.align[domain]};
          prof = evolve_capability(prof, cfg_.scaffolding_level,
                                   q_exec > cfg_.success_quality_threshold, cfg_.evolve_eta);
          const auto parts =
              prof.ground_truth_parts.value_or(std::pair{clin.exec[domain], clin.align[domain]});
          clin.exec[domain] = parts.first;
          clin.align[domain] = parts.second;
        }
      }
    }
  }

  out.final_profiles.reserve(n_clin * n_dom);
  for (std::size_t k = 0; k < n_clin; ++k)
    for (std::size_t d = 0; d < n_dom; ++d) {
      CapabilityProfile prof;
      prof.clinician_id = clinicians_[k].clinician_id;
      prof.domain_id = static_cast<int>(d);
      prof.time_index = static_cast<int>(horizon);
      prof.kappa = clinicians_[k].kappa(d);
      prof.ground_truth_parts = {clinicians_[k].exec[d], clinicians_[k].align[d]};
      out.final_profiles.push_back(prof);
    }
  return out;
}

SimResult generate_dataset(const ScenarioConfig& config) {
  WorldSim sim(config);
  return sim.run();
}

}  // namespace olab
