#include "olab/dual_learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace olab {
namespace {

FeatureMapSpec feature_spec_for(const ScenarioConfig& cfg) {
  FeatureMapSpec spec;
  spec.state_dim = cfg.clusters.front().features.size();
  spec.action_dim = cfg.actions.front().features.size();
  spec.contract_dim = cfg.contracts.front().features.size();
  return spec;
}

double estimate_mean(const CapabilityMap& kappa, int clinician, int domain, double fallback) {
  auto it = kappa.find({clinician, domain});
  return it == kappa.end() ? fallback : it->second.mean();
}

// Clinician-level kappa (domain-averaged) for the classifier's high-kappa
// cohort cut.
std::map<int, double> clinician_kappa(const CapabilityMap& kappa) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& [key, est] : kappa) {
    auto& a = acc[key.first];
    a.first += est.mean();
    a.second += 1;
  }
  std::map<int, double> out;
  for (const auto& [k, a] : acc) out[k] = a.first / a.second;
  return out;
}

std::vector<SignalContext::ActionMeta> action_metas(const ScenarioConfig& cfg) {
  std::vector<SignalContext::ActionMeta> metas;
  metas.reserve(cfg.actions.size());
  for (const auto& a : cfg.actions) metas.push_back({a.features, a.class_tag});
  return metas;
}

std::vector<double> rank_with_ties(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Signed margin whose positive sign means "the clinician's decision matches
// the model". Ties at zero side with accepting, so they read as agreement on
// ACCEPT records and disagreement on overrides.
double agreement_margin(const InteractionRecord& r, const RewardModel& model,
                        const ClinicalAction& default_action) {
  if (!r.decision.is_override())
    return model.margin(r.state, r.recommendation, default_action, r.contract);
  if (r.decision.alternative)
    return model.margin(r.state, *r.decision.alternative, r.recommendation, r.contract);
  return -model.margin(r.state, r.recommendation, default_action, r.contract);
}

bool agrees(double signed_margin, bool is_override) {
  return is_override ? signed_margin > 0.0 : signed_margin >= 0.0;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return 0.0;
  const auto ra = rank_with_ties(a);
  const auto rb = rank_with_ties(b);
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

PairSet build_pairs(const std::vector<InteractionRecord>& records,
                    const std::vector<int>& record_clusters, const ScenarioConfig& config,
                    const CapabilityMap& kappa, const TrainingConfig& training) {
  if (records.empty()) throw std::invalid_argument("build_pairs: no records");
  if (record_clusters.size() != records.size())
    throw std::invalid_argument("build_pairs: cluster list size mismatch");

  const int def = config.default_action();
  const ClinicalAction default_action{def, config.actions[def].features,
                                      config.actions[def].complexity};
  const BetaSchedule sched{training.beta0, training.beta1, training.beta_form};

  RecordClassification cls;
  if (training.use_class_weights)
    cls = classify_records(records, record_clusters, action_metas(config),
                           config.classifier_params, config.type_weights, clinician_kappa(kappa),
                           config.monitors.kappa_high_cut);

  PairSet out;
  out.pairs.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const bool override_rec = r.decision.is_override();
    if (override_rec && !r.decision.alternative) {
      out.dropped_rejects++;
      continue;
    }

    PreferencePair p;
    p.state = r.state;
    p.contract = r.contract;
    p.clinician_id = r.clinician_id;
    p.domain_id = r.state.domain_id;
    p.time_index = r.state.time_index;
    if (!override_rec) {
      p.kind = PairKind::ACCEPT_PAIR;
      p.preferred = r.recommendation;
      p.dispreferred = default_action;
    } else {
      p.kind = r.decision.kind == DecisionKind::MODIFY ? PairKind::MODIFY_PAIR
                                                       : PairKind::REJECT_PAIR;
      p.preferred = *r.decision.alternative;
      p.dispreferred = r.recommendation;
      if (training.use_class_weights) {
        p.reward_class_weight = cls.weights[i].first;
        p.capability_class_weight = cls.weights[i].second;
      }
    }
    const double k_hat =
        estimate_mean(kappa, r.clinician_id, r.state.domain_id, training.prior_mean);
    p.capability_weight = sched(k_hat);
    if (p.reward_class_weight == 0.0 && p.capability_class_weight == 0.0)
      out.zero_weight_pairs++;
    out.source_record.push_back(i);
    out.pairs.push_back(std::move(p));
  }
  return out;
}

double m_objective(const std::vector<PreferencePair>& pairs, const RewardModel& model,
                   double ridge_lambda) {
  double W = 0.0;
  for (const auto& p : pairs) W += p.capability_weight * p.reward_class_weight;
  double ridge = 0.0;
  for (double t : model.theta) ridge += t * t;
  if (W <= 0.0) return -ridge_lambda * ridge;

  Vec grad_sink(model.theta.size(), 0.0);
  Vec fa, fb;
  double sum = 0.0;
  for (const auto& p : pairs) sum += accumulate_pair_loglik_stamped(p, model, grad_sink, fa, fb);
  return sum / W - ridge_lambda * ridge;
}

MStepResult m_step(const std::vector<PreferencePair>& pairs, const RewardModel& init,
                   const TrainingConfig& training) {
  double W = 0.0;
  for (const auto& p : pairs) W += p.capability_weight * p.reward_class_weight;
  if (!(W > 0.0)) throw std::runtime_error("m_step: every pair carries zero weight");

  const std::size_t dim = init.feature_map.dim();
  RewardModel model = init;
  if (model.theta.size() != dim) model.theta.assign(dim, 0.0);

  const double lambda = training.ridge_lambda;
  Vec fa, fb;

  const auto eval = [&](const RewardModel& m, Vec* grad) {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    Vec sink;
    Vec& g = grad ? *grad : sink;
    if (!grad) g.assign(dim, 0.0);
    double sum = 0.0;
    for (const auto& p : pairs) sum += accumulate_pair_loglik_stamped(p, m, g, fa, fb);
    double obj = sum / W;
    double ridge = 0.0;
    for (double t : m.theta) ridge += t * t;
    obj -= lambda * ridge;
    if (grad)
      for (std::size_t j = 0; j < dim; ++j)
        (*grad)[j] = (*grad)[j] / W - 2.0 * lambda * m.theta[j];
    return obj;
  };

  Vec grad(dim, 0.0);
  double obj = eval(model, &grad);
  if (!std::isfinite(obj)) throw std::runtime_error("m_step: non-finite objective");

  int iter = 0;
  double step = 1.0;
  RewardModel trial = model;
  for (; iter < training.m_max_iters; ++iter) {
    double gmax = 0.0, gnorm2 = 0.0;
    for (double g : grad) {
      gmax = std::max(gmax, std::abs(g));
      gnorm2 += g * g;
    }
    if (gmax < training.m_tol_grad) break;

    // Backtracking line search on the concave objective; the Armijo bound
    // only guards against overshooting.
    bool moved = false;
    for (; step > 1e-14; step *= 0.5) {
      for (std::size_t j = 0; j < dim; ++j) trial.theta[j] = model.theta[j] + step * grad[j];
      const double trial_obj = eval(trial, nullptr);
      if (!std::isfinite(trial_obj)) throw std::runtime_error("m_step: non-finite objective");
      if (trial_obj >= obj + 1e-4 * step * gnorm2) {
        model.theta.swap(trial.theta);
        obj = trial_obj;
        moved = true;
        break;
      }
    }
    if (!moved) break;  // step underflow: no ascent direction progress left
    step = std::min(step * 2.0, 4.0);
    obj = eval(model, &grad);
  }

  MStepResult out;
  out.model = std::move(model);
  out.iterations = iter;
  // Report the data term alone so traces show likelihood, not the penalty.
  double ridge = 0.0;
  for (double t : out.model.theta) ridge += t * t;
  out.loglik = obj + lambda * ridge;
  return out;
}

CapabilityMap e_step(const std::vector<InteractionRecord>& records,
                     const std::vector<int>& record_clusters, const ScenarioConfig& config,
                     const RewardModel& model, const CapabilityMap& priors,
                     const TrainingConfig& training) {
  const int def = config.default_action();
  const ClinicalAction default_action{def, config.actions[def].features,
                                      config.actions[def].complexity};

  RecordClassification cls;
  if (training.use_class_weights)
    cls = classify_records(records, record_clusters, action_metas(config),
                           config.classifier_params, config.type_weights,
                           clinician_kappa(priors), config.monitors.kappa_high_cut);

  CapabilityMap out = priors;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const bool override_rec = r.decision.is_override();
    const double w = (training.use_class_weights && override_rec) ? cls.weights[i].second : 1.0;
    if (w <= 0.0) continue;

    auto [it, inserted] = out.try_emplace({r.clinician_id, r.state.domain_id});
    if (inserted) {
      it->second.clinician_id = r.clinician_id;
      it->second.domain_id = r.state.domain_id;
      it->second.alpha = training.prior_strength * training.prior_mean;
      it->second.beta = training.prior_strength * (1.0 - training.prior_mean);
    }

    const double m = agreement_margin(r, model, default_action);
    if (training.soft_agreement) {
      const double p = logistic(m);
      it->second.alpha += w * p;
      it->second.beta += w * (1.0 - p);
    } else if (agrees(m, override_rec)) {
      it->second.alpha += w;
    } else {
      it->second.beta += w;
    }
  }
  return out;
}

CapabilityMap cold_start_priors(const std::vector<ClinicianProxy>& clinicians,
                                const std::vector<int>& domains,
                                const TrainingConfig& training) {
  CapabilityMap out;
  for (const auto& c : clinicians) {
    double mean = training.prior_mean;
    if (c.proxy_score >= 0.0) {
      mean = training.prior_mean + training.proxy_gain * (c.proxy_score - 0.5);
      mean = std::clamp(mean, 1.0 - training.prior_ceiling, training.prior_ceiling);
    }
    for (int d : domains) {
      CapabilityEstimate est;
      est.clinician_id = c.clinician_id;
      est.domain_id = d;
      est.alpha = training.prior_strength * mean;
      est.beta = training.prior_strength * (1.0 - mean);
      out[{c.clinician_id, d}] = est;
    }
  }
  return out;
}

CapabilityMap strengthen_priors(const CapabilityMap& priors, double factor) {
  CapabilityMap out = priors;
  for (auto& [key, est] : out) {
    est.alpha *= factor;
    est.beta *= factor;
  }
  return out;
}

TrainState alternate(const std::vector<InteractionRecord>& records,
                     const std::vector<int>& record_clusters, const ScenarioConfig& config,
                     const CapabilityMap& priors, const TrainingConfig& training) {
  TrainState state;
  state.model = RewardModel::zeros(feature_spec_for(config));
  state.kappa_estimates = priors;

  int rising = 0;
  double prev_delta = -1.0;
  for (int round = 1; round <= training.max_rounds; ++round) {
    const PairSet pairs =
        build_pairs(records, record_clusters, config, state.kappa_estimates, training);
    const MStepResult m = m_step(pairs.pairs, state.model, training);

    double theta_delta = 0.0;
    for (std::size_t j = 0; j < m.model.theta.size(); ++j)
      theta_delta = std::max(theta_delta,
                             std::abs(m.model.theta[j] - state.model.theta[j]));
    state.model = m.model;

    const CapabilityMap next =
        e_step(records, record_clusters, config, state.model, priors, training);
    double kappa_delta = 0.0;
    for (const auto& [key, est] : next) {
      const double before = estimate_mean(state.kappa_estimates, key.first, key.second,
                                          training.prior_mean);
      kappa_delta = std::max(kappa_delta, std::abs(est.mean() - before));
    }
    state.kappa_estimates = next;
    state.rounds_completed = round;
    state.trace.push_back({round, m.loglik, theta_delta, kappa_delta, m.iterations});

    const double delta = theta_delta + kappa_delta;
    if (prev_delta >= 0.0 && delta > prev_delta) {
      if (++rising >= 3) state.oscillation = true;
    } else {
      rising = 0;
    }
    prev_delta = delta;

    if (kappa_delta < training.tol_kappa && theta_delta < training.tol_theta) {
      state.converged = true;
      break;
    }
  }

  // Dispersion of the posterior means as their standard deviation; the range
  // is an extreme-value statistic and stays wide on pure sampling noise.
  if (!state.kappa_estimates.empty()) {
    double sum = 0.0, sumsq = 0.0;
    for (const auto& [key, est] : state.kappa_estimates) {
      const double m = est.mean();
      sum += m;
      sumsq += m * m;
    }
    const double n = static_cast<double>(state.kappa_estimates.size());
    const double mean = sum / n;
    state.final_kappa_spread = std::sqrt(std::max(0.0, sumsq / n - mean * mean));
  }
  state.non_identifiable =
      state.rounds_completed > 0 && state.final_kappa_spread < training.homogeneity_spread;
  return state;
}

AnchorReport anchor_validate(const RewardModel& model, const std::vector<PreferencePair>& heldout,
                             const TrainingConfig& training) {
  std::vector<double> margins, labels;
  for (const auto& p : heldout) {
    if (!p.outcome_label) continue;
    margins.push_back(model.margin(p.state, p.preferred, p.dispreferred, p.contract));
    labels.push_back(*p.outcome_label);
  }
  if (margins.size() < static_cast<std::size_t>(training.min_anchor_pairs))
    throw std::runtime_error("anchor_validate: too few outcome-labeled held-out pairs");

  AnchorReport report;
  report.threshold = training.anchor_threshold;
  report.concordance = spearman(margins, labels);
  report.pairs_used = margins.size();
  report.pass = report.concordance >= report.threshold;
  return report;
}

void attach_outcome_labels(PairSet& pairs, const std::vector<InteractionRecord>& records,
                           const std::vector<double>& executed_quality,
                           const std::vector<double>& counterfactual_quality) {
  for (std::size_t j = 0; j < pairs.pairs.size(); ++j) {
    const std::size_t src = pairs.source_record[j];
    const auto& outcome = records[src].outcome;
    if (!outcome || !outcome->observed) continue;
    pairs.pairs[j].outcome_label = executed_quality[src] - counterfactual_quality[src];
  }
}

AnchorSplit split_for_anchor(const PairSet& pairs, double heldout_fraction) {
  AnchorSplit out;
  const std::size_t stride =
      heldout_fraction > 0.0
          ? std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(1.0 / heldout_fraction)))
          : 0;
  std::size_t labelled_seen = 0;
  for (const auto& p : pairs.pairs) {
    if (p.outcome_label && stride > 0 && labelled_seen++ % stride == 0)
      out.heldout.push_back(p);
    else
      out.train.push_back(p);
  }
  return out;
}

}  // namespace olab
