#include "olab/preference.hpp"

#include <cmath>
#include <stdexcept>

namespace olab {

namespace {

constexpr double kProbClamp = 1e-12;

double clamp_prob(double p) {
  if (p < kProbClamp) return kProbClamp;
  if (p > 1.0 - kProbClamp) return 1.0 - kProbClamp;
  return p;
}

}  // namespace

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_logistic(double x) {
  if (x >= 0.0) {
    return -std::log1p(std::exp(-x));
  }
  return x - std::log1p(std::exp(x));
}

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

double BetaSchedule::beta_of_kappa(double kappa, double beta0, double beta1, BetaForm form) {
  if (!(kappa >= 0.0 && kappa <= 1.0)) {
    throw std::invalid_argument("beta_of_kappa: kappa must lie in [0,1]");
  }
  if (!(beta0 > 0.0)) {
    throw std::invalid_argument("beta_of_kappa: beta0 must be positive");
  }
  if (beta1 < 0.0) {
    throw std::invalid_argument("beta_of_kappa: beta1 must be non-negative");
  }
  switch (form) {
    case BetaForm::LINEAR:
      return beta0 + beta1 * kappa;
    case BetaForm::SIGMOID_BOUNDED:
      return beta0 + beta1 * logistic(kappa);
  }
  return beta0;
}

void FeatureMapSpec::eval(const Vec& state_features, const Vec& action_features,
                          const Vec& contract_features, Vec& out) const {
  if (state_features.size() != state_dim || action_features.size() != action_dim ||
      contract_features.size() != contract_dim) {
    throw std::invalid_argument("FeatureMapSpec::eval: input dimensions do not match spec");
  }
  out.resize(dim());
  std::size_t k = 0;
  for (std::size_t i = 0; i < state_dim; ++i) {
    for (std::size_t j = 0; j < action_dim; ++j) {
      out[k++] = state_features[i] * action_features[j];
    }
  }
  for (std::size_t j = 0; j < action_dim; ++j) {
    out[k++] = action_features[j];
  }
  for (std::size_t i = 0; i < contract_dim; ++i) {
    for (std::size_t j = 0; j < action_dim; ++j) {
      out[k++] = contract_features[i] * action_features[j];
    }
  }
}

double RewardModel::value(const Vec& state_features, const Vec& action_features,
                          const Vec& contract_features) const {
  if (theta.size() != feature_map.dim()) {
    throw std::invalid_argument("RewardModel: theta length does not match feature map");
  }
  Vec f;
  feature_map.eval(state_features, action_features, contract_features, f);
  double v = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) v += theta[i] * f[i];
  return v;
}

double RewardModel::value(const PatientState& s, const ClinicalAction& a,
                          const ContractContext& c) const {
  return value(s.features, a.features, c.features);
}

double RewardModel::margin(const PatientState& s, const ClinicalAction& a,
                           const ClinicalAction& b, const ContractContext& c) const {
  return value(s, a, c) - value(s, b, c);
}

RewardModel RewardModel::zeros(FeatureMapSpec spec) {
  RewardModel m;
  m.feature_map = spec;
  m.theta.assign(spec.dim(), 0.0);
  return m;
}

double p_accept(const PatientState& state, const ClinicalAction& recommendation,
                const ClinicalAction& default_action, const ContractContext& contract,
                double kappa, const RewardModel& model, const BetaSchedule& beta) {
  const double m = model.margin(state, recommendation, default_action, contract);
  return logistic(beta(kappa) * m);
}

double p_prefer(const ClinicalAction& alt, const ClinicalAction& rec,
                const PatientState& state, const ContractContext& contract,
                double kappa, const RewardModel& model, const BetaSchedule& beta) {
  if (alt.action_id == rec.action_id) {
    throw std::invalid_argument("p_prefer: alternative must differ from recommendation");
  }
  const double m = model.margin(state, alt, rec, contract);
  return logistic(beta(kappa) * m);
}

double accumulate_pair_loglik_stamped(const PreferencePair& pair, const RewardModel& model,
                                      Vec& grad_accum, Vec& fa, Vec& fb) {
  const double b = pair.capability_weight;
  const double weight = b * pair.reward_class_weight;
  if (weight == 0.0) {
    return 0.0;  // Type III style pair: contributes nothing to either side
  }
  model.feature_map.eval(pair.state.features, pair.preferred.features,
                         pair.contract.features, fa);
  model.feature_map.eval(pair.state.features, pair.dispreferred.features,
                         pair.contract.features, fb);
  double margin = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    margin += model.theta[i] * (fa[i] - fb[i]);
  }
  const double z = b * margin;
  const double loglik = weight * std::log(clamp_prob(logistic(z)));
  // d/dtheta [w * log sigma(b*m)] = w * sigma(-b*m) * b * (f_pref - f_disp).
  // sigma(-z) saturates to 0/1, so the gradient stays bounded at the clamp.
  const double coef = weight * logistic(-z) * b;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    grad_accum[i] += coef * (fa[i] - fb[i]);
  }
  return loglik;
}

double accumulate_pair_loglik(const PreferencePair& pair, const RewardModel& model,
                              double kappa, const BetaSchedule& beta, Vec& grad_accum,
                              Vec& fa, Vec& fb) {
  PreferencePair stamped = pair;
  stamped.capability_weight = beta(kappa);
  return accumulate_pair_loglik_stamped(stamped, model, grad_accum, fa, fb);
}

PairLoglik pair_loglik_and_grad(const PreferencePair& pair, const RewardModel& model,
                                double kappa, const BetaSchedule& beta) {
  PairLoglik out;
  out.grad.assign(model.theta.size(), 0.0);
  Vec fa, fb;
  out.loglik = accumulate_pair_loglik(pair, model, kappa, beta, out.grad, fa, fb);
  return out;
}

}  // namespace olab
