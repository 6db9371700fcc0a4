#ifndef OLAB_PREFERENCE_HPP
#define OLAB_PREFERENCE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "olab/types.hpp"

namespace olab {

// Logistic sigma(x) = 1/(1+exp(-x)), computed without overflow at either tail.
double logistic(double x);

// log sigma(x) in the numerically stable log1p form.
double log_logistic(double x);

// Binary entropy in bits; H2(0) = H2(1) = 0.
double binary_entropy(double p);

enum class BetaForm { LINEAR, SIGMOID_BOUNDED };

// Capability-dependent inverse temperature beta(kappa). The linear form is
// beta0 + beta1*kappa; the bounded alternative is beta0 + beta1*sigma(kappa).
struct BetaSchedule {
  double beta0 = 1.0;
  double beta1 = 0.0;
  BetaForm form = BetaForm::LINEAR;

  double operator()(double kappa) const { return beta_of_kappa(kappa, beta0, beta1, form); }

  static double beta_of_kappa(double kappa, double beta0, double beta1,
                              BetaForm form = BetaForm::LINEAR);
};

// Feature map f(s,a,c) = [phi(s) (x) psi(a), psi(a), gamma(c) (x) psi(a)],
// linear in theta so the preference likelihood stays concave.
struct FeatureMapSpec {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::size_t contract_dim = 0;

  std::size_t dim() const { return action_dim * (state_dim + 1 + contract_dim); }

  // Writes f(s,a,c) into `out` (resized to dim()). Throws when an input
  // vector's length disagrees with the configured dimensions.
  void eval(const Vec& state_features, const Vec& action_features,
            const Vec& contract_features, Vec& out) const;
};

// Linear-in-parameters reward model R_theta(s,a,c) = <theta, f(s,a,c)>.
struct RewardModel {
  Vec theta;
  FeatureMapSpec feature_map;

  double value(const Vec& state_features, const Vec& action_features,
               const Vec& contract_features) const;
  double value(const PatientState& s, const ClinicalAction& a,
               const ContractContext& c) const;
  // R(s, a, c) - R(s, b, c)
  double margin(const PatientState& s, const ClinicalAction& a,
                const ClinicalAction& b, const ContractContext& c) const;

  static RewardModel zeros(FeatureMapSpec spec);
};

// P(delta = accept | s, c, kappa): the recommendation scored against the
// catalog's no-intervention default.
double p_accept(const PatientState& state, const ClinicalAction& recommendation,
                const ClinicalAction& default_action, const ContractContext& contract,
                double kappa, const RewardModel& model, const BetaSchedule& beta);

// P(alt succ rec | s, c, kappa). Requires alt != rec.
double p_prefer(const ClinicalAction& alt, const ClinicalAction& rec,
                const PatientState& state, const ContractContext& contract,
                double kappa, const RewardModel& model, const BetaSchedule& beta);

struct PairLoglik {
  double loglik = 0.0;
  Vec grad;  // d loglik / d theta, same length as theta
};

// Weighted log-likelihood contribution of one preference pair and its exact
// gradient in theta. The weight is beta(kappa) * reward_class_weight; the
// probability is clamped to [1e-12, 1-1e-12] before the log so saturated
// pairs stay finite.
PairLoglik pair_loglik_and_grad(const PreferencePair& pair, const RewardModel& model,
                                double kappa, const BetaSchedule& beta);

// Same, accumulating weight * grad into `grad_accum` (no allocation); returns
// the weighted loglik. Used by the M-step inner loop.
double accumulate_pair_loglik(const PreferencePair& pair, const RewardModel& model,
                              double kappa, const BetaSchedule& beta, Vec& grad_accum,
                              Vec& feature_scratch_a, Vec& feature_scratch_b);

// Variant that trusts the beta(kappa) already stamped on the pair as
// capability_weight, so batch fitting never re-resolves kappa.
double accumulate_pair_loglik_stamped(const PreferencePair& pair, const RewardModel& model,
                                      Vec& grad_accum, Vec& feature_scratch_a,
                                      Vec& feature_scratch_b);

}  // namespace olab

#endif  // OLAB_PREFERENCE_HPP
