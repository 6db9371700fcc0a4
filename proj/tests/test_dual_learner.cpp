#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "olab/dual_learner.hpp"
#include "olab/rng.hpp"
#include "olab/world_sim.hpp"
#include "test_support.hpp"

using namespace olab;
using namespace olab::test;

namespace {

FeatureMapSpec tiny_spec() { return FeatureMapSpec{2, 2, 1}; }

// Model scoring actions by the sum of their psi entries: ranks treat (1,0.5)
// above usual (0,0) everywhere.
RewardModel treat_positive_model(double sign = 1.0) {
  RewardModel m = RewardModel::zeros(tiny_spec());
  m.theta[4] = sign;  // psi block starts after the 2x2 state-action terms
  m.theta[5] = sign;
  return m;
}

CapabilityMap single_prior(int clinician, double alpha, double beta) {
  CapabilityMap priors;
  CapabilityEstimate est;
  est.clinician_id = clinician;
  est.domain_id = 0;
  est.alpha = alpha;
  est.beta = beta;
  priors[{clinician, 0}] = est;
  return priors;
}

}  // namespace

TEST_CASE("pair construction from the three decision kinds") {
  const ScenarioConfig cfg = tiny_config();
  TrainingConfig training = cfg.training;
  training.use_class_weights = false;
  training.beta0 = 0.5;
  training.beta1 = 2.0;

  std::vector<InteractionRecord> records;
  records.push_back(accept_record(cfg, 0, 0));  // ACCEPT of treat

  auto mod = accept_record(cfg, 0, 1);
  mod.decision.kind = DecisionKind::MODIFY;
  mod.decision.alternative = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
  mod.executed = *mod.decision.alternative;
  records.push_back(mod);

  auto bare = accept_record(cfg, 1, 2);
  bare.decision.kind = DecisionKind::REJECT;
  bare.executed = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
  records.push_back(bare);

  const std::vector<int> clusters(records.size(), 0);
  const CapabilityMap kappa = single_prior(0, 8.0, 2.0);  // mean 0.8

  const PairSet set = build_pairs(records, clusters, cfg, kappa, training);
  REQUIRE(set.pairs.size() == 2);
  CHECK(set.dropped_rejects == 1);
  CHECK(set.source_record == std::vector<std::size_t>{0, 1});

  const auto& acc = set.pairs[0];
  CHECK(acc.kind == PairKind::ACCEPT_PAIR);
  CHECK(acc.preferred.action_id == 1);
  CHECK(acc.dispreferred.action_id == cfg.default_action());
  CHECK(acc.capability_weight == doctest::Approx(0.5 + 2.0 * 0.8).epsilon(1e-12));
  CHECK(acc.reward_class_weight == 1.0);

  const auto& m = set.pairs[1];
  CHECK(m.kind == PairKind::MODIFY_PAIR);
  CHECK(m.preferred.action_id == 0);
  CHECK(m.dispreferred.action_id == 1);

  CHECK_THROWS_AS(build_pairs({}, {}, cfg, kappa, training), std::invalid_argument);
}

TEST_CASE("pairs from unmapped clinicians fall back to the prior-mean weight") {
  const ScenarioConfig cfg = tiny_config();
  TrainingConfig training = cfg.training;
  training.use_class_weights = false;

  const std::vector<InteractionRecord> records{accept_record(cfg, 42, 0)};
  const PairSet set = build_pairs(records, {0}, cfg, {}, training);
  REQUIRE(set.pairs.size() == 1);
  CHECK(set.pairs[0].capability_weight ==
        doctest::Approx(training.beta0 + training.beta1 * training.prior_mean).epsilon(1e-12));
}

TEST_CASE("workflow-reason rejects are strongly down-weighted") {
  const ScenarioConfig cfg = tiny_config();
  TrainingConfig training = cfg.training;
  training.use_class_weights = true;

  // Nine routine accepts keep the clinician's override rate low, so the
  // structured NO_TIME reason dominates the classification of the tenth.
  std::vector<InteractionRecord> records;
  for (int i = 0; i < 9; ++i) records.push_back(accept_record(cfg, 0, i));
  auto r = accept_record(cfg, 0, 9);
  r.decision.kind = DecisionKind::REJECT;
  r.decision.reason = ReasonCode::NO_TIME;
  r.decision.alternative = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
  r.executed = *r.decision.alternative;
  records.push_back(r);
  const std::vector<int> clusters(records.size(), 0);

  const PairSet set = build_pairs(records, clusters, cfg, {}, training);
  REQUIRE(set.pairs.size() == 10);
  const auto& reject = set.pairs.back();
  CHECK(reject.kind == PairKind::REJECT_PAIR);
  CHECK(reject.reward_class_weight < 0.35);
  CHECK(reject.capability_class_weight < 0.35);
  CHECK(set.pairs.front().reward_class_weight == 1.0);  // accepts stay at full weight
  // Soft posteriors never reach exactly zero with the default tables.
  CHECK(set.zero_weight_pairs == 0);
}

TEST_CASE("pairs whose configured type weights vanish are counted") {
  ScenarioConfig cfg = tiny_config();
  cfg.type_weights.reward = {0.0, 0.0, 0.0, 0.0, 0.0};
  cfg.type_weights.capability = {0.0, 0.0, 0.0, 0.0, 0.0};
  TrainingConfig training = cfg.training;
  training.use_class_weights = true;

  std::vector<InteractionRecord> records;
  auto r = accept_record(cfg, 0, 0);
  r.decision.kind = DecisionKind::REJECT;
  r.decision.alternative = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
  r.executed = *r.decision.alternative;
  records.push_back(r);

  const PairSet set = build_pairs(records, {0}, cfg, {}, training);
  REQUIRE(set.pairs.size() == 1);
  CHECK(set.pairs[0].reward_class_weight == 0.0);
  CHECK(set.zero_weight_pairs == 1);
}

TEST_CASE("capability counting follows Beta posterior arithmetic") {
  const ScenarioConfig cfg = tiny_config();
  TrainingConfig training = cfg.training;
  training.use_class_weights = false;
  const RewardModel model = treat_positive_model();

  SUBCASE("sixteen agreements on a Beta(2,2) prior give 18/20") {
    std::vector<InteractionRecord> records;
    for (int i = 0; i < 16; ++i) records.push_back(accept_record(cfg, 0, i));
    const std::vector<int> clusters(records.size(), 0);
    const CapabilityMap out =
        e_step(records, clusters, cfg, model, single_prior(0, 2.0, 2.0), training);
    REQUIRE(out.count({0, 0}) == 1);
    CHECK(out.at({0, 0}).mean() == doctest::Approx(18.0 / 20.0).epsilon(1e-12));
  }

  SUBCASE("clinicians with no records keep their prior mean") {
    const std::vector<InteractionRecord> records{accept_record(cfg, 0, 0)};
    CapabilityMap priors = single_prior(0, 2.0, 2.0);
    priors[{7, 0}] = CapabilityEstimate{7, 0, 3.0, 1.0};  // mean 0.75, untouched
    const CapabilityMap out = e_step(records, {0}, cfg, model, priors, training);
    CHECK(out.at({7, 0}).mean() == doctest::Approx(0.75).epsilon(1e-12));
  }

  SUBCASE("overrides against a correct model count as disagreement") {
    std::vector<InteractionRecord> records;
    auto r = accept_record(cfg, 0, 0);
    r.decision.kind = DecisionKind::REJECT;
    r.decision.alternative = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
    r.executed = *r.decision.alternative;
    records.push_back(r);
    const CapabilityMap out =
        e_step(records, {0}, cfg, model, single_prior(0, 2.0, 2.0), training);
    CHECK(out.at({0, 0}).alpha == doctest::Approx(2.0));
    CHECK(out.at({0, 0}).beta == doctest::Approx(3.0));
  }

  SUBCASE("bare rejects agree exactly when the model dislikes the recommendation") {
    std::vector<InteractionRecord> records;
    auto r = accept_record(cfg, 0, 0);
    r.decision.kind = DecisionKind::REJECT;
    r.executed = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
    records.push_back(r);

    const CapabilityMap agree =
        e_step(records, {0}, cfg, treat_positive_model(-1.0), single_prior(0, 2.0, 2.0), training);
    CHECK(agree.at({0, 0}).alpha == doctest::Approx(3.0));
    const CapabilityMap disagree =
        e_step(records, {0}, cfg, treat_positive_model(1.0), single_prior(0, 2.0, 2.0), training);
    CHECK(disagree.at({0, 0}).beta == doctest::Approx(3.0));
  }

  SUBCASE("zero margins side with accepting") {
    const RewardModel zeros = RewardModel::zeros(tiny_spec());
    std::vector<InteractionRecord> records{accept_record(cfg, 0, 0)};
    auto ovr = accept_record(cfg, 0, 1);
    ovr.decision.kind = DecisionKind::MODIFY;
    ovr.decision.alternative = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
    ovr.executed = *ovr.decision.alternative;
    records.push_back(ovr);
    const CapabilityMap out =
        e_step(records, {0, 0}, cfg, zeros, single_prior(0, 2.0, 2.0), training);
    CHECK(out.at({0, 0}).alpha == doctest::Approx(3.0));  // the accept agreed
    CHECK(out.at({0, 0}).beta == doctest::Approx(3.0));   // the modify did not
  }
}

TEST_CASE("cold-start priors") {
  TrainingConfig training;
  training.prior_strength = 4.0;
  training.prior_mean = 0.5;
  training.proxy_gain = 0.5;
  training.prior_ceiling = 0.7;

  SUBCASE("no proxy: diffuse Beta(2,2)") {
    const CapabilityMap out = cold_start_priors({{0, -1.0}}, {0}, training);
    CHECK(out.at({0, 0}).alpha == doctest::Approx(2.0));
    CHECK(out.at({0, 0}).beta == doctest::Approx(2.0));
    CHECK(out.at({0, 0}).mean() == doctest::Approx(0.5));
  }

  SUBCASE("proxy shifts are clamped to the ceiling band") {
    const CapabilityMap high = cold_start_priors({{0, 1.0}}, {0}, training);
    CHECK(high.at({0, 0}).mean() == doctest::Approx(0.7).epsilon(1e-12));
    const CapabilityMap low = cold_start_priors({{0, 0.0}}, {0}, training);
    CHECK(low.at({0, 0}).mean() == doctest::Approx(0.3).epsilon(1e-12));
    const CapabilityMap mid = cold_start_priors({{0, 0.6}}, {0}, training);
    CHECK(mid.at({0, 0}).mean() == doctest::Approx(0.55).epsilon(1e-12));
  }

  SUBCASE("one entry per clinician-domain cell") {
    const CapabilityMap out = cold_start_priors({{0, -1.0}, {1, 0.8}}, {0, 1}, training);
    CHECK(out.size() == 4);
    CHECK(out.at({1, 1}).mean() == doctest::Approx(0.65).epsilon(1e-12));
  }

  SUBCASE("proxies wash out under a hundred informative records") {
    const ScenarioConfig cfg = tiny_config();
    TrainingConfig t = cfg.training;
    t.use_class_weights = false;
    std::vector<InteractionRecord> records;
    for (int i = 0; i < 120; ++i) records.push_back(accept_record(cfg, 0, i));
    const std::vector<int> clusters(records.size(), 0);

    const CapabilityMap with_proxy = e_step(records, clusters, cfg, treat_positive_model(),
                                            cold_start_priors({{0, 0.9}}, {0}, t), t);
    const CapabilityMap without = e_step(records, clusters, cfg, treat_positive_model(),
                                         cold_start_priors({{0, -1.0}}, {0}, t), t);
    CHECK(std::abs(with_proxy.at({0, 0}).mean() - without.at({0, 0}).mean()) < 0.05);
  }
}

TEST_CASE("strengthen_priors scales evidence but keeps the mean") {
  CapabilityMap priors = single_prior(0, 2.8, 1.2);
  const CapabilityMap out = strengthen_priors(priors, 4.0);
  CHECK(out.at({0, 0}).alpha == doctest::Approx(11.2));
  CHECK(out.at({0, 0}).beta == doctest::Approx(4.8));
  CHECK(out.at({0, 0}).mean() == doctest::Approx(priors.at({0, 0}).mean()).epsilon(1e-12));
}

TEST_CASE("m_step ascends and lands at a stationary point") {
  Rng rng(2024);
  const FeatureMapSpec spec = tiny_spec();
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 60; ++i) pairs.push_back(random_pair(rng, spec));

  TrainingConfig training;
  training.ridge_lambda = 0.05;

  const RewardModel init = RewardModel::zeros(spec);
  const MStepResult res = m_step(pairs, init, training);

  const double before = m_objective(pairs, init, training.ridge_lambda);
  const double after = m_objective(pairs, res.model, training.ridge_lambda);
  CHECK(after >= before);
  CHECK(res.iterations > 0);

  // Reported loglik is the data term: objective plus the ridge penalty.
  double ridge = 0.0;
  for (double t : res.model.theta) ridge += t * t;
  CHECK(res.loglik == doctest::Approx(after + training.ridge_lambda * ridge).epsilon(1e-9));

  // No ascent direction left: numerical gradient of the full objective ~ 0.
  for (std::size_t i = 0; i < res.model.theta.size(); ++i) {
    RewardModel up = res.model, down = res.model;
    up.theta[i] += 1e-6;
    down.theta[i] -= 1e-6;
    const double g = (m_objective(pairs, up, training.ridge_lambda) -
                      m_objective(pairs, down, training.ridge_lambda)) /
                     2e-6;
    CHECK(std::abs(g) < 1e-5);
  }
}

TEST_CASE("m_step rejects all-zero-weight pair sets") {
  Rng rng(9);
  const FeatureMapSpec spec = tiny_spec();
  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 5; ++i) {
    auto p = random_pair(rng, spec);
    p.reward_class_weight = 0.0;
    pairs.push_back(p);
  }
  TrainingConfig training;
  CHECK_THROWS_AS(m_step(pairs, RewardModel::zeros(spec), training), std::runtime_error);
}

TEST_CASE("m_step optimum matches nested exhaustive grid search") {
  // Small instances (3-dim theta) where a refined grid over a bounded box
  // pins the global optimum of the concave objective to ~1e-8.
  const FeatureMapSpec spec{1, 1, 1};
  TrainingConfig training;
  training.ridge_lambda = 0.05;

  Rng rng(606);
  for (int inst = 0; inst < 3; ++inst) {
    std::vector<PreferencePair> pairs;
    const int n = 20 + static_cast<int>(rng.uniform_index(31));  // <= 50 records
    for (int i = 0; i < n; ++i) {
      auto p = random_pair(rng, spec);
      p.clinician_id = static_cast<int>(rng.uniform_index(4));
      p.preferred.action_id = static_cast<int>(rng.uniform_index(3));
      p.dispreferred.action_id = 2 - p.preferred.action_id;
      pairs.push_back(p);
    }

    const MStepResult res = m_step(pairs, RewardModel::zeros(spec), training);
    for (double t : res.model.theta) REQUIRE(std::abs(t) < 3.5);  // inside the box

    RewardModel probe = RewardModel::zeros(spec);
    Vec center(3, 0.0);
    double half = 4.0;
    double best = -1e300;
    Vec best_theta(3, 0.0);
    for (int level = 0; level < 6; ++level) {
      const int steps = 8;  // 17 points per axis
      for (int a = -steps; a <= steps; ++a)
        for (int b = -steps; b <= steps; ++b)
          for (int c = -steps; c <= steps; ++c) {
            probe.theta[0] = center[0] + half * a / steps;
            probe.theta[1] = center[1] + half * b / steps;
            probe.theta[2] = center[2] + half * c / steps;
            const double v = m_objective(pairs, probe, training.ridge_lambda);
            if (v > best) {
              best = v;
              best_theta = probe.theta;
            }
          }
      center = best_theta;
      half *= 0.25;
    }

    const double opt = m_objective(pairs, res.model, training.ridge_lambda);
    CHECK(opt >= best - 1e-9);        // the optimizer is never beaten by the grid
    CHECK(std::abs(opt - best) < 1e-6);
  }
}

TEST_CASE("uniform weights reduce the fit to plain Bradley-Terry") {
  // beta1 = 0, beta0 = 1, class weights off: the weighted optimizer must land
  // on the same theta as an independently coded unweighted BT fit.
  ScenarioConfig cfg = tiny_config();
  cfg.horizon_steps = 12;
  cfg.interactions_per_step = 4;
  TrainingConfig training = cfg.training;
  training.beta0 = 1.0;
  training.beta1 = 0.0;
  training.use_class_weights = false;
  training.ridge_lambda = 0.05;

  const SimResult sim = generate_dataset(cfg);
  const PairSet set =
      build_pairs(sim.records, sim.truth.clusters(), cfg, {}, training);
  REQUIRE(set.pairs.size() >= 20);
  for (const auto& p : set.pairs) REQUIRE(p.capability_weight == 1.0);

  const MStepResult res = m_step(set.pairs, RewardModel::zeros(tiny_spec()), training);

  // Independent fit: mean log sigma(theta . df) - lambda |theta|^2 by plain
  // gradient ascent with halving line search.
  const std::size_t dim = tiny_spec().dim();
  std::vector<Vec> df;
  for (const auto& p : set.pairs) {
    Vec fp, fd;
    tiny_spec().eval(p.state.features, p.preferred.features, p.contract.features, fp);
    tiny_spec().eval(p.state.features, p.dispreferred.features, p.contract.features, fd);
    for (std::size_t i = 0; i < dim; ++i) fp[i] -= fd[i];
    df.push_back(fp);
  }
  const double inv_n = 1.0 / static_cast<double>(df.size());
  auto objective = [&](const Vec& theta) {
    double sum = 0.0;
    for (const auto& d : df) {
      double z = 0.0;
      for (std::size_t i = 0; i < dim; ++i) z += theta[i] * d[i];
      sum += log_logistic(z);
    }
    double ridge = 0.0;
    for (double t : theta) ridge += t * t;
    return sum * inv_n - training.ridge_lambda * ridge;
  };
  Vec theta(dim, 0.0);
  double obj = objective(theta);
  for (int iter = 0; iter < 20000; ++iter) {
    Vec grad(dim, 0.0);
    for (const auto& d : df) {
      double z = 0.0;
      for (std::size_t i = 0; i < dim; ++i) z += theta[i] * d[i];
      const double coef = logistic(-z) * inv_n;
      for (std::size_t i = 0; i < dim; ++i) grad[i] += coef * d[i];
    }
    double gmax = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      grad[i] -= 2.0 * training.ridge_lambda * theta[i];
      gmax = std::max(gmax, std::abs(grad[i]));
    }
    if (gmax < 1e-10) break;
    double step = 1.0;
    while (step > 1e-14) {
      Vec trial = theta;
      for (std::size_t i = 0; i < dim; ++i) trial[i] += step * grad[i];
      const double trial_obj = objective(trial);
      if (trial_obj > obj) {
        theta = trial;
        obj = trial_obj;
        break;
      }
      step *= 0.5;
    }
    if (step <= 1e-14) break;
  }

  for (std::size_t i = 0; i < dim; ++i)
    CHECK(std::abs(res.model.theta[i] - theta[i]) < 1e-6);
}

TEST_CASE("alternate with a zero-round budget returns the cold start unchanged") {
  const ScenarioConfig cfg = tiny_config();
  TrainingConfig training = cfg.training;
  training.max_rounds = 0;
  const SimResult sim = generate_dataset(cfg);
  ScenarioConfig run_cfg = cfg;
  run_cfg.training = training;

  const CapabilityMap priors = single_prior(0, 2.0, 2.0);
  const TrainState state =
      alternate(sim.records, sim.truth.clusters(), run_cfg, priors, training);
  CHECK(state.rounds_completed == 0);
  CHECK(!state.converged);
  CHECK(!state.non_identifiable);
  CHECK(state.trace.empty());
  for (double t : state.model.theta) CHECK(t == 0.0);
  CHECK(state.kappa_estimates.size() == priors.size());
  CHECK(state.kappa_estimates.at({0, 0}).mean() == doctest::Approx(0.5));
}

TEST_CASE("alternate recovers capability ordering on a heterogeneous stream") {
  ScenarioConfig cfg = canonical_scenario("hetero");
  cfg.horizon_steps = 26;
  const SimResult sim = generate_dataset(cfg);

  std::vector<ClinicianProxy> proxies;
  for (const auto& c : sim.final_profiles)
    if (c.domain_id == 0) proxies.push_back({c.clinician_id, -1.0});
  const CapabilityMap priors = cold_start_priors(proxies, {0}, cfg.training);

  const TrainState state =
      alternate(sim.records, sim.truth.clusters(), cfg, priors, cfg.training);
  CHECK(state.rounds_completed >= 1);
  CHECK(!state.oscillation);
  CHECK(!state.non_identifiable);
  for (const auto& t : state.trace) CHECK(std::isfinite(t.loglik));

  std::vector<double> est, truth;
  for (const auto& [key, e] : state.kappa_estimates) {
    est.push_back(e.mean());
    truth.push_back(sim.truth.kappa(static_cast<std::size_t>(key.first),
                                    static_cast<std::size_t>(key.second), 0));
  }
  CHECK(spearman(est, truth) > 0.5);
}

TEST_CASE("alternate flags a homogeneous population as non-identifiable") {
  const ScenarioConfig cfg = canonical_scenario("homog");
  const SimResult sim = generate_dataset(cfg);
  std::vector<ClinicianProxy> proxies;
  for (const auto& c : sim.final_profiles)
    if (c.domain_id == 0) proxies.push_back({c.clinician_id, -1.0});
  const CapabilityMap priors = cold_start_priors(proxies, {0}, cfg.training);

  const TrainState state =
      alternate(sim.records, sim.truth.clusters(), cfg, priors, cfg.training);
  CHECK(state.rounds_completed >= 1);
  CHECK(state.final_kappa_spread < cfg.training.homogeneity_spread);
  CHECK(state.non_identifiable);
}

TEST_CASE("spearman rank correlation") {
  CHECK(spearman({1.0, 2.0, 3.0}, {10.0, 20.0, 30.0}) == doctest::Approx(1.0));
  CHECK(spearman({1.0, 2.0, 3.0}, {3.0, 2.0, 1.0}) == doctest::Approx(-1.0));
  CHECK(spearman({1.0, 2.0, 2.0, 3.0}, {10.0, 20.0, 30.0, 40.0}) ==
        doctest::Approx(0.9486832980505138).epsilon(1e-12));
  CHECK(spearman({5.0, 5.0, 5.0}, {1.0, 2.0, 3.0}) == 0.0);  // constant input
  CHECK(spearman({1.0}, {2.0}) == 0.0);                      // too short
  CHECK(spearman({1.0, 2.0}, {1.0, 2.0, 3.0}) == 0.0);       // length mismatch
  // Monotone nonlinear map preserves rank correlation exactly.
  std::vector<double> a, b;
  for (int i = 0; i < 25; ++i) {
    a.push_back(static_cast<double>(i));
    b.push_back(std::exp(0.3 * i));
  }
  CHECK(spearman(a, b) == doctest::Approx(1.0));
}

TEST_CASE("anchor validation") {
  const FeatureMapSpec spec = tiny_spec();
  Rng rng(11);
  TrainingConfig training;
  training.min_anchor_pairs = 10;
  training.anchor_threshold = 0.25;
  const RewardModel model = random_model(rng, spec);

  std::vector<PreferencePair> heldout;
  for (int i = 0; i < 40; ++i) heldout.push_back(random_pair(rng, spec));

  SUBCASE("labels monotone in the model margin give concordance 1") {
    for (auto& p : heldout) {
      const double m = model.margin(p.state, p.preferred, p.dispreferred, p.contract);
      p.outcome_label = std::tanh(m);  // monotone transform of the margin
    }
    const AnchorReport rep = anchor_validate(model, heldout, training);
    CHECK(rep.concordance == doctest::Approx(1.0));
    CHECK(rep.pass);
    CHECK(rep.pairs_used == heldout.size());
  }

  SUBCASE("anti-monotone labels fail the threshold") {
    for (auto& p : heldout) {
      const double m = model.margin(p.state, p.preferred, p.dispreferred, p.contract);
      p.outcome_label = -m;
    }
    const AnchorReport rep = anchor_validate(model, heldout, training);
    CHECK(rep.concordance == doctest::Approx(-1.0));
    CHECK(!rep.pass);
  }

  SUBCASE("too few labelled pairs is an error") {
    for (std::size_t i = 0; i < heldout.size(); ++i)
      heldout[i].outcome_label = i < 9 ? std::optional<double>(0.1) : std::nullopt;
    CHECK_THROWS_AS(anchor_validate(model, heldout, training), std::runtime_error);
  }

  SUBCASE("random labels center the null concordance near zero") {
    double sum = 0.0;
    const int trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
      for (auto& p : heldout) p.outcome_label = rng.uniform(-1.0, 1.0);
      sum += anchor_validate(model, heldout, training).concordance;
    }
    CHECK(std::abs(sum / trials) < 0.1);
  }
}

TEST_CASE("outcome labels attach only to observed records and split by stride") {
  const ScenarioConfig cfg = tiny_config();
  TrainingConfig training = cfg.training;
  training.use_class_weights = false;

  std::vector<InteractionRecord> records;
  std::vector<double> exec_q, cf_q;
  for (int i = 0; i < 20; ++i) {
    auto r = accept_record(cfg, 0, i);
    Outcome o;
    o.observed = i % 2 == 0;  // half the outcomes captured
    if (o.observed) o.quality = 0.6;
    r.outcome = o;
    records.push_back(r);
    exec_q.push_back(0.6);
    cf_q.push_back(0.4);
  }
  const std::vector<int> clusters(records.size(), 0);

  PairSet set = build_pairs(records, clusters, cfg, {}, training);
  attach_outcome_labels(set, records, exec_q, cf_q);

  std::size_t labelled = 0;
  for (std::size_t j = 0; j < set.pairs.size(); ++j) {
    if (records[set.source_record[j]].outcome->observed) {
      REQUIRE(set.pairs[j].outcome_label.has_value());
      CHECK(*set.pairs[j].outcome_label == doctest::Approx(0.2).epsilon(1e-12));
      labelled++;
    } else {
      CHECK(!set.pairs[j].outcome_label.has_value());
    }
  }
  CHECK(labelled == 10);

  // fraction 0.2 -> stride 5 over labelled pairs only: 2 of 10 held out.
  const AnchorSplit split = split_for_anchor(set, 0.2);
  CHECK(split.heldout.size() == 2);
  CHECK(split.train.size() == set.pairs.size() - 2);
  for (const auto& p : split.heldout) CHECK(p.outcome_label.has_value());

  const AnchorSplit none = split_for_anchor(set, 0.0);
  CHECK(none.heldout.empty());
  CHECK(none.train.size() == set.pairs.size());
}
