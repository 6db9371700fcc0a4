#include "olab/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace olab {
namespace {

// Signal vector layout shared by extract_signals and classify_override.
// proximity enters as closeness = max(0, 1 - proximity/2) so that near
// modifications score high and an absent alternative scores zero.
std::array<double, ClassifierParams::kNumSignals> feature_vector(const OverrideSignals& s) {
  double closeness = 0.0;
  if (s.proximity) closeness = std::max(0.0, 1.0 - *s.proximity / 2.0);
  return {1.0, closeness, s.class_preserved ? 1.0 : 0.0, s.clinician_domain_override_rate,
          s.cohort_high_kappa_accept_rate};
}

OverrideType reason_type(ReasonCode code) {
  switch (code) {
    case ReasonCode::PATIENT_PREFERENCE: return OverrideType::CONTEXT;
    case ReasonCode::NOT_COMFORTABLE: return OverrideType::CAPABILITY;
    case ReasonCode::PROTOCOL: return OverrideType::PROTOCOL;
    case ReasonCode::NO_TIME: return OverrideType::WORKFLOW;
    case ReasonCode::OTHER: break;
  }
  return OverrideType::JUDGMENT;  // unstructured free-form reasons read as judgment calls
}

double euclidean(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

OverrideType TypePosterior::argmax() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return static_cast<OverrideType>(best);
}

bool TypePosterior::valid(double tol) const {
  double sum = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) return false;
    sum += p;
  }
  return std::abs(sum - 1.0) <= tol;
}

ClassifierParams ClassifierParams::defaults() {
  ClassifierParams p;
  // Rows: CONTEXT, JUDGMENT, WORKFLOW, PROTOCOL, CAPABILITY.
  // Columns: bias, proximity closeness, class preserved, clinician domain
  // override rate, cohort high-kappa accept rate.
  p.weights[0] = {0.3, 0.0, 0.0, 0.0, 0.0};    // context: mostly reason-driven
  p.weights[1] = {0.5, 0.5, 0.5, -2.0, 0.0};   // judgment: rare overrider, near mods
  p.weights[2] = {-0.5, 0.0, 0.0, 0.0, 0.0};   // workflow: reason-driven
  p.weights[3] = {-0.5, 0.0, 0.0, 0.0, 0.0};   // protocol: reason-driven
  p.weights[4] = {-1.5, 0.0, 0.0, 2.5, 2.5};   // capability: habitual vs peer acceptance
  p.reason_bonus = 3.0;
  return p;
}

TypeWeightTable TypeWeightTable::defaults() {
  TypeWeightTable t;
  t.reward = {0.5, 1.0, 0.0, 0.0, 0.25};
  t.capability = {0.5, 1.0, 0.0, 0.0, 1.0};
  return t;
}

SignalContext build_signal_context(const std::vector<InteractionRecord>& records,
                                   const std::vector<int>& record_clusters,
                                   const std::vector<SignalContext::ActionMeta>& actions,
                                   const std::map<int, double>& kappa, double high_kappa_cut) {
  if (record_clusters.size() != records.size())
    throw std::invalid_argument("build_signal_context: cluster list size mismatch");
  SignalContext ctx;
  ctx.actions = actions;

  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> counts;  // (ovr, total)
  std::map<int, std::pair<std::size_t, std::size_t>> cohort;                  // (acc, total)
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    ctx.record_cluster[static_cast<int>(i)] = record_clusters[i];
    auto& c = counts[{r.clinician_id, r.state.domain_id}];
    c.second++;
    if (r.decision.is_override()) c.first++;

    auto it = kappa.find(r.clinician_id);
    const bool high = it != kappa.end() && it->second >= high_kappa_cut;
    if (high) {
      auto& h = cohort[record_clusters[i]];
      h.second++;
      if (!r.decision.is_override()) h.first++;
    }
  }
  for (const auto& [key, c] : counts)
    ctx.override_rate[key] = c.second ? static_cast<double>(c.first) / c.second : 0.0;
  for (const auto& [cl, c] : cohort)
    ctx.cohort_high_kappa_accept[cl] = c.second ? static_cast<double>(c.first) / c.second : 0.0;
  return ctx;
}

OverrideSignals extract_signals(const InteractionRecord& record, const SignalContext& ctx,
                                int record_index) {
  if (!record.decision.is_override())
    throw std::invalid_argument("extract_signals: called on an ACCEPT record");

  OverrideSignals s;
  if (record.decision.alternative) {
    const auto& alt = *record.decision.alternative;
    s.proximity = euclidean(alt.features, record.recommendation.features);
    const int rec_id = record.recommendation.action_id;
    const int alt_id = alt.action_id;
    if (rec_id >= 0 && rec_id < static_cast<int>(ctx.actions.size()) && alt_id >= 0 &&
        alt_id < static_cast<int>(ctx.actions.size()))
      s.class_preserved = ctx.actions[rec_id].class_tag == ctx.actions[alt_id].class_tag;
  }
  auto rate = ctx.override_rate.find({record.clinician_id, record.state.domain_id});
  if (rate != ctx.override_rate.end()) s.clinician_domain_override_rate = rate->second;
  auto cl = ctx.record_cluster.find(record_index);
  if (cl != ctx.record_cluster.end()) {
    auto acc = ctx.cohort_high_kappa_accept.find(cl->second);
    if (acc != ctx.cohort_high_kappa_accept.end()) s.cohort_high_kappa_accept_rate = acc->second;
  }
  s.structured_reason = record.decision.reason;
  return s;
}

TypePosterior classify_override(const OverrideSignals& signals, const ClassifierParams& params) {
  const auto x = feature_vector(signals);
  std::array<double, kNumOverrideTypes> logits{};
  for (std::size_t t = 0; t < kNumOverrideTypes; ++t) {
    double z = 0.0;
    for (std::size_t j = 0; j < ClassifierParams::kNumSignals; ++j)
      z += params.weights[t][j] * x[j];
    logits[t] = z;
  }
  if (signals.structured_reason && *signals.structured_reason != ReasonCode::OTHER)
    logits[static_cast<std::size_t>(reason_type(*signals.structured_reason))] +=
        params.reason_bonus;

  const double zmax = *std::max_element(logits.begin(), logits.end());
  TypePosterior post;
  double sum = 0.0;
  for (std::size_t t = 0; t < kNumOverrideTypes; ++t) {
    post.probs[t] = std::exp(logits[t] - zmax);
    sum += post.probs[t];
  }
  for (double& p : post.probs) p /= sum;
  return post;
}

std::pair<double, double> class_weights(const TypePosterior& posterior,
                                        const TypeWeightTable& table) {
  if (!posterior.valid()) throw std::invalid_argument("class_weights: invalid posterior");
  double reward = 0.0;
  double capability = 0.0;
  for (std::size_t t = 0; t < kNumOverrideTypes; ++t) {
    reward += posterior.probs[t] * table.reward[t];
    capability += posterior.probs[t] * table.capability[t];
  }
  return {reward, capability};
}

RecordClassification classify_records(const std::vector<InteractionRecord>& records,
                                      const std::vector<int>& record_clusters,
                                      const std::vector<SignalContext::ActionMeta>& actions,
                                      const ClassifierParams& params, const TypeWeightTable& table,
                                      const std::map<int, double>& kappa_by_clinician,
                                      double high_kappa_cut) {
  SignalContext ctx =
      build_signal_context(records, record_clusters, actions, kappa_by_clinician, high_kappa_cut);
  RecordClassification out;
  out.weights.assign(records.size(), {1.0, 1.0});
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].decision.is_override()) continue;
    const OverrideSignals sig = extract_signals(records[i], ctx, static_cast<int>(i));
    const TypePosterior post = classify_override(sig, params);
    out.weights[i] = class_weights(post, table);
    out.posteriors.push_back(post);
    out.posterior_record.push_back(i);
  }
  return out;
}

}  // namespace olab
