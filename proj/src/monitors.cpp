#include "olab/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "olab/preference.hpp"

namespace olab {
namespace {

int band_of(double kappa, const std::vector<double>& edges) {
  int b = 0;
  for (double e : edges) {
    if (kappa < e) break;
    ++b;
  }
  return b;
}

struct Counts {
  std::size_t interactions = 0;
  std::size_t overrides = 0;
};

}  // namespace

std::optional<double> StratifiedRates::rate(int band, int domain, int window) const {
  for (const auto& s : strata)
    if (s.band == band && s.domain == domain && s.window == window) return s.rate;
  return std::nullopt;
}

std::optional<double> StratifiedRates::gap(int domain, int window) const {
  for (const auto& g : gaps)
    if (g.domain == domain && g.window == window) return g.gap;
  return std::nullopt;
}

StratifiedRates stratified_override_rates(const std::vector<InteractionRecord>& records,
                                          const std::map<std::pair<int, int>, double>& kappa,
                                          const std::vector<double>& band_edges,
                                          int window_size) {
  if (band_edges.empty()) throw std::invalid_argument("stratified rates: no band edges");
  for (std::size_t i = 0; i < band_edges.size(); ++i) {
    if (!(band_edges[i] > 0.0 && band_edges[i] < 1.0))
      throw std::invalid_argument("stratified rates: band edges must lie inside (0,1)");
    if (i > 0 && !(band_edges[i] > band_edges[i - 1]))
      throw std::invalid_argument("stratified rates: band edges must be strictly increasing");
  }
  if (window_size <= 0) throw std::invalid_argument("stratified rates: window size must be > 0");

  StratifiedRates out;
  out.band_edges = band_edges;
  out.window_size = window_size;

  std::map<std::tuple<int, int, int>, Counts> cells;  // (band, domain, window)
  for (const auto& r : records) {
    auto it = kappa.find({r.clinician_id, r.state.domain_id});
    if (it == kappa.end()) it = kappa.find({r.clinician_id, 0});
    if (it == kappa.end()) continue;
    const int band = band_of(it->second, band_edges);
    const int window = r.state.time_index / window_size;
    auto& c = cells[{band, r.state.domain_id, window}];
    c.interactions++;
    if (r.decision.is_override()) c.overrides++;
  }

  for (const auto& [key, c] : cells) {
    StratifiedRates::Stratum s;
    s.band = std::get<0>(key);
    s.domain = std::get<1>(key);
    s.window = std::get<2>(key);
    s.interactions = c.interactions;
    s.overrides = c.overrides;
    s.rate = static_cast<double>(c.overrides) / static_cast<double>(c.interactions);
    out.strata.push_back(s);
  }

  const int high_band = static_cast<int>(band_edges.size());
  std::map<std::pair<int, int>, std::pair<std::optional<double>, std::optional<double>>> ends;
  for (const auto& s : out.strata) {
    auto& e = ends[{s.domain, s.window}];
    if (s.band == 0) e.first = s.rate;
    if (s.band == high_band) e.second = s.rate;
  }
  for (const auto& [key, e] : ends) {
    if (!e.first || !e.second) continue;
    StratifiedRates::Gap g;
    g.domain = key.first;
    g.window = key.second;
    g.low_rate = *e.first;
    g.high_rate = *e.second;
    g.gap = g.high_rate - g.low_rate;
    out.gaps.push_back(g);
  }
  return out;
}

std::array<ConcordanceRow, kNumOverrideTypes> concordance_by_type(
    const std::vector<InteractionRecord>& records,
    const std::vector<double>& counterfactual_quality, const std::vector<TypePosterior>& posteriors,
    const std::vector<std::size_t>& posterior_record, double min_weight) {
  if (posteriors.size() != posterior_record.size())
    throw std::invalid_argument("concordance_by_type: posterior index misalignment");

  std::array<double, kNumOverrideTypes> mass{};
  std::array<double, kNumOverrideTypes> score{};
  for (std::size_t j = 0; j < posteriors.size(); ++j) {
    const std::size_t i = posterior_record[j];
    if (i >= records.size() || i >= counterfactual_quality.size()) continue;
    const auto& outcome = records[i].outcome;
    if (!outcome || !outcome->observed || !outcome->quality) continue;
    const double q_exec = *outcome->quality;
    const double q_cf = counterfactual_quality[i];
    const double win = q_exec > q_cf ? 1.0 : (q_exec == q_cf ? 0.5 : 0.0);
    for (std::size_t t = 0; t < kNumOverrideTypes; ++t) {
      mass[t] += posteriors[j].probs[t];
      score[t] += posteriors[j].probs[t] * win;
    }
  }

  std::array<ConcordanceRow, kNumOverrideTypes> rows{};
  for (std::size_t t = 0; t < kNumOverrideTypes; ++t) {
    rows[t].type = static_cast<OverrideType>(t);
    rows[t].weight_mass = mass[t];
    rows[t].sufficient = mass[t] >= min_weight;
    rows[t].concordance = mass[t] > 0.0 ? score[t] / mass[t] : 0.5;
  }
  return rows;
}

std::vector<AutomationFlag> acceptance_entropy_flags(const std::vector<InteractionRecord>& records,
                                                     int window_size, double floor_bits,
                                                     double ceiling) {
  if (window_size <= 0) throw std::invalid_argument("acceptance entropy: window size must be > 0");
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> cells;  // (acc, total)
  for (const auto& r : records) {
    auto& c = cells[{r.clinician_id, r.state.time_index / window_size}];
    c.second++;
    if (!r.decision.is_override()) c.first++;
  }
  std::vector<AutomationFlag> flags;
  for (const auto& [key, c] : cells) {
    const double rate = static_cast<double>(c.first) / static_cast<double>(c.second);
    const double bits = binary_entropy(rate);
    if (bits < floor_bits && rate > ceiling)
      flags.push_back({key.first, key.second, rate, bits});
  }
  return flags;
}

SuppressionAudit suppression_audit(const std::vector<std::vector<std::size_t>>& round_counts,
                                   const std::vector<bool>& guideline_first_line, double floor,
                                   double probe_rate) {
  if (round_counts.size() < 2)
    throw std::invalid_argument("suppression audit: needs at least two rounds of logs");
  const std::size_t n_actions = guideline_first_line.size();
  for (const auto& row : round_counts)
    if (row.size() != n_actions)
      throw std::invalid_argument("suppression audit: round log width mismatch");

  SuppressionAudit out;
  for (std::size_t a = 0; a < n_actions; ++a) {
    if (!guideline_first_line[a]) continue;
    for (std::size_t r = 0; r < round_counts.size(); ++r) {
      std::size_t total = 0;
      for (std::size_t x = 0; x < n_actions; ++x) total += round_counts[r][x];
      const double share =
          total == 0 ? 0.0 : static_cast<double>(round_counts[r][a]) / static_cast<double>(total);
      if (share < floor) {
        out.suppressed.push_back({static_cast<int>(a), static_cast<int>(r), share});
        break;  // first qualifying round only
      }
    }
  }

  if (!out.suppressed.empty() && probe_rate > 0.0) {
    std::size_t last_total = 0;
    for (std::size_t x = 0; x < n_actions; ++x) last_total += round_counts.back()[x];
    const auto stride =
        static_cast<std::size_t>(std::ceil(1.0 / std::min(1.0, probe_rate)));
    const int next_round = static_cast<int>(round_counts.size());
    for (const auto& s : out.suppressed)
      for (std::size_t idx = 0; idx < last_total; idx += stride)
        out.probes.push_back({next_round, idx, s.action_id});
  }
  return out;
}

double complexity_trend(const std::vector<InteractionRecord>& records, int window_size) {
  if (window_size <= 0) throw std::invalid_argument("complexity trend: window size must be > 0");
  std::map<int, std::pair<double, std::size_t>> windows;
  for (const auto& r : records) {
    auto& w = windows[r.state.time_index / window_size];
    w.first += r.recommendation.complexity;
    w.second++;
  }
  if (windows.size() < 2) return 0.0;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double n = static_cast<double>(windows.size());
  for (const auto& [idx, w] : windows) {
    const double x = static_cast<double>(idx);
    const double y = w.first / static_cast<double>(w.second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  return denom == 0.0 ? 0.0 : (n * sxy - sx * sy) / denom;
}

std::map<int, double> observability_by_domain(const std::vector<InteractionRecord>& records) {
  std::map<int, std::pair<std::size_t, std::size_t>> cells;  // (observed, eligible)
  for (const auto& r : records) {
    if (!r.outcome) continue;  // too recent to have a follow-up either way
    auto& c = cells[r.state.domain_id];
    c.second++;
    if (r.outcome->observed) c.first++;
  }
  std::map<int, double> out;
  for (const auto& [d, c] : cells)
    out[d] = static_cast<double>(c.first) / static_cast<double>(c.second);
  return out;
}

MonitorReport run_monitors(const std::vector<InteractionRecord>& records,
                           const std::vector<double>& counterfactual_quality,
                           const std::vector<TypePosterior>& posteriors,
                           const std::vector<std::size_t>& posterior_record,
                           const std::map<std::pair<int, int>, double>& kappa,
                           const std::vector<std::vector<std::size_t>>& round_counts,
                           const ScenarioConfig& config) {
  MonitorReport report;
  const auto& mon = config.monitors;
  report.automation_flags = acceptance_entropy_flags(records, mon.window_steps,
                                                     mon.entropy_floor_bits,
                                                     mon.accept_rate_ceiling);
  report.concordance = concordance_by_type(records, counterfactual_quality, posteriors,
                                           posterior_record, mon.min_concordance_weight);
  report.complexity_trend = complexity_trend(records, mon.window_steps);
  report.observability_by_domain = observability_by_domain(records);
  if (round_counts.size() >= 2) {
    std::vector<bool> guideline;
    guideline.reserve(config.actions.size());
    for (const auto& a : config.actions) guideline.push_back(a.guideline_first_line);
    report.suppression =
        suppression_audit(round_counts, guideline, mon.surfacing_floor, mon.probe_rate);
  }
  report.rates = stratified_override_rates(records, kappa, {mon.kappa_low_cut, mon.kappa_high_cut},
                                           mon.window_steps);
  return report;
}

}  // namespace olab
