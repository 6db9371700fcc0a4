#ifndef OLAB_MONITORS_HPP
#define OLAB_MONITORS_HPP

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "olab/classifier.hpp"
#include "olab/scenario.hpp"
#include "olab/types.hpp"

namespace olab {

// Override rates cut by kappa band x domain x time window. Empty strata stay
// absent rather than reading as rate zero.
struct StratifiedRates {
  std::vector<double> band_edges;  // interior edges; bands = edges.size() + 1
  int window_size = 0;

  struct Stratum {
    int band = 0;
    int domain = 0;
    int window = 0;
    std::size_t interactions = 0;
    std::size_t overrides = 0;
    double rate = 0.0;
  };
  std::vector<Stratum> strata;  // only non-empty strata

  struct Gap {
    int domain = 0;
    int window = 0;
    double high_rate = 0.0;
    double low_rate = 0.0;
    double gap = 0.0;  // high-band minus low-band rate
  };
  std::vector<Gap> gaps;  // present only where both end bands have data

  std::optional<double> rate(int band, int domain, int window) const;
  std::optional<double> gap(int domain, int window) const;
};

struct AutomationFlag {
  int clinician_id = 0;
  int window = 0;
  double accept_rate = 0.0;
  double entropy_bits = 0.0;
};

struct SuppressedAction {
  int action_id = 0;
  int round = 0;          // first qualifying round
  double surfacing = 0.0; // recommendation share that round
};

// Deterministic force-surfacing slot: at `state_index` of `round`, surface
// `action_id` regardless of the recommender's ranking.
struct ProbeSlot {
  int round = 0;
  std::size_t state_index = 0;
  int action_id = 0;
};

struct SuppressionAudit {
  std::vector<SuppressedAction> suppressed;
  std::vector<ProbeSlot> probes;
};

struct ConcordanceRow {
  OverrideType type = OverrideType::CONTEXT;
  double weight_mass = 0.0;   // sum of posterior mass with usable outcomes
  double concordance = 0.5;   // executed arm beat counterfactual (ties 0.5)
  bool sufficient = false;    // weight_mass >= configured minimum
};

struct MonitorReport {
  std::vector<AutomationFlag> automation_flags;
  SuppressionAudit suppression;
  StratifiedRates rates;
  double complexity_trend = 0.0;  // slope of mean recommended complexity per window
  std::map<int, double> observability_by_domain;  // outcome capture rate
  std::array<ConcordanceRow, kNumOverrideTypes> concordance{};
};

// Override share per (kappa band, domain, window). `kappa` keys are
// (clinician, domain); records from unmapped clinicians fall back to the
// domain-ignored (clinician, 0) entry, else are skipped. Band edges must be
// strictly increasing inside (0,1).
StratifiedRates stratified_override_rates(const std::vector<InteractionRecord>& records,
                                          const std::map<std::pair<int, int>, double>& kappa,
                                          const std::vector<double>& band_edges, int window_size);

// Posterior-weighted per-type rate at which the executed arm's outcome beat
// the counterfactual arm's. `counterfactual_quality` aligns with `records`;
// only override records with observed outcomes contribute. Rows with under
// `min_weight` of posterior mass are marked insufficient.
std::array<ConcordanceRow, kNumOverrideTypes> concordance_by_type(
    const std::vector<InteractionRecord>& records,
    const std::vector<double>& counterfactual_quality, const std::vector<TypePosterior>& posteriors,
    const std::vector<std::size_t>& posterior_record,  // record index per posterior
    double min_weight = 20.0);

// Flags clinicians whose windowed accept rate is both extreme (above
// `ceiling`) and near-deterministic (binary entropy under `floor_bits`).
std::vector<AutomationFlag> acceptance_entropy_flags(const std::vector<InteractionRecord>& records,
                                                     int window_size, double floor_bits,
                                                     double ceiling);

// Surfacing audit over per-round recommendation logs: counts[round][action]
// = times recommended. Guideline first-line actions whose share drops below
// `floor` are listed from the first qualifying round, with a deterministic
// probe schedule (every ceil(1/probe_rate)-th eligible state next round).
// Requires at least two rounds of logs.
SuppressionAudit suppression_audit(const std::vector<std::vector<std::size_t>>& round_counts,
                                   const std::vector<bool>& guideline_first_line, double floor,
                                   double probe_rate);

// Slope (least squares) of mean recommended-action complexity against window
// index; the drift statistic behind "shifts toward lower-complexity actions".
double complexity_trend(const std::vector<InteractionRecord>& records, int window_size);

// Outcome capture rate per domain over records old enough to have outcomes.
std::map<int, double> observability_by_domain(const std::vector<InteractionRecord>& records);

// Bundles everything above using thresholds from `config`.
MonitorReport run_monitors(const std::vector<InteractionRecord>& records,
                           const std::vector<double>& counterfactual_quality,
                           const std::vector<TypePosterior>& posteriors,
                           const std::vector<std::size_t>& posterior_record,
                           const std::map<std::pair<int, int>, double>& kappa,
                           const std::vector<std::vector<std::size_t>>& round_counts,
                           const ScenarioConfig& config);

}  // namespace olab

#endif  // OLAB_MONITORS_HPP
