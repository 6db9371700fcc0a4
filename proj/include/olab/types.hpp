#ifndef OLAB_TYPES_HPP
#define OLAB_TYPES_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace olab {

using Vec = std::vector<double>;

// Encoded patient state s: a point near one of the scenario's state clusters.
struct PatientState {
  int patient_id = 0;
  int domain_id = 0;
  Vec features;       // phi(s), length = configured state dimension
  int time_index = 0;
};

// An action from the finite catalog. `features` is psi(a); `complexity` feeds
// the suppression monitor's complexity-trend statistic.
struct ClinicalAction {
  int action_id = 0;
  Vec features;
  double complexity = 0.0;
};

enum class ContractKind { FFS, OUTCOME_BASED, CUSTOM };

// Organizational/contract context c conditioning the reward.
struct ContractContext {
  int context_id = 0;
  ContractKind kind = ContractKind::OUTCOME_BASED;
  Vec features;  // gamma(c)
};

enum class DecisionKind { ACCEPT, MODIFY, REJECT };

// Structured override reason codes captured at decision time (when the
// clinician provides one).
enum class ReasonCode {
  PATIENT_PREFERENCE,
  NOT_COMFORTABLE,
  PROTOCOL,
  NO_TIME,
  OTHER,
};

struct Decision {
  DecisionKind kind = DecisionKind::ACCEPT;
  // Required for MODIFY, optional for REJECT, never present for ACCEPT.
  std::optional<ClinicalAction> alternative;
  std::optional<ReasonCode> reason;

  bool is_override() const { return kind != DecisionKind::ACCEPT; }
};

// Follow-up observation o_{t+delta}. `observed == false` means the platform
// lost the outcome (out-of-network care, disenrollment); quality is only
// present for observed outcomes.
struct Outcome {
  std::optional<double> quality;  // in [0,1], higher is a better trajectory
  bool event_flag = false;        // adverse event
  int lag = 0;                    // steps between decision and observation
  bool observed = false;
};

// One interaction record I_t. `executed` is the action actually taken: the
// recommendation for ACCEPT, the alternative for MODIFY, and the alternative
// (or an unrecorded action, represented by the alternative being absent from
// the decision) for REJECT.
struct InteractionRecord {
  PatientState state;
  ClinicalAction recommendation;
  Decision decision;
  ClinicalAction executed;
  int clinician_id = 0;
  ContractContext contract;
  std::optional<Outcome> outcome;  // absent until the follow-up horizon passes
};

// Per clinician x domain x time capability. The ground-truth decomposition
// into execution/alignment parts exists only inside the simulator; the scalar
// is kappa = exec * align.
struct CapabilityProfile {
  int clinician_id = 0;
  int domain_id = 0;
  int time_index = 0;
  double kappa = 0.5;
  std::optional<std::pair<double, double>> ground_truth_parts;  // (exec, align)
};

// Cold-start metadata for one clinician: an optional credential/experience
// proxy in [0,1] (negative = absent) that shifts the capability prior.
struct ClinicianProxy {
  int clinician_id = 0;
  double proxy_score = -1.0;
};

enum class PairKind { ACCEPT_PAIR, REJECT_PAIR, MODIFY_PAIR };

// A weighted preference comparison assembled from one interaction record.
struct PreferencePair {
  ClinicalAction preferred;
  ClinicalAction dispreferred;
  PatientState state;
  ContractContext contract;
  int clinician_id = 0;
  int domain_id = 0;
  int time_index = 0;
  PairKind kind = PairKind::ACCEPT_PAIR;
  double capability_weight = 1.0;      // beta(kappa) at pair construction time
  double reward_class_weight = 1.0;    // taxonomy weight for the reward loss
  double capability_class_weight = 1.0;  // taxonomy weight for the E-step
  // Realized outcome-quality difference (executed minus counterfactual arm),
  // present when the record's outcome was observed.
  std::optional<double> outcome_label;
};

}  // namespace olab

#endif  // OLAB_TYPES_HPP
