#include "olab/csv.hpp"

#include <fstream>
#include <map>
#include <sstream>

namespace olab {
namespace {

constexpr const char* kRecordHeader =
    "t,patient,domain,clinician,contract,rec_action,decision,alt_action,"
    "outcome_quality,outcome_observed,reason_code";

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const char* decision_name(DecisionKind k) {
  switch (k) {
    case DecisionKind::ACCEPT: return "accept";
    case DecisionKind::MODIFY: return "modify";
    case DecisionKind::REJECT: return "reject";
  }
  return "accept";
}

const char* reason_name(ReasonCode r) {
  switch (r) {
    case ReasonCode::PATIENT_PREFERENCE: return "patient_preference";
    case ReasonCode::NOT_COMFORTABLE: return "not_comfortable";
    case ReasonCode::PROTOCOL: return "protocol";
    case ReasonCode::NO_TIME: return "no_time";
    case ReasonCode::OTHER: return "other";
  }
  return "other";
}

DecisionKind parse_decision(const std::string& s, std::size_t line) {
  if (s == "accept") return DecisionKind::ACCEPT;
  if (s == "modify") return DecisionKind::MODIFY;
  if (s == "reject") return DecisionKind::REJECT;
  throw CsvError("unknown decision '" + s + "'", "decision", line);
}

ReasonCode parse_reason(const std::string& s, std::size_t line) {
  if (s == "patient_preference") return ReasonCode::PATIENT_PREFERENCE;
  if (s == "not_comfortable") return ReasonCode::NOT_COMFORTABLE;
  if (s == "protocol") return ReasonCode::PROTOCOL;
  if (s == "no_time") return ReasonCode::NO_TIME;
  if (s == "other") return ReasonCode::OTHER;
  throw CsvError("unknown reason '" + s + "'", "reason_code", line);
}

long parse_long(const std::string& s, const char* field, std::size_t line) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw CsvError("not an integer: '" + s + "'", field, line);
  }
}

double parse_double(const std::string& s, const char* field, std::size_t line) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw CsvError("not a number: '" + s + "'", field, line);
  }
}

}  // namespace

CsvError::CsvError(const std::string& message, const std::string& field, std::size_t line)
    : std::runtime_error("line " + std::to_string(line) + ", field '" + field + "': " + message),
      field_(field),
      line_(line) {}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

void write_records_csv(const std::filesystem::path& path,
                       const std::vector<InteractionRecord>& records,
                       const ScenarioConfig& config) {
  std::ofstream out(path, std::ios::binary);  // binary: no platform newline games
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << kRecordHeader << "\n";
  for (const auto& r : records) {
    out << r.state.time_index << ',' << r.state.patient_id << ',' << r.state.domain_id << ','
        << r.clinician_id << ',' << csv_escape(config.contracts[r.contract.context_id].id) << ','
        << csv_escape(config.actions[r.recommendation.action_id].id) << ','
        << decision_name(r.decision.kind) << ',';
    if (r.decision.alternative)
      out << csv_escape(config.actions[r.decision.alternative->action_id].id);
    out << ',';
    if (r.outcome && r.outcome->observed && r.outcome->quality) out << fmt(*r.outcome->quality);
    out << ',';
    if (r.outcome) out << (r.outcome->observed ? '1' : '0');
    out << ',';
    if (r.decision.reason) out << reason_name(*r.decision.reason);
    out << '\n';
  }
}

std::vector<InteractionRecord> read_records_csv(const std::filesystem::path& path,
                                                const ScenarioConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open for reading: " + path.string(), "file", 0);

  std::map<std::string, int> action_ids, contract_ids;
  for (std::size_t i = 0; i < config.actions.size(); ++i)
    action_ids[config.actions[i].id] = static_cast<int>(i);
  for (std::size_t i = 0; i < config.contracts.size(); ++i)
    contract_ids[config.contracts[i].id] = static_cast<int>(i);

  const auto make_action = [&](int id) {
    return ClinicalAction{id, config.actions[id].features, config.actions[id].complexity};
  };

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw CsvError("empty file", "header", 1);
  lineno = 1;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordHeader) throw CsvError("unexpected header", "header", 1);

  std::vector<InteractionRecord> records;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 11)
      throw CsvError("expected 11 cells, got " + std::to_string(cells.size()), "row", lineno);

    InteractionRecord r;
    r.state.time_index = static_cast<int>(parse_long(cells[0], "t", lineno));
    r.state.patient_id = static_cast<int>(parse_long(cells[1], "patient", lineno));
    r.state.domain_id = static_cast<int>(parse_long(cells[2], "domain", lineno));
    if (r.state.domain_id < 0 || r.state.domain_id >= static_cast<int>(config.domains.size()))
      throw CsvError("domain index out of range", "domain", lineno);
    r.clinician_id = static_cast<int>(parse_long(cells[3], "clinician", lineno));

    auto con = contract_ids.find(cells[4]);
    if (con == contract_ids.end())
      throw CsvError("unknown contract id '" + cells[4] + "'", "contract", lineno);
    const auto& cs = config.contracts[con->second];
    r.contract = ContractContext{con->second, cs.kind, cs.features};

    auto rec = action_ids.find(cells[5]);
    if (rec == action_ids.end())
      throw CsvError("unknown action id '" + cells[5] + "'", "rec_action", lineno);
    r.recommendation = make_action(rec->second);

    r.decision.kind = parse_decision(cells[6], lineno);
    if (!cells[7].empty()) {
      auto alt = action_ids.find(cells[7]);
      if (alt == action_ids.end())
        throw CsvError("unknown action id '" + cells[7] + "'", "alt_action", lineno);
      r.decision.alternative = make_action(alt->second);
    }
    if (r.decision.kind == DecisionKind::MODIFY && !r.decision.alternative)
      throw CsvError("modify row without an alternative", "alt_action", lineno);
    if (r.decision.kind == DecisionKind::ACCEPT && r.decision.alternative)
      throw CsvError("accept row with an alternative", "alt_action", lineno);

    if (!cells[9].empty()) {
      Outcome o;
      const long obs = parse_long(cells[9], "outcome_observed", lineno);
      if (obs != 0 && obs != 1)
        throw CsvError("outcome_observed must be 0 or 1", "outcome_observed", lineno);
      o.observed = obs == 1;
      o.lag = config.outcome_lag;
      if (o.observed) {
        if (cells[8].empty())
          throw CsvError("observed outcome without quality", "outcome_quality", lineno);
        const double q = parse_double(cells[8], "outcome_quality", lineno);
        if (!(q >= 0.0 && q <= 1.0))
          throw CsvError("quality must lie in [0,1]", "outcome_quality", lineno);
        o.quality = q;
        o.event_flag = q < config.adverse_event_threshold;
      } else if (!cells[8].empty()) {
        throw CsvError("quality present on unobserved outcome", "outcome_quality", lineno);
      }
      r.outcome = o;
    } else if (!cells[8].empty()) {
      throw CsvError("quality present without observed flag", "outcome_quality", lineno);
    }

    if (!cells[10].empty()) r.decision.reason = parse_reason(cells[10], lineno);

    // Executed is not serialized; reconstruct the learner-visible version.
    if (!r.decision.is_override()) r.executed = r.recommendation;
    else if (r.decision.alternative) r.executed = *r.decision.alternative;
    else r.executed = make_action(config.default_action());

    records.push_back(std::move(r));
  }
  return records;
}

void write_states_csv(const std::filesystem::path& path,
                      const std::vector<InteractionRecord>& records,
                      const std::vector<int>& record_clusters) {
  if (records.size() != record_clusters.size())
    throw std::invalid_argument("write_states_csv: cluster list size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());

  const std::size_t dim = records.empty() ? 0 : records.front().state.features.size();
  out << "t,patient,cluster";
  for (std::size_t j = 0; j < dim; ++j) out << ",f" << j;
  out << "\n";
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& s = records[i].state;
    out << s.time_index << ',' << s.patient_id << ',' << record_clusters[i];
    for (double f : s.features) out << ',' << fmt(f);
    out << '\n';
  }
}

StateRows read_states_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open for reading: " + path.string(), "file", 0);
  std::string line;
  if (!std::getline(in, line)) throw CsvError("empty file", "header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 3 || header[0] != "t" || header[1] != "patient" || header[2] != "cluster")
    throw CsvError("unexpected header", "header", 1);
  const std::size_t dim = header.size() - 3;

  StateRows rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw CsvError("cell count does not match header", "row", lineno);
    rows.clusters.push_back(static_cast<int>(parse_long(cells[2], "cluster", lineno)));
    Vec f(dim);
    for (std::size_t j = 0; j < dim; ++j)
      f[j] = parse_double(cells[3 + j], header[3 + j].c_str(), lineno);
    rows.features.push_back(std::move(f));
  }
  return rows;
}

}  // namespace olab
