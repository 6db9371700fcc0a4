#ifndef OLAB_CSV_HPP
#define OLAB_CSV_HPP

#include <cstddef>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "olab/scenario.hpp"
#include "olab/types.hpp"

namespace olab {

// Schema or parse failure with enough context to locate the bad cell.
class CsvError : public std::runtime_error {
 public:
  CsvError(const std::string& message, const std::string& field, std::size_t line);
  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }

 private:
  std::string field_;
  std::size_t line_;
};

// Record stream, one row per interaction:
// t,patient,domain,clinician,contract,rec_action,decision,alt_action,
// outcome_quality,outcome_observed,reason_code
// Action and contract cells hold catalog ids from the config; empty cells
// mean absent. Feature vectors travel in the states sidecar, not here.
void write_records_csv(const std::filesystem::path& path,
                       const std::vector<InteractionRecord>& records,
                       const ScenarioConfig& config);

// Inverse of write_records_csv; catalog ids are resolved against `config`.
// Throws CsvError naming the offending field and line.
std::vector<InteractionRecord> read_records_csv(const std::filesystem::path& path,
                                                const ScenarioConfig& config);

// Patient-state feature sidecar: t,patient,cluster,f0..f{D-1}, one row per
// record, same order as the record stream.
void write_states_csv(const std::filesystem::path& path,
                      const std::vector<InteractionRecord>& records,
                      const std::vector<int>& record_clusters);

struct StateRows {
  std::vector<Vec> features;
  std::vector<int> clusters;
};
StateRows read_states_csv(const std::filesystem::path& path);

// Minimal RFC-4180-style quoting for cells containing separators/quotes.
std::string csv_escape(const std::string& cell);
std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace olab

#endif  // OLAB_CSV_HPP
