#ifndef OLAB_COMMANDS_HPP
#define OLAB_COMMANDS_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace olab {

// Process exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitVerdictFail = 3;

enum class Weighting { NAIVE, KAPPA };

struct RunOptions {
  std::optional<std::filesystem::path> config_path;
  std::filesystem::path out_dir;  // resolved from --out or OVERRIDE_LAB_OUT
  std::optional<std::uint64_t> seed;
  std::optional<Weighting> weighting;
  std::optional<int> rounds;
  std::optional<std::string> scenario;  // named canonical configuration
  std::filesystem::path dataset_dir;    // for train/audit: a cmd_simulate output dir
  std::optional<std::filesystem::path> train_dir;  // for audit: a cmd_train output dir
};

// Each command returns a process exit code and reports problems on stderr.
// simulate: dataset CSVs + ground-truth JSON + manifest into out_dir.
int cmd_simulate(const RunOptions& opts);
// train: trace CSV, summary JSON (margins, kappa table, anchor report, flags).
int cmd_train(const RunOptions& opts);
// audit: stratified-rates CSV, concordance CSV, monitor-report JSON.
int cmd_audit(const RunOptions& opts);
// reproduce: full pipeline for one named experiment + verdict JSON; returns
// kExitVerdictFail when the scenario's checks do not hold.
int cmd_reproduce(const RunOptions& opts);

std::filesystem::path default_out_dir();  // $OVERRIDE_LAB_OUT or ./out

}  // namespace olab

#endif  // OLAB_COMMANDS_HPP
