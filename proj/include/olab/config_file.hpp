#ifndef OLAB_CONFIG_FILE_HPP
#define OLAB_CONFIG_FILE_HPP

#include <filesystem>
#include <stdexcept>
#include <string>

#include "olab/scenario.hpp"

namespace olab {

// Config schema violation; `field_path` is dotted, e.g.
// "population[2].archetype.exec".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, const std::string& field_path);
  const std::string& field_path() const { return field_path_; }

 private:
  std::string field_path_;
};

// Scenario configs are JSON with a mandatory schema_version field. Unknown
// keys are rejected (catches typos), missing keys fall back to defaults
// except the required ones: schema_version, name, seed, actions, clusters,
// contracts, true_rewards, population.
ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& text, const std::string& origin);

// Serializes every resolved field, defaults included, so a run's manifest
// pins the exact parameterization. parse(serialize(c)) == c.
std::string serialize_config(const ScenarioConfig& config);
void save_config(const ScenarioConfig& config, const std::filesystem::path& path);

}  // namespace olab

#endif  // OLAB_CONFIG_FILE_HPP
