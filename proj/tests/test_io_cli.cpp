#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "olab/commands.hpp"
#include "olab/config_file.hpp"
#include "olab/csv.hpp"
#include "olab/manifest.hpp"
#include "olab/scenario.hpp"
#include "olab/sha256.hpp"
#include "olab/world_sim.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace olab;
using namespace olab::test;
using nlohmann::json;

namespace {

// Fresh scratch directory per call, cleaned up by the fixture destructor.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("olab_test_" + tag + "_" + std::to_string(++counter));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

std::vector<InteractionRecord> mixed_records(const ScenarioConfig& cfg) {
  std::vector<InteractionRecord> out;

  auto acc = accept_record(cfg, 0, 0);
  Outcome o;
  o.observed = true;
  o.quality = 0.625;
  acc.outcome = o;
  out.push_back(acc);

  auto mod = accept_record(cfg, 1, 1);
  mod.decision.kind = DecisionKind::MODIFY;
  mod.decision.reason = ReasonCode::OTHER;
  mod.decision.alternative = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
  mod.executed = *mod.decision.alternative;
  mod.outcome = Outcome{};  // slot exists but nothing was captured
  out.push_back(mod);

  auto bare = accept_record(cfg, 2, 2);
  bare.decision.kind = DecisionKind::REJECT;
  bare.decision.reason = ReasonCode::NO_TIME;
  bare.executed = make_action(cfg.default_action(), cfg.actions[cfg.default_action()].features,
                              cfg.actions[cfg.default_action()].complexity);
  out.push_back(bare);  // no outcome slot at all: too recent

  auto rej = accept_record(cfg, 3, 3);
  rej.decision.kind = DecisionKind::REJECT;
  rej.decision.reason = ReasonCode::PROTOCOL;
  rej.decision.alternative = make_action(0, cfg.actions[0].features, cfg.actions[0].complexity);
  rej.executed = *rej.decision.alternative;
  Outcome rej_outcome;
  rej_outcome.quality = 0.0;
  rej_outcome.observed = true;
  rej.outcome = rej_outcome;
  out.push_back(rej);

  return out;
}

}  // namespace

TEST_CASE("csv cell quoting round-trips separators and quotes") {
  CHECK(csv_escape("plain") == "plain");
  CHECK(csv_escape("") == "");
  CHECK(csv_escape("a,b") == "\"a,b\"");
  CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");

  CHECK(split_csv_line("a,b,c") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_csv_line("a,,c") == std::vector<std::string>{"a", "", "c"});
  CHECK(split_csv_line("a,") == std::vector<std::string>{"a", ""});
  CHECK(split_csv_line("\"a,b\",c") == std::vector<std::string>{"a,b", "c"});
  CHECK(split_csv_line("\"he said \"\"x\"\"\",y") ==
        std::vector<std::string>{"he said \"x\"", "y"});

  const std::vector<std::string> cells{"plain", "a,b", "\"", "", "tail"};
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i)
    line += (i ? "," : "") + csv_escape(cells[i]);
  CHECK(split_csv_line(line) == cells);
}

TEST_CASE("record and state files round-trip through the catalog") {
  const TempDir dir("csv");
  const ScenarioConfig cfg = tiny_config();
  const auto records = mixed_records(cfg);
  const std::vector<int> clusters(records.size(), 0);

  write_records_csv(dir.path / "records.csv", records, cfg);
  write_states_csv(dir.path / "states.csv", records, clusters);

  const auto back = read_records_csv(dir.path / "records.csv", cfg);
  REQUIRE(back.size() == records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& a = records[i];
    const auto& b = back[i];
    CHECK(b.clinician_id == a.clinician_id);
    CHECK(b.state.time_index == a.state.time_index);
    CHECK(b.state.patient_id == a.state.patient_id);
    CHECK(b.state.domain_id == a.state.domain_id);
    CHECK(b.recommendation.action_id == a.recommendation.action_id);
    CHECK(b.recommendation.features == a.recommendation.features);
    CHECK(b.decision.kind == a.decision.kind);
    CHECK(b.decision.reason == a.decision.reason);
    REQUIRE(b.decision.alternative.has_value() == a.decision.alternative.has_value());
    if (a.decision.alternative)
      CHECK(b.decision.alternative->action_id == a.decision.alternative->action_id);
    CHECK(b.executed.action_id == a.executed.action_id);
    REQUIRE(b.outcome.has_value() == a.outcome.has_value());
    if (a.outcome) {
      CHECK(b.outcome->observed == a.outcome->observed);
      REQUIRE(b.outcome->quality.has_value() == a.outcome->quality.has_value());
      if (a.outcome->quality)
        CHECK(*b.outcome->quality == doctest::Approx(*a.outcome->quality).epsilon(1e-12));
    }
  }

  const StateRows states = read_states_csv(dir.path / "states.csv");
  REQUIRE(states.features.size() == records.size());
  CHECK(states.clusters == clusters);
  for (std::size_t i = 0; i < records.size(); ++i)
    CHECK(states.features[i] == records[i].state.features);
}

TEST_CASE("csv readers reject malformed input with located errors") {
  const TempDir dir("csv_bad");
  const ScenarioConfig cfg = tiny_config();

  CHECK_THROWS_AS(read_records_csv(dir.path / "missing.csv", cfg), CsvError);

  spit(dir.path / "bad_header.csv", "not,a,header\n");
  CHECK_THROWS_AS(read_records_csv(dir.path / "bad_header.csv", cfg), CsvError);

  write_records_csv(dir.path / "ok.csv", mixed_records(cfg), cfg);
  std::string text = slurp(dir.path / "ok.csv");
  const auto nl = text.find('\n');
  REQUIRE(nl != std::string::npos);
  // Keep the header, truncate the first data row mid-way.
  spit(dir.path / "truncated.csv", text.substr(0, nl + 1) + "0,0,0\n");
  try {
    read_records_csv(dir.path / "truncated.csv", cfg);
    FAIL("expected CsvError");
  } catch (const CsvError& e) {
    CHECK(e.line() == 2);
  }

  spit(dir.path / "bad_states.csv", "t,patient,wrong\n");
  CHECK_THROWS_AS(read_states_csv(dir.path / "bad_states.csv"), CsvError);
}

TEST_CASE("config serialization is a fixpoint of parsing") {
  const ScenarioConfig cfg = canonical_scenario("fig1");
  const std::string text = serialize_config(cfg);
  const ScenarioConfig parsed = parse_config(text, "round-trip");
  CHECK(serialize_config(parsed) == text);
  CHECK(parsed.seed == cfg.seed);
  CHECK(parsed.name == cfg.name);
  CHECK(parsed.actions.size() == cfg.actions.size());
  CHECK(parsed.population.size() == cfg.population.size());
  CHECK(parsed.training.beta1 == cfg.training.beta1);

  const TempDir dir("config");
  save_config(cfg, dir.path / "config.json");
  const ScenarioConfig loaded = load_config(dir.path / "config.json");
  CHECK(serialize_config(loaded) == text);
}

TEST_CASE("config schema violations name the offending field") {
  const std::string text = serialize_config(canonical_scenario("fig1"));

  SUBCASE("a missing required key") {
    json j = json::parse(text);
    j.erase("seed");
    try {
      parse_config(j.dump(), "test");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field_path().find("seed") != std::string::npos);
    }
  }
  SUBCASE("an unknown key, the typo guard") {
    json j = json::parse(text);
    j["serd"] = 7;
    try {
      parse_config(j.dump(), "test");
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      CHECK(e.field_path().find("serd") != std::string::npos);
    }
  }
  SUBCASE("schema_version is mandatory and checked") {
    json j = json::parse(text);
    j.erase("schema_version");
    CHECK_THROWS_AS(parse_config(j.dump(), "test"), ConfigError);
    json k = json::parse(text);
    k["schema_version"] = 999;
    CHECK_THROWS_AS(parse_config(k.dump(), "test"), ConfigError);
  }
  SUBCASE("non-JSON input") {
    CHECK_THROWS_AS(parse_config("not json {", "test"), ConfigError);
  }
}

TEST_CASE("sha-256 matches the published test vectors") {
  CHECK(sha256_hex("") ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
        "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
  CHECK(sha256_hex(std::string(1000000, 'a')) ==
        "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");

  const TempDir dir("sha");
  spit(dir.path / "f.bin", "abc");
  CHECK(sha256_file(dir.path / "f.bin") == sha256_hex("abc"));
}

TEST_CASE("run manifests round-trip with verified file digests") {
  const TempDir dir("manifest");
  spit(dir.path / "out.csv", "a,b\n1,2\n");

  RunManifest man;
  man.tool_version = "override_lab 0.1.0";
  man.command = "simulate --scenario tiny";
  // Stored configs are always in canonical dump(indent=2) + newline form;
  // the round trip is byte-exact only for that shape.
  man.resolved_config = nlohmann::json{{"name", "tiny"}, {"seed", 7}}.dump(2) + "\n";
  man.config_digest = sha256_hex(man.resolved_config);
  man.seed = 1234;
  man.started_utc = utc_now_iso8601();
  man.finished_utc = utc_now_iso8601();
  man.add_file(dir.path, "out.csv");

  REQUIRE(man.files.size() == 1);
  CHECK(man.files[0].name == "out.csv");
  CHECK(man.files[0].digest == sha256_file(dir.path / "out.csv"));
  CHECK(man.files[0].bytes == fs::file_size(dir.path / "out.csv"));

  write_manifest(man, dir.path / "manifest.json");
  const RunManifest back = read_manifest(dir.path / "manifest.json");
  CHECK(back.tool_version == man.tool_version);
  CHECK(back.command == man.command);
  CHECK(back.config_digest == man.config_digest);
  CHECK(back.resolved_config == man.resolved_config);
  CHECK(back.seed == man.seed);
  CHECK(back.started_utc == man.started_utc);
  REQUIRE(back.files.size() == 1);
  CHECK(back.files[0].digest == man.files[0].digest);
  CHECK(back.files[0].bytes == man.files[0].bytes);

  const std::string stamp = utc_now_iso8601();
  REQUIRE(stamp.size() == 20);
  CHECK(stamp[10] == 'T');
  CHECK(stamp.back() == 'Z');
  CHECK(stamp.substr(0, 2) == "20");
}

TEST_CASE("simulate writes a complete, bitwise-deterministic dataset") {
  const TempDir dir("sim");
  const ScenarioConfig cfg = tiny_config();
  save_config(cfg, dir.path / "config.json");

  RunOptions opts;
  opts.config_path = dir.path / "config.json";
  opts.out_dir = dir.path / "a";
  REQUIRE(cmd_simulate(opts) == kExitOk);
  for (const char* name : {"config.json", "records.csv", "states.csv", "ground_truth.json",
                           "manifest.json"})
    CHECK(fs::exists(dir.path / "a" / name));

  // Digests in the manifest match the files on disk.
  const RunManifest man = read_manifest(dir.path / "a" / "manifest.json");
  REQUIRE(!man.files.empty());
  for (const auto& f : man.files)
    CHECK(sha256_file(dir.path / "a" / f.name) == f.digest);

  opts.out_dir = dir.path / "b";
  REQUIRE(cmd_simulate(opts) == kExitOk);
  CHECK(slurp(dir.path / "a" / "records.csv") == slurp(dir.path / "b" / "records.csv"));
  CHECK(slurp(dir.path / "a" / "states.csv") == slurp(dir.path / "b" / "states.csv"));
  CHECK(slurp(dir.path / "a" / "ground_truth.json") ==
        slurp(dir.path / "b" / "ground_truth.json"));

  // A different seed changes the record stream.
  opts.seed = cfg.seed + 1;
  opts.out_dir = dir.path / "c";
  REQUIRE(cmd_simulate(opts) == kExitOk);
  CHECK(slurp(dir.path / "a" / "records.csv") != slurp(dir.path / "c" / "records.csv"));
}

TEST_CASE("commands validate their inputs and report exit code 2") {
  const TempDir dir("cli_bad");
  RunOptions opts;
  opts.out_dir = dir.path / "out";
  CHECK(cmd_simulate(opts) == kExitValidation);  // neither scenario nor config

  opts.scenario = "no_such_scenario";
  CHECK(cmd_simulate(opts) == kExitValidation);

  RunOptions train;
  train.dataset_dir = dir.path / "missing_dataset";
  train.out_dir = dir.path / "out";
  CHECK(cmd_train(train) == kExitValidation);

  RunOptions rep;
  rep.scenario = "no_such_experiment";
  rep.out_dir = dir.path / "out";
  CHECK(cmd_reproduce(rep) == kExitValidation);
}

TEST_CASE("train and audit run end to end on a simulated dataset") {
  const TempDir dir("pipeline");
  const ScenarioConfig cfg = tiny_config();
  save_config(cfg, dir.path / "config.json");

  RunOptions sim;
  sim.config_path = dir.path / "config.json";
  sim.out_dir = dir.path / "dataset";
  REQUIRE(cmd_simulate(sim) == kExitOk);

  RunOptions train;
  train.dataset_dir = dir.path / "dataset";
  train.out_dir = dir.path / "train";
  REQUIRE(cmd_train(train) == kExitOk);
  for (const char* name : {"trace.csv", "kappa.csv", "summary.json", "manifest.json"})
    CHECK(fs::exists(dir.path / "train" / name));

  const json summary = json::parse(slurp(dir.path / "train" / "summary.json"));
  CHECK(summary.at("rounds_completed").get<int>() >= 1);
  CHECK(summary.at("weighting") == "kappa");
  CHECK(summary.at("pairs").at("train").get<int>() > 0);

  RunOptions audit;
  audit.dataset_dir = dir.path / "dataset";
  audit.train_dir = dir.path / "train";
  audit.out_dir = dir.path / "audit";
  REQUIRE(cmd_audit(audit) == kExitOk);
  for (const char* name :
       {"stratified_rates.csv", "gaps.csv", "concordance.csv", "monitor_report.json",
        "manifest.json"})
    CHECK(fs::exists(dir.path / "audit" / name));

  // Audit also runs without a training directory (falls back to truth kappa).
  RunOptions audit2 = audit;
  audit2.train_dir.reset();
  audit2.out_dir = dir.path / "audit2";
  CHECK(cmd_audit(audit2) == kExitOk);
}

TEST_CASE("a model that fails the outcome anchor exits with the verdict code") {
  // Naive weighting on the suppression-bias stream learns inverted margins,
  // so the anchor check must reject it and cmd_train must say so.
  const TempDir dir("anchor_fail");
  RunOptions sim;
  sim.scenario = "fig1";
  sim.out_dir = dir.path / "dataset";
  REQUIRE(cmd_simulate(sim) == kExitOk);

  RunOptions train;
  train.dataset_dir = dir.path / "dataset";
  train.out_dir = dir.path / "train";
  train.weighting = Weighting::NAIVE;
  CHECK(cmd_train(train) == kExitVerdictFail);

  const json summary = json::parse(slurp(dir.path / "train" / "summary.json"));
  CHECK(summary.at("anchor").at("computed").get<bool>());
  CHECK(!summary.at("anchor").at("pass").get<bool>());
}

TEST_CASE("the output directory resolves from the environment") {
  const char* saved = std::getenv("OVERRIDE_LAB_OUT");
  const std::string saved_value = saved ? saved : "";

  unsetenv("OVERRIDE_LAB_OUT");
  CHECK(default_out_dir() == fs::path("out"));
  setenv("OVERRIDE_LAB_OUT", "/tmp/olab_env_out", 1);
  CHECK(default_out_dir() == fs::path("/tmp/olab_env_out"));

  if (saved)
    setenv("OVERRIDE_LAB_OUT", saved_value.c_str(), 1);
  else
    unsetenv("OVERRIDE_LAB_OUT");
}
