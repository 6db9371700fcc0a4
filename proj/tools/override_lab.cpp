#include <cstdint>
#include <string>

#include "CLI11.hpp"

#include "olab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"override_lab: synthetic clinician-override laboratory "
               "(simulate / train / audit / reproduce)"};
  app.require_subcommand(1);

  olab::RunOptions opts;
  opts.out_dir = olab::default_out_dir();

  const auto add_out = [&](CLI::App* s) {
    s->add_option_function<std::string>(
        "--out", [&](const std::string& v) { opts.out_dir = v; },
        "output directory (default: $OVERRIDE_LAB_OUT or ./out)");
  };
  const auto add_seed = [&](CLI::App* s) {
    s->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { opts.seed = v; },
        "override the config's seed");
  };
  const auto add_rounds = [&](CLI::App* s) {
    s->add_option_function<int>(
        "--rounds", [&](const int& v) { opts.rounds = v; },
        "cap on alternating rounds (0 = cold-start snapshot only)");
  };
  const auto add_config_source = [&](CLI::App* s) {
    s->add_option_function<std::string>(
        "--config", [&](const std::string& v) { opts.config_path = v; },
        "scenario config file (JSON)");
    s->add_option_function<std::string>(
        "--scenario", [&](const std::string& v) { opts.scenario = v; },
        "named canonical scenario (fig1, hetero, homog, flywheel, stacking, "
        "amplification, rates)");
  };
  const auto add_dataset = [&](CLI::App* s) {
    s->add_option_function<std::string>(
         "dataset", [&](const std::string& v) { opts.dataset_dir = v; },
         "directory written by `simulate`")
        ->required();
  };

  CLI::App* sim = app.add_subcommand("simulate", "generate a synthetic override dataset");
  add_config_source(sim);
  add_seed(sim);
  add_out(sim);

  CLI::App* train =
      app.add_subcommand("train", "fit the reward + capability models on a dataset");
  add_dataset(train);
  train
      ->add_option_function<std::string>(
          "--weighting",
          [&](const std::string& v) {
            opts.weighting = v == "naive" ? olab::Weighting::NAIVE : olab::Weighting::KAPPA;
          },
          "pair weighting: uniform (naive) or capability-scaled (kappa)")
      ->check(CLI::IsMember({"naive", "kappa"}));
  add_rounds(train);
  add_config_source(train);
  add_out(train);

  CLI::App* audit = app.add_subcommand("audit", "run the failure-mode monitors on a dataset");
  add_dataset(audit);
  audit->add_option_function<std::string>(
      "--train", [&](const std::string& v) { opts.train_dir = v; },
      "train output directory; its kappa estimates stratify the rates");
  add_config_source(audit);
  add_out(audit);

  CLI::App* repro =
      app.add_subcommand("reproduce", "run one named end-to-end experiment with a verdict");
  repro
      ->add_option_function<std::string>(
          "name", [&](const std::string& v) { opts.scenario = v; },
          "fig1 | identifiability | flywheel | stacking | amplification")
      ->required();
  add_seed(repro);
  add_rounds(repro);
  add_out(repro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? olab::kExitOk : olab::kExitValidation;
  }

  if (sim->parsed()) return olab::cmd_simulate(opts);
  if (train->parsed()) return olab::cmd_train(opts);
  if (audit->parsed()) return olab::cmd_audit(opts);
  if (repro->parsed()) return olab::cmd_reproduce(opts);
  return olab::kExitValidation;
}
