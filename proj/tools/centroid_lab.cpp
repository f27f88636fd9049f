// centroid_lab: run the centroid-measurement experiments from a JSON config.
//
//   centroid_lab sweep-size --config noon2.json --out results/ --threads 4
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "centroid/error.hpp"
#include "centroid/experiments.hpp"
#include "centroid/parallel.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> events;
  std::optional<std::string> method;
  std::optional<int> threads;
};

void add_common(CLI::App* sub, CommonOptions& opts) {
  sub->add_option("--config", opts.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  sub->add_option("--seed", opts.seed, "RNG seed (overrides config)");
  sub->add_option("--out", opts.out, "output directory (overrides config)");
  sub->add_option("--events", opts.events, "number of events N0 (overrides config)");
  sub->add_option("--method", opts.method, "shift combination method")
      ->check(CLI::IsMember({"I", "II"}));
  sub->add_option("--threads", opts.threads, "worker threads (default: $CENTROID_LAB_THREADS)");
}

centroid::ExperimentConfig build_config(const std::string& command, const CommonOptions& opts) {
  centroid::ExperimentConfig config;
  if (!opts.config_path.empty()) {
    config = centroid::ExperimentConfig::load(opts.config_path);
  } else if (command == "mpa") {
    config.state = {{"type", "jg"}, {"n", 2}, {"b", 0.7071067811865476}, {"beta", 1.0}};
  } else if (command == "cat") {
    config.state = {{"type", "cat"}, {"alpha_mag", 1.0}};
    config.n_events = 100'000;
  }
  if (opts.seed) config.seed = *opts.seed;
  if (opts.out) config.output_dir = *opts.out;
  if (opts.events) config.n_events = *opts.events;
  if (opts.method) config.method = centroid::parse_method(*opts.method);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo optical centroid measurement experiments"};
  app.require_subcommand(1);

  using Command = std::function<centroid::CommandOutput(const centroid::ExperimentConfig&, int)>;
  const std::map<std::string, std::pair<std::string, Command>> commands = {
      {"sample", {"sample events and write them as CSV", centroid::cmd_sample}},
      {"sweep-size", {"rms deviation versus detector size", centroid::cmd_sweep_size}},
      {"sweep-shift", {"rms deviation versus detector shift", centroid::cmd_sweep_shift}},
      {"subsets", {"rms versus detector size for disjoint subsets", centroid::cmd_subsets}},
      {"mpa", {"close-event rates and widths versus r", centroid::cmd_mpa}},
      {"fixed-feature", {"jointly Gaussian states with a common feature size", centroid::cmd_fixed_feature}},
      {"cat", {"cat-state sweeps over |alpha| and phase", centroid::cmd_cat}},
  };

  CommonOptions opts;
  std::map<CLI::App*, std::string> names;
  for (const auto& [name, entry] : commands) {
    auto* sub = app.add_subcommand(name, entry.first);
    add_common(sub, opts);
    names[sub] = name;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const std::string command = names.at(app.get_subcommands().front());
  try {
    const auto config = build_config(command, opts);
    const int threads = centroid::resolve_threads(opts.threads);
    const auto output = commands.at(command).second(config, threads);
    std::cout << output.summary << '\n';
    return 0;
  } catch (const centroid::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const centroid::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  }
}
