// Command-line front end: `misspec run <config>` and `misspec sweep <dir-or-list>`.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "misspec/experiment.hpp"

namespace fs = std::filesystem;
using namespace misspec;

namespace {

struct Flags {
  std::optional<long> seed;
  std::string out;
  int parallelism = 0;
  bool override_checks = false;
};

void apply_flags(ConfigTable& t, const Flags& f) {
  if (f.seed) t.set("experiment.seed", std::to_string(*f.seed));
  if (f.override_checks) t.set("experiment.override_steplength_checks", "true");
}

// Directories contribute their *.ini files in name order; an .ini file is a
// config; any other file is a list of config paths, one per line, relative
// to the list file.
std::vector<fs::path> collect_configs(const std::vector<std::string>& inputs) {
  std::vector<fs::path> paths;
  for (const auto& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".ini") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else if (p.extension() == ".ini") {
      paths.push_back(p);
    } else {
      std::ifstream list(p);
      if (!list) throw ConfigError(in + ": cannot open config list");
      std::string line;
      while (std::getline(list, line)) {
        line.erase(0, line.find_first_not_of(" \t"));
        line.erase(line.find_last_not_of(" \t\r") + 1);
        if (line.empty() || line[0] == '#') continue;
        const fs::path entry(line);
        paths.push_back(entry.is_absolute() ? entry : p.parent_path() / entry);
      }
    }
  }
  return paths;
}

int cmd_run(const std::string& config_path, const Flags& flags) {
  ConfigTable table = ConfigTable::parse_file(config_path);
  apply_flags(table, flags);
  ExperimentConfig config = load_config(table);
  if (!flags.out.empty()) config.output = flags.out;
  if (config.output.empty()) config.output = config.id + ".csv";
  const RunResult result = run_experiment(config);
  std::cout << summary_line(result.summary) << std::endl;
  if (!result.summary.ok) {
    std::cerr << "run failed: " << result.summary.error << std::endl;
    return 2;
  }
  return 0;
}

int cmd_sweep(const std::vector<std::string>& inputs, const Flags& flags) {
  const fs::path out_dir = flags.out.empty() ? fs::path("sweep-out") : fs::path(flags.out);
  std::vector<ExperimentConfig> configs;
  for (const auto& path : collect_configs(inputs)) {
    ConfigTable table = ConfigTable::parse_file(path);
    apply_flags(table, flags);
    for (auto& c : expand_sweep(table)) {
      c.output = out_dir / (c.id + ".csv");
      configs.push_back(std::move(c));
    }
  }
  fs::create_directories(out_dir);
  const int parallelism =
      flags.parallelism > 0 ? flags.parallelism : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const auto summaries = run_sweep(configs, parallelism);
  for (const auto& s : summaries) std::cout << summary_line(s) << '\n';
  const fs::path summary_path = out_dir / "summary.csv";
  std::ofstream summary(summary_path, std::ios::binary);
  write_summary_csv(summaries, summary);
  std::cout << "summary: " << summary_path.string() << " (" << summaries.size() << " runs)" << std::endl;
  const bool all_ok = std::all_of(summaries.begin(), summaries.end(), [](const RunSummary& s) { return s.ok; });
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint learning-and-optimization schemes for misspecified problems"};
  app.require_subcommand(1);
  Flags flags;
  long seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Override experiment.seed");
    sub->add_option("--out", flags.out, "Trace CSV path (run) or output directory (sweep)");
    sub->add_flag("--override-steplength-checks", flags.override_checks,
                  "Run even when steplengths violate the admissibility conditions");
  };

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run one experiment config");
  run->add_option("config", config_path, "INI config file")->required()->check(CLI::ExistingFile);
  add_common(run);

  std::vector<std::string> inputs;
  auto* sweep = app.add_subcommand("sweep", "Run every config in a directory or list file");
  sweep->add_option("inputs", inputs, "Config directory, .ini file or list file")->required();
  sweep->add_option("--parallelism,-j", flags.parallelism, "Concurrent runs (default: hardware threads)")
      ->check(CLI::NonNegativeNumber);
  add_common(sweep);

  CLI11_PARSE(app, argc, argv);
  if ((run->parsed() && run->count("--seed")) || (sweep->parsed() && sweep->count("--seed"))) flags.seed = seed;

  try {
    if (run->parsed()) return cmd_run(config_path, flags);
    return cmd_sweep(inputs, flags);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
}
