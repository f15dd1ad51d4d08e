#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "shotcorr/errors.hpp"

namespace {

// Exit codes: 1 usage, 2 invalid config or input, 3 numerical failure,
// 4 other errors.
int run(const std::string& command, const std::string& config_path, const std::string& out_path,
        shotcorr::cli::RunOptions options, const std::string& freq_units) {
  using nlohmann::json;
  json config = json::object();
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw shotcorr::ConfigError("cannot open config '" + config_path + "'");
    try {
      config = json::parse(in);
    } catch (const json::parse_error& e) {
      throw shotcorr::ConfigError("config '" + config_path + "': " + e.what());
    }
    options.base_dir = std::filesystem::path(config_path).parent_path();
  }
  if (!config.is_object()) throw shotcorr::ConfigError("config: top level must be an object");

  // --freq-units overrides the config's freq_units key.
  if (config.contains("freq_units")) {
    if (!config["freq_units"].is_string()) throw shotcorr::ConfigError("config: freq_units: expected a string");
    options.freq_units = shotcorr::cli::freq_units_from_string(config["freq_units"].get<std::string>());
    options.freq_units_given = true;
    config.erase("freq_units");
  }
  if (!freq_units.empty()) {
    options.freq_units = shotcorr::cli::freq_units_from_string(freq_units);
    options.freq_units_given = true;
  }

  shotcorr::cli::CommandOutput output = shotcorr::cli::run_command(command, config, options);
  if (out_path.empty()) {
    std::cout << output.files.front().content;
    return 0;
  }
  output.sidecar["outputs"] = json::array();
  for (const auto& file : output.files) {
    const std::string path = out_path + file.suffix;
    shotcorr::cli::write_atomic(path, file.content);
    output.sidecar["outputs"].push_back(std::filesystem::path(path).filename().string());
  }
  shotcorr::cli::write_atomic(out_path + ".json", output.sidecar.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Shot-to-shot correlations of qubit measurements: spectra, simulation and fits"};
  app.require_subcommand(1);

  std::string config_path, out_path, freq_units;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  for (const std::string& name : shotcorr::cli::command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "output CSV path; a JSON sidecar is written to <out>.json");
    sub->add_option("--seed", seed, "master RNG seed (overrides the config)");
    sub->add_option("--threads", threads, "worker threads, 0 = all cores")->capture_default_str();
    sub->add_option("--freq-units", freq_units, "unit of untagged frequencies")
        ->check(CLI::IsMember({"hz", "rad"}));
  }
  CLI11_PARSE(app, argc, argv);

  const CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  shotcorr::cli::RunOptions options;
  options.seed = seed;
  options.seed_given = chosen->get_option("--seed")->count() > 0;
  options.threads = threads;
  try {
    return run(command, config_path, out_path, options, freq_units);
  } catch (const shotcorr::ConfigError& e) {
    std::cerr << "shotcorr " << command << ": error: " << e.what() << '\n';
    return 2;
  } catch (const shotcorr::DomainError& e) {
    std::cerr << "shotcorr " << command << ": error: " << e.what() << '\n';
    return 2;
  } catch (const shotcorr::NumericalError& e) {
    std::cerr << "shotcorr " << command << ": numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "shotcorr " << command << ": error: " << e.what() << '\n';
    return 4;
  }
}
