#pragma once

// Command implementations behind the shotcorr executable. Each command maps
// a parsed JSON config to in-memory output files; main() handles flags and
// writes the files.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shotcorr/fitting.hpp"
#include "shotcorr/montecarlo.hpp"
#include "shotcorr/schedules.hpp"
#include "shotcorr/spectra.hpp"

namespace shotcorr::cli {

enum class FreqUnits { Hz, Rad };

FreqUnits freq_units_from_string(const std::string& name);

struct RunOptions {
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned threads = 1;  // 0 = hardware concurrency
  FreqUnits freq_units = FreqUnits::Rad;
  bool freq_units_given = false;
  std::filesystem::path base_dir;  // relative paths in the config resolve here
};

struct OutputFile {
  std::string suffix;  // appended to --out; empty for the main file
  std::string content;
};

struct CommandOutput {
  std::vector<OutputFile> files;
  nlohmann::ordered_json sidecar;
};

// Reads a config, dispatches and returns the outputs. Throws ConfigError
// naming the offending field for invalid configs.
CommandOutput run_command(const std::string& command, const nlohmann::json& config, const RunOptions& options);

const std::vector<std::string>& command_names();

// Figure bundles, shared with the acceptance checks.
struct FigurePoint {
  std::string curve;
  double delta_t = 0.0;
  double tau = 0.0;
  double correlation = 0.0;
  double chi_minus = 0.0;
  double chi_plus = 0.0;
  std::uint32_t flags = kFlagNone;
};

struct Figure3aOptions {
  double rms_field = 2.0e-3;  // T, assumed
  double omega_l = 0.0;       // 0 = reference value
  double omega_e = 0.0;
  double g_factor = -0.44;
  double shifted_omega_e_factor = 0.5;
  double target = 2.0;
  std::vector<double> delta_t;
  unsigned threads = 1;
};

// Curves gamma1, gamma2, shifted_omega_e (gamma = 1) and no_cutoff under the
// constant-contrast schedule of the gamma = 1 model.
std::vector<FigurePoint> figure3a_bundle(const Figure3aOptions& options);

struct Figure3bOptions {
  double amplitude = 1.0e8;  // rad^2/s, S = amplitude / omega for alpha = 1
  std::vector<double> alphas{0.9, 1.0, 1.1};
  double omega_low = 1.0e-9;
  double omega_high = 1.0e8;
  double target = 2.0;
  LambertVariant variant = LambertVariant::ShortEvolution;
  std::vector<double> delta_t;
  unsigned threads = 1;
};

// Spectra amplitude * omega_p^(alpha - 1) * omega^-alpha share their value at
// the pivot omega_p = 1 / (geometric mean of delta_t). All curves use the
// 1/f schedule of the alpha = 1 spectrum.
std::vector<FigurePoint> figure3b_bundle(const Figure3bOptions& options);

std::vector<double> log_grid(double lo, double hi, std::size_t n);

// Runs body(i) for i in [0, n) on `threads` workers.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

// Writes content to path through a temporary file and rename.
void write_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace shotcorr::cli
