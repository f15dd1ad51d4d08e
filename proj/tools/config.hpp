#pragma once

// Typed access to JSON config sections with field-qualified errors.
//
// Frequencies are numbers in the run's unit (--freq-units, default rad/s),
// the strings "none" / "inf" for an absent cutoff, or tagged objects
// {"value": 10, "unit": "hz" | "rad_per_s"}. Times are numbers in seconds
// or {"value": 50, "unit": "s" | "ms" | "us" | "ns"}. Grids are arrays of
// times or {"min": t, "max": t, "n": count, "spacing": "log" | "linear"}.

#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"
#include "shotcorr/filter_correlator.hpp"
#include "shotcorr/numerics.hpp"
#include "shotcorr/spectra.hpp"

namespace shotcorr::cli {

class Section {
 public:
  Section(const nlohmann::json& node, std::string path, const RunOptions& options);

  bool has(const std::string& key) const;
  std::string field(const std::string& key) const;
  [[noreturn]] void fail(const std::string& key, const std::string& message) const;

  // Throws ConfigError for keys outside `allowed`.
  void allow(std::initializer_list<const char*> allowed) const;

  Section sub(const std::string& key) const;
  std::optional<Section> optional_sub(const std::string& key) const;
  const nlohmann::json& raw(const std::string& key) const;

  double number(const std::string& key) const;
  double number(const std::string& key, double fallback) const;
  std::size_t count(const std::string& key, std::size_t fallback) const;
  bool boolean(const std::string& key, bool fallback) const;
  std::string text(const std::string& key) const;
  std::string text(const std::string& key, const std::string& fallback) const;

  double frequency(const std::string& key) const;
  double frequency(const std::string& key, double fallback) const;
  double time(const std::string& key) const;
  double time(const std::string& key, double fallback) const;
  std::vector<double> time_grid(const std::string& key) const;
  std::vector<double> time_grid(const std::string& key, const std::vector<double>& fallback) const;

  // A path relative to the config file's directory.
  std::string path(const std::string& key) const;

  const nlohmann::json& node() const { return node_; }
  const RunOptions& options() const { return options_; }

 private:
  double frequency_value(const nlohmann::json& v, const std::string& where) const;
  double time_value(const nlohmann::json& v, const std::string& where) const;

  const nlohmann::json& node_;
  std::string path_;
  const RunOptions& options_;
};

SpectrumModel parse_spectrum(const Section& section);

// Qubit section (optional); coupling_c is taken from an Overhauser spectrum.
QubitParams parse_qubit(const std::optional<Section>& section, const SpectrumModel* spectrum);

QuadratureSpec parse_quadrature(const std::optional<Section>& section);

}  // namespace shotcorr::cli
