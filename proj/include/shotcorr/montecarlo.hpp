#pragma once

// Monte Carlo simulation of repeated free-induction-decay cycles on
// synthetic Gaussian noise, and estimation of the shot-to-shot correlator.
//
// beta(t) is a superposition of log-spaced harmonic modes,
//   beta(t) = beta_dc + sum_k a_k (A_k cos w_k t + B_k sin w_k t),
// with A_k, B_k standard normal. Each mode frequency is drawn inside its
// log cell with density proportional to S, and a_k^2 = (1/pi) int_cell S dw,
// so every spectral moment is reproduced on average over realizations. The
// variance below the lowest cell is carried by the constant offset beta_dc.
//
// RNG streams: every (record, stream) pair gets its own std::mt19937_64
// seeded with splitmix64(master + splitmix64(4 * record + stream)); streams
// are trajectory (0), outcomes (1) and readout flips (2). A record's output
// therefore does not depend on the thread that produced it.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "shotcorr/filter_correlator.hpp"
#include "shotcorr/spectra.hpp"

namespace shotcorr {

inline constexpr std::size_t kDefaultModes = 4096;
inline constexpr std::size_t kMinModes = 256;

// Mode grid. omega_min = 0 or omega_max = 0 select automatic limits:
// omega_min = min(knee_low / 100, 0.01 / record_duration) and
// omega_max = max(10 knee_high, upper) (1e4 knee_high without a finite upper
// edge).
struct ModeGridSpec {
  std::size_t n_modes = kDefaultModes;
  double omega_min = 0.0;
  double omega_max = 0.0;
  double record_duration = 0.0;  // s, only used for the automatic omega_min
};

// Per-cell sampling tables for one spectrum; independent of the seed.
struct ModeTable {
  static constexpr int kSubBins = 8;
  std::vector<double> edges;          // n_modes + 1 log-spaced edges
  std::vector<double> cell_variance;  // (1/pi) int_cell S dw
  std::vector<double> cdf;            // kSubBins cumulative weights per cell
  std::vector<double> sub_edges;      // kSubBins + 1 sub-bin edges per cell
  double dc_variance = 0.0;           // (1/pi) int_0^omega_min S dw
};

// Throws ConfigError for n_modes < 256 or an adjacent edge ratio > 1.5.
ModeTable build_mode_table(const SpectrumModel& spectrum, const ModeGridSpec& grid);

struct TrajectoryModel {
  std::vector<double> omega;      // rad/s
  std::vector<double> amplitude;  // rad/s
  std::vector<double> phase_cos;  // A_k
  std::vector<double> phase_sin;  // B_k
  double dc_offset = 0.0;         // rad/s
  double dc_variance = 0.0;       // (rad/s)^2, ensemble variance of dc_offset
  std::uint64_t seed = 0;
  ModeGridSpec grid;

  // sum a_k^2 + dc variance, the ensemble variance of beta.
  double expected_variance() const noexcept;
};

TrajectoryModel synthesize_trajectory(const SpectrumModel& spectrum, const ModeGridSpec& grid, std::uint64_t seed);
TrajectoryModel synthesize_trajectory(const ModeTable& table, const ModeGridSpec& grid, std::uint64_t seed);

double beta_at(const TrajectoryModel& trajectory, double t);

// Phase accumulated over [t_center - tau/2, t_center + tau/2], integrated
// exactly per mode.
double accumulated_phase(const TrajectoryModel& trajectory, double t_center, double tau);

struct Protocol {
  double tau = 0.0;      // s
  double delta_t = 0.0;  // s, centre-to-centre delay
  std::size_t n_cycles = 0;
  QubitParams qubit;
  std::uint64_t seed = 0;

  // delta_t >= tau + dead_time, n_cycles >= 2; throws ConfigError.
  void validate() const;
};

struct ShotRecord {
  std::vector<std::int8_t> outcomes;  // +-1
  std::vector<double> window_centers;  // s
  Protocol protocol;
  std::size_t record_index = 0;
};

struct MonteCarloOptions {
  ModeGridSpec grid;
  std::size_t n_records = 1;
  unsigned threads = 1;  // 0 = hardware concurrency
  // Diagnostic: each cycle sees an independent noise realization (same
  // mode frequencies, fresh A_k, B_k, beta_dc).
  bool independent_cycles = false;
};

// One record with its own trajectory, cycle k centred at tau/2 + k delta_t.
ShotRecord run_protocol(const SpectrumModel& spectrum, const Protocol& protocol, const MonteCarloOptions& options = {},
                        std::size_t record_index = 0);

// options.n_records records, indices 0..n-1, distributed over threads.
std::vector<ShotRecord> run_records(const SpectrumModel& spectrum, const Protocol& protocol,
                                    const MonteCarloOptions& options);

struct CorrelationPoint {
  double delta_t = 0.0;  // lag * protocol.delta_t
  double tau = 0.0;
  double value = 0.0;
  double std_error = 0.0;
  std::size_t n_pairs = 0;
};

struct CorrelationCurve {
  std::vector<CorrelationPoint> points;
};

// Mean of s_i s_{i+lag} over all in-record pairs. Pair products within a
// record are correlated through the shared trajectory, so the standard error
// treats whole records as independent blocks when there are >= 32 of them.
// With fewer records it comes from blocking analysis inside records, using
// the largest block of 2^j products that leaves >= 64 blocks. When every
// product is identical it is 1 / n_pairs. Throws DomainError without pairs.
CorrelationPoint estimate_autocorrelation(const std::vector<ShotRecord>& records, std::size_t lag = 1);

// Points for lags 1..max_lag.
CorrelationCurve estimate_curve(const std::vector<ShotRecord>& records, std::size_t max_lag);

// CSV `cycle_index,t_center_s,outcome`; records are written one after the
// other with a continuing cycle index.
void write_shot_csv(std::ostream& out, const std::vector<ShotRecord>& records);

// CSV `delta_t_s,tau_s,correlation,stderr,n_pairs`.
void write_curve_csv(std::ostream& out, const CorrelationCurve& curve);

// Reads the curve CSV; columns are matched by name, n_pairs is optional and
// extra columns are ignored, so corrected columns can be selected by name.
// Throws ConfigError naming the line of a malformed row, or asking for
// uncertainties when the stderr column is missing.
CorrelationCurve read_curve_csv(std::istream& in, const std::string& value_column = "correlation",
                                const std::string& stderr_column = "stderr");

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t stream_seed(std::uint64_t master, std::size_t record, unsigned stream) noexcept;

}  // namespace shotcorr
