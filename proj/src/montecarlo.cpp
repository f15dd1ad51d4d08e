#include "shotcorr/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

#include "shotcorr/csv.hpp"
#include "shotcorr/errors.hpp"
#include "shotcorr/numerics.hpp"

namespace shotcorr {

namespace {

enum Stream : unsigned { kTrajectoryStream = 0, kOutcomeStream = 1, kFlipStream = 2 };

// Cycles between direct re-evaluation of the mode phases; the rotation
// recurrence drifts by about one ulp per step.
constexpr std::size_t kResyncInterval = 1024;

constexpr double kGauss4X[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr double kGauss4W[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

// 53 random bits in [0, 1).
double uniform01(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

void resolve_limits(const SpectrumModel& spectrum, ModeGridSpec& grid) {
  const SpectralSupport sup = spectrum.support();
  if (grid.omega_min <= 0.0) {
    double lo = std::numeric_limits<double>::infinity();
    if (sup.knee_low > 0.0) lo = sup.knee_low / 100.0;
    if (grid.record_duration > 0.0) lo = std::min(lo, 0.01 / grid.record_duration);
    if (!std::isfinite(lo)) lo = sup.knee_high * 1e-10;
    grid.omega_min = lo;
  }
  if (grid.omega_max <= 0.0) {
    grid.omega_max = std::isfinite(sup.upper) ? std::max(10.0 * sup.knee_high, sup.upper) : 1e4 * sup.knee_high;
  }
}

double dc_variance(const SpectrumModel& spectrum, double omega_min) {
  QuadratureSpec spec;
  spec.omega_min = 0.0;
  spec.omega_max = omega_min;
  spec.log_start = omega_min * 1e-9;
  for (double b : spectrum.support().breakpoints) {
    if (b > spec.log_start && b < omega_min) spec.breakpoints.push_back(b);
  }
  return integrate_spectral([&spectrum](double w) { return spectrum(w) / std::numbers::pi; }, 0.0, spec).value;
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::size_t record, unsigned stream) noexcept {
  return splitmix64(master + splitmix64(4 * static_cast<std::uint64_t>(record) + stream));
}

ModeTable build_mode_table(const SpectrumModel& spectrum, const ModeGridSpec& requested) {
  if (requested.n_modes < kMinModes) {
    throw ConfigError("mode grid: n_modes must be >= " + std::to_string(kMinModes));
  }
  ModeGridSpec grid = requested;
  resolve_limits(spectrum, grid);
  if (!(grid.omega_min > 0.0) || !(grid.omega_max > grid.omega_min) || !std::isfinite(grid.omega_max)) {
    throw ConfigError("mode grid: need 0 < omega_min < omega_max < inf");
  }
  const SpectralSupport sup = spectrum.support();
  if (requested.omega_min > 0.0 && sup.knee_low > 0.0 && grid.omega_min > sup.knee_low / 100.0 * (1.0 + 1e-12)) {
    throw ConfigError("mode grid: omega_min must be <= knee_low / 100 of the spectrum");
  }
  if (requested.omega_max > 0.0 && sup.knee_high > 0.0 && grid.omega_max < 10.0 * sup.knee_high * (1.0 - 1e-12)) {
    throw ConfigError("mode grid: omega_max must be >= 10 x knee_high of the spectrum");
  }
  const std::size_t n = grid.n_modes;
  const double ratio = std::pow(grid.omega_max / grid.omega_min, 1.0 / static_cast<double>(n));
  if (ratio > 1.5) throw ConfigError("mode grid too coarse: adjacent frequency ratio exceeds 1.5");

  ModeTable table;
  table.edges.resize(n + 1);
  const double log_lo = std::log(grid.omega_min), log_span = std::log(grid.omega_max) - log_lo;
  for (std::size_t i = 0; i <= n; ++i) table.edges[i] = std::exp(log_lo + log_span * double(i) / double(n));
  table.edges.front() = grid.omega_min;
  table.edges.back() = grid.omega_max;
  table.cell_variance.resize(n);
  constexpr int kSub = ModeTable::kSubBins;
  table.cdf.resize(n * kSub);
  table.sub_edges.resize(n * (kSub + 1));
  for (std::size_t i = 0; i < n; ++i) {
    const double a = table.edges[i], b = table.edges[i + 1];
    const double r = std::pow(b / a, 1.0 / kSub);
    double total = 0.0, lo = a;
    table.sub_edges[i * (kSub + 1)] = a;
    for (int j = 0; j < kSub; ++j) {
      const double hi = j + 1 == kSub ? b : lo * r;
      const double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo);
      double part = 0.0;
      for (int q = 0; q < 4; ++q) part += kGauss4W[q] * spectrum(c + h * kGauss4X[q]);
      total += part * h / std::numbers::pi;
      table.cdf[i * kSub + j] = total;
      table.sub_edges[i * (kSub + 1) + j + 1] = hi;
      lo = hi;
    }
    table.cell_variance[i] = total;
  }
  table.dc_variance = dc_variance(spectrum, grid.omega_min);
  return table;
}

double TrajectoryModel::expected_variance() const noexcept {
  double v = 0.0;
  for (double a : amplitude) v += a * a;
  return v + dc_variance;
}

TrajectoryModel synthesize_trajectory(const ModeTable& table, const ModeGridSpec& grid, std::uint64_t seed) {
  const std::size_t n = table.cell_variance.size();
  constexpr int kSub = ModeTable::kSubBins;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  TrajectoryModel t;
  t.seed = seed;
  t.grid = grid;
  t.grid.n_modes = n;
  t.grid.omega_min = table.edges.front();
  t.grid.omega_max = table.edges.back();
  t.omega.resize(n);
  t.amplitude.resize(n);
  t.phase_cos.resize(n);
  t.phase_sin.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double total = table.cell_variance[i];
    const double* sub = &table.sub_edges[i * (kSub + 1)];
    // Inverse of the piecewise-uniform cumulative weight; empty cells keep a
    // uniformly placed, zero-amplitude mode.
    const double u = uniform01(rng);
    double w;
    if (total > 0.0) {
      const double* cdf = &table.cdf[i * kSub];
      const double target = u * total;
      int j = 0;
      while (j + 1 < kSub && cdf[j] <= target) ++j;
      const double below = j == 0 ? 0.0 : cdf[j - 1];
      const double frac = std::clamp((target - below) / (cdf[j] - below), 0.0, 1.0);
      w = sub[j] + frac * (sub[j + 1] - sub[j]);
    } else {
      w = sub[0] + u * (sub[kSub] - sub[0]);
    }
    t.omega[i] = w;
    t.amplitude[i] = std::sqrt(total);
    t.phase_cos[i] = normal(rng);
    t.phase_sin[i] = normal(rng);
  }
  t.dc_variance = table.dc_variance;
  t.dc_offset = std::sqrt(table.dc_variance) * normal(rng);
  return t;
}

TrajectoryModel synthesize_trajectory(const SpectrumModel& spectrum, const ModeGridSpec& grid, std::uint64_t seed) {
  return synthesize_trajectory(build_mode_table(spectrum, grid), grid, seed);
}

double beta_at(const TrajectoryModel& t, double time) {
  double sum = t.dc_offset;
  for (std::size_t k = 0; k < t.omega.size(); ++k) {
    const double x = t.omega[k] * time;
    sum += t.amplitude[k] * (t.phase_cos[k] * std::cos(x) + t.phase_sin[k] * std::sin(x));
  }
  return sum;
}

double accumulated_phase(const TrajectoryModel& t, double t_center, double tau) {
  if (!(tau > 0.0)) throw DomainError("accumulated_phase: tau must be > 0");
  // sin(w(t + tau/2)) - sin(w(t - tau/2)) = 2 cos(wt) sin(w tau/2), likewise
  // for the cosine, so each mode contributes a (2 sin(w tau/2)/w)(A cos wt + B sin wt).
  double sum = t.dc_offset * tau;
  for (std::size_t k = 0; k < t.omega.size(); ++k) {
    const double w = t.omega[k];
    const double gain = 2.0 * std::sin(0.5 * w * tau) / w;
    const double x = w * t_center;
    sum += t.amplitude[k] * gain * (t.phase_cos[k] * std::cos(x) + t.phase_sin[k] * std::sin(x));
  }
  return sum;
}

void Protocol::validate() const {
  try {
    qubit.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("protocol: tau must be > 0");
  if (!(delta_t >= tau + qubit.dead_time) || !std::isfinite(delta_t)) {
    throw ConfigError("protocol: delta_t must be >= tau + dead_time");
  }
  if (n_cycles < 2) throw ConfigError("protocol: n_cycles must be >= 2");
}

namespace {

struct RecordRunner {
  const ModeTable& table;
  const ModeGridSpec& grid;
  const Protocol& protocol;
  bool independent_cycles;

  ShotRecord run(std::size_t record_index) const {
    const Protocol& p = protocol;
    const std::size_t n_cycles = p.n_cycles;
    const TrajectoryModel traj = synthesize_trajectory(table, grid, stream_seed(p.seed, record_index, kTrajectoryStream));
    std::mt19937_64 outcome_rng(stream_seed(p.seed, record_index, kOutcomeStream));
    std::mt19937_64 flip_rng(stream_seed(p.seed, record_index, kFlipStream));

    const std::size_t n = traj.omega.size();
    // Cycle 0 is centred at tau/2, so sin(w tau/2) also gives its phase.
    std::vector<double> gain(n), half_cos(n), half_sin(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double w = traj.omega[k];
      const double x = 0.5 * w * p.tau;
      half_cos[k] = std::cos(x);
      half_sin[k] = std::sin(x);
      gain[k] = traj.amplitude[k] * 2.0 * half_sin[k] / w;
    }
    std::vector<double> phases(n_cycles);
    if (independent_cycles) {
      std::mt19937_64 cycle_rng(stream_seed(p.seed, record_index, kTrajectoryStream) ^ 0x5bd1e995ULL);
      std::normal_distribution<double> normal;
      const double dc_sigma = std::sqrt(table.dc_variance) * p.tau;
      for (std::size_t c = 0; c < n_cycles; ++c) {
        // A cos(wt) + B sin(wt) is standard normal for fresh A, B.
        double sum = dc_sigma * normal(cycle_rng);
        for (std::size_t k = 0; k < n; ++k) sum += gain[k] * normal(cycle_rng);
        phases[c] = sum;
      }
    } else {
      // z_k = gain_k (A_k - i B_k) exp(i w_k t), Re z_k is the mode's phase.
      std::vector<double> zr(n), zi(n), rr(n), ri(n);
      for (std::size_t k = 0; k < n; ++k) {
        rr[k] = std::cos(traj.omega[k] * p.delta_t);
        ri[k] = std::sin(traj.omega[k] * p.delta_t);
      }
      const double dc = traj.dc_offset * p.tau;
      for (std::size_t c = 0; c < n_cycles; ++c) {
        if (c % kResyncInterval == 0) {
          const double t = 0.5 * p.tau + double(c) * p.delta_t;
          for (std::size_t k = 0; k < n; ++k) {
            const double x = traj.omega[k] * t;
            const double cs = c == 0 ? half_cos[k] : std::cos(x), sn = c == 0 ? half_sin[k] : std::sin(x);
            zr[k] = gain[k] * (traj.phase_cos[k] * cs + traj.phase_sin[k] * sn);
            zi[k] = gain[k] * (traj.phase_cos[k] * sn - traj.phase_sin[k] * cs);
          }
        }
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          sum += zr[k];
          const double nr = zr[k] * rr[k] - zi[k] * ri[k];
          zi[k] = zr[k] * ri[k] + zi[k] * rr[k];
          zr[k] = nr;
        }
        phases[c] = dc + sum;
      }
    }

    ShotRecord rec;
    rec.protocol = p;
    rec.record_index = record_index;
    rec.outcomes.resize(n_cycles);
    rec.window_centers.resize(n_cycles);
    const double eps = p.qubit.readout_flip_prob;
    const double base = p.qubit.omega_q * p.tau;
    for (std::size_t c = 0; c < n_cycles; ++c) {
      rec.window_centers[c] = 0.5 * p.tau + double(c) * p.delta_t;
      const double p_plus = 0.5 * (1.0 + std::cos(base + phases[c]));
      std::int8_t s = uniform01(outcome_rng) < p_plus ? 1 : -1;
      if (uniform01(flip_rng) < eps) s = static_cast<std::int8_t>(-s);
      rec.outcomes[c] = s;
    }
    return rec;
  }
};

ModeGridSpec grid_for(const Protocol& protocol, const MonteCarloOptions& options) {
  ModeGridSpec grid = options.grid;
  if (grid.record_duration <= 0.0) grid.record_duration = double(protocol.n_cycles) * protocol.delta_t;
  return grid;
}

}  // namespace

ShotRecord run_protocol(const SpectrumModel& spectrum, const Protocol& protocol, const MonteCarloOptions& options,
                        std::size_t record_index) {
  protocol.validate();
  const ModeGridSpec grid = grid_for(protocol, options);
  const ModeTable table = build_mode_table(spectrum, grid);
  return RecordRunner{table, grid, protocol, options.independent_cycles}.run(record_index);
}

std::vector<ShotRecord> run_records(const SpectrumModel& spectrum, const Protocol& protocol,
                                    const MonteCarloOptions& options) {
  protocol.validate();
  if (options.n_records == 0) throw ConfigError("monte carlo: n_records must be >= 1");
  const ModeGridSpec grid = grid_for(protocol, options);
  const ModeTable table = build_mode_table(spectrum, grid);
  const RecordRunner runner{table, grid, protocol, options.independent_cycles};

  std::vector<ShotRecord> records(options.n_records);
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, options.n_records));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    try {
      for (std::size_t i = next++; i < records.size(); i = next++) records[i] = runner.run(i);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = records.size();
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

CorrelationPoint estimate_autocorrelation(const std::vector<ShotRecord>& records, std::size_t lag) {
  if (lag == 0) throw DomainError("estimate_autocorrelation: lag must be >= 1");
  if (records.empty()) throw DomainError("estimate_autocorrelation: no records");
  CorrelationPoint out;
  out.tau = records.front().protocol.tau;
  out.delta_t = double(lag) * records.front().protocol.delta_t;

  // Pass 1: per-record sums in record order.
  std::vector<double> rec_sum;
  std::vector<std::size_t> rec_n;
  double total = 0.0;
  std::size_t n_pairs = 0;
  for (const ShotRecord& r : records) {
    if (r.outcomes.size() < lag + 1) throw DomainError("estimate_autocorrelation: record shorter than lag + 1");
    double s = 0.0;
    for (std::size_t i = 0; i + lag < r.outcomes.size(); ++i) s += r.outcomes[i] * r.outcomes[i + lag];
    rec_sum.push_back(s);
    rec_n.push_back(r.outcomes.size() - lag);
    total += s;
    n_pairs += r.outcomes.size() - lag;
  }
  if (n_pairs == 0) throw DomainError("estimate_autocorrelation: zero pairs");
  const double mean = total / double(n_pairs);
  out.value = mean;
  out.n_pairs = n_pairs;
  if (n_pairs < 2) return out;

  constexpr std::size_t kMinRecords = 32;
  double se = 0.0;
  if (records.size() >= kMinRecords) {
    // Records are independent: their means are the top-level blocks
    // (ratio estimator for unequal lengths).
    double acc = 0.0;
    for (std::size_t r = 0; r < records.size(); ++r) {
      const double d = rec_sum[r] - mean * double(rec_n[r]);
      acc += d * d;
    }
    const double R = double(records.size());
    se = std::sqrt(acc * R / (R - 1.0)) / double(n_pairs);
  } else {
    // Blocking inside records: the largest block size 2^j that still leaves
    // at least 64 full blocks.
    constexpr std::size_t kMinBlocks = 64;
    std::size_t max_len = 0;
    for (std::size_t m : rec_n) max_len = std::max(max_len, m);
    auto count_blocks = [&](std::size_t block) {
      std::size_t n = 0;
      for (std::size_t m : rec_n) n += m / block;
      return n;
    };
    std::size_t block = 1;
    while (2 * block <= max_len && count_blocks(2 * block) >= kMinBlocks) block *= 2;
    double sum = 0.0, sum2 = 0.0;
    std::size_t n_blocks = 0;
    for (const ShotRecord& r : records) {
      const std::size_t m = r.outcomes.size() - lag;
      for (std::size_t b0 = 0; b0 + block <= m; b0 += block) {
        double s = 0.0;
        for (std::size_t i = b0; i < b0 + block; ++i) s += r.outcomes[i] * r.outcomes[i + lag];
        s /= double(block);
        sum += s;
        sum2 += s * s;
        ++n_blocks;
      }
    }
    if (n_blocks >= 2) {
      const double bm = sum / double(n_blocks);
      const double var = std::max(0.0, (sum2 - double(n_blocks) * bm * bm) / double(n_blocks - 1));
      se = std::sqrt(var / double(n_blocks));
    }
  }
  // Every product identical: report the resolution 1/n instead of zero.
  const double best = se > 0.0 ? se : 1.0 / double(n_pairs);
  out.std_error = best;
  return out;
}

CorrelationCurve estimate_curve(const std::vector<ShotRecord>& records, std::size_t max_lag) {
  CorrelationCurve curve;
  for (std::size_t lag = 1; lag <= max_lag; ++lag) curve.points.push_back(estimate_autocorrelation(records, lag));
  return curve;
}

void write_shot_csv(std::ostream& out, const std::vector<ShotRecord>& records) {
  out << "cycle_index,t_center_s,outcome\n";
  std::size_t index = 0;
  for (const ShotRecord& r : records) {
    for (std::size_t c = 0; c < r.outcomes.size(); ++c) {
      out << index++ << ',' << csv_number(r.window_centers[c]) << ',' << int(r.outcomes[c]) << '\n';
    }
  }
}

void write_curve_csv(std::ostream& out, const CorrelationCurve& curve) {
  out << "delta_t_s,tau_s,correlation,stderr,n_pairs\n";
  for (const CorrelationPoint& p : curve.points) {
    out << csv_number(p.delta_t) << ',' << csv_number(p.tau) << ',' << csv_number(p.value) << ','
        << csv_number(p.std_error) << ',' << p.n_pairs << '\n';
  }
}

CorrelationCurve read_curve_csv(std::istream& in, const std::string& value_column, const std::string& stderr_column) {
  const CsvTable table = read_csv(in);
  auto need = [&](const std::string& name) {
    const std::size_t c = table.column(name);
    if (c == std::string::npos) throw ConfigError("correlation CSV: missing column '" + name + "'");
    return c;
  };
  const std::size_t c_dt = need("delta_t_s"), c_tau = need("tau_s"), c_val = need(value_column);
  const std::size_t c_err = table.column(stderr_column);
  if (c_err == std::string::npos) {
    throw ConfigError("correlation CSV: missing column '" + stderr_column +
                      "'; supply per-point uncertainties (standard errors) to fit the data");
  }
  const std::size_t c_n = table.column("n_pairs");
  CorrelationCurve curve;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    CorrelationPoint p;
    p.delta_t = csv_field_double(table, r, c_dt);
    p.tau = csv_field_double(table, r, c_tau);
    p.value = csv_field_double(table, r, c_val);
    p.std_error = csv_field_double(table, r, c_err);
    if (c_n != std::string::npos) p.n_pairs = static_cast<std::size_t>(csv_field_double(table, r, c_n));
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace shotcorr
