#pragma once

// CW-mode channel synthesis: geometry in, complex S21 samples out.
//
// The sounder holds a single carrier and records the complex transmission
// coefficient over a uniform time grid, so the only physics here is the
// log-distance path-gain law, the phase accumulated over the line-of-sight
// path, and additive receiver noise.  The synthesis core accepts any number
// of resolvable paths; the anechoic-chamber front end drives it with one.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "armwave/constants.hpp"
#include "armwave/csv.hpp"
#include "armwave/errors.hpp"
#include "armwave/interp.hpp"
#include "armwave/rng.hpp"

namespace armwave::chan {

struct SounderConfig {
  double f_c = 28e9;             // carrier, Hz
  int n_points = 4096;           // samples per sweep, power of two
  double Ts = 4.4e-3;            // sampling interval, s
  double if_bandwidth = 300.0;   // Hz
  double noise_floor_db = -60.0; // receiver noise power at 300 Hz IF, dB

  void validate() const {
    if (!(f_c > 0.0)) throw ParameterError("sounder: f_c must be positive");
    if (n_points <= 0 || (n_points & (n_points - 1)) != 0)
      throw ParameterError("sounder: n_points must be a positive power of two");
    if (!(Ts > 0.0)) throw ParameterError("sounder: Ts must be positive");
    if (!(if_bandwidth >= 0.0))
      throw ParameterError("sounder: if_bandwidth must be non-negative");
  }

  double wavelength() const { return kSpeedOfLight / f_c; }
  double sweep_duration() const { return n_points * Ts; }

  // Receiver noise power; widening the IF admits proportionally more noise.
  double noise_power() const {
    return std::pow(10.0, noise_floor_db / 10.0) * (if_bandwidth / 300.0);
  }
};

struct ChannelParams {
  double pg_d0_db = 0.0;       // path gain at the reference distance, dB
  double n_exp = 1.843;        // path-loss exponent
  double shadow_sigma_db = 0.0;
  double phi_0 = 0.0;          // static phase offset, rad
  double d0 = 1.0;             // reference distance, m

  void validate() const {
    if (!(n_exp > 0.0)) throw ParameterError("channel: n_exp must be positive");
    if (!(shadow_sigma_db >= 0.0))
      throw ParameterError("channel: shadow_sigma_db must be non-negative");
    if (!(d0 > 0.0)) throw ParameterError("channel: d0 must be positive");
  }

  // Mean path gain in dB at distance d (no shadowing).
  double path_gain_db(double d) const {
    return pg_d0_db - 10.0 * n_exp * std::log10(d / d0);
  }
};

struct S21Series {
  SounderConfig config;
  std::vector<std::complex<double>> samples;
  double distance_ft = 0.0; // nominal Tx-Rx separation, campaign bookkeeping

  double time_at(std::size_t i) const { return static_cast<double>(i) * config.Ts; }
};

// One resolvable path: per-sample distances plus a gain offset relative to
// the path-gain law (0 dB for the direct path, negative for reflections).
struct PathGeometry {
  std::vector<double> distance_m;
  double excess_loss_db = 0.0;
};

// Multipath synthesis core.  Each path contributes alpha_n(t) e^{-j phase},
// with alpha from the log-distance law and phase 2*pi*d/lambda + phi_0.
inline S21Series synthesize_paths(const std::vector<PathGeometry>& paths,
                                  const SounderConfig& cfg, const ChannelParams& ch,
                                  std::uint64_t seed, double distance_ft = 0.0) {
  cfg.validate();
  ch.validate();
  if (paths.empty()) throw ParameterError("channel: no propagation paths");
  const auto n = static_cast<std::size_t>(cfg.n_points);
  for (const auto& p : paths)
    if (p.distance_m.size() != n)
      throw GridError("channel: path not sampled on the sounder grid");

  double shadow_db = 0.0;
  if (ch.shadow_sigma_db > 0.0) {
    Rng shadow_rng(derive_seed(seed, "channel.shadow"));
    shadow_db = ch.shadow_sigma_db * shadow_rng.normal();
  }

  const double lambda = cfg.wavelength();
  const double noise_var = cfg.noise_power();
  Rng noise_rng(derive_seed(seed, "channel.noise"));

  S21Series out;
  out.config = cfg;
  out.distance_ft = distance_ft;
  out.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> s{0.0, 0.0};
    for (const auto& p : paths) {
      const double d = p.distance_m[i];
      if (!(d > 0.0)) throw GeometryError("channel: path distance must be positive");
      const double gain_db = ch.path_gain_db(d) + p.excess_loss_db + shadow_db;
      const double alpha = std::pow(10.0, gain_db / 20.0);
      const double phase = -(2.0 * kPi * d / lambda + ch.phi_0);
      s += std::polar(alpha, phase);
    }
    if (noise_var > 0.0) s += noise_rng.complex_normal(noise_var);
    out.samples[i] = s;
  }
  return out;
}

// Line-of-sight front end: Rx positions on the sounder grid against a fixed Tx.
inline S21Series synthesize_s21(const std::vector<Eigen::Vector3d>& rx_path,
                                const Eigen::Vector3d& tx_pos, const SounderConfig& cfg,
                                const ChannelParams& ch, std::uint64_t seed,
                                double distance_ft = 0.0) {
  if (rx_path.size() != static_cast<std::size_t>(cfg.n_points))
    throw GridError("channel: rx path not sampled on the sounder grid");
  PathGeometry los;
  los.distance_m.resize(rx_path.size());
  for (std::size_t i = 0; i < rx_path.size(); ++i)
    los.distance_m[i] = (rx_path[i] - tx_pos).norm();
  return synthesize_paths({los}, cfg, ch, seed, distance_ft);
}

inline std::pair<double, double> doppler_capture_range(const SounderConfig& cfg) {
  cfg.validate();
  const double half = 1.0 / (2.0 * cfg.Ts);
  return {-half, half};
}

// Cubic resampling of a motion log onto the sounder grid.  The log must
// cover [t_start, t_start + (n_points - 1) Ts].
inline std::vector<Eigen::Vector3d> resample_path(const std::vector<double>& t,
                                                  const std::vector<Eigen::Vector3d>& pos,
                                                  const SounderConfig& cfg,
                                                  double t_start = 0.0) {
  cfg.validate();
  if (t.size() != pos.size()) throw ParameterError("resample: time/position size mismatch");
  if (t.size() < 2) throw GridError("resample: motion log too short");
  const double t_end = t_start + (cfg.n_points - 1) * cfg.Ts;
  const double slack = 1e-9 * (t.back() - t.front());
  if (t_start < t.front() - slack || t_end > t.back() + slack)
    throw GridError("resample: motion log does not cover the sounder window");

  std::vector<double> x(t.size()), y(t.size()), z(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    x[i] = pos[i].x();
    y[i] = pos[i].y();
    z[i] = pos[i].z();
  }
  const CubicSpline sx(t, x), sy(t, y), sz(t, z);

  std::vector<Eigen::Vector3d> out(static_cast<std::size_t>(cfg.n_points));
  for (int i = 0; i < cfg.n_points; ++i) {
    const double ti = std::min(t_start + i * cfg.Ts, t.back());
    out[static_cast<std::size_t>(i)] = {sx(ti), sy(ti), sz(ti)};
  }
  return out;
}

inline void write_s21_csv(const std::string& path, const S21Series& s) {
  CsvTable tab;
  tab.meta = {{"f_c", format_double(s.config.f_c)},
              {"Ts", format_double(s.config.Ts)},
              {"n_points", std::to_string(s.config.n_points)},
              {"distance_ft", format_double(s.distance_ft)},
              {"if_bandwidth", format_double(s.config.if_bandwidth)},
              {"noise_floor_db", format_double(s.config.noise_floor_db)}};
  tab.columns = {"index", "time_s", "re", "im"};
  tab.rows.reserve(s.samples.size());
  for (std::size_t i = 0; i < s.samples.size(); ++i)
    tab.rows.push_back({static_cast<double>(i), s.time_at(i), s.samples[i].real(),
                        s.samples[i].imag()});
  write_csv(path, tab);
}

namespace detail {

inline std::string require_meta(const CsvTable& tab, const std::string& path,
                                std::string_view key) {
  const std::string* v = tab.find_meta(key);
  if (!v) throw ParseError(path + ": missing '" + std::string(key) + "' header");
  return *v;
}

} // namespace detail

inline S21Series read_s21_csv(const std::string& path) {
  const CsvTable tab = read_csv(path);
  S21Series s;
  s.config.f_c = std::stod(detail::require_meta(tab, path, "f_c"));
  s.config.Ts = std::stod(detail::require_meta(tab, path, "Ts"));
  s.config.n_points = std::stoi(detail::require_meta(tab, path, "n_points"));
  s.distance_ft = std::stod(detail::require_meta(tab, path, "distance_ft"));
  if (const auto* v = tab.find_meta("if_bandwidth")) s.config.if_bandwidth = std::stod(*v);
  if (const auto* v = tab.find_meta("noise_floor_db")) s.config.noise_floor_db = std::stod(*v);
  const auto& re = tab.column("re");
  const auto& im = tab.column("im");
  s.samples.resize(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) s.samples[i] = {re[i], im[i]};
  if (s.samples.size() != static_cast<std::size_t>(s.config.n_points))
    throw ParseError(path + ": sample count disagrees with n_points header");
  return s;
}

} // namespace armwave::chan
