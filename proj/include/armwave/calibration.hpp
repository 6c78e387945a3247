#pragma once

// Moving-cable emulation and removal.
//
// The arm drags the receive cable through every sweep, so the recorded S21
// is the channel multiplied by a slowly wandering cable transmission.  The
// cable is characterized the way a VNA adapter is: reflection measurements
// of short/open/load standards at the two reference planes, solved per time
// sample into a 3-term error model, then composed into the cable's two-port
// parameters.  De-embedding divides the characterized transmission back out.

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "armwave/channel.hpp"
#include "armwave/constants.hpp"
#include "armwave/csv.hpp"
#include "armwave/errors.hpp"
#include "armwave/rng.hpp"

namespace armwave::cal {

using cplx = std::complex<double>;

struct CableWanderParams {
  double nominal_loss_db = 0.5;   // flat insertion loss, dB
  double nominal_phase_rad = -1.0; // static electrical length
  double phase_wander_deg = 5.0;  // peak in-sweep phase excursion
  double mag_wander_db = 0.05;    // peak in-sweep magnitude excursion
  double reflection_mag = 0.05;   // |s11|, |s22| at the connectors
  int smooth_window = 257;        // band-limits the wander walk

  // connector repeatability: constant per-reconnect offsets plus a small
  // fresh wander, negative-leaning in magnitude (reseating loses a little)
  double phase_bias_lo_deg = -2.5;
  double phase_bias_hi_deg = 0.0;
  double mag_bias_lo_db = -0.027;
  double mag_bias_hi_db = -0.012;
  double reconnect_phase_wander_deg = 0.5;
  double reconnect_mag_wander_db = 0.004;

  void validate() const {
    if (!(phase_wander_deg >= 0.0) || !(mag_wander_db >= 0.0))
      throw ParameterError("cable: wander ranges must be non-negative");
    if (smooth_window < 1) throw ParameterError("cable: smooth_window must be >= 1");
    if (!(reflection_mag >= 0.0) || reflection_mag >= 1.0)
      throw ParameterError("cable: reflection magnitude must lie in [0, 1)");
    if (nominal_loss_db < mag_wander_db - mag_bias_lo_db + reconnect_mag_wander_db)
      throw ParameterError("cable: loss too small to keep |s21| <= 1 under wander");
    if (phase_bias_hi_deg < phase_bias_lo_deg || mag_bias_hi_db < mag_bias_lo_db)
      throw ParameterError("cable: bias range inverted");
  }
};

struct CableModel {
  chan::SounderConfig config;
  std::vector<cplx> s21, s11, s22;
  std::uint64_t seed = 0; // generation seed, serialized for reproducibility
};

struct ConnectorBias {
  double phase_deg = 0.0;
  double mag_db = 0.0;
};

namespace detail {

// Band-limited random walk, zeroed at the first sample and scaled so its
// peak excursion is a random fraction (0.6..1.0) of `peak`.
inline std::vector<double> wander_walk(std::size_t n, double peak, int window, Rng& rng) {
  std::vector<double> w(n, 0.0);
  if (n == 0 || peak <= 0.0) return w;
  double acc = 0.0;
  for (auto& v : w) {
    acc += rng.normal();
    v = acc;
  }
  const int win = std::min<int>(window, static_cast<int>(n));
  if (win > 1) {
    std::vector<double> sm(n);
    double run = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      run += w[i];
      if (i >= static_cast<std::size_t>(win)) run -= w[i - static_cast<std::size_t>(win)];
      sm[i] = run / std::min<double>(static_cast<double>(win), static_cast<double>(i + 1));
    }
    w.swap(sm);
  }
  const double base = w[0];
  double max_abs = 0.0;
  for (auto& v : w) {
    v -= base;
    max_abs = std::max(max_abs, std::abs(v));
  }
  if (max_abs > 0.0) {
    const double scale = peak * (0.6 + 0.4 * rng.uniform()) / max_abs;
    for (auto& v : w) v *= scale;
  }
  return w;
}

} // namespace detail

inline CableModel generate_cable(const chan::SounderConfig& cfg,
                                 const CableWanderParams& p, std::uint64_t seed) {
  cfg.validate();
  p.validate();
  const auto n = static_cast<std::size_t>(cfg.n_points);
  Rng rng(derive_seed(seed, "cable.base"));
  const auto phase_w =
      detail::wander_walk(n, p.phase_wander_deg * kPi / 180.0, p.smooth_window, rng);
  const auto mag_w = detail::wander_walk(n, p.mag_wander_db, p.smooth_window, rng);

  CableModel c;
  c.config = cfg;
  c.seed = seed;
  c.s21.resize(n);
  c.s11.assign(n, std::polar(p.reflection_mag, 2.0 * kPi * rng.uniform()));
  c.s22.assign(n, std::polar(p.reflection_mag, 2.0 * kPi * rng.uniform()));
  for (std::size_t i = 0; i < n; ++i) {
    const double mag = std::pow(10.0, (-p.nominal_loss_db + mag_w[i]) / 20.0);
    c.s21[i] = std::polar(mag, p.nominal_phase_rad + phase_w[i]);
    if (std::abs(c.s21[i]) > 1.0)
      throw ParameterError("cable: generated |s21| exceeds unity");
  }
  return c;
}

// A reconnected cable: the same physical cable after reseating the
// connectors, which shifts phase and loss by a constant and perturbs the
// in-sweep wander a little.
inline CableModel reconnect_cable(const CableModel& base, const CableWanderParams& p,
                                  std::uint64_t seed, ConnectorBias* bias_out = nullptr) {
  const auto n = base.s21.size();
  Rng rng(derive_seed(seed, "cable.reconnect"));
  ConnectorBias bias;
  bias.phase_deg =
      p.phase_bias_lo_deg + (p.phase_bias_hi_deg - p.phase_bias_lo_deg) * rng.uniform();
  bias.mag_db = p.mag_bias_lo_db + (p.mag_bias_hi_db - p.mag_bias_lo_db) * rng.uniform();
  const auto phase_w = detail::wander_walk(
      n, p.reconnect_phase_wander_deg * kPi / 180.0, p.smooth_window, rng);
  const auto mag_w = detail::wander_walk(n, p.reconnect_mag_wander_db, p.smooth_window, rng);

  CableModel c = base;
  c.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    c.s21[i] *= std::polar(std::pow(10.0, (bias.mag_db + mag_w[i]) / 20.0),
                           bias.phase_deg * kPi / 180.0 + phase_w[i]);
    if (std::abs(c.s21[i]) > 1.0)
      throw ParameterError("cable: reconnect pushed |s21| past unity");
  }
  if (bias_out) *bias_out = bias;
  return c;
}

struct ErrorTerms {
  std::vector<cplx> e00, e11, e10e01;

  std::size_t size() const { return e00.size(); }
};

// One-port reflection of standard gamma seen through the cable two-port,
// optionally re-embedded in a reflectometer error model at plane A.
inline std::vector<cplx> measure_reflection(const CableModel& cable, cplx gamma,
                                            const ErrorTerms* plane_a = nullptr) {
  const auto n = cable.s21.size();
  std::vector<cplx> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx den = 1.0 - cable.s22[i] * gamma;
    if (std::abs(den) < 1e-12) throw CalibrationError("reflection measurement singular");
    cplx g = cable.s11[i] + cable.s21[i] * cable.s21[i] * gamma / den;
    if (plane_a) {
      const cplx d2 = 1.0 - plane_a->e11[i] * g;
      if (std::abs(d2) < 1e-12) throw CalibrationError("reflectometer model singular");
      g = plane_a->e00[i] + plane_a->e10e01[i] * g / d2;
    }
    out[i] = g;
  }
  return out;
}

// 3-term error model from short/open/load measurements, solved exactly per
// sample: gamma_meas = e00 + e10e01 gamma / (1 - e11 gamma) with the ideal
// standards gamma = -1, +1, 0.
inline ErrorTerms solve_sol(const std::vector<cplx>& g_short, const std::vector<cplx>& g_open,
                            const std::vector<cplx>& g_load) {
  if (g_short.size() != g_open.size() || g_open.size() != g_load.size())
    throw CalibrationError("sol: standard measurements on different grids");
  const auto n = g_short.size();
  ErrorTerms e;
  e.e00.resize(n);
  e.e11.resize(n);
  e.e10e01.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const cplx L = g_load[i], S = g_short[i], O = g_open[i];
    if (std::abs(S - L) < 1e-14 || std::abs(O - L) < 1e-14 || std::abs(O - S) < 1e-14)
      throw CalibrationError("sol: coincident standard measurements");
    const cplx r = (O - L) / (S - L);
    if (std::abs(r - 1.0) < 1e-14) throw CalibrationError("sol: degenerate system");
    const cplx e11 = (r + 1.0) / (r - 1.0);
    e.e00[i] = L;
    e.e11[i] = e11;
    e.e10e01[i] = (O - L) * (1.0 - e11);
    if (!(std::abs(e11) < 1.0))
      throw CalibrationError("sol: solved source match is not passive");
  }
  return e;
}

// Adapter characterization: given the error model at the bare port (plane A)
// and through the cable (plane B), recover the cable's two-port parameters.
// The reciprocal-root sign of s21 follows `root_hint` at the first sample and
// phase continuity afterwards.
inline CableModel characterize_adapter(const ErrorTerms& plane_a, const ErrorTerms& plane_b,
                                       const chan::SounderConfig& cfg,
                                       cplx root_hint = cplx(1.0, 0.0)) {
  if (plane_a.size() != plane_b.size())
    throw CalibrationError("characterize: planes on different grids");
  const auto n = plane_b.size();
  CableModel c;
  c.config = cfg;
  c.s11.resize(n);
  c.s21.resize(n);
  c.s22.resize(n);
  cplx prev = root_hint;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(plane_a.e10e01[i]) < 1e-14)
      throw CalibrationError("characterize: plane A tracking term vanishes");
    const cplx t = (plane_b.e00[i] - plane_a.e00[i]) / plane_a.e10e01[i];
    const cplx c11 = t / (1.0 + plane_a.e11[i] * t);
    const cplx den = 1.0 - plane_a.e11[i] * c11;
    if (std::abs(den) < 1e-14) throw CalibrationError("characterize: singular composition");
    const cplx s21sq = plane_b.e10e01[i] * den * den / plane_a.e10e01[i];
    cplx root = std::sqrt(s21sq);
    if (std::abs(root - prev) > std::abs(-root - prev)) root = -root;
    prev = root;
    c.s11[i] = c11;
    c.s21[i] = root;
    c.s22[i] = plane_b.e11[i] - s21sq * plane_a.e11[i] / den;
  }
  return c;
}

inline ErrorTerms ideal_reflectometer(std::size_t n) {
  ErrorTerms e;
  e.e00.assign(n, cplx(0.0, 0.0));
  e.e11.assign(n, cplx(0.0, 0.0));
  e.e10e01.assign(n, cplx(1.0, 0.0));
  return e;
}

// Plane A ideal: SOL through the cable alone characterizes it directly.
inline CableModel characterize_cable(const ErrorTerms& plane_b, const chan::SounderConfig& cfg,
                                     cplx root_hint = cplx(1.0, 0.0)) {
  return characterize_adapter(ideal_reflectometer(plane_b.size()), plane_b, cfg, root_hint);
}

inline chan::S21Series embed_cable(const chan::S21Series& s, const CableModel& cable) {
  if (cable.s21.size() != s.samples.size())
    throw GridError("embed: cable not sampled on the sweep grid");
  chan::S21Series out = s;
  for (std::size_t i = 0; i < out.samples.size(); ++i) out.samples[i] *= cable.s21[i];
  return out;
}

inline chan::S21Series deembed(const chan::S21Series& s, const CableModel& cable) {
  if (cable.s21.size() != s.samples.size())
    throw GridError("deembed: cable not sampled on the sweep grid");
  chan::S21Series out = s;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    if (std::abs(cable.s21[i]) < 1e-6)
      throw CalibrationError("deembed: cable transmission vanishes");
    out.samples[i] /= cable.s21[i];
  }
  return out;
}

struct ResidualOffsets {
  double phase_deg = 0.0; // circular mean of the per-sample phase residual
  double mag_db = 0.0;    // mean magnitude residual
};

// Per-run deviation of a de-embedded sweep from the known truth, the number
// pair the repeatability test tracks across reconnects.
inline ResidualOffsets residual_offsets(const chan::S21Series& deembedded,
                                        const chan::S21Series& truth) {
  if (deembedded.samples.size() != truth.samples.size())
    throw GridError("residual: sweeps on different grids");
  cplx dir(0.0, 0.0);
  double mag_sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < truth.samples.size(); ++i) {
    if (std::abs(truth.samples[i]) < 1e-12) continue;
    const cplx r = deembedded.samples[i] / truth.samples[i];
    if (std::abs(r) < 1e-15) continue;
    dir += r / std::abs(r);
    mag_sum += 20.0 * std::log10(std::abs(r));
    ++used;
  }
  if (used == 0) throw CalibrationError("residual: no usable samples");
  return {std::arg(dir) * 180.0 / kPi, mag_sum / static_cast<double>(used)};
}

inline void write_error_terms_csv(const std::string& path, const ErrorTerms& e, double Ts) {
  CsvTable tab;
  tab.meta = {{"Ts", format_double(Ts)}};
  tab.columns = {"time_s", "e00_re", "e00_im", "e11_re", "e11_im", "e10e01_re", "e10e01_im"};
  tab.rows.reserve(e.size());
  for (std::size_t i = 0; i < e.size(); ++i)
    tab.rows.push_back({static_cast<double>(i) * Ts, e.e00[i].real(), e.e00[i].imag(),
                        e.e11[i].real(), e.e11[i].imag(), e.e10e01[i].real(),
                        e.e10e01[i].imag()});
  write_csv(path, tab);
}

inline ErrorTerms read_error_terms_csv(const std::string& path) {
  const CsvTable tab = read_csv(path);
  ErrorTerms e;
  const auto r00 = tab.column("e00_re"), i00 = tab.column("e00_im");
  const auto r11 = tab.column("e11_re"), i11 = tab.column("e11_im");
  const auto rt = tab.column("e10e01_re"), it = tab.column("e10e01_im");
  for (std::size_t i = 0; i < r00.size(); ++i) {
    e.e00.emplace_back(r00[i], i00[i]);
    e.e11.emplace_back(r11[i], i11[i]);
    e.e10e01.emplace_back(rt[i], it[i]);
  }
  return e;
}

inline void write_cable_csv(const std::string& path, const CableModel& c) {
  CsvTable tab;
  tab.meta = {{"seed", std::to_string(c.seed)},
              {"Ts", format_double(c.config.Ts)},
              {"n_points", std::to_string(c.config.n_points)},
              {"f_c", format_double(c.config.f_c)}};
  tab.columns = {"time_s", "s21_re", "s21_im", "s11_re", "s11_im", "s22_re", "s22_im"};
  tab.rows.reserve(c.s21.size());
  for (std::size_t i = 0; i < c.s21.size(); ++i)
    tab.rows.push_back({static_cast<double>(i) * c.config.Ts, c.s21[i].real(),
                        c.s21[i].imag(), c.s11[i].real(), c.s11[i].imag(), c.s22[i].real(),
                        c.s22[i].imag()});
  write_csv(path, tab);
}

inline CableModel read_cable_csv(const std::string& path) {
  const CsvTable tab = read_csv(path);
  CableModel c;
  c.seed = std::stoull(chan::detail::require_meta(tab, path, "seed"));
  c.config.Ts = std::stod(chan::detail::require_meta(tab, path, "Ts"));
  c.config.n_points = std::stoi(chan::detail::require_meta(tab, path, "n_points"));
  if (const auto* v = tab.find_meta("f_c")) c.config.f_c = std::stod(*v);
  const auto r21 = tab.column("s21_re"), i21 = tab.column("s21_im");
  const auto r11 = tab.column("s11_re"), i11 = tab.column("s11_im");
  const auto r22 = tab.column("s22_re"), i22 = tab.column("s22_im");
  for (std::size_t i = 0; i < r21.size(); ++i) {
    c.s21.emplace_back(r21[i], i21[i]);
    c.s11.emplace_back(r11[i], i11[i]);
    c.s22.emplace_back(r22[i], i22[i]);
  }
  return c;
}

} // namespace armwave::cal
