#pragma once

// Spectral and statistical post-processing of recorded sweeps: Doppler
// spectrum and spread, theoretical-Doppler overlays, velocity histograms,
// idle-segment path gains, and the log-distance path-loss fit.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "armwave/channel.hpp"
#include "armwave/constants.hpp"
#include "armwave/csv.hpp"
#include "armwave/errors.hpp"

namespace armwave::an {

using cplx = std::complex<double>;

// Forward DFT with the 1/N normalization, natural bin order.
inline std::vector<cplx> dft_forward(const std::vector<cplx>& x) {
  if (x.empty()) throw ParameterError("dft: empty input");
  Eigen::FFT<double> fft;
  std::vector<cplx> out;
  std::vector<cplx> in(x);
  fft.fwd(out, in);
  const double inv_n = 1.0 / static_cast<double>(x.size());
  for (auto& v : out) v *= inv_n;
  return out;
}

// Inverse of dft_forward: x[n] = sum_k X[k] e^{+j 2 pi k n / N}.
inline std::vector<cplx> dft_inverse(const std::vector<cplx>& bins) {
  if (bins.empty()) throw ParameterError("dft: empty input");
  Eigen::FFT<double> fft;
  std::vector<cplx> out;
  std::vector<cplx> in(bins);
  fft.inv(out, in);
  const double n = static_cast<double>(bins.size());
  for (auto& v : out) v *= n;
  return out;
}

struct DopplerSpectrum {
  std::vector<double> freqs;    // Hz, centered, -fs/2 .. +fs/2 - bin
  std::vector<double> power_db; // 20 log10 |X[k]|
  double bin_hz = 0.0;

  std::size_t peak_index() const {
    return static_cast<std::size_t>(
        std::max_element(power_db.begin(), power_db.end()) - power_db.begin());
  }
  double peak_freq() const { return freqs[peak_index()]; }
};

inline DopplerSpectrum doppler_spectrum(const std::vector<cplx>& samples, double Ts) {
  const auto n = samples.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw ParameterError("spectrum: sample count must be a power of two");
  if (!(Ts > 0.0)) throw ParameterError("spectrum: Ts must be positive");

  const auto bins = dft_forward(samples);
  DopplerSpectrum spec;
  spec.bin_hz = 1.0 / (static_cast<double>(n) * Ts);
  spec.freqs.resize(n);
  spec.power_db.resize(n);
  const auto half = n / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = (i + half) % n; // shift so bin 0 sits at the center
    spec.freqs[i] = (static_cast<double>(i) - static_cast<double>(half)) * spec.bin_hz;
    spec.power_db[i] = 20.0 * std::log10(std::max(std::abs(bins[k]), 1e-250));
  }
  return spec;
}

inline DopplerSpectrum doppler_spectrum(const chan::S21Series& s) {
  if (s.samples.size() != static_cast<std::size_t>(s.config.n_points))
    throw GridError("spectrum: sweep is not exactly one sounder grid");
  return doppler_spectrum(s.samples, s.config.Ts);
}

struct DopplerSpread {
  double f_neg = 0.0;
  double f_pos = 0.0;
  double threshold_db = 0.0;
};

// Outermost threshold crossings on each side of the carrier.  The default
// threshold is absolute; relative_to_peak measures down from the strongest
// bin instead.
inline DopplerSpread doppler_spread(const DopplerSpectrum& spec, double threshold_db = -60.0,
                                    bool relative_to_peak = false) {
  double thr = threshold_db;
  if (relative_to_peak)
    thr += *std::max_element(spec.power_db.begin(), spec.power_db.end());
  DopplerSpread out;
  out.threshold_db = thr;
  for (std::size_t i = 0; i < spec.freqs.size(); ++i) {
    if (spec.power_db[i] <= thr) continue;
    if (spec.freqs[i] < 0.0) out.f_neg = std::min(out.f_neg, spec.freqs[i]);
    if (spec.freqs[i] > 0.0) out.f_pos = std::max(out.f_pos, spec.freqs[i]);
  }
  return out;
}

inline double theoretical_doppler(double v, double theta, double f_c) {
  if (!(f_c > 0.0)) throw ParameterError("doppler: f_c must be positive");
  return v * std::cos(theta) * f_c / kSpeedOfLight;
}

struct VelocityPdf {
  std::vector<double> edges;   // bin edges, multiples of the bin width
  std::vector<double> density; // per-bin probability density
  double binwidth = 0.0;

  double integral() const {
    double s = 0.0;
    for (double d : density) s += d * binwidth;
    return s;
  }
  double bin_center(std::size_t i) const { return 0.5 * (edges[i] + edges[i + 1]); }
};

inline VelocityPdf velocity_pdf(const std::vector<double>& v, double binwidth = 0.02) {
  if (v.empty()) throw ParameterError("velocity pdf: empty sample set");
  if (!(binwidth > 0.0)) throw ParameterError("velocity pdf: binwidth must be positive");
  auto bin_of = [binwidth](double x) {
    return static_cast<long>(std::floor(x / binwidth));
  };
  long k_min = bin_of(v[0]), k_max = k_min;
  for (double x : v) {
    k_min = std::min(k_min, bin_of(x));
    k_max = std::max(k_max, bin_of(x));
  }
  const auto m = static_cast<std::size_t>(k_max - k_min + 1);
  VelocityPdf pdf;
  pdf.binwidth = binwidth;
  pdf.edges.resize(m + 1);
  for (std::size_t i = 0; i <= m; ++i)
    pdf.edges[i] = static_cast<double>(k_min + static_cast<long>(i)) * binwidth;
  pdf.density.assign(m, 0.0);
  const double w = 1.0 / (static_cast<double>(v.size()) * binwidth);
  for (double x : v) pdf.density[static_cast<std::size_t>(bin_of(x) - k_min)] += w;
  return pdf;
}

// Signed velocity toward the transmitter; positive closes the range, so it
// maps to positive Doppler.
inline std::vector<double> radial_velocities(const std::vector<Eigen::Vector3d>& pos,
                                             const std::vector<Eigen::Vector3d>& vel,
                                             const Eigen::Vector3d& tx) {
  if (pos.size() != vel.size()) throw ParameterError("radial velocity: size mismatch");
  std::vector<double> out(pos.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    const Eigen::Vector3d r = pos[i] - tx;
    const double d = r.norm();
    if (!(d > 0.0)) throw GeometryError("radial velocity: receiver on the transmitter");
    out[i] = -r.dot(vel[i]) / d;
  }
  return out;
}

struct OverlayRow {
  double freq_hz = 0.0;
  double measured_db = 0.0;
  double theoretical_db = 0.0;
};

struct Overlay {
  std::vector<OverlayRow> rows;
  double offset_db = 0.0; // least-squares shift applied to the theoretical curve
};

// Maps each occupied velocity bin to its Doppler line, then levels the
// theoretical curve onto the measured spectrum with one fitted dB offset.
inline Overlay overlay_theoretical(const DopplerSpectrum& spec, const VelocityPdf& pdf,
                                   double f_c) {
  Overlay ov;
  std::vector<double> raw;
  for (std::size_t i = 0; i < pdf.density.size(); ++i) {
    if (pdf.density[i] <= 0.0) continue;
    OverlayRow row;
    row.freq_hz = theoretical_doppler(pdf.bin_center(i), 0.0, f_c);
    const auto k = static_cast<std::size_t>(std::llround(
        (row.freq_hz - spec.freqs.front()) / spec.bin_hz));
    if (k >= spec.freqs.size()) continue; // outside the capture range
    row.measured_db = spec.power_db[k];
    raw.push_back(10.0 * std::log10(pdf.density[i]));
    ov.rows.push_back(row);
  }
  if (ov.rows.empty()) throw ParameterError("overlay: velocity pdf has no usable mass");
  double acc = 0.0;
  for (std::size_t i = 0; i < ov.rows.size(); ++i) acc += ov.rows[i].measured_db - raw[i];
  ov.offset_db = acc / static_cast<double>(ov.rows.size());
  for (std::size_t i = 0; i < ov.rows.size(); ++i)
    ov.rows[i].theoretical_db = raw[i] + ov.offset_db;
  return ov;
}

struct IdleOptions {
  int window = 50;              // sliding variance window, samples
  double variance_factor = 3.0; // threshold over the noise-floor variance
  bool subtract_noise = true;   // unbias the idle power by the noise power
};

struct IdleDetection {
  std::vector<std::uint8_t> flags;              // per concatenated sample
  std::vector<std::pair<std::size_t, std::size_t>> runs; // (start, length)
  double mean_pg_db = 0.0;
  double threshold = 0.0;
  double min_variance = 0.0;

  std::size_t n_flagged() const {
    std::size_t n = 0;
    for (auto f : flags) n += f;
    return n;
  }
};

// Flags samples whose local complex variance stays at the noise floor.
// Windows never straddle sweep boundaries; runs are contiguous flags within
// one sweep.
inline IdleDetection detect_idle(const std::vector<chan::S21Series>& sweeps,
                                 const IdleOptions& opts = {}) {
  if (sweeps.empty()) throw ParameterError("idle: no sweeps");
  if (opts.window < 2) throw ParameterError("idle: window must be at least 2");

  double mean_power = 0.0;
  std::size_t total = 0;
  for (const auto& s : sweeps) {
    for (const auto& v : s.samples) mean_power += std::norm(v);
    total += s.samples.size();
  }
  if (total == 0) throw ParameterError("idle: empty sweeps");
  mean_power /= static_cast<double>(total);

  const double noise_power = sweeps.front().config.noise_power();
  IdleDetection det;
  det.threshold = opts.variance_factor * noise_power + 1e-12 * mean_power;
  det.min_variance = std::numeric_limits<double>::infinity();
  det.flags.reserve(total);

  double idle_power = 0.0;
  std::size_t idle_count = 0;
  std::size_t base = 0;
  for (const auto& s : sweeps) {
    const auto n = s.samples.size();
    const auto w = static_cast<std::size_t>(std::min<std::size_t>(
        static_cast<std::size_t>(opts.window), n));
    // prefix sums of the samples and their powers for O(1) window moments
    std::vector<cplx> ps(n + 1, cplx(0.0, 0.0));
    std::vector<double> pp(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      ps[i + 1] = ps[i] + s.samples[i];
      pp[i + 1] = pp[i] + std::norm(s.samples[i]);
    }
    std::size_t run_start = 0;
    bool in_run = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t lo = i > w / 2 ? i - w / 2 : 0;
      if (lo + w > n) lo = n - w;
      const auto hi = lo + w;
      const double cnt = static_cast<double>(w);
      const cplx mean = (ps[hi] - ps[lo]) / cnt;
      const double var = std::max(0.0, (pp[hi] - pp[lo]) / cnt - std::norm(mean));
      det.min_variance = std::min(det.min_variance, var);
      const bool idle = var <= det.threshold;
      det.flags.push_back(idle ? 1 : 0);
      if (idle) {
        idle_power += std::norm(s.samples[i]);
        ++idle_count;
        if (!in_run) {
          run_start = base + i;
          in_run = true;
        }
      } else if (in_run) {
        det.runs.emplace_back(run_start, base + i - run_start);
        in_run = false;
      }
    }
    if (in_run) det.runs.emplace_back(run_start, base + n - run_start);
    base += n;
  }

  if (idle_count == 0)
    throw DetectionError("idle: no segment below variance " +
                         format_double(det.threshold) + " (min seen " +
                         format_double(det.min_variance) + ")");
  double p = idle_power / static_cast<double>(idle_count);
  if (opts.subtract_noise) p -= noise_power;
  if (!(p > 0.0))
    throw DetectionError("idle: flagged power does not rise above the noise floor");
  det.mean_pg_db = 10.0 * std::log10(p);
  return det;
}

struct PathLossFit {
  double n_exp = 0.0;
  double pg_d0_db = 0.0;
  double sigma_db = 0.0;
  double r2 = 0.0;
};

// OLS of path gain against -10 log10(d/d0): slope is the exponent, the
// intercept is the gain at the reference distance.
inline PathLossFit fit_path_loss(const std::vector<std::pair<double, double>>& points,
                                 double d0 = 1.0) {
  if (points.size() < 2) throw ParameterError("fit: need at least two points");
  if (!(d0 > 0.0)) throw ParameterError("fit: d0 must be positive");
  const auto n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0;
  for (const auto& [d, pg] : points) {
    if (!(d > 0.0)) throw ParameterError("fit: distances must be positive");
    sx += -10.0 * std::log10(d / d0);
    sy += pg;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [d, pg] : points) {
    const double x = -10.0 * std::log10(d / d0) - mx;
    sxx += x * x;
    sxy += x * (pg - my);
  }
  if (sxx < 1e-12) throw SingularityError("fit: all distances coincide");

  PathLossFit fit;
  fit.n_exp = sxy / sxx;
  fit.pg_d0_db = my - fit.n_exp * mx;
  double ssr = 0.0, sst = 0.0;
  for (const auto& [d, pg] : points) {
    const double x = -10.0 * std::log10(d / d0);
    const double r = pg - (fit.pg_d0_db + fit.n_exp * x);
    ssr += r * r;
    sst += (pg - my) * (pg - my);
  }
  fit.sigma_db = points.size() > 2 ? std::sqrt(ssr / (n - 2.0)) : 0.0;
  fit.r2 = sst > 0.0 ? std::clamp(1.0 - ssr / sst, 0.0, 1.0) : 1.0;
  return fit;
}

// Normalized one-sided autocorrelation magnitude, the stationarity
// diagnostic exported alongside each distance.
inline std::vector<double> autocorrelation(const std::vector<cplx>& x) {
  if (x.empty()) throw ParameterError("autocorrelation: empty input");
  const auto n = x.size();
  std::size_t padded = 1;
  while (padded < 2 * n) padded <<= 1;
  std::vector<cplx> buf(x);
  buf.resize(padded, cplx(0.0, 0.0));
  Eigen::FFT<double> fft;
  std::vector<cplx> spec;
  fft.fwd(spec, buf);
  for (auto& v : spec) v = cplx(std::norm(v), 0.0);
  std::vector<cplx> corr;
  fft.inv(corr, spec);
  const double r0 = corr[0].real() / static_cast<double>(n);
  std::vector<double> out(n);
  if (r0 <= 0.0) {
    out.assign(n, 0.0);
    out[0] = 1.0;
    return out;
  }
  // unbiased lag normalization so a stationary signal reads flat
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::abs(corr[i]) / static_cast<double>(n - i) / r0;
  return out;
}

// Reference spread figures from the lab campaign this synthesizer models,
// shipped for side-by-side reporting only; synthetic runs are not expected
// to reproduce them numerically.
struct ReferenceSpread {
  double distance_ft;
  double f_neg_hz;
  double f_pos_hz;
};

inline constexpr ReferenceSpread kReferenceSpreads[] = {
    {3.5, -25.3844, 24.9763}, {5.5, -20.5687, 20.3328},  {7.5, -18.5282, 21.14},
    {9.5, -26.0374, 19.9157}, {11.5, -16.4876, 22.446},  {13.5, -20.3238, 20.6503},
    {15.5, -20.079, 20.5687}, {17.7, -18.5282, 19.5076}, {19.5, -16.0795, 17.5487},
    {21.5, -17.4671, 20.6503}, {23.5, -20.6503, 20.4871},
};
inline constexpr double kReferenceAvgNegHz = -19.4750;
inline constexpr double kReferenceAvgPosHz = 20.3204;

inline void write_spectrum_csv(const std::string& path, const DopplerSpectrum& spec) {
  CsvTable tab;
  tab.meta = {{"bin_hz", format_double(spec.bin_hz)}};
  tab.columns = {"freq_hz", "power_db"};
  for (std::size_t i = 0; i < spec.freqs.size(); ++i)
    tab.rows.push_back({spec.freqs[i], spec.power_db[i]});
  write_csv(path, tab);
}

struct SpreadRow {
  double distance_ft;
  DopplerSpread spread;
};

inline void write_spread_csv(const std::string& path, const std::vector<SpreadRow>& rows,
                             double threshold_db) {
  CsvTable tab;
  tab.meta = {{"threshold_db", format_double(threshold_db)}};
  tab.columns = {"distance_ft", "f_neg_hz", "f_pos_hz"};
  for (const auto& r : rows)
    tab.rows.push_back({r.distance_ft, r.spread.f_neg, r.spread.f_pos});
  write_csv(path, tab);
}

inline void write_velocity_pdf_csv(const std::string& path, const VelocityPdf& pdf) {
  CsvTable tab;
  tab.meta = {{"binwidth", format_double(pdf.binwidth)}};
  tab.columns = {"v_mps", "density"};
  for (std::size_t i = 0; i < pdf.density.size(); ++i)
    tab.rows.push_back({pdf.bin_center(i), pdf.density[i]});
  write_csv(path, tab);
}

inline void write_overlay_csv(const std::string& path, const Overlay& ov) {
  CsvTable tab;
  tab.meta = {{"offset_db", format_double(ov.offset_db)}};
  tab.columns = {"freq_hz", "measured_db", "theoretical_db"};
  for (const auto& r : ov.rows)
    tab.rows.push_back({r.freq_hz, r.measured_db, r.theoretical_db});
  write_csv(path, tab);
}

inline void write_autocorrelation_csv(const std::string& path,
                                      const std::vector<double>& corr, double Ts) {
  CsvTable tab;
  tab.meta = {{"Ts", format_double(Ts)}};
  tab.columns = {"lag_s", "corr"};
  for (std::size_t i = 0; i < corr.size(); ++i)
    tab.rows.push_back({static_cast<double>(i) * Ts, corr[i]});
  write_csv(path, tab);
}

inline std::string format_fit_report(const PathLossFit& fit) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "n = %.6f\npg_d0_db = %.6f\nsigma_db = %.6f\nr2 = %.6f\n", fit.n_exp,
                fit.pg_d0_db, fit.sigma_db, fit.r2);
  return buf;
}

} // namespace armwave::an
