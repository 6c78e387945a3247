#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "armwave/config.hpp"

namespace armwave::pipe {

/// Every random draw in a campaign flows from one base seed through these
/// derivations, so any stage can be regenerated in isolation:
///   campaign.wind i j       turbulence, distance i sweep j
///   campaign.channel i j    propagation (shadowing draw included)
///   campaign.noise i j      receiver noise, added after the cable
///   campaign.cable          the physical cable build
///   campaign.reconnect i j  connector reseat before sweep j
struct SeedPlan {
  std::uint64_t base = 0;

  std::uint64_t wind(std::size_t i, std::size_t j) const {
    return derive_seed(base, "campaign.wind", i, j);
  }
  std::uint64_t channel(std::size_t i, std::size_t j) const {
    return derive_seed(base, "campaign.channel", i, j);
  }
  std::uint64_t noise(std::size_t i, std::size_t j) const {
    return derive_seed(base, "campaign.noise", i, j);
  }
  std::uint64_t cable() const { return derive_seed(base, "campaign.cable"); }
  std::uint64_t reconnect(std::size_t i, std::size_t j) const {
    return derive_seed(base, "campaign.reconnect", i, j);
  }
};

/// Motion lasts from the end of the idle hold to just past the sweep.
inline double motion_duration(const CampaignConfig& cfg) {
  return cfg.sounder.sweep_duration() - cfg.idle_lead_s + cfg.motion_margin_s;
}

inline wind::TurbulenceSeries make_wind(const CampaignConfig& cfg, std::size_t i,
                                        std::size_t j, double duration = 0.0) {
  const SeedPlan seeds{cfg.seed};
  const double dur = duration > 0.0 ? duration : motion_duration(cfg);
  std::array<wind::DigitalFilter, 3> filters = {
      wind::discretize_dryden(cfg.dryden, wind::Axis::u),
      wind::discretize_dryden(cfg.dryden, wind::Axis::v),
      wind::discretize_dryden(cfg.dryden, wind::Axis::w)};
  const auto n = static_cast<std::size_t>(std::ceil(dur / cfg.dryden.dt)) + 1;
  auto turb = wind::generate_turbulence(filters, n, seeds.wind(i, j));
  return wind::compose_wind(cfg.mean_wind, std::move(turb),
                            wind::mean_wind_rotation(cfg.mean_wind));
}

inline quad::Trajectory fly(const CampaignConfig& cfg, const wind::TurbulenceSeries& wnd) {
  quad::Waypoint wp;
  wp.pos = {0.0, 0.0, -cfg.hover_alt_m};
  return quad::simulate_hover(cfg.quad, wnd, wp, motion_duration(cfg), cfg.sim);
}

inline arm::ArmTrace emulate(const CampaignConfig& cfg, const quad::Trajectory& traj) {
  return arm::track_trajectory(arm::ArmModel::sawyer_like(), traj, cfg.track);
}

/// The recorded sweep opens with the arm parked: hold the first pose for the
/// idle lead, then play the motion log, resampled onto the sounder grid.
inline std::vector<Eigen::Vector3d> rx_path_with_idle(const arm::ArmTrace& trace,
                                                      const CampaignConfig& cfg) {
  std::vector<double> t;
  std::vector<Eigen::Vector3d> p;
  if (cfg.idle_lead_s > 0.0) {
    const auto n_hold = static_cast<std::size_t>(
        std::ceil(cfg.idle_lead_s / trace.dt - 1e-9));
    t.reserve(n_hold + trace.t.size());
    p.reserve(n_hold + trace.t.size());
    for (std::size_t k = 0; k < n_hold; ++k) {
      t.push_back(static_cast<double>(k) * trace.dt);
      p.push_back(trace.pos.front());
    }
  }
  for (std::size_t k = 0; k < trace.t.size(); ++k) {
    t.push_back(trace.t[k] + cfg.idle_lead_s);
    p.push_back(trace.pos[k]);
  }
  return chan::resample_path(t, p, cfg.sounder, 0.0);
}

/// Transmitter sits on the arm-frame x axis at the nominal separation from
/// the parked receiver.
inline Eigen::Vector3d tx_position(const arm::ArmTrace& trace, double distance_ft) {
  return trace.pos.front() + Eigen::Vector3d(distance_ft * kFtToM, 0.0, 0.0);
}

/// One recorded sweep: noiseless propagation, the reseated cable, then
/// receiver noise. Matches the physical order; the written series carries
/// the true sounder config.
inline chan::S21Series record_sweep(const CampaignConfig& cfg,
                                    const std::vector<Eigen::Vector3d>& rx_path,
                                    const Eigen::Vector3d& tx, double distance_ft,
                                    std::size_t i, std::size_t j,
                                    const cal::CableModel& base_cable) {
  const SeedPlan seeds{cfg.seed};
  chan::SounderConfig quiet = cfg.sounder;
  quiet.if_bandwidth = 0.0; // noise enters after the cable, below
  auto s = chan::synthesize_s21(rx_path, tx, quiet, cfg.channel, seeds.channel(i, j),
                                distance_ft);
  const auto cable = cal::reconnect_cable(base_cable, cfg.cable, seeds.reconnect(i, j));
  s = cal::embed_cable(s, cable);
  Rng rng(seeds.noise(i, j));
  const double p = cfg.sounder.noise_power();
  for (auto& v : s.samples) v += rng.complex_normal(p);
  s.config = cfg.sounder;
  return s;
}

/// The campaign cable and its one-time SOL characterization, reused across
/// every sweep the way a bench calibration is.
struct CableChain {
  cal::CableModel base;
  cal::CableModel fitted;
  cal::ErrorTerms terms;
};

inline CableChain build_cable_chain(const CampaignConfig& cfg) {
  const SeedPlan seeds{cfg.seed};
  CableChain cc;
  cc.base = cal::generate_cable(cfg.sounder, cfg.cable, seeds.cable());
  const auto g_short = cal::measure_reflection(cc.base, {-1.0, 0.0});
  const auto g_open = cal::measure_reflection(cc.base, {1.0, 0.0});
  const auto g_load = cal::measure_reflection(cc.base, {0.0, 0.0});
  cc.terms = cal::solve_sol(g_short, g_open, g_load);
  cc.fitted = cal::characterize_cable(cc.terms, cfg.sounder,
                                      std::polar(1.0, cfg.cable.nominal_phase_rad));
  return cc;
}

/// Sweep spectra averaged in linear power on a shared grid.
inline an::DopplerSpectrum average_spectrum(const std::vector<chan::S21Series>& sweeps) {
  if (sweeps.empty()) throw ParameterError("average: no sweeps");
  an::DopplerSpectrum avg = an::doppler_spectrum(sweeps.front());
  if (sweeps.size() == 1) return avg;
  std::vector<double> acc(avg.power_db.size(), 0.0);
  for (const auto& s : sweeps) {
    const auto spec = an::doppler_spectrum(s);
    if (spec.power_db.size() != acc.size() || spec.bin_hz != avg.bin_hz)
      throw GridError("average: sweeps on different spectral grids");
    for (std::size_t k = 0; k < acc.size(); ++k)
      acc[k] += std::pow(10.0, spec.power_db[k] / 10.0);
  }
  for (std::size_t k = 0; k < acc.size(); ++k)
    avg.power_db[k] =
        10.0 * std::log10(std::max(acc[k] / double(sweeps.size()), 1e-300));
  return avg;
}

struct DistanceResult {
  double distance_ft = 0.0;
  bool ok = false;
  std::string error;
  an::DopplerSpread spread;
  double pg_db = 0.0;
  double rms_radial_mps = 0.0;
  double overlay_offset_db = 0.0;
  std::vector<std::string> s21_files, deemb_files, motion_files;
  std::string spectrum_file, pdf_file, overlay_file, autocorr_file;
};

struct CampaignResult {
  std::string out_dir;
  std::string config_hash;
  std::uint64_t seed = 0;
  double threshold_db = 0.0;
  std::vector<DistanceResult> distances;
  bool fit_ok = false;
  std::string fit_error;
  an::PathLossFit fit;
  std::string cable_true_file, cable_fitted_file, terms_file;
  std::string spread_file, points_file, fit_report_file, summary_file;

  bool all_ok() const {
    for (const auto& d : distances)
      if (!d.ok) return false;
    return !distances.empty();
  }
  double avg_f_neg() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& d : distances)
      if (d.ok) s += d.spread.f_neg, ++n;
    return n ? s / static_cast<double>(n) : 0.0;
  }
  double avg_f_pos() const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& d : distances)
      if (d.ok) s += d.spread.f_pos, ++n;
    return n ? s / static_cast<double>(n) : 0.0;
  }
};

struct RunOptions {
  std::string out_dir = "out";
  int parallel = 1;
  std::function<void(const std::string&)> log; ///< serialized by the runner
};

namespace detail {

inline void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + tmp + "'");
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

inline std::string distance_label(double d_ft) { return format_double(d_ft); }

}  // namespace detail

/// One distance point: record the sweeps, de-embed, average the spectra,
/// estimate the spread and the idle-segment path gain, and write artifacts.
inline DistanceResult run_distance(const CampaignConfig& cfg, const CableChain& chain,
                                   std::size_t i, const std::filesystem::path& out_dir) {
  DistanceResult r;
  const double d_ft = cfg.distances_ft[i];
  r.distance_ft = d_ft;
  const std::string lab = detail::distance_label(d_ft);
  try {
    std::vector<chan::S21Series> deembedded;
    std::vector<double> vels;
    for (std::size_t j = 0; j < static_cast<std::size_t>(cfg.sweeps); ++j) {
      const auto wnd = make_wind(cfg, i, j);
      const auto traj = fly(cfg, wnd);
      const auto trace = emulate(cfg, traj);
      const auto rx = rx_path_with_idle(trace, cfg);
      const auto tx = tx_position(trace, d_ft);
      const auto meas = record_sweep(cfg, rx, tx, d_ft, i, j, chain.base);

      const std::string suffix = "_d" + lab + "_sweep" + std::to_string(j) + ".csv";
      const auto motion_path = out_dir / ("motion" + suffix);
      const auto s21_path = out_dir / ("s21" + suffix);
      const auto deemb_path = out_dir / ("deemb" + suffix);
      arm::write_motion_csv(motion_path, trace);
      chan::write_s21_csv(s21_path.string(), meas);
      auto de = cal::deembed(meas, chain.fitted);
      chan::write_s21_csv(deemb_path.string(), de);
      r.motion_files.push_back(motion_path.filename().string());
      r.s21_files.push_back(s21_path.filename().string());
      r.deemb_files.push_back(deemb_path.filename().string());

      // radial velocities over the part of the motion the sweep observed
      const double t_end = cfg.sounder.sweep_duration() - cfg.idle_lead_s;
      std::vector<Eigen::Vector3d> mp, mv;
      for (std::size_t k = 0; k < trace.t.size(); ++k) {
        if (trace.t[k] > t_end + 1e-9) break;
        mp.push_back(trace.pos[k]);
        mv.push_back(trace.vel[k]);
      }
      for (double v : an::radial_velocities(mp, mv, tx)) vels.push_back(v);
      deembedded.push_back(std::move(de));
    }

    const an::DopplerSpectrum avg = average_spectrum(deembedded);
    r.spread = an::doppler_spread(avg, cfg.threshold_db);

    const auto idle = an::detect_idle(deembedded, cfg.idle);
    r.pg_db = idle.mean_pg_db;

    double ss = 0.0;
    for (double v : vels) ss += v * v;
    r.rms_radial_mps = vels.empty() ? 0.0 : std::sqrt(ss / double(vels.size()));

    const auto pdf = an::velocity_pdf(vels, cfg.pdf_binwidth);
    const auto ov = an::overlay_theoretical(avg, pdf, cfg.sounder.f_c);
    r.overlay_offset_db = ov.offset_db;

    const auto spec_path = out_dir / ("spectrum_d" + lab + ".csv");
    const auto pdf_path = out_dir / ("pdf_d" + lab + ".csv");
    const auto ov_path = out_dir / ("overlay_d" + lab + ".csv");
    const auto ac_path = out_dir / ("autocorr_d" + lab + ".csv");
    an::write_spectrum_csv(spec_path.string(), avg);
    an::write_velocity_pdf_csv(pdf_path.string(), pdf);
    an::write_overlay_csv(ov_path.string(), ov);
    an::write_autocorrelation_csv(ac_path.string(),
                                  an::autocorrelation(deembedded.front().samples),
                                  cfg.sounder.Ts);
    r.spectrum_file = spec_path.filename().string();
    r.pdf_file = pdf_path.filename().string();
    r.overlay_file = ov_path.filename().string();
    r.autocorr_file = ac_path.filename().string();
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

/// The full desk-scale experiment. Distances run concurrently when asked;
/// a failed distance records its diagnostic and the campaign continues.
inline CampaignResult run_campaign(const CampaignConfig& cfg, const RunOptions& opts = {}) {
  cfg.validate();
  if (opts.parallel < 1) throw ParameterError("campaign: parallel must be >= 1");
  namespace fs = std::filesystem;
  const fs::path out_dir(opts.out_dir);
  fs::create_directories(out_dir);

  CampaignResult res;
  res.out_dir = opts.out_dir;
  res.config_hash = cfg.hash_hex();
  res.seed = cfg.seed;
  res.threshold_db = cfg.threshold_db;

  const CableChain chain = build_cable_chain(cfg);
  const auto cable_true = out_dir / "cable_true.csv";
  const auto cable_fitted = out_dir / "cable_fitted.csv";
  const auto terms = out_dir / "error_terms.csv";
  cal::write_cable_csv(cable_true.string(), chain.base);
  cal::write_cable_csv(cable_fitted.string(), chain.fitted);
  cal::write_error_terms_csv(terms.string(), chain.terms, cfg.sounder.Ts);
  res.cable_true_file = cable_true.filename().string();
  res.cable_fitted_file = cable_fitted.filename().string();
  res.terms_file = terms.filename().string();

  std::mutex log_mtx;
  auto log = [&](const std::string& m) {
    if (!opts.log) return;
    std::lock_guard<std::mutex> lk(log_mtx);
    opts.log(m);
  };

  const std::size_t nd = cfg.distances_ft.size();
  res.distances.resize(nd);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < nd; i = next.fetch_add(1)) {
      res.distances[i] = run_distance(cfg, chain, i, out_dir);
      const auto& d = res.distances[i];
      log("distance " + detail::distance_label(d.distance_ft) + " ft: " +
          (d.ok ? "ok" : "FAILED (" + d.error + ")"));
    }
  };
  const auto nt = std::min<std::size_t>(static_cast<std::size_t>(opts.parallel), nd);
  if (nt <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t k = 0; k < nt; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  // campaign tables over the distances that survived
  std::vector<an::SpreadRow> spread_rows;
  std::vector<std::pair<double, double>> points;
  for (const auto& d : res.distances) {
    if (!d.ok) continue;
    spread_rows.push_back({d.distance_ft, d.spread});
    points.emplace_back(d.distance_ft * kFtToM, d.pg_db);
  }
  const auto spread_path = out_dir / "spread_table.csv";
  an::write_spread_csv(spread_path.string(), spread_rows, cfg.threshold_db);
  res.spread_file = spread_path.filename().string();

  CsvTable pts;
  pts.meta = {{"d0_m", format_double(cfg.channel.d0)},
              {"noise_floor_db", format_double(cfg.sounder.noise_floor_db)}};
  pts.columns = {"distance_ft", "distance_m", "pg_db"};
  for (const auto& d : res.distances)
    if (d.ok) pts.rows.push_back({d.distance_ft, d.distance_ft * kFtToM, d.pg_db});
  const auto points_path = out_dir / "pathloss_points.csv";
  write_csv(points_path, pts);
  res.points_file = points_path.filename().string();

  if (points.size() >= 2) {
    try {
      res.fit = an::fit_path_loss(points, cfg.channel.d0);
      res.fit_ok = true;
      const auto report_path = out_dir / "fit_report.txt";
      detail::write_text_atomic(report_path, an::format_fit_report(res.fit));
      res.fit_report_file = report_path.filename().string();
    } catch (const std::exception& e) {
      res.fit_error = e.what();
    }
  } else {
    res.fit_error = "fewer than two distances succeeded";
  }

  nlohmann::ordered_json js;
  js["config_hash"] = res.config_hash;
  js["seed"] = res.seed;
  js["threshold_db"] = res.threshold_db;
  js["sweeps"] = cfg.sweeps;
  js["cable"] = {{"true", res.cable_true_file},
                 {"fitted", res.cable_fitted_file},
                 {"error_terms", res.terms_file}};
  js["distances"] = nlohmann::ordered_json::array();
  for (const auto& d : res.distances) {
    nlohmann::ordered_json jd;
    jd["distance_ft"] = d.distance_ft;
    jd["ok"] = d.ok;
    if (!d.ok) jd["error"] = d.error;
    jd["f_neg_hz"] = d.spread.f_neg;
    jd["f_pos_hz"] = d.spread.f_pos;
    jd["pg_db"] = d.pg_db;
    jd["rms_radial_mps"] = d.rms_radial_mps;
    jd["overlay_offset_db"] = d.overlay_offset_db;
    jd["files"] = {{"s21", d.s21_files},        {"deembedded", d.deemb_files},
                   {"motion", d.motion_files},  {"spectrum", d.spectrum_file},
                   {"pdf", d.pdf_file},         {"overlay", d.overlay_file},
                   {"autocorrelation", d.autocorr_file}};
    js["distances"].push_back(std::move(jd));
  }
  js["average_spread_hz"] = {{"neg", res.avg_f_neg()}, {"pos", res.avg_f_pos()}};
  js["fit"]["ok"] = res.fit_ok;
  if (res.fit_ok) {
    js["fit"]["n_exp"] = res.fit.n_exp;
    js["fit"]["pg_d0_db"] = res.fit.pg_d0_db;
    js["fit"]["sigma_db"] = res.fit.sigma_db;
    js["fit"]["r2"] = res.fit.r2;
  } else {
    js["fit"]["error"] = res.fit_error;
  }
  js["files"] = {{"spread_table", res.spread_file},
                 {"pathloss_points", res.points_file},
                 {"fit_report", res.fit_report_file}};
  const auto summary_path = out_dir / "campaign_summary.json";
  detail::write_text_atomic(summary_path, js.dump(2) + "\n");
  res.summary_file = summary_path.filename().string();

  return res;
}

/// Human-readable execution plan, everything a run would do and nothing it
/// would write.
inline std::string format_plan(const CampaignConfig& cfg, const std::string& out_dir) {
  cfg.validate();
  std::ostringstream s;
  s << "campaign plan\n";
  s << "  config hash    " << cfg.hash_hex() << "\n";
  s << "  seed           " << cfg.seed << "\n";
  s << "  output dir     " << out_dir << "\n";
  s << "  distances (ft)";
  for (double d : cfg.distances_ft) s << " " << format_double(d);
  s << "\n";
  s << "  sweeps/distance " << cfg.sweeps << "\n";
  s << "  sweep duration  " << format_double(cfg.sounder.sweep_duration()) << " s ("
    << cfg.sounder.n_points << " points, Ts " << format_double(cfg.sounder.Ts) << " s)\n";
  s << "  idle lead       " << format_double(cfg.idle_lead_s) << " s\n";
  s << "  motion duration " << format_double(motion_duration(cfg)) << " s\n";
  s << "  spread threshold " << format_double(cfg.threshold_db) << " dB\n";
  s << "  stages per sweep: wind -> hover -> arm -> channel -> cable -> noise\n";
  s << "  per distance: de-embed, average spectrum, spread, idle path gain\n";
  s << "  campaign: path-loss fit over " << cfg.distances_ft.size() << " distances\n";
  s << "  seed derivations: campaign.wind/channel/noise/reconnect (i, j), campaign.cable\n";
  return s.str();
}

}  // namespace armwave::pipe
