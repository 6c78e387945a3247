// armwave: stage-by-stage or end-to-end runner for the desk-scale channel
// sounding experiment. Every subcommand reads and writes the CSV formats of
// its module, so stages compose through files exactly as they do in memory.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "armwave/campaign.hpp"
#include "armwave/config.hpp"

namespace {

using armwave::pipe::CampaignConfig;

CampaignConfig load_config(const std::string& path) {
  if (path.empty()) return CampaignConfig{};
  return armwave::pipe::read_config(path);
}

// Shared --config/--seed wiring; seed overrides the config file.
struct ConfigArgs {
  std::string path;
  std::uint64_t seed = 0;
  bool seed_set = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", path, "campaign config file (defaults when omitted)");
    cmd->add_option("--seed", seed, "override the campaign seed")
        ->each([this](const std::string&) { seed_set = true; });
  }
  CampaignConfig resolve() const {
    CampaignConfig cfg = load_config(path);
    if (seed_set) cfg.seed = seed;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale UAV channel sounding pipeline"};
  app.require_subcommand(1);

  // simulate-wind
  auto* wind_cmd = app.add_subcommand("simulate-wind", "generate a turbulence series");
  ConfigArgs wind_cfg;
  wind_cfg.attach(wind_cmd);
  std::size_t wind_i = 0, wind_j = 0;
  double wind_duration = 0.0;
  std::string wind_out;
  wind_cmd->add_option("--distance-index", wind_i, "distance index for seed derivation");
  wind_cmd->add_option("--sweep-index", wind_j, "sweep index for seed derivation");
  wind_cmd->add_option("--duration", wind_duration, "series length in s (default: motion window)");
  wind_cmd->add_option("--out", wind_out, "output wind CSV")->required();

  // simulate-uav
  auto* uav_cmd = app.add_subcommand("simulate-uav", "fly the hover under a wind series");
  ConfigArgs uav_cfg;
  uav_cfg.attach(uav_cmd);
  std::string uav_wind, uav_out;
  double uav_duration = 0.0;
  uav_cmd->add_option("--wind", uav_wind, "input wind CSV")->required();
  uav_cmd->add_option("--duration", uav_duration, "simulation length in s (default: motion window)");
  uav_cmd->add_option("--out", uav_out, "output trajectory CSV")->required();

  // emulate-arm
  auto* arm_cmd = app.add_subcommand("emulate-arm", "track a trajectory with the arm");
  ConfigArgs arm_cfg;
  arm_cfg.attach(arm_cmd);
  std::string arm_traj, arm_out;
  arm_cmd->add_option("--trajectory", arm_traj, "input trajectory CSV")->required();
  arm_cmd->add_option("--out", arm_out, "output motion CSV")->required();

  // sound-channel
  auto* snd_cmd = app.add_subcommand("sound-channel", "record one sweep from a motion log");
  ConfigArgs snd_cfg;
  snd_cfg.attach(snd_cmd);
  std::string snd_motion, snd_out;
  double snd_dist = 0.0;
  std::size_t snd_i = 0, snd_j = 0;
  snd_cmd->add_option("--motion", snd_motion, "input motion CSV")->required();
  snd_cmd->add_option("--distance-ft", snd_dist, "nominal Tx-Rx separation, ft")->required();
  snd_cmd->add_option("--distance-index", snd_i, "distance index for seed derivation");
  snd_cmd->add_option("--sweep-index", snd_j, "sweep index for seed derivation");
  snd_cmd->add_option("--out", snd_out, "output S21 CSV (as recorded)")->required();

  // calibrate
  auto* cal_cmd = app.add_subcommand("calibrate", "de-embed the cable from a recorded sweep");
  ConfigArgs cal_cfg;
  cal_cfg.attach(cal_cmd);
  std::string cal_in, cal_out, cal_cable_out, cal_terms_out;
  cal_cmd->add_option("--in", cal_in, "recorded S21 CSV")->required();
  cal_cmd->add_option("--out", cal_out, "output de-embedded S21 CSV")->required();
  cal_cmd->add_option("--cable-out", cal_cable_out, "write the fitted cable model CSV");
  cal_cmd->add_option("--terms-out", cal_terms_out, "write the SOL error terms CSV");

  // analyze-doppler
  auto* ana_cmd = app.add_subcommand("analyze-doppler", "spectrum, peak, and spread");
  std::vector<std::string> ana_in;
  double ana_threshold = -60.0;
  bool ana_relative = false;
  std::string ana_spectrum_out;
  ana_cmd->add_option("--in", ana_in, "S21 CSV files (averaged in linear power)")
      ->required()
      ->expected(-1);
  ana_cmd->add_option("--threshold-db", ana_threshold, "spread threshold, dB");
  ana_cmd->add_flag("--relative", ana_relative, "threshold measured down from the peak");
  ana_cmd->add_option("--spectrum-out", ana_spectrum_out, "write the averaged spectrum CSV");

  // fit-pathloss
  auto* fit_cmd = app.add_subcommand("fit-pathloss", "log-distance regression over PG points");
  std::string fit_points;
  fit_cmd->add_option("--points", fit_points, "CSV with distance_ft|distance_m and pg_db")
      ->required();

  // run-pipeline
  auto* run_cmd = app.add_subcommand("run-pipeline", "execute the full campaign");
  ConfigArgs run_cfg;
  run_cfg.attach(run_cmd);
  std::string run_out_dir = "out";
  std::string run_distances;
  int run_sweeps = 0;
  double run_threshold = 0.0;
  bool run_threshold_set = false, run_dry = false;
  int run_parallel = 1;
  run_cmd->add_option("--out-dir", run_out_dir, "artifact directory");
  run_cmd->add_option("--distances", run_distances, "override distance list, ft");
  run_cmd->add_option("--sweeps", run_sweeps, "override sweeps per distance");
  run_cmd->add_option("--threshold-db", run_threshold, "override the spread threshold")
      ->each([&run_threshold_set](const std::string&) { run_threshold_set = true; });
  run_cmd->add_flag("--dry-run", run_dry, "validate the config and print the plan");
  run_cmd->add_option("--parallel", run_parallel, "distances run concurrently");

  CLI11_PARSE(app, argc, argv);

  namespace pipe = armwave::pipe;
  try {
    if (*wind_cmd) {
      const auto cfg = wind_cfg.resolve();
      cfg.validate();
      const auto wnd = pipe::make_wind(cfg, wind_i, wind_j, wind_duration);
      armwave::wind::write_turbulence_csv(wind_out, wnd);
      std::printf("wind: %zu samples at dt %g s -> %s\n", wnd.size(), wnd.dt,
                  wind_out.c_str());
    } else if (*uav_cmd) {
      const auto cfg = uav_cfg.resolve();
      cfg.validate();
      const auto wnd = armwave::wind::read_turbulence_csv(uav_wind);
      const double dur = uav_duration > 0.0 ? uav_duration : pipe::motion_duration(cfg);
      armwave::quad::Waypoint wp;
      wp.pos = {0.0, 0.0, -cfg.hover_alt_m};
      const auto traj = armwave::quad::simulate_hover(cfg.quad, wnd, wp, dur, cfg.sim);
      armwave::quad::write_trajectory_csv(uav_out, traj);
      std::printf("uav: %zu trajectory samples -> %s\n", traj.size(), uav_out.c_str());
    } else if (*arm_cmd) {
      const auto cfg = arm_cfg.resolve();
      cfg.validate();
      const auto traj = armwave::quad::read_trajectory_csv(arm_traj);
      const auto trace = pipe::emulate(cfg, traj);
      armwave::arm::write_motion_csv(arm_out, trace);
      std::printf("arm: %zu ticks, max speed %.4f m/s, rms err %.3e m -> %s\n",
                  trace.t.size(), trace.max_speed, trace.rms_err, arm_out.c_str());
    } else if (*snd_cmd) {
      const auto cfg = snd_cfg.resolve();
      cfg.validate();
      const auto trace = armwave::arm::read_motion_csv(snd_motion);
      const auto rx = pipe::rx_path_with_idle(trace, cfg);
      const auto tx = pipe::tx_position(trace, snd_dist);
      const auto chain = pipe::build_cable_chain(cfg);
      const auto meas = pipe::record_sweep(cfg, rx, tx, snd_dist, snd_i, snd_j, chain.base);
      armwave::chan::write_s21_csv(snd_out, meas);
      std::printf("channel: %zu samples at %g ft -> %s\n", meas.samples.size(), snd_dist,
                  snd_out.c_str());
    } else if (*cal_cmd) {
      const auto cfg = cal_cfg.resolve();
      cfg.validate();
      const auto meas = armwave::chan::read_s21_csv(cal_in);
      const auto chain = pipe::build_cable_chain(cfg);
      const auto de = armwave::cal::deembed(meas, chain.fitted);
      armwave::chan::write_s21_csv(cal_out, de);
      if (!cal_cable_out.empty()) armwave::cal::write_cable_csv(cal_cable_out, chain.fitted);
      if (!cal_terms_out.empty())
        armwave::cal::write_error_terms_csv(cal_terms_out, chain.terms, cfg.sounder.Ts);
      std::printf("calibrate: de-embedded %zu samples -> %s\n", de.samples.size(),
                  cal_out.c_str());
    } else if (*ana_cmd) {
      std::vector<armwave::chan::S21Series> sweeps;
      sweeps.reserve(ana_in.size());
      for (const auto& f : ana_in) sweeps.push_back(armwave::chan::read_s21_csv(f));
      const auto spec = pipe::average_spectrum(sweeps);
      const auto spread = armwave::an::doppler_spread(spec, ana_threshold, ana_relative);
      std::printf("peak %.2f Hz\n", spec.peak_freq());
      std::printf("spread %.2f / %+.2f Hz at %.1f dB\n", spread.f_neg, spread.f_pos,
                  spread.threshold_db);
      if (!ana_spectrum_out.empty()) {
        armwave::an::write_spectrum_csv(ana_spectrum_out, spec);
        std::printf("spectrum -> %s\n", ana_spectrum_out.c_str());
      }
    } else if (*fit_cmd) {
      const auto tab = armwave::read_csv(fit_points);
      const std::size_t cg = tab.col("pg_db");
      std::vector<std::pair<double, double>> points;
      if (tab.has_col("distance_m")) {
        const std::size_t cd = tab.col("distance_m");
        for (const auto& r : tab.rows) points.emplace_back(r[cd], r[cg]);
      } else {
        const std::size_t cd = tab.col("distance_ft");
        for (const auto& r : tab.rows)
          points.emplace_back(r[cd] * armwave::kFtToM, r[cg]);
      }
      double d0 = 1.0;
      if (const std::string* v = tab.find_meta("d0_m")) d0 = std::strtod(v->c_str(), nullptr);
      const auto fit = armwave::an::fit_path_loss(points, d0);
      std::fputs(armwave::an::format_fit_report(fit).c_str(), stdout);
    } else if (*run_cmd) {
      auto cfg = run_cfg.resolve();
      if (!run_distances.empty())
        cfg.distances_ft = pipe::parse_distance_override(run_distances);
      if (run_sweeps > 0) cfg.sweeps = run_sweeps;
      if (run_threshold_set) cfg.threshold_db = run_threshold;
      cfg.validate();
      if (run_dry) {
        std::fputs(pipe::format_plan(cfg, run_out_dir).c_str(), stdout);
        return 0;
      }
      pipe::RunOptions opts;
      opts.out_dir = run_out_dir;
      opts.parallel = run_parallel;
      opts.log = [](const std::string& m) { std::printf("%s\n", m.c_str()); };
      const auto res = pipe::run_campaign(cfg, opts);
      std::printf("config hash %s\n", res.config_hash.c_str());
      std::printf("average spread %.2f / %+.2f Hz at %.1f dB\n", res.avg_f_neg(),
                  res.avg_f_pos(), res.threshold_db);
      if (res.fit_ok)
        std::printf("path loss n = %.4f, sigma = %.3f dB, r2 = %.4f\n", res.fit.n_exp,
                    res.fit.sigma_db, res.fit.r2);
      else
        std::printf("path loss fit unavailable: %s\n", res.fit_error.c_str());
      std::printf("summary -> %s/%s\n", res.out_dir.c_str(), res.summary_file.c_str());
      return res.all_ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
