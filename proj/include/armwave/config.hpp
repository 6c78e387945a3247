#pragma once

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "armwave/analysis.hpp"
#include "armwave/arm.hpp"
#include "armwave/calibration.hpp"
#include "armwave/channel.hpp"
#include "armwave/constants.hpp"
#include "armwave/csv.hpp"
#include "armwave/errors.hpp"
#include "armwave/quadcopter.hpp"
#include "armwave/wind.hpp"

namespace armwave::pipe {

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

/// Dimension family a config key expects. Dimensioned values carry an
/// explicit unit token; bare numbers are rejected so ft never sneaks in as m.
enum class Unit { none, length, time, freq, angle, speed, db, mass };

// Scale from a unit token to the family's canonical unit (m, s, Hz, rad,
// m/s, dB, kg). Unknown token or wrong family throws.
inline double unit_scale(Unit fam, const std::string& tok, const std::string& where) {
  const std::string u = lower(tok);
  switch (fam) {
    case Unit::length:
      if (u == "m") return 1.0;
      if (u == "cm") return 0.01;
      if (u == "mm") return 0.001;
      if (u == "ft") return kFtToM;
      break;
    case Unit::time:
      if (u == "s") return 1.0;
      if (u == "ms") return 1e-3;
      if (u == "us") return 1e-6;
      break;
    case Unit::freq:
      if (u == "hz") return 1.0;
      if (u == "khz") return 1e3;
      if (u == "mhz") return 1e6;
      if (u == "ghz") return 1e9;
      break;
    case Unit::angle:
      if (u == "rad") return 1.0;
      if (u == "deg") return kPi / 180.0;
      break;
    case Unit::speed:
      if (u == "mps" || u == "m/s") return 1.0;
      if (u == "ftps" || u == "ft/s") return kFtToM;
      break;
    case Unit::db:
      if (u == "db") return 1.0;
      break;
    case Unit::mass:
      if (u == "kg") return 1.0;
      if (u == "g") return 1e-3;
      break;
    case Unit::none:
      break;
  }
  throw ParseError(where + ": unit '" + tok + "' not valid here");
}

inline double parse_number(const std::string& tok, const std::string& where) {
  const char* begin = tok.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ParseError(where + ": expected a number, got '" + tok + "'");
  if (!std::isfinite(v)) throw ParseError(where + ": value must be finite");
  return v;
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

/// "число unit" for dimensioned keys, bare number otherwise.
inline double parse_quantity(const std::string& value, Unit fam, const std::string& where) {
  const auto toks = split_ws(value);
  if (fam == Unit::none) {
    if (toks.size() != 1)
      throw ParseError(where + ": expected a bare number, got '" + value + "'");
    return parse_number(toks[0], where);
  }
  if (toks.size() != 2)
    throw ParseError(where + ": expected '<number> <unit>', got '" + value + "'");
  return parse_number(toks[0], where) * unit_scale(fam, toks[1], where);
}

inline std::uint64_t parse_u64(const std::string& value, const std::string& where) {
  const auto toks = split_ws(value);
  if (toks.size() != 1 || toks[0].find_first_not_of("0123456789") != std::string::npos)
    throw ParseError(where + ": expected a non-negative integer, got '" + value + "'");
  errno = 0;
  char* end = nullptr;
  const std::uint64_t v = std::strtoull(toks[0].c_str(), &end, 10);
  if (errno == ERANGE) throw ParseError(where + ": integer out of range");
  return v;
}

inline int parse_int(const std::string& value, const std::string& where) {
  const std::uint64_t v = parse_u64(value, where);
  if (v > 1000000000ull) throw ParseError(where + ": integer out of range");
  return static_cast<int>(v);
}

/// Comma-separated distances with one trailing unit token. The campaign
/// stores distances in feet; require_unit=false lets the CLI take bare feet.
inline std::vector<double> parse_distances(const std::string& value, const std::string& where,
                                           bool require_unit) {
  std::string body = trim(value);
  double to_ft = 1.0;
  const auto sp = body.find_last_of(" \t");
  bool have_unit = false;
  if (sp != std::string::npos) {
    const std::string tail = body.substr(sp + 1);
    if (!tail.empty() && !std::isdigit(static_cast<unsigned char>(tail[0])) && tail[0] != '.' &&
        tail[0] != '-' && tail[0] != '+') {
      to_ft = unit_scale(Unit::length, tail, where) / kFtToM;
      body = trim(body.substr(0, sp));
      have_unit = true;
    }
  }
  if (require_unit && !have_unit)
    throw ParseError(where + ": distance list needs a unit (ft or m)");
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    const auto comma = body.find(',', pos);
    const std::string piece = trim(body.substr(pos, comma == std::string::npos
                                                         ? std::string::npos
                                                         : comma - pos));
    if (piece.empty()) throw ParseError(where + ": empty entry in distance list");
    out.push_back(parse_number(piece, where) * to_ft);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ParseError(where + ": empty distance list");
  return out;
}

inline chan::ChannelParams default_campaign_channel() {
  chan::ChannelParams ch;
  ch.shadow_sigma_db = 1.0; // per-sweep shadowing on by default
  return ch;
}

}  // namespace detail

/// Everything a campaign run needs, SI-canonical. Built from a key-value
/// config document; defaults reproduce the reference chamber experiment.
struct CampaignConfig {
  std::uint64_t seed = 42;
  std::vector<double> distances_ft = {3.5,  5.5,  7.5,  9.5,  11.5, 13.5,
                                      15.5, 17.5, 19.5, 21.5, 23.5};
  int sweeps = 3;
  double idle_lead_s = 2.0;     ///< held-still interval opening each sweep
  double hover_alt_m = 50.0 * kFtToM;
  double motion_margin_s = 0.5; ///< motion simulated past the sweep end

  wind::DrydenParams dryden{};  ///< seed field ignored; derived per sweep
  wind::MeanWind mean_wind{};
  quad::QuadParams quad{};
  quad::SimOptions sim{};
  arm::TrackOptions track{};
  chan::SounderConfig sounder{};
  chan::ChannelParams channel = detail::default_campaign_channel();
  cal::CableWanderParams cable{};
  an::IdleOptions idle{};
  double threshold_db = -60.0;  ///< spread threshold, absolute dB
  double pdf_binwidth = 0.02;   ///< m/s

  void validate() const {
    if (distances_ft.empty()) throw ParameterError("config: distance list empty");
    for (double d : distances_ft)
      if (!(d > 0.0)) throw ParameterError("config: distances must be positive");
    if (sweeps < 1) throw ParameterError("config: sweeps must be at least 1");
    if (!(idle_lead_s >= 0.0)) throw ParameterError("config: idle lead must be >= 0");
    if (!(motion_margin_s >= 0.0)) throw ParameterError("config: motion margin must be >= 0");
    if (!(hover_alt_m > 0.0)) throw ParameterError("config: hover altitude must be > 0");
    dryden.validate();
    quad.validate();
    sounder.validate();
    channel.validate();
    cable.validate();
    if (!(idle_lead_s < sounder.sweep_duration()))
      throw ParameterError("config: idle lead must be shorter than a sweep");
    if (!(track.kp_pos > 0.0 && track.kp_ang > 0.0))
      throw ParameterError("config: arm gains must be > 0");
    if (!(track.tick_hz > 0.0 && track.scale > 0.0))
      throw ParameterError("config: arm tick rate and scale must be > 0");
    if (!(sim.export_hz > 0.0 && sim.h > 0.0))
      throw ParameterError("config: uav export rate and step must be > 0");
    if (idle.window < 2) throw ParameterError("config: idle window must be at least 2");
    if (!(idle.variance_factor > 0.0))
      throw ParameterError("config: idle variance factor must be > 0");
    if (!std::isfinite(threshold_db)) throw ParameterError("config: threshold must be finite");
    if (!(pdf_binwidth > 0.0)) throw ParameterError("config: pdf bin width must be > 0");
  }

  /// Every semantic field, fixed order, canonical units. Two configs agree
  /// on this string exactly when a campaign cannot tell them apart.
  std::string canonical_string() const {
    std::ostringstream s;
    auto put = [&s](const char* key, double v) { s << key << " = " << format_double(v) << "\n"; };
    s << "seed = " << seed << "\n";
    s << "distances_ft =";
    for (double d : distances_ft) s << " " << format_double(d);
    s << "\n";
    s << "sweeps = " << sweeps << "\n";
    put("idle_lead_s", idle_lead_s);
    put("hover_alt_m", hover_alt_m);
    put("motion_margin_s", motion_margin_s);
    put("sigma2_u", dryden.sigma_u2);
    put("sigma2_v", dryden.sigma_v2);
    put("sigma2_w", dryden.sigma_w2);
    put("L_u_m", dryden.L_u);
    put("L_v_m", dryden.L_v);
    put("L_w_m", dryden.L_w);
    put("airspeed_mps", dryden.V_a0);
    put("wind_dt_s", dryden.dt);
    put("mean_wind_n_mps", mean_wind.u_bar);
    put("mean_wind_e_mps", mean_wind.v_bar);
    put("mean_wind_d_mps", mean_wind.w_bar);
    put("quad_mass_kg", quad.m);
    put("quad_Jx", quad.J.x());
    put("quad_Jy", quad.J.y());
    put("quad_Jz", quad.J.z());
    put("quad_drag", quad.C_d(0, 0));
    put("gravity", quad.g);
    put("uav_step_s", sim.h);
    put("uav_export_hz", sim.export_hz);
    put("arm_kp", track.kp_pos);
    put("arm_kp_ang", track.kp_ang);
    put("arm_tick_hz", track.tick_hz);
    put("arm_scale", track.scale);
    put("arm_dls_lambda", track.dls.lambda);
    put("arm_dls_onset", track.dls.onset_factor);
    put("f_c_hz", sounder.f_c);
    s << "n_points = " << sounder.n_points << "\n";
    put("Ts_s", sounder.Ts);
    put("if_bandwidth_hz", sounder.if_bandwidth);
    put("noise_floor_db", sounder.noise_floor_db);
    put("pg_d0_db", channel.pg_d0_db);
    put("n_exp", channel.n_exp);
    put("shadow_sigma_db", channel.shadow_sigma_db);
    put("phi_0_rad", channel.phi_0);
    put("d0_m", channel.d0);
    put("cable_loss_db", cable.nominal_loss_db);
    put("cable_phase_rad", cable.nominal_phase_rad);
    put("cable_phase_wander_deg", cable.phase_wander_deg);
    put("cable_mag_wander_db", cable.mag_wander_db);
    put("cable_reflection", cable.reflection_mag);
    s << "cable_smooth_window = " << cable.smooth_window << "\n";
    put("cable_phase_bias_lo_deg", cable.phase_bias_lo_deg);
    put("cable_phase_bias_hi_deg", cable.phase_bias_hi_deg);
    put("cable_mag_bias_lo_db", cable.mag_bias_lo_db);
    put("cable_mag_bias_hi_db", cable.mag_bias_hi_db);
    put("reconnect_phase_wander_deg", cable.reconnect_phase_wander_deg);
    put("reconnect_mag_wander_db", cable.reconnect_mag_wander_db);
    put("threshold_db", threshold_db);
    s << "idle_window = " << idle.window << "\n";
    put("idle_factor", idle.variance_factor);
    put("pdf_binwidth_mps", pdf_binwidth);
    return s.str();
  }

  std::uint64_t hash() const;
  std::string hash_hex() const;
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t CampaignConfig::hash() const { return fnv1a(canonical_string()); }

inline std::string CampaignConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

namespace detail {

inline void apply_key(CampaignConfig& c, const std::string& key, const std::string& value,
                      const std::string& where) {
  auto q = [&](Unit fam) { return parse_quantity(value, fam, where); };
  if (key == "seed") c.seed = parse_u64(value, where);
  else if (key == "distances") c.distances_ft = parse_distances(value, where, true);
  else if (key == "sweeps") c.sweeps = parse_int(value, where);
  else if (key == "idle_lead") c.idle_lead_s = q(Unit::time);
  else if (key == "hover_alt") c.hover_alt_m = q(Unit::length);
  else if (key == "motion_margin") c.motion_margin_s = q(Unit::time);
  else if (key == "sigma2_u") c.dryden.sigma_u2 = q(Unit::none);
  else if (key == "sigma2_v") c.dryden.sigma_v2 = q(Unit::none);
  else if (key == "sigma2_w") c.dryden.sigma_w2 = q(Unit::none);
  else if (key == "L_u") c.dryden.L_u = q(Unit::length);
  else if (key == "L_v") c.dryden.L_v = q(Unit::length);
  else if (key == "L_w") c.dryden.L_w = q(Unit::length);
  else if (key == "airspeed") c.dryden.V_a0 = q(Unit::speed);
  else if (key == "wind_dt") c.dryden.dt = q(Unit::time);
  else if (key == "mean_wind_n") c.mean_wind.u_bar = q(Unit::speed);
  else if (key == "mean_wind_e") c.mean_wind.v_bar = q(Unit::speed);
  else if (key == "mean_wind_d") c.mean_wind.w_bar = q(Unit::speed);
  else if (key == "quad_mass") c.quad.m = q(Unit::mass);
  else if (key == "quad_Jx") c.quad.J.x() = q(Unit::none);
  else if (key == "quad_Jy") c.quad.J.y() = q(Unit::none);
  else if (key == "quad_Jz") c.quad.J.z() = q(Unit::none);
  else if (key == "quad_drag") c.quad.C_d = q(Unit::none) * Eigen::Matrix3d::Identity();
  else if (key == "gravity") c.quad.g = q(Unit::none);
  else if (key == "uav_step") c.sim.h = q(Unit::time);
  else if (key == "uav_export") c.sim.export_hz = q(Unit::freq);
  else if (key == "arm_kp") c.track.kp_pos = q(Unit::none);
  else if (key == "arm_kp_ang") c.track.kp_ang = q(Unit::none);
  else if (key == "arm_tick") c.track.tick_hz = q(Unit::freq);
  else if (key == "arm_scale") c.track.scale = q(Unit::none);
  else if (key == "arm_dls_lambda") c.track.dls.lambda = q(Unit::none);
  else if (key == "arm_dls_onset") c.track.dls.onset_factor = q(Unit::none);
  else if (key == "f_c") c.sounder.f_c = q(Unit::freq);
  else if (key == "n_points") c.sounder.n_points = parse_int(value, where);
  else if (key == "Ts") c.sounder.Ts = q(Unit::time);
  else if (key == "if_bandwidth") c.sounder.if_bandwidth = q(Unit::freq);
  else if (key == "noise_floor") c.sounder.noise_floor_db = q(Unit::db);
  else if (key == "pg_d0") c.channel.pg_d0_db = q(Unit::db);
  else if (key == "n_exp") c.channel.n_exp = q(Unit::none);
  else if (key == "shadow_sigma") c.channel.shadow_sigma_db = q(Unit::db);
  else if (key == "phi_0") c.channel.phi_0 = q(Unit::angle);
  else if (key == "d0") c.channel.d0 = q(Unit::length);
  else if (key == "cable_loss") c.cable.nominal_loss_db = q(Unit::db);
  else if (key == "cable_phase") c.cable.nominal_phase_rad = q(Unit::angle);
  else if (key == "cable_phase_wander")
    c.cable.phase_wander_deg = q(Unit::angle) * 180.0 / kPi;
  else if (key == "cable_mag_wander") c.cable.mag_wander_db = q(Unit::db);
  else if (key == "cable_reflection") c.cable.reflection_mag = q(Unit::none);
  else if (key == "cable_smooth_window") c.cable.smooth_window = parse_int(value, where);
  else if (key == "cable_phase_bias_lo")
    c.cable.phase_bias_lo_deg = q(Unit::angle) * 180.0 / kPi;
  else if (key == "cable_phase_bias_hi")
    c.cable.phase_bias_hi_deg = q(Unit::angle) * 180.0 / kPi;
  else if (key == "cable_mag_bias_lo") c.cable.mag_bias_lo_db = q(Unit::db);
  else if (key == "cable_mag_bias_hi") c.cable.mag_bias_hi_db = q(Unit::db);
  else if (key == "reconnect_phase_wander")
    c.cable.reconnect_phase_wander_deg = q(Unit::angle) * 180.0 / kPi;
  else if (key == "reconnect_mag_wander") c.cable.reconnect_mag_wander_db = q(Unit::db);
  else if (key == "threshold") c.threshold_db = q(Unit::db);
  else if (key == "idle_window") c.idle.window = parse_int(value, where);
  else if (key == "idle_factor") c.idle.variance_factor = q(Unit::none);
  else if (key == "pdf_binwidth") c.pdf_binwidth = q(Unit::speed);
  else throw ParseError(where + ": unknown key '" + key + "'");
}

}  // namespace detail

/// Key-value config document: 'key = value [unit]', '#' starts a comment.
/// Unknown keys, duplicate keys, and missing units are hard errors.
inline CampaignConfig parse_config_text(const std::string& text,
                                        const std::string& name = "<config>") {
  CampaignConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = name + ":" + std::to_string(line_no);
    const auto hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line.erase(hash_pos);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ParseError(where + ": expected 'key = value'");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    if (value.empty()) throw ParseError(where + ": empty value for '" + key + "'");
    if (!seen.insert(key).second)
      throw ParseError(where + ": duplicate key '" + key + "'");
    detail::apply_key(cfg, key, value, where);
  }
  return cfg;
}

inline CampaignConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.filename().string());
}

/// CLI distance override: bare numbers are feet.
inline std::vector<double> parse_distance_override(const std::string& value) {
  return detail::parse_distances(value, "--distances", false);
}

}  // namespace armwave::pipe
