#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "armwave/csv.hpp"
#include "armwave/errors.hpp"
#include "armwave/wind.hpp"

namespace armwave::quad {

/// Rigid-body and drag parameters. C_d acts on the componentwise
/// signed-square of the air-relative velocity.
struct QuadParams {
    double m = 1.0;                                        ///< kg
    Eigen::Vector3d J{0.01, 0.01, 0.02};                   ///< kg m^2
    Eigen::Matrix3d C_d = 0.1 * Eigen::Matrix3d::Identity(); ///< kg/m
    double g = 9.81;                                       ///< m/s^2

    void validate() const {
        if (!(m > 0.0))
            throw ParameterError("mass must be > 0");
        if (!(J.x() > 0.0 && J.y() > 0.0 && J.z() > 0.0))
            throw ParameterError("inertia entries must be > 0");
        if ((C_d.array() < 0.0).any())
            throw ParameterError("drag coefficients must be >= 0");
    }
};

/// Twelve-dimensional state: NED position/velocity, ZYX Euler attitude,
/// body rates. Attitude must stay away from |theta| = pi/2.
struct QuadState {
    Eigen::Vector3d pos = Eigen::Vector3d::Zero();   ///< p_n, p_e, p_d (m)
    Eigen::Vector3d vel = Eigen::Vector3d::Zero();   ///< NED velocity (m/s)
    Eigen::Vector3d att = Eigen::Vector3d::Zero();   ///< phi, theta, psi (rad)
    Eigen::Vector3d rates = Eigen::Vector3d::Zero(); ///< omega_p, omega_q, omega_r
};

struct ControlInput {
    double F = 0.0;                                 ///< total thrust (N), >= 0
    Eigen::Vector3d tau = Eigen::Vector3d::Zero();  ///< tau_phi, tau_theta, tau_psi
};

/// State derivative, same layout as QuadState.
struct QuadDeriv {
    Eigen::Vector3d pos, vel, att, rates;
};

/// Rigid-body derivative with quadratic wind drag.
/// Drag: f_d = C_d * q where q_i = r_i |r_i| and r = V_w - pdot.
inline QuadDeriv quad_derivatives(const QuadState& s, const ControlInput& u,
                                  const Eigen::Vector3d& wind_ned,
                                  const QuadParams& p) {
    double phi = s.att.x(), theta = s.att.y(), psi = s.att.z();
    double ct = std::cos(theta);
    if (std::abs(theta) >= 1.5707963267948966 || std::abs(ct) < 1e-9)
        throw SingularityError("|pitch| reached pi/2");
    double cphi = std::cos(phi), sphi = std::sin(phi);
    double st = std::sin(theta), tt = st / ct;
    double cpsi = std::cos(psi), spsi = std::sin(psi);

    Eigen::Vector3d rel = wind_ned - s.vel;
    Eigen::Vector3d q(rel.x() * std::abs(rel.x()), rel.y() * std::abs(rel.y()),
                      rel.z() * std::abs(rel.z()));
    Eigen::Vector3d f_d = p.C_d * q;

    QuadDeriv d;
    d.pos = s.vel;
    d.vel.x() = (-cphi * st * cpsi - sphi * spsi) * u.F / p.m + f_d.x() / p.m;
    d.vel.y() = (-cphi * st * spsi + sphi * cpsi) * u.F / p.m + f_d.y() / p.m;
    d.vel.z() = p.g - (cphi * ct) * u.F / p.m + f_d.z() / p.m;

    double wp = s.rates.x(), wq = s.rates.y(), wr = s.rates.z();
    d.att.x() = wp + sphi * tt * wq + cphi * tt * wr;
    d.att.y() = cphi * wq - sphi * wr;
    d.att.z() = sphi / ct * wq + cphi / ct * wr;

    d.rates.x() = (p.J.y() - p.J.z()) / p.J.x() * wq * wr + u.tau.x() / p.J.x();
    d.rates.y() = (p.J.z() - p.J.x()) / p.J.y() * wp * wr + u.tau.y() / p.J.y();
    d.rates.z() = (p.J.x() - p.J.y()) / p.J.z() * wp * wq + u.tau.z() / p.J.z();
    return d;
}

namespace detail {
inline QuadState advance(const QuadState& s, const QuadDeriv& d, double h) {
    QuadState r;
    r.pos = s.pos + h * d.pos;
    r.vel = s.vel + h * d.vel;
    r.att = s.att + h * d.att;
    r.rates = s.rates + h * d.rates;
    return r;
}
} // namespace detail

/// Classical RK4 step; the wind sample is held constant across the step.
inline QuadState rk4_step(const QuadState& s, const ControlInput& u,
                          const Eigen::Vector3d& wind_ned, const QuadParams& p,
                          double h) {
    if (!(h > 0.0))
        throw ParameterError("step must be > 0");
    QuadDeriv k1 = quad_derivatives(s, u, wind_ned, p);
    QuadDeriv k2 = quad_derivatives(detail::advance(s, k1, h / 2.0), u, wind_ned, p);
    QuadDeriv k3 = quad_derivatives(detail::advance(s, k2, h / 2.0), u, wind_ned, p);
    QuadDeriv k4 = quad_derivatives(detail::advance(s, k3, h), u, wind_ned, p);
    QuadState r;
    r.pos = s.pos + h / 6.0 * (k1.pos + 2.0 * k2.pos + 2.0 * k3.pos + k4.pos);
    r.vel = s.vel + h / 6.0 * (k1.vel + 2.0 * k2.vel + 2.0 * k3.vel + k4.vel);
    r.att = s.att + h / 6.0 * (k1.att + 2.0 * k2.att + 2.0 * k3.att + k4.att);
    r.rates = s.rates + h / 6.0 * (k1.rates + 2.0 * k2.rates + 2.0 * k3.rates + k4.rates);
    return r;
}

struct Waypoint {
    Eigen::Vector3d pos = Eigen::Vector3d::Zero(); ///< NED target (m)
    double yaw = 0.0;                              ///< rad
};

/// Cascaded-loop gains and saturations. Defaults are tuned for the 1 kg
/// craft: 0.5 m offset settles inside 1 cm in under 10 s with no wind.
struct PidGains {
    double kp_pos = 2.0, kd_pos = 2.0, ki_pos = 0.8; ///< horizontal loops
    double kp_alt = 4.0, kd_alt = 3.0, ki_alt = 0.5; ///< vertical loop
    double kp_att = 40.0, kd_att = 10.0;             ///< roll/pitch loop
    double kp_yaw = 10.0, kd_yaw = 4.0;
    double max_tilt = 0.35;          ///< rad
    double max_integral = 1.0;       ///< m s (per axis)
    double max_thrust_factor = 2.0;  ///< times m g
    double max_moment = 0.5;         ///< N m
};

/// Cascaded PID: position loops command accelerations, mapped through the
/// current yaw to tilt setpoints and thrust; attitude loops command moments.
/// All channels saturate instead of erroring.
class PidHoverController {
  public:
    PidHoverController(const QuadParams& params, const PidGains& gains = {})
        : p_(params), g_(gains) {
        p_.validate();
    }

    void reset() { integral_.setZero(); }

    ControlInput update(const QuadState& s, const Waypoint& wp, double dt) {
        Eigen::Vector3d e = wp.pos - s.pos;
        integral_ += e * dt;
        integral_ = integral_.cwiseMax(-g_.max_integral).cwiseMin(g_.max_integral);

        double a_n = g_.kp_pos * e.x() - g_.kd_pos * s.vel.x() + g_.ki_pos * integral_.x();
        double a_e = g_.kp_pos * e.y() - g_.kd_pos * s.vel.y() + g_.ki_pos * integral_.y();
        double a_d = g_.kp_alt * e.z() - g_.kd_alt * s.vel.z() + g_.ki_alt * integral_.z();

        double phi = s.att.x(), theta = s.att.y(), psi = s.att.z();
        double ctct = std::cos(phi) * std::cos(theta);
        double F = p_.m * (p_.g - a_d) / std::max(ctct, 0.5);
        F = std::clamp(F, 0.0, g_.max_thrust_factor * p_.m * p_.g);

        // invert the small-angle thrust direction at the current yaw
        double Fe = std::max(F, 0.1 * p_.m * p_.g);
        double A = -p_.m * a_n / Fe, B = -p_.m * a_e / Fe;
        double theta_des = std::clamp(A * std::cos(psi) + B * std::sin(psi),
                                      -g_.max_tilt, g_.max_tilt);
        double phi_des = std::clamp(A * std::sin(psi) - B * std::cos(psi),
                                    -g_.max_tilt, g_.max_tilt);

        auto wrap = [](double a) {
            while (a > kPi)
                a -= 2.0 * kPi;
            while (a < -kPi)
                a += 2.0 * kPi;
            return a;
        };
        ControlInput u;
        u.F = F;
        u.tau.x() = p_.J.x() * (g_.kp_att * (phi_des - phi) - g_.kd_att * s.rates.x());
        u.tau.y() = p_.J.y() * (g_.kp_att * (theta_des - theta) - g_.kd_att * s.rates.y());
        u.tau.z() = p_.J.z() * (g_.kp_yaw * wrap(wp.yaw - psi) - g_.kd_yaw * s.rates.z());
        u.tau = u.tau.cwiseMax(-g_.max_moment).cwiseMin(g_.max_moment);
        return u;
    }

  private:
    QuadParams p_;
    PidGains g_;
    Eigen::Vector3d integral_ = Eigen::Vector3d::Zero();
};

/// 10 Hz export stream: position, attitude and their rates.
struct Trajectory {
    double dt = 0.1;
    std::vector<double> t;
    std::vector<Eigen::Vector3d> pos, att;
    std::vector<Eigen::Vector3d> vel, att_rate;

    std::size_t size() const { return t.size(); }
};

struct SimOptions {
    double h = 1e-3;          ///< internal integration step (s)
    double export_hz = 10.0;  ///< trajectory decimation rate
    PidGains gains{};
    QuadState initial{};      ///< ignored unless start_at_initial
    bool start_at_initial = false;
};

/// Closed-loop hover under a wind series (zero-order hold per fine step).
/// The wind grid must cover the full duration.
inline Trajectory simulate_hover(const QuadParams& params,
                                 const wind::TurbulenceSeries& wnd,
                                 const Waypoint& wp, double duration,
                                 const SimOptions& opts = {}) {
    params.validate();
    if (!(duration > 0.0) || !(opts.h > 0.0))
        throw ParameterError("duration and step must be > 0");
    double steps_per_export = 1.0 / (opts.export_hz * opts.h);
    if (std::abs(steps_per_export - std::round(steps_per_export)) > 1e-9)
        throw ParameterError("export rate must divide the integration rate");
    std::size_t dec = std::size_t(std::round(steps_per_export));
    bool have_wind = !wnd.V_w.empty();
    if (have_wind && wnd.dt * double(wnd.V_w.size()) + 1e-12 < duration)
        throw GridError("wind series does not cover the simulation duration");

    QuadState s;
    if (opts.start_at_initial)
        s = opts.initial;
    else {
        s.pos = wp.pos;
        s.att.z() = wp.yaw;
    }
    PidHoverController ctl(params, opts.gains);

    Trajectory traj;
    traj.dt = 1.0 / opts.export_hz;
    std::size_t n_steps = std::size_t(std::round(duration / opts.h));
    auto wind_at = [&](double t) -> Eigen::Vector3d {
        if (!have_wind)
            return Eigen::Vector3d::Zero();
        std::size_t i = std::min(std::size_t(t / wnd.dt), wnd.V_w.size() - 1);
        return wnd.V_w[i];
    };
    auto record = [&](double t, const QuadState& st, const Eigen::Vector3d& w) {
        traj.t.push_back(t);
        traj.pos.push_back(st.pos);
        traj.att.push_back(st.att);
        traj.vel.push_back(st.vel);
        ControlInput hold; // attitude kinematics only need the state
        QuadDeriv d = quad_derivatives(st, hold, w, params);
        traj.att_rate.push_back(d.att);
    };
    record(0.0, s, wind_at(0.0));
    for (std::size_t i = 0; i < n_steps; ++i) {
        double t = double(i) * opts.h;
        Eigen::Vector3d w = wind_at(t);
        ControlInput u = ctl.update(s, wp, opts.h);
        s = rk4_step(s, u, w, params, opts.h);
        if ((i + 1) % dec == 0)
            record(double(i + 1) * opts.h, s, wind_at(double(i + 1) * opts.h));
    }
    return traj;
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const Trajectory& tr) {
    CsvTable t;
    t.meta.emplace_back("dt_s", format_double(tr.dt));
    t.columns = {"time_s", "p_n", "p_e", "p_d", "phi", "theta", "psi",
                 "v_n", "v_e", "v_d", "phi_dot", "theta_dot", "psi_dot"};
    for (std::size_t i = 0; i < tr.size(); ++i)
        t.rows.push_back({tr.t[i], tr.pos[i].x(), tr.pos[i].y(), tr.pos[i].z(),
                          tr.att[i].x(), tr.att[i].y(), tr.att[i].z(),
                          tr.vel[i].x(), tr.vel[i].y(), tr.vel[i].z(),
                          tr.att_rate[i].x(), tr.att_rate[i].y(),
                          tr.att_rate[i].z()});
    write_csv(path, t);
}

inline Trajectory read_trajectory_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    Trajectory tr;
    std::size_t c_t = t.col("time_s");
    std::size_t cp[3] = {t.col("p_n"), t.col("p_e"), t.col("p_d")};
    std::size_t ca[3] = {t.col("phi"), t.col("theta"), t.col("psi")};
    std::size_t cv[3] = {t.col("v_n"), t.col("v_e"), t.col("v_d")};
    std::size_t cr[3] = {t.col("phi_dot"), t.col("theta_dot"), t.col("psi_dot")};
    for (const auto& r : t.rows) {
        tr.t.push_back(r[c_t]);
        tr.pos.emplace_back(r[cp[0]], r[cp[1]], r[cp[2]]);
        tr.att.emplace_back(r[ca[0]], r[ca[1]], r[ca[2]]);
        tr.vel.emplace_back(r[cv[0]], r[cv[1]], r[cv[2]]);
        tr.att_rate.emplace_back(r[cr[0]], r[cr[1]], r[cr[2]]);
    }
    if (const std::string* dt = t.find_meta("dt_s"))
        tr.dt = std::strtod(dt->c_str(), nullptr);
    else if (tr.t.size() > 1)
        tr.dt = tr.t[1] - tr.t[0];
    return tr;
}

} // namespace armwave::quad
