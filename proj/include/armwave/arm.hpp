#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "armwave/csv.hpp"
#include "armwave/errors.hpp"
#include "armwave/quadcopter.hpp"

namespace armwave::arm {

using Vec7 = Eigen::Matrix<double, 7, 1>;
using Mat67 = Eigen::Matrix<double, 6, 7>;

/// Standard Denavit-Hartenberg link: rotZ(q + theta0) transZ(d) transX(a) rotX(alpha).
struct DhLink {
    double a = 0.0;
    double alpha = 0.0;
    double d = 0.0;
    double theta0 = 0.0;
};

/// Pose as base-frame position plus ZYX Euler angles (roll, pitch, yaw).
struct Pose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d rpy = Eigen::Vector3d::Zero();
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
};

/// Kinematic description of a 7-revolute serial chain.
struct ArmModel {
    std::array<DhLink, 7> links{};
    Vec7 q_min = Vec7::Constant(-3.05); ///< rad
    Vec7 q_max = Vec7::Constant(3.05);
    Vec7 qd_max = Vec7::Constant(1.5); ///< rad/s
    double ee_speed_cap = 0.5;         ///< m/s
    Vec7 q_ready = Vec7::Zero();       ///< well-conditioned tracking start

    /// 7-DOF chain with Sawyer-like proportions: shoulder offset, two 0.4 m
    /// arm segments, spherical-ish wrist with the tool point on the final
    /// axis (so the last joint spins the tool in place).
    static ArmModel sawyer_like() {
        ArmModel m;
        m.links[0] = {0.081, -1.5707963267948966, 0.317, 0.0};
        m.links[1] = {0.0, 1.5707963267948966, 0.1925, 0.0};
        m.links[2] = {0.0, -1.5707963267948966, 0.400, 0.0};
        m.links[3] = {0.0, 1.5707963267948966, 0.1685, 0.0};
        m.links[4] = {0.0, -1.5707963267948966, 0.400, 0.0};
        m.links[5] = {0.0, 1.5707963267948966, 0.1363, 0.0};
        m.links[6] = {0.0, 0.0, 0.1338, 0.0};
        m.q_ready << 0.0, -0.8, 0.0, 1.6, 0.0, -0.8, 0.0;
        return m;
    }

    /// Upper bound on the distance from the shoulder to the tool point.
    double max_reach() const {
        double r = links[0].a;
        for (std::size_t i = 1; i < links.size(); ++i)
            r += std::abs(links[i].a) + std::abs(links[i].d);
        return r;
    }

    void check_limits(const Vec7& q) const {
        for (int i = 0; i < 7; ++i)
            if (q[i] < q_min[i] || q[i] > q_max[i])
                throw ParameterError("joint " + std::to_string(i + 1) +
                                     " outside its limits");
    }
};

/// Joint state plus the redundant end-effector quantities the logs carry.
struct ArmState {
    Vec7 q = Vec7::Zero();
    Vec7 qdot = Vec7::Zero();
    Pose pose;
    Eigen::Matrix<double, 6, 1> twist = Eigen::Matrix<double, 6, 1>::Zero();
};

/// Commanded end-effector twist: linear (m/s) stacked on angular (rad/s).
struct EndEffectorCommand {
    Eigen::Matrix<double, 6, 1> V = Eigen::Matrix<double, 6, 1>::Zero();

    void check_speed(double cap) const {
        if (V.head<3>().norm() > cap + 1e-12)
            throw ParameterError("commanded linear speed exceeds the cap");
    }
};

namespace detail {

inline Eigen::Matrix4d dh_transform(const DhLink& l, double q) {
    double th = q + l.theta0;
    double ct = std::cos(th), st = std::sin(th);
    double ca = std::cos(l.alpha), sa = std::sin(l.alpha);
    Eigen::Matrix4d T;
    T << ct, -st * ca, st * sa, l.a * ct,
         st, ct * ca, -ct * sa, l.a * st,
         0.0, sa, ca, l.d,
         0.0, 0.0, 0.0, 1.0;
    return T;
}

inline Eigen::Vector3d rpy_from_R(const Eigen::Matrix3d& R) {
    // ZYX convention: R = Rz(yaw) Ry(pitch) Rx(roll)
    double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
    double roll = std::atan2(R(2, 1), R(2, 2));
    double yaw = std::atan2(R(1, 0), R(0, 0));
    return {roll, pitch, yaw};
}

// frame origins o_0..o_7 and z axes z_0..z_6 for the Jacobian columns
struct Frames {
    std::array<Eigen::Vector3d, 8> origin;
    std::array<Eigen::Vector3d, 7> z;
    Eigen::Matrix3d R_ee;
};

inline Frames chain_frames(const ArmModel& m, const Vec7& q) {
    Frames f;
    Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
    f.origin[0] = Eigen::Vector3d::Zero();
    for (int i = 0; i < 7; ++i) {
        f.z[i] = T.block<3, 1>(0, 2);
        T = T * dh_transform(m.links[std::size_t(i)], q[i]);
        f.origin[std::size_t(i) + 1] = T.block<3, 1>(0, 3);
    }
    f.R_ee = T.block<3, 3>(0, 0);
    return f;
}

} // namespace detail

inline Pose forward_kinematics(const ArmModel& m, const Vec7& q) {
    m.check_limits(q);
    auto f = detail::chain_frames(m, q);
    Pose p;
    p.position = f.origin[7];
    p.R = f.R_ee;
    p.rpy = detail::rpy_from_R(f.R_ee);
    return p;
}

/// Analytic geometric Jacobian in the base frame: column i is the
/// end-effector twist (linear; angular) per unit rate of joint i,
/// [z_{i-1} x (o_ee - o_{i-1}); z_{i-1}] for revolute joints.
inline Mat67 jacobian(const ArmModel& m, const Vec7& q) {
    m.check_limits(q);
    auto f = detail::chain_frames(m, q);
    Mat67 J;
    for (int i = 0; i < 7; ++i) {
        Eigen::Vector3d lin = f.z[i].cross(f.origin[7] - f.origin[std::size_t(i)]);
        J.block<3, 1>(0, i) = lin;
        J.block<3, 1>(3, i) = f.z[i];
    }
    return J;
}

struct DlsOptions {
    double lambda = 1e-3;     ///< damping inside the singular boundary layer
    double onset_factor = 10; ///< damping engages below onset_factor * lambda
};

/// Joint rates plus the conditioning diagnostics the caller may log.
struct JointSolution {
    Vec7 qdot = Vec7::Zero();
    double sigma_min = 0.0;
    double lambda_used = 0.0;
    double residual = 0.0; ///< ||J qdot - V||
};

/// Damped-least-squares resolution of an end-effector twist.
///
/// Away from singularities (sigma_min > onset_factor * lambda) the damping
/// is switched off entirely and the result is the exact minimum-norm
/// solution; inside the boundary layer the damping ramps up to `lambda`,
/// trading tracking residual for bounded joint rates.
inline JointSolution joint_velocities(const Mat67& J,
                                      const Eigen::Matrix<double, 6, 1>& V,
                                      const DlsOptions& opts = {}) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeThinU | Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    JointSolution sol;
    sol.sigma_min = sv[sv.size() - 1];
    double onset = opts.onset_factor * opts.lambda;
    double lam = 0.0;
    if (sol.sigma_min <= onset && opts.lambda > 0.0)
        lam = opts.lambda * (1.0 - sol.sigma_min / onset);
    sol.lambda_used = lam;
    Eigen::VectorXd y = svd.matrixU().transpose() * V;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(7);
    for (int i = 0; i < sv.size(); ++i) {
        double s = sv[i];
        double g = lam == 0.0 ? (s > 1e-14 ? 1.0 / s : 0.0)
                              : s / (s * s + lam * lam);
        x += g * y[i] * svd.matrixV().col(i);
    }
    sol.qdot = x;
    sol.residual = (J * sol.qdot - V).norm();
    return sol;
}

/// Realized end-effector motion log (the arm-side analogue of Trajectory).
struct ArmTrace {
    double dt = 0.01;
    std::vector<double> t;
    std::vector<Eigen::Vector3d> pos;  ///< realized tool position
    std::vector<Eigen::Vector3d> vel;  ///< realized linear velocity J qdot
    std::vector<Vec7> q;
    double max_speed = 0.0;            ///< max realized linear speed
    double rms_err = 0.0;              ///< vs desired path, after transient
    double terminal_drift_x = 0.0;     ///< |x error| at the final tick
};

struct TrackOptions {
    double kp_pos = 4.0;   ///< 1/s, position drift compensation
    double kp_ang = 4.0;   ///< 1/s, orientation hold
    double tick_hz = 100.0;
    double scale = 1.0;    ///< UAV meters per arm meter
    double transient_s = 1.0; ///< excluded from rms_err
    DlsOptions dls{};
};

/// Map NED displacements into the arm base frame: north -> +x, east -> -y,
/// down -> -z (right-handed, z up).
inline Eigen::Matrix3d ned_to_arm() {
    Eigen::Matrix3d M;
    M << 1, 0, 0, 0, -1, 0, 0, 0, -1;
    return M;
}

/// Replay a 10 Hz trajectory on the arm: linear interpolation between
/// waypoints with velocity feedforward plus proportional pose correction,
/// joint rates from the damped pseudo-inverse, forward Euler at the tick
/// rate. The realized linear speed is clamped to the model's cap.
inline ArmTrace track_trajectory(const ArmModel& m, const quad::Trajectory& traj,
                                 const TrackOptions& opts = {}) {
    if (traj.size() < 2)
        throw ParameterError("trajectory needs at least two samples");
    if (!(opts.tick_hz > 0.0) || !(opts.scale > 0.0))
        throw ParameterError("tick rate and scale must be > 0");

    Vec7 q = m.q_ready;
    Pose ready = forward_kinematics(m, q);
    Eigen::Matrix3d M = opts.scale * ned_to_arm();

    std::vector<Eigen::Vector3d> wp(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i)
        wp[i] = ready.position + M * (traj.pos[i] - traj.pos[0]);

    double reach = m.max_reach();
    double shoulder_z = m.links[0].d;
    double worst = 0.0;
    for (const auto& p : wp) {
        Eigen::Vector3d rel = p - Eigen::Vector3d(0.0, 0.0, shoulder_z);
        worst = std::max(worst, rel.norm());
    }
    if (worst > 0.95 * reach)
        throw TrackingError("requested motion leaves the workspace: max radius " +
                            format_double(worst) + " m vs reach " +
                            format_double(reach) + " m");

    double dt = 1.0 / opts.tick_hz;
    double duration = traj.t.back() - traj.t.front();
    std::size_t n_ticks = std::size_t(std::round(duration / dt));
    ArmTrace tr;
    tr.dt = dt;
    double err2_sum = 0.0;
    std::size_t err_count = 0;
    Eigen::Vector3d p_des_last = wp.front();

    for (std::size_t k = 0; k <= n_ticks; ++k) {
        double t = double(k) * dt;
        std::size_t seg = std::min(std::size_t(t / traj.dt), traj.size() - 2);
        double s = std::clamp((t - double(seg) * traj.dt) / traj.dt, 0.0, 1.0);
        Eigen::Vector3d p_des = (1.0 - s) * wp[seg] + s * wp[seg + 1];
        Eigen::Vector3d v_ff = (wp[seg + 1] - wp[seg]) / traj.dt;
        p_des_last = p_des;

        Pose cur = forward_kinematics(m, q);
        Eigen::Matrix<double, 6, 1> V;
        V.head<3>() = v_ff + opts.kp_pos * (p_des - cur.position);
        Eigen::AngleAxisd aerr(ready.R * cur.R.transpose());
        V.tail<3>() = opts.kp_ang * (aerr.angle() * aerr.axis());
        double vs = V.head<3>().norm();
        if (vs > m.ee_speed_cap)
            V.head<3>() *= m.ee_speed_cap / vs * (1.0 - 1e-12);

        Mat67 J = jacobian(m, q);
        JointSolution sol = joint_velocities(J, V, opts.dls);
        double rate_scale = 1.0;
        for (int i = 0; i < 7; ++i)
            if (std::abs(sol.qdot[i]) > m.qd_max[i])
                rate_scale = std::min(rate_scale, m.qd_max[i] / std::abs(sol.qdot[i]));
        sol.qdot *= rate_scale;
        Eigen::Vector3d v_real = (J * sol.qdot).head<3>();
        double speed = v_real.norm();
        if (speed > m.ee_speed_cap) {
            sol.qdot *= m.ee_speed_cap / speed * (1.0 - 1e-12);
            v_real = (J * sol.qdot).head<3>();
            speed = v_real.norm();
        }

        tr.t.push_back(t);
        tr.pos.push_back(cur.position);
        tr.vel.push_back(v_real);
        tr.q.push_back(q);
        tr.max_speed = std::max(tr.max_speed, speed);
        if (t >= opts.transient_s) {
            err2_sum += (cur.position - p_des).squaredNorm();
            ++err_count;
        }

        q += sol.qdot * dt;
        q = q.cwiseMax(m.q_min).cwiseMin(m.q_max);
    }
    tr.rms_err = err_count ? std::sqrt(err2_sum / double(err_count)) : 0.0;
    tr.terminal_drift_x = std::abs(tr.pos.back().x() - p_des_last.x());
    return tr;
}

inline void write_motion_csv(const std::filesystem::path& path, const ArmTrace& tr) {
    CsvTable t;
    t.meta.emplace_back("dt_s", format_double(tr.dt));
    t.columns = {"time_s", "x", "y", "z", "vx", "vy", "vz",
                 "q1", "q2", "q3", "q4", "q5", "q6", "q7"};
    for (std::size_t i = 0; i < tr.t.size(); ++i) {
        std::vector<double> row = {tr.t[i], tr.pos[i].x(), tr.pos[i].y(),
                                   tr.pos[i].z(), tr.vel[i].x(), tr.vel[i].y(),
                                   tr.vel[i].z()};
        for (int j = 0; j < 7; ++j)
            row.push_back(tr.q[i][j]);
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline ArmTrace read_motion_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    ArmTrace tr;
    std::size_t c_t = t.col("time_s");
    std::size_t cp[3] = {t.col("x"), t.col("y"), t.col("z")};
    std::size_t cv[3] = {t.col("vx"), t.col("vy"), t.col("vz")};
    std::size_t cq[7];
    for (int j = 0; j < 7; ++j)
        cq[j] = t.col("q" + std::to_string(j + 1));
    for (const auto& r : t.rows) {
        tr.t.push_back(r[c_t]);
        tr.pos.emplace_back(r[cp[0]], r[cp[1]], r[cp[2]]);
        tr.vel.emplace_back(r[cv[0]], r[cv[1]], r[cv[2]]);
        Vec7 q;
        for (int j = 0; j < 7; ++j)
            q[j] = r[cq[j]];
        tr.q.push_back(q);
    }
    if (const std::string* dt = t.find_meta("dt_s"))
        tr.dt = std::strtod(dt->c_str(), nullptr);
    else if (tr.t.size() > 1)
        tr.dt = tr.t[1] - tr.t[0];
    return tr;
}

} // namespace armwave::arm
