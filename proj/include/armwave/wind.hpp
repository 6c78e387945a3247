#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "armwave/constants.hpp"
#include "armwave/csv.hpp"
#include "armwave/errors.hpp"
#include "armwave/rng.hpp"

namespace armwave::wind {


/// Dryden turbulence shaping parameters. Length scales are stored in
/// meters; config files may give them in feet and convert on load.
struct DrydenParams {
    double sigma_u2 = 0.53; ///< turbulence variances, (m/s)^2
    double sigma_v2 = 0.53;
    double sigma_w2 = 0.0;
    double L_u = 200.0 * kFtToM; ///< length scales, m
    double L_v = 200.0 * kFtToM;
    double L_w = 50.0 * kFtToM; ///< defaults to the 50 ft hover altitude
    double V_a0 = std::sqrt(5.0); ///< airspeed estimate, m/s
    double dt = 1e-3;             ///< sample interval, s
    std::uint64_t seed = 1;

    void validate() const {
        if (!(sigma_u2 >= 0.0 && sigma_v2 >= 0.0 && sigma_w2 >= 0.0))
            throw ParameterError("turbulence variances must be >= 0");
        if (!(L_u > 0.0 && L_v > 0.0 && L_w > 0.0))
            throw ParameterError("turbulence length scales must be > 0");
        if (!(V_a0 > 0.0))
            throw ParameterError("airspeed estimate must be > 0");
        if (!(dt > 0.0))
            throw ParameterError("sample interval must be > 0");
    }
};

/// Constant NED mean wind.
struct MeanWind {
    double u_bar = 2.0;
    double v_bar = -1.0;
    double w_bar = 0.0;

    Eigen::Vector3d vec() const { return {u_bar, v_bar, w_bar}; }
    double speed() const { return vec().norm(); }
};

/// Airspeed estimate for a hovering craft: the mean wind speed itself.
inline double airspeed_estimate(const MeanWind& mean) {
    double v = mean.speed();
    if (!(v > 0.0))
        throw ParameterError("mean wind speed must be > 0 to estimate airspeed");
    return v;
}

/// Turbulence series on a uniform grid. u,v,w live in the mean-wind-aligned
/// frame; V_w holds the composed NED wind once compose_wind has run.
struct TurbulenceSeries {
    double dt = 0.0;
    std::vector<double> t;
    std::vector<double> u, v, w;
    std::vector<Eigen::Vector3d> V_w;

    std::size_t size() const { return t.size(); }
};

/// Discrete-time rational filter in z^-1, denominator normalized so a[0]=1.
/// Runs as Direct Form II transposed.
struct DigitalFilter {
    std::vector<double> b; ///< numerator, b[0] + b[1] z^-1 + ...
    std::vector<double> a; ///< denominator, a[0] == 1
    double dt = 0.0;       ///< sample interval the filter was designed for
    std::vector<double> state;

    void reset() { state.assign(std::max(b.size(), a.size()) - 1, 0.0); }

    bool is_zero() const {
        for (double c : b)
            if (c != 0.0)
                return false;
        return true;
    }

    double step(double x) {
        std::size_t ns = state.size();
        double y = b[0] * x + (ns ? state[0] : 0.0);
        for (std::size_t i = 0; i + 1 < ns; ++i) {
            double bi = i + 1 < b.size() ? b[i + 1] : 0.0;
            double ai = i + 1 < a.size() ? a[i + 1] : 0.0;
            state[i] = bi * x + state[i + 1] - ai * y;
        }
        if (ns) {
            double bi = ns < b.size() ? b[ns] : 0.0;
            double ai = ns < a.size() ? a[ns] : 0.0;
            state[ns - 1] = bi * x - ai * y;
        }
        return y;
    }

    /// H(e^{j 2 pi f dt}).
    std::complex<double> response(double f_hz) const {
        std::complex<double> num = 0.0, den = 0.0;
        double w = 2.0 * kPi * f_hz * dt;
        for (std::size_t k = 0; k < b.size(); ++k)
            num += b[k] * std::exp(std::complex<double>(0.0, -w * double(k)));
        for (std::size_t k = 0; k < a.size(); ++k)
            den += a[k] * std::exp(std::complex<double>(0.0, -w * double(k)));
        return num / den;
    }

    double dc_gain() const { return response(0.0).real(); }
};

enum class Axis { u, v, w };

/// Pole/zero map (z = e^{s dt}, DC gain matched) or Tustin. Matched mapping
/// is the default: it keeps the magnitude response within 2% of the
/// continuous filter up to f = 1/(10 dt), where Tustin's frequency warping
/// alone already costs more than 3%.
enum class Discretization { matched_z, bilinear };

namespace detail {

// continuous-time prototype: gain * prod(s + zero) / prod(s + pole)
struct CtPrototype {
    double gain = 0.0;
    std::vector<double> zeros; // as positive corner rates: factor (s + z)
    std::vector<double> poles;
};

inline CtPrototype dryden_prototype(const DrydenParams& p, Axis axis) {
    CtPrototype ct;
    double s2, L;
    switch (axis) {
    case Axis::u: s2 = p.sigma_u2; L = p.L_u; break;
    case Axis::v: s2 = p.sigma_v2; L = p.L_v; break;
    default: s2 = p.sigma_w2; L = p.L_w; break;
    }
    double V = p.V_a0;
    double a = V / L;
    if (axis == Axis::u) {
        ct.gain = std::sqrt(s2) * std::sqrt(2.0 * V / L);
        ct.poles = {a};
    } else {
        ct.gain = std::sqrt(s2) * std::sqrt(3.0 * V / L);
        ct.zeros = {V / (std::sqrt(3.0) * L)};
        ct.poles = {a, a};
    }
    return ct;
}

inline std::vector<double> poly_mul(const std::vector<double>& p,
                                    const std::vector<double>& q) {
    std::vector<double> r(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < q.size(); ++j)
            r[i + j] += p[i] * q[j];
    return r;
}

// coefficients of prod(s + c_i), ascending powers of s
inline std::vector<double> roots_to_poly(const std::vector<double>& corners) {
    std::vector<double> p = {1.0};
    for (double c : corners)
        p = poly_mul(p, {c, 1.0});
    return p;
}

inline void check_stable(const std::vector<double>& a) {
    // Jury test for degree <= 2; higher degrees are never produced here.
    if (a.size() == 2) {
        if (std::abs(a[1]) >= 1.0)
            throw Error("discretized filter is unstable");
    } else if (a.size() == 3) {
        if (std::abs(a[2]) >= 1.0 || std::abs(a[1]) >= 1.0 + a[2])
            throw Error("discretized filter is unstable");
    } else if (a.size() > 3) {
        throw Error("stability check limited to biquads");
    }
}

inline DigitalFilter bilinear_transform(double gain,
                                        const std::vector<double>& num_s,
                                        const std::vector<double>& den_s,
                                        double dt) {
    // s = c (1 - z^-1) / (1 + z^-1), c = 2/dt, both polynomials brought to
    // the common degree N over (1 + z^-1)^N
    std::size_t N = std::max(num_s.size(), den_s.size()) - 1;
    double c = 2.0 / dt;
    auto expand = [&](const std::vector<double>& poly) {
        std::vector<double> acc(N + 1, 0.0);
        for (std::size_t k = 0; k < poly.size(); ++k) {
            std::vector<double> term = {1.0};
            for (std::size_t i = 0; i < k; ++i)
                term = poly_mul(term, {1.0, -1.0}); // (1 - z^-1)
            for (std::size_t i = k; i < N; ++i)
                term = poly_mul(term, {1.0, 1.0}); // (1 + z^-1)
            double scale = poly[k] * std::pow(c, double(k));
            for (std::size_t i = 0; i < term.size(); ++i)
                acc[i] += scale * term[i];
        }
        return acc;
    };
    std::vector<double> b = expand(num_s);
    std::vector<double> a = expand(den_s);
    double a0 = a[0];
    for (double& x : b)
        x *= gain / a0;
    for (double& x : a)
        x /= a0;
    DigitalFilter f{b, a, dt, {}};
    check_stable(f.a);
    f.reset();
    return f;
}

inline DigitalFilter matched_z_transform(const CtPrototype& ct, double dt) {
    std::vector<double> b = {1.0};
    for (double z : ct.zeros)
        b = poly_mul(b, {1.0, -std::exp(-z * dt)});
    std::vector<double> a = {1.0};
    for (double p : ct.poles)
        a = poly_mul(a, {1.0, -std::exp(-p * dt)});
    // match the continuous DC gain exactly
    double dc_ct = ct.gain;
    for (double z : ct.zeros)
        dc_ct *= z;
    for (double p : ct.poles)
        dc_ct /= p;
    double num_dc = 0.0, den_dc = 0.0;
    for (double x : b)
        num_dc += x;
    for (double x : a)
        den_dc += x;
    double g = dc_ct * den_dc / num_dc;
    for (double& x : b)
        x *= g;
    DigitalFilter f{b, a, dt, {}};
    check_stable(f.a);
    f.reset();
    return f;
}

} // namespace detail

/// |H_axis(j 2 pi f)| of the continuous prototype; reference for response
/// checks.
inline double continuous_magnitude(const DrydenParams& p, Axis axis, double f_hz) {
    auto ct = detail::dryden_prototype(p, axis);
    std::complex<double> s(0.0, 2.0 * kPi * f_hz);
    std::complex<double> h = ct.gain;
    for (double z : ct.zeros)
        h *= s + z;
    for (double pl : ct.poles)
        h /= s + pl;
    return std::abs(h);
}

/// Build the discrete shaping filter for one turbulence axis.
/// A zero-variance axis yields the zero filter.
inline DigitalFilter discretize_dryden(const DrydenParams& params, Axis axis,
                                       Discretization method = Discretization::matched_z) {
    params.validate();
    auto ct = detail::dryden_prototype(params, axis);
    if (ct.gain == 0.0) {
        DigitalFilter f{{0.0}, {1.0}, params.dt, {}};
        f.reset();
        return f;
    }
    if (method == Discretization::matched_z)
        return detail::matched_z_transform(ct, params.dt);
    std::vector<double> num_s = detail::roots_to_poly(ct.zeros);
    std::vector<double> den_s = detail::roots_to_poly(ct.poles);
    return detail::bilinear_transform(ct.gain, num_s, den_s, params.dt);
}

/// Filter three independent white-noise streams into (u,v,w). The driving
/// noise is unit-variance Gaussian scaled by 1/sqrt(dt), the discrete
/// equivalent of unit-two-sided-PSD continuous white noise, so the output
/// variance reproduces the continuous-time target.
inline TurbulenceSeries generate_turbulence(std::array<DigitalFilter, 3> filters,
                                            std::size_t n, std::uint64_t seed) {
    if (n < 1)
        throw ParameterError("need at least one sample");
    double dt = filters[0].dt;
    for (const auto& f : filters)
        if (f.dt != dt)
            throw ParameterError("axis filters disagree on dt");
    TurbulenceSeries ts;
    ts.dt = dt;
    ts.t.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        ts.t[i] = double(i) * dt;
    double scale = 1.0 / std::sqrt(dt);
    static constexpr const char* tags[3] = {"wind.u", "wind.v", "wind.w"};
    std::vector<double>* outs[3] = {&ts.u, &ts.v, &ts.w};
    for (int ax = 0; ax < 3; ++ax) {
        auto& f = filters[ax];
        f.reset();
        Rng rng(derive_seed(seed, tags[ax]));
        auto& out = *outs[ax];
        out.resize(n);
        if (f.is_zero()) {
            std::fill(out.begin(), out.end(), 0.0);
            continue;
        }
        for (std::size_t i = 0; i < n; ++i)
            out[i] = f.step(rng.normal() * scale);
    }
    return ts;
}

/// Default frame rotation: u along the horizontal mean-wind direction,
/// w down, v completing the right-handed triad. Falls back to north when
/// the horizontal mean wind vanishes.
inline Eigen::Matrix3d mean_wind_rotation(const MeanWind& mean) {
    Eigen::Vector3d h(mean.u_bar, mean.v_bar, 0.0);
    Eigen::Vector3d u_hat = h.norm() > 1e-12 ? Eigen::Vector3d(h.normalized())
                                             : Eigen::Vector3d(1.0, 0.0, 0.0);
    Eigen::Vector3d w_hat(0.0, 0.0, 1.0);
    Eigen::Vector3d v_hat = w_hat.cross(u_hat);
    Eigen::Matrix3d R;
    R.col(0) = u_hat;
    R.col(1) = v_hat;
    R.col(2) = w_hat;
    return R;
}

/// V_w(t) = mean + R (u,v,w)^T over the whole grid.
inline TurbulenceSeries compose_wind(const MeanWind& mean, TurbulenceSeries turb,
                                     const Eigen::Matrix3d& R) {
    if ((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
        R.determinant() < 0.0)
        throw ParameterError("R must be a proper rotation");
    Eigen::Vector3d m = mean.vec();
    turb.V_w.resize(turb.size());
    for (std::size_t i = 0; i < turb.size(); ++i)
        turb.V_w[i] = m + R * Eigen::Vector3d(turb.u[i], turb.v[i], turb.w[i]);
    return turb;
}

inline void write_turbulence_csv(const std::filesystem::path& path,
                                 const TurbulenceSeries& ts) {
    CsvTable t;
    t.meta.emplace_back("dt_s", format_double(ts.dt));
    t.columns = {"time_s", "u", "v", "w", "Vw_n", "Vw_e", "Vw_d"};
    t.rows.reserve(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        Eigen::Vector3d vw = i < ts.V_w.size() ? ts.V_w[i] : Eigen::Vector3d::Zero();
        t.rows.push_back({ts.t[i], ts.u[i], ts.v[i], ts.w[i], vw.x(), vw.y(), vw.z()});
    }
    write_csv(path, t);
}

inline TurbulenceSeries read_turbulence_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    TurbulenceSeries ts;
    std::size_t ct = t.col("time_s"), cu = t.col("u"), cv = t.col("v"),
                cw = t.col("w"), cn = t.col("Vw_n"), ce = t.col("Vw_e"),
                cd = t.col("Vw_d");
    ts.t.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        ts.t.push_back(r[ct]);
        ts.u.push_back(r[cu]);
        ts.v.push_back(r[cv]);
        ts.w.push_back(r[cw]);
        ts.V_w.emplace_back(r[cn], r[ce], r[cd]);
    }
    if (const std::string* dt = t.find_meta("dt_s"))
        ts.dt = std::strtod(dt->c_str(), nullptr);
    else if (ts.t.size() > 1)
        ts.dt = ts.t[1] - ts.t[0];
    return ts;
}

} // namespace armwave::wind
