#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <filesystem>
#include <numeric>

#include "armwave/wind.hpp"

using namespace armwave;
using namespace armwave::wind;

namespace {

// Oracle: |H(j 2 pi f)| for the continuous shaping filters, written out
// directly from the rational forms rather than reusing library code.
double oracle_mag_u(double s2, double L, double V, double f) {
    std::complex<double> jw(0.0, 2.0 * kPi * f);
    return std::abs(std::sqrt(s2) * std::sqrt(2.0 * V / L) / (jw + V / L));
}

double oracle_mag_vw(double s2, double L, double V, double f) {
    std::complex<double> jw(0.0, 2.0 * kPi * f);
    std::complex<double> num = jw + V / (std::sqrt(3.0) * L);
    std::complex<double> den = (jw + V / L) * (jw + V / L);
    return std::abs(std::sqrt(s2) * std::sqrt(3.0 * V / L) * num / den);
}

// Oracle: poles of 1 + a1 z^-1 (+ a2 z^-2) by direct root extraction.
std::vector<std::complex<double>> poles_of(const DigitalFilter& f) {
    std::vector<std::complex<double>> r;
    if (f.a.size() == 2) {
        r.push_back(std::complex<double>(-f.a[1], 0.0));
    } else if (f.a.size() == 3) {
        std::complex<double> disc = std::sqrt(std::complex<double>(
            f.a[1] * f.a[1] - 4.0 * f.a[2], 0.0));
        r.push_back((-f.a[1] + disc) / 2.0);
        r.push_back((-f.a[1] - disc) / 2.0);
    }
    return r;
}

double mean_of(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

double var_of(const std::vector<double>& x) {
    double m = mean_of(x);
    double s = 0.0;
    for (double v : x)
        s += (v - m) * (v - m);
    return s / double(x.size());
}

} // namespace

TEST_CASE("H_u DC gain matches the closed form") {
    DrydenParams p;
    p.sigma_u2 = 1.0;
    p.V_a0 = 1.0;
    p.L_u = 2.0;
    // sigma_u * sqrt(2 L_u / V) = 2.0
    for (auto method : {Discretization::matched_z, Discretization::bilinear}) {
        auto f = discretize_dryden(p, Axis::u, method);
        REQUIRE(std::abs(f.dc_gain() - 2.0) < 1e-9);
    }
}

TEST_CASE("zero-variance axis yields the zero filter") {
    DrydenParams p; // paper defaults carry sigma_w2 = 0
    auto f = discretize_dryden(p, Axis::w);
    REQUIRE(f.is_zero());
    for (double x : {1.0, -3.0, 100.0, 0.5})
        REQUIRE(f.step(x) == 0.0);

    auto fu = discretize_dryden(p, Axis::u);
    auto fv = discretize_dryden(p, Axis::v);
    auto ts = generate_turbulence({fu, fv, f}, 1000, 42);
    for (double w : ts.w)
        REQUIRE(w == 0.0);
}

TEST_CASE("invalid parameters are rejected") {
    DrydenParams p;
    p.L_v = 0.0;
    REQUIRE_THROWS_AS(discretize_dryden(p, Axis::v), ParameterError);
    p = DrydenParams{};
    p.V_a0 = -1.0;
    REQUIRE_THROWS_AS(discretize_dryden(p, Axis::u), ParameterError);
    p = DrydenParams{};
    p.sigma_u2 = -0.1;
    REQUIRE_THROWS_AS(discretize_dryden(p, Axis::u), ParameterError);
}

TEST_CASE("discrete magnitude response tracks the continuous filters") {
    DrydenParams p; // paper defaults
    p.dt = 1e-2;
    auto fu = discretize_dryden(p, Axis::u);
    auto fv = discretize_dryden(p, Axis::v);
    double f_max = 1.0 / (10.0 * p.dt);
    for (int k = 1; k <= 40; ++k) {
        double f = f_max * double(k) / 40.0;
        double mu = std::abs(fu.response(f));
        double mv = std::abs(fv.response(f));
        double ou = oracle_mag_u(p.sigma_u2, p.L_u, p.V_a0, f);
        double ov = oracle_mag_vw(p.sigma_v2, p.L_v, p.V_a0, f);
        REQUIRE(std::abs(mu / ou - 1.0) < 0.02);
        REQUIRE(std::abs(mv / ov - 1.0) < 0.02);
    }
}

TEST_CASE("bilinear option satisfies the warping identity exactly") {
    DrydenParams p;
    p.dt = 1e-2;
    auto fv = discretize_dryden(p, Axis::v, Discretization::bilinear);
    for (double f : {1.0, 3.0, 7.0, 20.0}) {
        double x = 2.0 * kPi * f * p.dt;
        double f_warp = (2.0 / p.dt) * std::tan(x / 2.0) / (2.0 * kPi);
        double got = std::abs(fv.response(f));
        double want = oracle_mag_vw(p.sigma_v2, p.L_v, p.V_a0, f_warp);
        REQUIRE(std::abs(got / want - 1.0) < 1e-12);
    }
}

TEST_CASE("all discrete poles sit strictly inside the unit circle") {
    DrydenParams p;
    for (double dt : {1e-3, 1e-2, 0.5, 5.0}) {
        p.dt = dt;
        for (auto ax : {Axis::u, Axis::v})
            for (auto m : {Discretization::matched_z, Discretization::bilinear})
                for (auto z : poles_of(discretize_dryden(p, ax, m)))
                    REQUIRE(std::abs(z) < 1.0);
    }
}

TEST_CASE("same seed reproduces the series bit for bit") {
    DrydenParams p;
    p.dt = 0.01;
    auto mk = [&] {
        return generate_turbulence({discretize_dryden(p, Axis::u),
                                    discretize_dryden(p, Axis::v),
                                    discretize_dryden(p, Axis::w)},
                                   5000, 777);
    };
    auto a = mk();
    auto b = mk();
    REQUIRE(a.u == b.u);
    REQUIRE(a.v == b.v);
    REQUIRE(a.w == b.w);

    auto c = generate_turbulence({discretize_dryden(p, Axis::u),
                                  discretize_dryden(p, Axis::v),
                                  discretize_dryden(p, Axis::w)},
                                 5000, 778);
    REQUIRE(a.u != c.u);
}

TEST_CASE("long-run variance reproduces the turbulence variances") {
    DrydenParams p; // sigma_u2 = sigma_v2 = 0.53
    p.dt = 0.1;
    auto ts = generate_turbulence({discretize_dryden(p, Axis::u),
                                   discretize_dryden(p, Axis::v),
                                   discretize_dryden(p, Axis::w)},
                                  1000000, 20210915);
    double vu = var_of(ts.u);
    double vv = var_of(ts.v);
    REQUIRE(vu > 0.48);
    REQUIRE(vu < 0.58);
    REQUIRE(vv > 0.48);
    REQUIRE(vv < 0.58);
}

TEST_CASE("long-run mean vanishes") {
    // Coarse sampling relative to the correlation time L/V so the 3 sigma /
    // sqrt(n) bound for near-independent samples applies.
    DrydenParams p;
    p.L_u = p.L_v = p.L_w = 2.0;
    p.V_a0 = 2.0;
    p.dt = 3.0;
    auto ts = generate_turbulence({discretize_dryden(p, Axis::u),
                                   discretize_dryden(p, Axis::v),
                                   discretize_dryden(p, Axis::w)},
                                  1000000, 31337);
    double bound = 3.0 * std::sqrt(p.sigma_u2) / std::sqrt(1e6);
    REQUIRE(std::abs(mean_of(ts.u)) < bound);
    REQUIRE(std::abs(mean_of(ts.v)) < bound);
}

TEST_CASE("composition adds mean and rotation") {
    MeanWind mean; // (2, -1, 0)
    DrydenParams p;
    p.dt = 0.01;
    auto ts = generate_turbulence({discretize_dryden(p, Axis::u),
                                   discretize_dryden(p, Axis::v),
                                   discretize_dryden(p, Axis::w)},
                                  2000, 5);
    Eigen::Matrix3d R = mean_wind_rotation(mean);

    SECTION("zero turbulence returns the mean everywhere") {
        TurbulenceSeries zero = ts;
        std::fill(zero.u.begin(), zero.u.end(), 0.0);
        std::fill(zero.v.begin(), zero.v.end(), 0.0);
        std::fill(zero.w.begin(), zero.w.end(), 0.0);
        auto out = compose_wind(mean, zero, R);
        for (const auto& vw : out.V_w)
            REQUIRE((vw - mean.vec()).norm() == 0.0);
    }

    SECTION("identity rotation with zero mean passes turbulence through") {
        MeanWind none{0.0, 0.0, 0.0};
        auto out = compose_wind(none, ts, Eigen::Matrix3d::Identity());
        for (std::size_t i = 0; i < out.size(); ++i) {
            REQUIRE(out.V_w[i].x() == ts.u[i]);
            REQUIRE(out.V_w[i].y() == ts.v[i]);
            REQUIRE(out.V_w[i].z() == ts.w[i]);
        }
    }

    SECTION("rotation preserves the turbulence norm") {
        auto out = compose_wind(mean, ts, R);
        for (std::size_t i = 0; i < out.size(); ++i) {
            double nt = Eigen::Vector3d(ts.u[i], ts.v[i], ts.w[i]).norm();
            REQUIRE(std::abs((out.V_w[i] - mean.vec()).norm() - nt) < 1e-12);
        }
    }

    SECTION("applying R^T after subtracting the mean recovers (u,v,w)") {
        auto out = compose_wind(mean, ts, R);
        for (std::size_t i = 0; i < out.size(); ++i) {
            Eigen::Vector3d rec = R.transpose() * (out.V_w[i] - mean.vec());
            REQUIRE(std::abs(rec.x() - ts.u[i]) < 1e-12);
            REQUIRE(std::abs(rec.y() - ts.v[i]) < 1e-12);
            REQUIRE(std::abs(rec.z() - ts.w[i]) < 1e-12);
        }
    }

    SECTION("non-orthonormal R is rejected") {
        Eigen::Matrix3d bad = Eigen::Matrix3d::Identity() * 1.1;
        REQUIRE_THROWS_AS(compose_wind(mean, ts, bad), ParameterError);
    }
}

TEST_CASE("default rotation aligns u with the horizontal mean wind") {
    MeanWind mean; // (2, -1, 0)
    Eigen::Matrix3d R = mean_wind_rotation(mean);
    Eigen::Vector3d u_ned = R.col(0);
    REQUIRE(std::abs(u_ned.x() - 2.0 / std::sqrt(5.0)) < 1e-15);
    REQUIRE(std::abs(u_ned.y() + 1.0 / std::sqrt(5.0)) < 1e-15);
    REQUIRE(u_ned.z() == 0.0);
    REQUIRE(std::abs(R.determinant() - 1.0) < 1e-12);
    REQUIRE((R.col(2) - Eigen::Vector3d(0, 0, 1)).norm() == 0.0);
}

TEST_CASE("turbulence CSV round trip is bit exact") {
    DrydenParams p;
    p.dt = 0.01;
    auto ts = compose_wind(MeanWind{},
                           generate_turbulence({discretize_dryden(p, Axis::u),
                                                discretize_dryden(p, Axis::v),
                                                discretize_dryden(p, Axis::w)},
                                               512, 99),
                           mean_wind_rotation(MeanWind{}));
    auto path = std::filesystem::temp_directory_path() / "armwave_wind_rt.csv";
    write_turbulence_csv(path, ts);
    auto back = read_turbulence_csv(path);
    REQUIRE(back.size() == ts.size());
    REQUIRE(back.dt == ts.dt);
    for (std::size_t i = 0; i < ts.size(); ++i) {
        REQUIRE(back.u[i] == ts.u[i]);
        REQUIRE(back.v[i] == ts.v[i]);
        REQUIRE(back.w[i] == ts.w[i]);
        REQUIRE(back.V_w[i] == ts.V_w[i]);
    }
    std::filesystem::remove(path);
}
