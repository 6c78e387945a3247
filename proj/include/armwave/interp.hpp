#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "armwave/errors.hpp"

namespace armwave {

/// Cubic interpolating spline with not-a-knot end conditions.
///
/// Not-a-knot keeps full fourth-order accuracy up to the ends, which the
/// resampling contracts rely on; a natural spline would leave an O(h^2)
/// boundary layer. Degenerates to a quadratic for three points and a line
/// for two.
class CubicSpline {
  public:
    CubicSpline(std::vector<double> x, std::vector<double> y)
        : x_(std::move(x)), y_(std::move(y)) {
        std::size_t n = x_.size();
        if (n < 2 || y_.size() != n)
            throw ParameterError("spline needs >= 2 matching knots");
        for (std::size_t i = 1; i < n; ++i)
            if (!(x_[i] > x_[i - 1]))
                throw ParameterError("spline knots must be strictly increasing");
        m_.assign(n, 0.0);
        if (n == 2)
            return; // both second derivatives zero: straight line
        if (n == 3) {
            // single quadratic through all three points
            double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
            double d0 = (y_[1] - y_[0]) / h0, d1 = (y_[2] - y_[1]) / h1;
            double m = 2.0 * (d1 - d0) / (h0 + h1);
            m_[0] = m_[1] = m_[2] = m;
            return;
        }
        solve_moments();
    }

    double x_min() const { return x_.front(); }
    double x_max() const { return x_.back(); }

    double operator()(double xq) const {
        std::size_t i = locate(xq);
        double h = x_[i + 1] - x_[i];
        double t = xq - x_[i];
        double b = (y_[i + 1] - y_[i]) / h - h * (2.0 * m_[i] + m_[i + 1]) / 6.0;
        return y_[i] + t * (b + t * (m_[i] / 2.0 + t * (m_[i + 1] - m_[i]) / (6.0 * h)));
    }

    double deriv(double xq) const {
        std::size_t i = locate(xq);
        double h = x_[i + 1] - x_[i];
        double t = xq - x_[i];
        double b = (y_[i + 1] - y_[i]) / h - h * (2.0 * m_[i] + m_[i + 1]) / 6.0;
        return b + t * (m_[i] + t * (m_[i + 1] - m_[i]) / (2.0 * h));
    }

  private:
    std::size_t locate(double xq) const {
        double span = x_.back() - x_.front();
        double eps = 1e-9 * span;
        if (xq < x_.front() - eps || xq > x_.back() + eps)
            throw GridError("spline query outside knot range");
        if (xq <= x_.front())
            return 0;
        if (xq >= x_.back())
            return x_.size() - 2;
        // binary search for the interval with x_[i] <= xq < x_[i+1]
        std::size_t lo = 0, hi = x_.size() - 1;
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            (x_[mid] <= xq ? lo : hi) = mid;
        }
        return lo;
    }

    // Second derivatives ("moments") from the tridiagonal system; the
    // not-a-knot rows are folded into the first and last interior rows so
    // the Thomas sweep keeps strictly positive pivots on any grid.
    void solve_moments() {
        std::size_t n = x_.size();
        std::size_t m = n - 2; // unknowns M_1..M_{n-2}
        std::vector<double> h(n - 1), r(n);
        for (std::size_t i = 0; i + 1 < n; ++i)
            h[i] = x_[i + 1] - x_[i];
        for (std::size_t i = 1; i + 1 < n; ++i)
            r[i] = 6.0 * ((y_[i + 1] - y_[i]) / h[i] - (y_[i] - y_[i - 1]) / h[i - 1]);

        std::vector<double> a(m, 0.0), b(m, 0.0), c(m, 0.0), d(m, 0.0);
        for (std::size_t k = 0; k < m; ++k) {
            std::size_t i = k + 1;
            a[k] = h[i - 1];
            b[k] = 2.0 * (h[i - 1] + h[i]);
            c[k] = h[i];
            d[k] = r[i];
        }
        // M_0 = ((h0+h1) M_1 - h0 M_2) / h1 folded into the first row
        b[0] = (h[0] + h[1]) * (h[0] + 2.0 * h[1]) / h[1];
        c[0] = (h[1] * h[1] - h[0] * h[0]) / h[1];
        a[0] = 0.0;
        // mirrored fold at the right end
        double hm = h[n - 2], hp = h[n - 3];
        b[m - 1] = (hm + hp) * (hp * 2.0 + hm) / hp;
        a[m - 1] = (hp * hp - hm * hm) / hp;
        c[m - 1] = 0.0;

        for (std::size_t k = 1; k < m; ++k) {
            double w = a[k] / b[k - 1];
            b[k] -= w * c[k - 1];
            d[k] -= w * d[k - 1];
        }
        m_[m] = d[m - 1] / b[m - 1];
        for (std::size_t k = m - 1; k > 0; --k)
            m_[k] = (d[k - 1] - c[k - 1] * m_[k + 1]) / b[k - 1];
        m_[0] = ((h[0] + h[1]) * m_[1] - h[0] * m_[2]) / h[1];
        m_[n - 1] = ((hm + hp) * m_[n - 2] - hm * m_[n - 3]) / hp;
    }

    std::vector<double> x_, y_, m_;
};

} // namespace armwave
