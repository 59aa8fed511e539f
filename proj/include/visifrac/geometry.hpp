#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace visifrac {

// Small fixed-capacity vector for points in R^d, d <= 3.
struct Vec {
    int dim = 0;
    std::array<double, 3> v{0.0, 0.0, 0.0};

    Vec() = default;
    Vec(int d, double x, double y = 0.0, double z = 0.0) : dim(d), v{x, y, z} {}

    double operator[](int i) const { return v[static_cast<size_t>(i)]; }
    double& operator[](int i) { return v[static_cast<size_t>(i)]; }

    Vec operator-(const Vec& o) const {
        Vec r(dim, 0.0);
        for (int i = 0; i < dim; ++i) r[i] = v[size_t(i)] - o[i];
        return r;
    }
    Vec operator+(const Vec& o) const {
        Vec r(dim, 0.0);
        for (int i = 0; i < dim; ++i) r[i] = v[size_t(i)] + o[i];
        return r;
    }
    Vec operator*(double c) const {
        Vec r(dim, 0.0);
        for (int i = 0; i < dim; ++i) r[i] = v[size_t(i)] * c;
        return r;
    }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.dim; ++i) s += a[i] * b[i];
    return s;
}

inline double norm(const Vec& a) { return std::sqrt(dot(a, a)); }

inline double dist(const Vec& a, const Vec& b) { return norm(a - b); }

// Orthonormal frame spanning an n-plane L in R^d. Rows are the projection
// axes, so pi_L(x) = (dot(axes[0], x), ..., dot(axes[n-1], x)).
struct Frame {
    int dim = 0;  // ambient d
    int n = 0;    // plane dimension
    std::array<Vec, 2> axes{};

    void validate(double tol = 1e-12) const {
        if (n < 1 || n > 2 || n >= dim)
            throw std::invalid_argument("Frame: need 1 <= n < d <= 3");
        for (int i = 0; i < n; ++i) {
            if (std::abs(norm(axes[size_t(i)]) - 1.0) > tol)
                throw std::invalid_argument("Frame: axis not unit");
        }
        if (n == 2 && std::abs(dot(axes[0], axes[1])) > tol)
            throw std::invalid_argument("Frame: axes not orthogonal");
    }
};

// Unit direction theta on S^{d-1} together with an orthonormal frame of
// theta^perp (the target of the shadow projection pi_theta).
struct Direction {
    Vec unit;
    Frame perp;  // frame of theta^perp, n = d-1

    static Direction fromVector(const Vec& u);
    static Direction fromAngle(double angle);  // d = 2
};

inline Direction Direction::fromAngle(double angle) {
    return fromVector(Vec(2, std::cos(angle), std::sin(angle)));
}

inline Direction Direction::fromVector(const Vec& u) {
    Direction d;
    const double len = norm(u);
    if (len < 1e-300) throw std::invalid_argument("Direction: zero vector");
    d.unit = u * (1.0 / len);
    d.perp.dim = u.dim;
    d.perp.n = u.dim - 1;
    if (u.dim == 2) {
        // right-hand rule: (x,y) -> (-y,x)
        d.perp.axes[0] = Vec(2, -d.unit[1], d.unit[0]);
    } else if (u.dim == 3) {
        // pick the coordinate axis least aligned with theta, Gram-Schmidt it
        int k = 0;
        double best = std::abs(d.unit[0]);
        for (int i = 1; i < 3; ++i) {
            if (std::abs(d.unit[i]) < best) {
                best = std::abs(d.unit[i]);
                k = i;
            }
        }
        Vec e(3, 0.0);
        e[k] = 1.0;
        Vec a = e - d.unit * dot(e, d.unit);
        a = a * (1.0 / norm(a));
        // b = theta x a
        Vec b(3, d.unit[1] * a[2] - d.unit[2] * a[1],
              d.unit[2] * a[0] - d.unit[0] * a[2],
              d.unit[0] * a[1] - d.unit[1] * a[0]);
        d.perp.axes[0] = a;
        d.perp.axes[1] = b;
    } else {
        throw std::invalid_argument("Direction: dim must be 2 or 3");
    }
    d.perp.validate();
    return d;
}

// Project x onto the frame; returns n coordinates.
inline Vec projectPoint(const Frame& f, const Vec& x) {
    Vec r(f.n, 0.0);
    for (int i = 0; i < f.n; ++i) r[i] = dot(f.axes[size_t(i)], x);
    return r;
}

}  // namespace visifrac
