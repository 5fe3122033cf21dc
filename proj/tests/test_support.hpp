#pragma once

// Test-only oracles. None of these go through the library's eigen/SVD paths:
// square roots by Denman–Beavers, log-determinants by LU, polar factors by
// Newton–Schulz, top singular values by power iteration, Kronecker products
// by explicit loops.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>

#include <Eigen/Dense>

#include "adprec/block_space.hpp"

namespace oracle {

using adprec::Matrix;
using adprec::Vector;

inline std::mt19937_64 rng_for(std::uint64_t seed) {
    return std::mt19937_64(seed * 0x9E3779B97F4A7C15ULL + 12345);
}

inline Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Matrix m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) {
            m(i, j) = n(rng);
        }
    }
    return m;
}

inline int randint(std::mt19937_64& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Well-conditioned SPD: G Gᵀ/d + shift·I.
inline Matrix spd(Eigen::Index d, std::mt19937_64& rng, double shift = 0.5) {
    const Matrix g = gaussian(d, d, rng);
    return g * g.transpose() / static_cast<double>(d) + shift * Matrix::Identity(d, d);
}

/// Denman–Beavers: returns (A^{1/2}, A^{-1/2}).
inline std::pair<Matrix, Matrix> sqrt_pair(const Matrix& a) {
    Matrix y = a;
    Matrix z = Matrix::Identity(a.rows(), a.cols());
    for (int it = 0; it < 100; ++it) {
        const Matrix yi = y.inverse();
        const Matrix zi = z.inverse();
        const Matrix yn = 0.5 * (y + zi);
        const Matrix zn = 0.5 * (z + yi);
        const double change = (yn - y).norm();
        y = yn;
        z = zn;
        if (change < 1e-15 * y.norm()) {
            break;
        }
    }
    return {0.5 * (y + y.transpose()), 0.5 * (z + z.transpose())};
}

inline Matrix sqrtm(const Matrix& a) { return sqrt_pair(a).first; }
inline Matrix inv_sqrtm(const Matrix& a) { return sqrt_pair(a).second; }
inline Matrix quarter(const Matrix& a) { return sqrtm(sqrtm(a)); }
inline Matrix inv_quarter(const Matrix& a) { return quarter(a).inverse(); }

inline double logdet(const Matrix& a) {
    return std::log(a.fullPivLu().determinant());
}

/// Polar factor of a full-column-rank (or full-row-rank) matrix.
inline Matrix polar(const Matrix& g) {
    const bool wide = g.cols() > g.rows();
    Matrix x = wide ? Matrix(g.transpose()) : g;
    x /= x.norm();
    for (int it = 0; it < 500; ++it) {
        const Matrix xn = 1.5 * x - 0.5 * x * (x.transpose() * x);
        const double change = (xn - x).norm();
        x = xn;
        if (change < 1e-15) {
            break;
        }
    }
    return wide ? Matrix(x.transpose()) : x;
}

inline double top_singular(const Matrix& g) {
    Vector v = Vector::Ones(g.cols()).normalized();
    double s = 0.0;
    for (int it = 0; it < 2000; ++it) {
        const Vector w = g.transpose() * (g * v);
        const double ns = w.norm();
        if (ns == 0.0) {
            return 0.0;
        }
        v = w / ns;
        if (std::abs(ns - s) < 1e-15 * ns) {
            s = ns;
            break;
        }
        s = ns;
    }
    return std::sqrt(s);
}

/// Nuclear norm as ⟨G, polar(G)⟩ for full-rank G.
inline double nuclear(const Matrix& g) {
    return g.cwiseProduct(polar(g)).sum();
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) {
            k.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return k;
}

inline Vector vec(const Matrix& m) {
    Vector v(m.size());
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            v(k++) = m(i, j);
        }
    }
    return v;
}

inline Matrix unvec(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
    Matrix m(rows, cols);
    Eigen::Index k = 0;
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            m(i, j) = v(k++);
        }
    }
    return m;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
    const double s = std::max(a.norm(), b.norm());
    return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

inline double rel_err(double a, double b) {
    const double s = std::max(std::abs(a), std::abs(b));
    return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

/// Central finite-difference gradient of f at x (flattened coordinates).
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
    Vector g(x.size());
    Vector xp = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x(i)));
        xp(i) = x(i) + step;
        const double fp = f(xp);
        xp(i) = x(i) - step;
        const double fm = f(xp);
        xp(i) = x(i);
        g(i) = (fp - fm) / (2.0 * step);
    }
    return g;
}

// Explicit d×d preconditioner built from the raw update sequence, independent
// of the library's state representations.
struct ExplicitGamma {
    adprec::BlockShape shape;
    double varsigma;
    Matrix gamma;         // vector geometries and Muon
    Matrix left, right;   // Shampoo factors

    ExplicitGamma(const adprec::BlockShape& s, double vs) : shape(s), varsigma(vs) {
        const auto d = s.size();
        gamma = vs * Matrix::Identity(d, d);
        left = vs * Matrix::Identity(s.rows, s.rows);
        right = vs * Matrix::Identity(s.cols, s.cols);
    }

    void add(const Matrix& v) {
        const double d = static_cast<double>(shape.size());
        switch (shape.geometry) {
        case adprec::GeometryTag::AdaNorm:
            gamma += v.squaredNorm() / d * Matrix::Identity(shape.size(), shape.size());
            break;
        case adprec::GeometryTag::FullAdaGrad: gamma += v * v.transpose(); break;
        case adprec::GeometryTag::DiagAdaGrad: gamma += Matrix(v.col(0).cwiseAbs2().asDiagonal()); break;
        case adprec::GeometryTag::Muon: {
            const double nuc = nuclear(v);
            gamma += nuc * nuc / d * Matrix::Identity(shape.size(), shape.size());
            break;
        }
        case adprec::GeometryTag::Shampoo:
            left += v * v.transpose();
            right += v.transpose() * v;
            break;
        }
    }

    [[nodiscard]] Matrix full() const {
        if (shape.geometry == adprec::GeometryTag::Shampoo) {
            return kron(sqrtm(right), sqrtm(left));
        }
        return gamma;
    }
};

} // namespace oracle
