#include "adprec/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace adprec {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_block(const GeometryState& state, const Matrix& v) {
    if (v.rows() != state.shape.rows || v.cols() != state.shape.cols) {
        throw ShapeMismatch("block has shape " + std::to_string(v.rows()) + "x" + std::to_string(v.cols()) +
                            ", geometry expects " + std::to_string(state.shape.rows) + "x" +
                            std::to_string(state.shape.cols));
    }
}

// ‖V‖²_{*,ℓ} as it enters the scalar geometries.
double scalar_increment_norm_sq(GeometryTag tag, const Matrix& v) {
    const double n = block_dual_norm(tag, v);
    return n * n;
}

void check_positive(double x, const char* what) {
    if (!(x > 0.0)) {
        throw NonPositiveDefinite(std::string(what) + " is not positive");
    }
}

} // namespace

GeometryState geom_init(const BlockShape& shape, double varsigma) {
    shape.validate();
    if (!(varsigma > 0.0) || !std::isfinite(varsigma)) {
        throw InvalidConfig("varsigma must be positive and finite");
    }
    GeometryState state{shape, varsigma, ScalarState{}};
    switch (shape.geometry) {
    case GeometryTag::AdaNorm:
    case GeometryTag::Muon:
        state.rep = ScalarState{varsigma, shape.size()};
        break;
    case GeometryTag::DiagAdaGrad:
        state.rep = DiagonalState{Vector::Constant(shape.rows, varsigma)};
        break;
    case GeometryTag::FullAdaGrad:
        state.rep = FullState{linalg::SymMatrix::identity(shape.rows, varsigma)};
        break;
    case GeometryTag::Shampoo:
        state.rep = KroneckerState{linalg::SymMatrix::identity(shape.rows, varsigma),
                                   linalg::SymMatrix::identity(shape.cols, varsigma)};
        break;
    }
    return state;
}

GeometryState geom_accumulate(const GeometryState& state, const Matrix& v) {
    check_block(state, v);
    GeometryState next = state;
    std::visit(overloaded{
                   [&](ScalarState& s) {
                       // AdaNorm: ‖V‖²/n with d = n; Muon: ‖V‖_*²/d.
                       s.gamma += scalar_increment_norm_sq(state.tag(), v) / static_cast<double>(s.dim);
                   },
                   [&](DiagonalState& s) { s.diag += v.col(0).cwiseAbs2(); },
                   [&](FullState& s) { s.gram.add_gram(v); },
                   [&](KroneckerState& s) {
                       s.left.add_gram(v);
                       s.right.add_gram(v.transpose());
                   },
               },
               next.rep);
    return next;
}

Matrix geom_precondition(const GeometryState& state, const Matrix& v) {
    check_block(state, v);
    const double floor = state.varsigma;
    return std::visit(overloaded{
                          [&](const ScalarState& s) -> Matrix {
                              check_positive(s.gamma, "scalar preconditioner");
                              return v / std::sqrt(s.gamma);
                          },
                          [&](const DiagonalState& s) -> Matrix {
                              if (!(s.diag.minCoeff() > 0.0)) {
                                  throw NonPositiveDefinite("diagonal preconditioner has a nonpositive entry");
                              }
                              return v.array().colwise() / s.diag.array().sqrt();
                          },
                          [&](const FullState& s) -> Matrix {
                              return linalg::psd_power(s.gram, -0.5, floor).matrix() * v;
                          },
                          [&](const KroneckerState& s) -> Matrix {
                              return linalg::kron_precondition(s.left, s.right, v, floor);
                          },
                      },
                      state.rep);
}

Matrix geom_selector(GeometryTag tag, const Matrix& z) {
    if (!is_euclidean(tag)) {
        return linalg::msign(z);
    }
    const double n = z.norm();
    if (n == 0.0) {
        return Matrix::Zero(z.rows(), z.cols());
    }
    return z / n;
}

GeometryDiagnostics geom_diagnostics(const GeometryState& state, const Matrix& v) {
    check_block(state, v);
    const double floor = state.varsigma * (1.0 - linalg::kFloorSlack);
    GeometryDiagnostics d;
    std::visit(
        overloaded{
            [&](const ScalarState& s) {
                check_positive(s.gamma, "scalar preconditioner");
                const double dim = static_cast<double>(s.dim);
                const double lift = scalar_increment_norm_sq(state.tag(), v);
                d.trace_sqrt = dim * std::sqrt(s.gamma);
                d.trace_log = dim * std::log(s.gamma);
                d.weighted_inv = lift / s.gamma;
                d.weighted_invsqrt = lift / std::sqrt(s.gamma);
            },
            [&](const DiagonalState& s) {
                if (!(s.diag.minCoeff() > 0.0)) {
                    throw NonPositiveDefinite("diagonal preconditioner has a nonpositive entry");
                }
                const Vector v2 = v.col(0).cwiseAbs2();
                d.trace_sqrt = s.diag.array().sqrt().sum();
                d.trace_log = s.diag.array().log().sum();
                d.weighted_inv = (v2.array() / s.diag.array()).sum();
                d.weighted_invsqrt = (v2.array() / s.diag.array().sqrt()).sum();
            },
            [&](const FullState& s) {
                auto [lam, q] = linalg::eigh(s.gram);
                lam = lam.cwiseMax(floor);
                if (!(lam.minCoeff() > 0.0)) {
                    throw NonPositiveDefinite("full preconditioner is not positive definite");
                }
                const Vector w2 = (q.transpose() * v.col(0)).cwiseAbs2();
                d.trace_sqrt = lam.array().sqrt().sum();
                d.trace_log = lam.array().log().sum();
                d.weighted_inv = (w2.array() / lam.array()).sum();
                d.weighted_invsqrt = (w2.array() / lam.array().sqrt()).sum();
            },
            [&](const KroneckerState& s) {
                auto [lam_l, q_l] = linalg::eigh(s.left);
                auto [lam_r, q_r] = linalg::eigh(s.right);
                lam_l = lam_l.cwiseMax(floor);
                lam_r = lam_r.cwiseMax(floor);
                if (!(lam_l.minCoeff() > 0.0) || !(lam_r.minCoeff() > 0.0)) {
                    throw NonPositiveDefinite("Kronecker factor is not positive definite");
                }
                const double n = static_cast<double>(state.shape.rows);
                const double m = static_cast<double>(state.shape.cols);
                // Γ^{1/2} = R^{1/4} ⊗ L^{1/4}
                d.trace_sqrt = lam_l.array().pow(0.25).sum() * lam_r.array().pow(0.25).sum();
                // log Γ = ½ log R ⊗ I + I ⊗ ½ log L
                d.trace_log = 0.5 * m * lam_l.array().log().sum() + 0.5 * n * lam_r.array().log().sum();
                // gᵀ(R^{p/2} ⊗ L^{p/2})g in the joint eigenbasis
                const Matrix w2 = (q_l.transpose() * v * q_r).cwiseAbs2();
                const Vector l_inv = lam_l.array().pow(-0.5);
                const Vector r_inv = lam_r.array().pow(-0.5);
                const Vector l_isq = lam_l.array().pow(-0.25);
                const Vector r_isq = lam_r.array().pow(-0.25);
                d.weighted_inv = (l_inv.transpose() * w2 * r_inv)(0, 0);
                d.weighted_invsqrt = (l_isq.transpose() * w2 * r_isq)(0, 0);
            },
        },
        state.rep);
    return d;
}

Matrix lift_square(GeometryTag tag, const Matrix& v) {
    switch (tag) {
    case GeometryTag::AdaNorm: {
        const auto n = v.rows();
        return (v.squaredNorm() / static_cast<double>(n)) * Matrix::Identity(n, n);
    }
    case GeometryTag::Muon: {
        const auto d = v.size();
        const double nuc = linalg::nuclear_norm(v);
        return (nuc * nuc / static_cast<double>(d)) * Matrix::Identity(d, d);
    }
    case GeometryTag::DiagAdaGrad:
        return Matrix(v.col(0).cwiseAbs2().asDiagonal());
    case GeometryTag::FullAdaGrad:
        return v * v.transpose();
    case GeometryTag::Shampoo: {
        const Vector g = v.reshaped();
        return g * g.transpose();
    }
    }
    return {};
}

double lift_trace(GeometryTag tag, const Matrix& v) {
    if (tag == GeometryTag::Muon) {
        const double nuc = linalg::nuclear_norm(v);
        return nuc * nuc;
    }
    return v.squaredNorm();
}

Vector state_spectrum(const GeometryState& state) {
    Vector out = std::visit(overloaded{
                                [](const ScalarState& s) -> Vector { return Vector::Constant(s.dim, s.gamma); },
                                [](const DiagonalState& s) -> Vector { return s.diag; },
                                [](const FullState& s) -> Vector { return linalg::eigh(s.gram).values; },
                                [](const KroneckerState& s) -> Vector {
                                    const Vector l = linalg::eigh(s.left).values.cwiseMax(0.0).cwiseSqrt();
                                    const Vector r = linalg::eigh(s.right).values.cwiseMax(0.0).cwiseSqrt();
                                    Vector prod(l.size() * r.size());
                                    Eigen::Index k = 0;
                                    for (double rj : r) {
                                        for (double li : l) {
                                            prod(k++) = li * rj;
                                        }
                                    }
                                    return prod;
                                },
                            },
                            state.rep);
    std::sort(out.begin(), out.end());
    return out;
}

double state_min_eigenvalue(const GeometryState& state) {
    return std::visit(overloaded{
                          [](const ScalarState& s) { return s.gamma; },
                          [](const DiagonalState& s) { return s.diag.minCoeff(); },
                          [](const FullState& s) { return linalg::min_eigenvalue(s.gram); },
                          [](const KroneckerState& s) {
                              return std::sqrt(std::max(0.0, linalg::min_eigenvalue(s.left))) *
                                     std::sqrt(std::max(0.0, linalg::min_eigenvalue(s.right)));
                          },
                      },
                      state.rep);
}

bool satisfies_floor(const GeometryState& state) {
    return state_min_eigenvalue(state) >= state.varsigma * (1.0 - linalg::kFloorSlack);
}

} // namespace adprec
