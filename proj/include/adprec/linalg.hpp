#pragma once

// Dense symmetric/PSD matrix functions, SVD-based normalization and
// Kronecker-factored application. Everything here is a pure function of its
// arguments; eigendecompositions and SVDs are recomputed on every call.

#include <cstdint>
#include <optional>
#include <random>

#include <Eigen/Dense>

#include "adprec/errors.hpp"

namespace adprec {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace linalg {

/// Square real matrix, symmetrized on construction: entries(i,j) == entries(j,i)
/// holds bit-exactly.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Matrix& m);

    static SymMatrix identity(Eigen::Index dim, double scale = 1.0);
    static SymMatrix diagonal(const Vector& diag);

    [[nodiscard]] Eigen::Index dim() const { return m_.rows(); }
    [[nodiscard]] const Matrix& matrix() const { return m_; }
    [[nodiscard]] double trace() const { return m_.trace(); }
    [[nodiscard]] double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

    /// Adds V·Vᵀ. Used for Gram accumulation.
    SymMatrix& add_gram(const Matrix& v);
    SymMatrix& operator+=(const SymMatrix& other);
    friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
    friend SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(s * a.m_); }

private:
    Matrix m_;
};

struct SvdTriple {
    Matrix U;     ///< column-orthonormal, n×r
    Vector sigma; ///< nonincreasing, nonnegative
    Matrix V;     ///< column-orthonormal, m×r
};

struct EigenPair {
    Vector values; ///< ascending
    Matrix vectors;
};

/// Relative rank threshold for msign: singular values ≤ 1e-12·σ_max are dropped.
inline constexpr double kSvdRankTol = 1e-12;

/// Relative slack below the floor ς tolerated for preconditioner eigenvalues.
inline constexpr double kFloorSlack = 1e-8;

[[nodiscard]] EigenPair eigh(const SymMatrix& m);
[[nodiscard]] SvdTriple svd(const Matrix& g);

/// Q·diag(λᵖ)·Qᵀ. When `floor` is given (the matrix is a preconditioner state
/// known to satisfy M ⪰ floor·I), eigenvalues are clamped from below at
/// floor·(1−1e-8) first. Throws NonPositiveDefinite for p < 0 if an
/// eigenvalue stays ≤ 0, or for fractional p on negative eigenvalues.
[[nodiscard]] SymMatrix psd_power(const SymMatrix& m, double p,
                                  std::optional<double> floor = std::nullopt);

/// Sum of log-eigenvalues; same clamping and error rules as psd_power.
[[nodiscard]] double trace_log_psd(const SymMatrix& m, std::optional<double> floor = std::nullopt);

/// tr(Mᵖ) from one eigendecomposition.
[[nodiscard]] double trace_power(const SymMatrix& m, double p,
                                 std::optional<double> floor = std::nullopt);

[[nodiscard]] double min_eigenvalue(const SymMatrix& m);

/// Polar factor U_r·V_rᵀ over the singular triples above the rank threshold.
/// msign(0) = 0.
[[nodiscard]] Matrix msign(const Matrix& g);
[[nodiscard]] double nuclear_norm(const Matrix& g);
[[nodiscard]] double spectral_norm(const Matrix& g);

/// Lᵖ·G·Rᵖ without forming the Kronecker product.
[[nodiscard]] Matrix kron_apply(const SymMatrix& left, const SymMatrix& right, const Matrix& g,
                                double p, std::optional<double> floor = std::nullopt);

/// L^{-1/4}·G·R^{-1/4}, i.e. (R^{-1/4}⊗L^{-1/4})·vec(G) reshaped.
[[nodiscard]] Matrix kron_precondition(const SymMatrix& left, const SymMatrix& right,
                                       const Matrix& g, std::optional<double> floor = std::nullopt);

/// Haar-distributed orthogonal matrix from a seeded generator.
[[nodiscard]] Matrix random_orthogonal(Eigen::Index dim, std::mt19937_64& rng);

/// Q·diag(λ)·Qᵀ with λ log-uniform in [1/condition_target, 1].
[[nodiscard]] SymMatrix random_psd(Eigen::Index dim, double condition_target, std::uint64_t seed);
[[nodiscard]] SymMatrix random_psd(Eigen::Index dim, double condition_target, std::mt19937_64& rng);

[[nodiscard]] Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng);

} // namespace linalg
} // namespace adprec
