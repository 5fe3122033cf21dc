#pragma once

// Per-block geometry: dual norm, selector S_ℓ, preconditioner map 𝓛(·)²,
// accumulated state Γ and the preconditioned direction Γ^{-1/2}·V.
//
// Representations of Γ:
//   AdaNorm, Muon   Γ = γ·I_d                      (ScalarState)
//   DiagAdaGrad     Γ = Diag(diag)                 (DiagonalState)
//   FullAdaGrad     Γ = Gram                       (FullState)
//   Shampoo         Γ = R^{1/2} ⊗ L^{1/2}          (KroneckerState)

#include <variant>

#include "adprec/block_space.hpp"
#include "adprec/linalg.hpp"

namespace adprec {

struct ScalarState {
    double gamma = 1.0;
    Eigen::Index dim = 1;
};

struct DiagonalState {
    Vector diag;
};

struct FullState {
    linalg::SymMatrix gram;
};

struct KroneckerState {
    linalg::SymMatrix left;  ///< L, rows×rows
    linalg::SymMatrix right; ///< R, cols×cols
};

struct GeometryState {
    BlockShape shape;
    double varsigma = 1.0;
    std::variant<ScalarState, DiagonalState, FullState, KroneckerState> rep;

    [[nodiscard]] GeometryTag tag() const { return shape.geometry; }
};

struct GeometryDiagnostics {
    double trace_sqrt = 0.0;       ///< tr Γ^{1/2}
    double trace_log = 0.0;        ///< tr log Γ
    double weighted_inv = 0.0;     ///< tr(Γ^{-1} 𝓛(V)²)
    double weighted_invsqrt = 0.0; ///< tr(Γ^{-1/2} 𝓛(V)²)
};

/// State representing ς·I. Throws InvalidConfig for ς ≤ 0 or an illegal shape.
[[nodiscard]] GeometryState geom_init(const BlockShape& shape, double varsigma);

/// Γ + 𝓛(V)², or for Shampoo the Gram updates L += VVᵀ, R += VᵀV.
[[nodiscard]] GeometryState geom_accumulate(const GeometryState& state, const Matrix& v);

/// Γ^{-1/2}·V in the native representation.
[[nodiscard]] Matrix geom_precondition(const GeometryState& state, const Matrix& v);

/// A maximizer of ⟨Z, V⟩ over the primal unit ball; zero for Z = 0.
[[nodiscard]] Matrix geom_selector(GeometryTag tag, const Matrix& z);

[[nodiscard]] inline double geom_dual_norm(GeometryTag tag, const Matrix& v) { return block_dual_norm(tag, v); }

[[nodiscard]] GeometryDiagnostics geom_diagnostics(const GeometryState& state, const Matrix& v);

/// Explicit 𝓛(V)² as a d×d matrix (n×n for the vector geometries, which all
/// act on n×1 blocks). For Shampoo this is vec(V)·vec(V)ᵀ.
[[nodiscard]] Matrix lift_square(GeometryTag tag, const Matrix& v);

/// tr 𝓛(V)² in closed form.
[[nodiscard]] double lift_trace(GeometryTag tag, const Matrix& v);

/// All eigenvalues of Γ, ascending.
[[nodiscard]] Vector state_spectrum(const GeometryState& state);

/// Smallest eigenvalue of Γ.
[[nodiscard]] double state_min_eigenvalue(const GeometryState& state);

/// True when the state satisfies its ς lower bound within the relative slack.
[[nodiscard]] bool satisfies_floor(const GeometryState& state);

} // namespace adprec
