#pragma once

// Synthetic smooth test problems with declared f_low and Lipschitz constants,
// and stochastic gradient oracles with controlled conditional variance.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adprec/block_space.hpp"

namespace adprec {

struct Problem {
    std::string name;
    std::vector<BlockShape> shapes;
    std::function<double(const ProductPoint&)> f;
    std::function<ProductPoint(const ProductPoint&)> grad;
    double f_low = 0.0;
    std::optional<double> lipschitz; ///< L_G; nullopt when unknown
    ProductPoint x0;

    /// Finite-sum problems expose per-sample gradients for mini-batching.
    std::size_t num_samples = 0;
    std::function<ProductPoint(const ProductPoint&, std::size_t)> sample_grad;

    [[nodiscard]] double eval_f(const ProductPoint& x) const;
    [[nodiscard]] ProductPoint eval_grad(const ProductPoint& x) const;
    [[nodiscard]] Eigen::Index dimension() const { return total_dimension(shapes); }
};

/// Declarative description of a built-in problem.
struct ProblemSpec {
    std::string kind = "quadratic"; ///< quadratic | trigquad | logistic | matfact
    std::vector<BlockShape> blocks;
    std::uint64_t seed = 0;

    // quadratic: hessian in {identity, diagonal, random}; eigenvalues in [lmax/condition, lmax]
    std::string hessian = "identity";
    double condition = 1.0;
    double lmax = 1.0;
    double b_scale = 0.0;
    double x0_scale = 1.0;

    // trigquad: design in {identity, random}; rows of A default to N
    std::string design = "identity";
    Eigen::Index design_rows = 0;
    double trig_c = 1.0;

    // logistic
    std::size_t samples = 64;
    double reg = 1e-2;

    // matfact: W1 is rank×cols, W2 is rows×rank
    Eigen::Index mf_rows = 3;
    Eigen::Index mf_cols = 2;
    Eigen::Index mf_rank = 2;
    double target_scale = 1.0;
    GeometryTag mf_geometry = GeometryTag::Shampoo;
};

[[nodiscard]] Problem make_problem(const ProblemSpec& spec);

/// f = ½xᵀHx − bᵀx over the flattened product point.
[[nodiscard]] Problem make_quadratic(std::vector<BlockShape> shapes, const linalg::SymMatrix& h,
                                     const Vector& b, ProductPoint x0);
/// f = ½‖Ax−b‖² + c·Σcos(xᵢ).
[[nodiscard]] Problem make_trigquad(std::vector<BlockShape> shapes, const Matrix& a, const Vector& b,
                                    double c, ProductPoint x0);
/// Mean logistic loss on synthetic labelled data plus (reg/2)‖x‖².
[[nodiscard]] Problem make_logistic(std::vector<BlockShape> shapes, std::uint64_t data_seed,
                                    std::size_t samples, double reg, ProductPoint x0);
/// f = ½‖W₂W₁ − T‖_F² over blocks (W₁, W₂).
[[nodiscard]] Problem make_matfact(const Matrix& target, Eigen::Index rank, GeometryTag geometry,
                                   ProductPoint x0);

enum class NoiseKind { Exact, AdditiveDecaying, AdditivePlusMultiplicative, MiniBatch };

[[nodiscard]] std::string_view to_string(NoiseKind kind);
[[nodiscard]] NoiseKind parse_noise_kind(std::string_view name);

struct NoiseModel {
    NoiseKind kind = NoiseKind::Exact;
    std::vector<double> sigma{0.0}; ///< per-block σ_ℓ; a single value is broadcast
    double alpha = 1.0;
    double omega = 0.0;
    std::size_t batch = 1;

    [[nodiscard]] double sigma_for(std::size_t block) const;
    /// σ_tot² = Σ_ℓ σ_ℓ².
    [[nodiscard]] double sigma_tot_sq(std::size_t num_blocks) const;
    void validate() const;
};

/// Throws InvalidConfig when the noise model cannot drive this problem
/// (σ list length differs from the block count, or mini-batching a problem
/// without per-sample gradients).
void check_noise_compatible(const Problem& problem, const NoiseModel& noise);

/// Draws G̃_k. `z_prev` is Z_{k−1} (zero point at k = 0).
[[nodiscard]] ProductPoint sample_gradient(const Problem& problem, const NoiseModel& noise,
                                           const ProductPoint& x, const ProductPoint& exact_grad,
                                           std::size_t k, std::mt19937_64& rng, const ProductPoint& z_prev);

/// Mean of per-sample gradients over the given indices.
[[nodiscard]] ProductPoint minibatch_gradient(const Problem& problem, const ProductPoint& x,
                                              std::span<const std::size_t> indices);

/// ν_k = sqrt(σ_tot²·Σ_{j≤k}(j+1)^{-α}) by direct summation; 0 for Exact.
[[nodiscard]] double nu_k_analytic(const NoiseModel& noise, std::size_t k, std::size_t num_blocks);

/// Incremental form of nu_k_analytic for a whole horizon: entry k is ν_k.
[[nodiscard]] std::vector<double> nu_k_series(const NoiseModel& noise, std::size_t horizon,
                                              std::size_t num_blocks);

} // namespace adprec
