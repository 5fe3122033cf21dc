#pragma once

// The adaptively preconditioned iteration over a product of blocks, with
// optional momentum:
//   None  Γ_k = Γ_{k−1} + 𝓛(G̃_k)²,  Z_k = Γ_k^{-1/2} G̃_k
//   M1    M_k = μ_k M_{k−1} + (1−μ_k) G̃_k,  Γ_k = Γ_{k−1} + 𝓛(M_k)²,  Z_k = Γ_k^{-1/2} M_k
//   M2    Γ_k = Γ_{k−1} + 𝓛(G̃_k)²,  M_k as in M1,  Z_k = Γ_k^{-1/2} M_k
// and in every mode X_{k+1,ℓ} = X_{k,ℓ} − η‖Z_{k,ℓ}‖_{*,ℓ} S_ℓ(Z_{k,ℓ}).
// The objective value is never used by the update.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adprec/block_space.hpp"
#include "adprec/geometry.hpp"
#include "adprec/problems.hpp"

namespace adprec {

enum class MomentumMode { None, M1, M2 };

[[nodiscard]] std::string_view to_string(MomentumMode mode);
[[nodiscard]] MomentumMode parse_momentum_mode(std::string_view name);

struct OptimizerConfig {
    double eta = 1.0;
    double varsigma = 1.0;
    MomentumMode momentum_mode = MomentumMode::None;
    double mu_max = 0.0;
    double beta = 0.0;
    std::size_t max_iters = 100;
    std::uint64_t seed = 0;
    /// f is evaluated for diagnostics only; disable to skip it entirely.
    bool evaluate_f = true;

    void validate() const;
};

struct MomentumState {
    ProductPoint m;
    bool initialized = false;
};

struct IterationRecord {
    std::size_t k = 0;
    double f_value = 0.0;          ///< diagnostic only (NaN when disabled)
    double grad_dual_norm = 0.0;   ///< ‖G_k‖_*
    double gtilde_dual_norm = 0.0; ///< ‖G̃_k‖_*
    double z_dual_norm_sq = 0.0;   ///< Σ_ℓ ‖Z_{k,ℓ}‖²_{*,ℓ}
    double trace_sqrt_total = 0.0; ///< Σ_ℓ tr Γ_{k,ℓ}^{1/2}
    double delta_k = 0.0;          ///< Σ_ℓ tr log Γ_{k,ℓ} − Σ_ℓ tr log Γ_{−1,ℓ}
    double resid_ineq1 = 0.0;      ///< max relative residual over blocks
    double resid_ineq2 = 0.0;
    double step_dual_norm = 0.0;   ///< ‖X_{k+1} − X_k‖ in the primal product norm
    double mu = 0.0;
    double potential_invsqrt = 0.0; ///< Σ_ℓ tr(Γ_k^{-1/2} 𝓛(A_k)²), A_k the accumulated vector
    double potential_inv = 0.0;     ///< Σ_ℓ tr(Γ_k^{-1} 𝓛(A_k)²)
    double momentum_dual_norm = 0.0; ///< ‖M_k‖_* (equals ‖G̃_k‖_* without momentum)
    double momentum_error_sq = 0.0;  ///< ‖M_k − G̃_k‖_*²
};

/// Names and accessors for the floating-point record fields, in CSV order.
struct RecordField {
    const char* name;
    double IterationRecord::*member;
};
[[nodiscard]] std::span<const RecordField> record_fields();

[[nodiscard]] double mu_schedule(std::size_t k, const OptimizerConfig& config);

[[nodiscard]] std::vector<GeometryState> init_states(std::span<const BlockShape> shapes, double varsigma);

struct StepResult {
    ProductPoint x_next;
    std::vector<GeometryState> states;
    MomentumState momentum;
    ProductPoint z;
    IterationRecord record;
};

/// One iteration. Record fields that need the exact gradient or f are left
/// for the caller. Throws NonFiniteIterate when the new iterate is not finite.
[[nodiscard]] StepResult adprec_step(const ProductPoint& x, const ProductPoint& g_tilde,
                                     const std::vector<GeometryState>& states, const MomentumState& momentum,
                                     const OptimizerConfig& config, std::size_t k);

enum class RunStatus { Ok, NonFinite, NumericalError };

struct TrajectoryResult {
    std::vector<IterationRecord> records;
    ProductPoint final_point;
    std::vector<GeometryState> final_states;
    RunStatus status = RunStatus::Ok;
    std::string message;
};

/// Runs max_iters iterations from problem.x0 with RNG seeded by config.seed.
/// Numerical failures stop the run and are reported in `status`.
[[nodiscard]] TrajectoryResult run_trajectory(const Problem& problem, const NoiseModel& noise,
                                              const OptimizerConfig& config);

struct ReplicateSummary {
    std::vector<TrajectoryResult> replicates;
    std::vector<IterationRecord> mean;     ///< arithmetic mean per k over replicates
    std::vector<double> grad_norm_se;      ///< standard error of grad_dual_norm per k
    std::vector<double> min_mean_grad;     ///< min_{j≤k} of mean grad_dual_norm
    std::uint64_t base_seed = 0;

    [[nodiscard]] bool all_ok() const;
};

/// Replicate r uses seed base_seed + r. Replicates run on OpenMP threads,
/// capped by ADPREC_THREADS; results do not depend on the thread count.
[[nodiscard]] ReplicateSummary run_replicates(const Problem& problem, const NoiseModel& noise,
                                              const OptimizerConfig& config, std::size_t replicates);

/// Serial reference for run_replicates.
[[nodiscard]] ReplicateSummary run_replicates_serial(const Problem& problem, const NoiseModel& noise,
                                                     const OptimizerConfig& config, std::size_t replicates);

/// Merges completed replicate streams (truncated to the shortest one).
[[nodiscard]] ReplicateSummary aggregate_replicates(std::vector<TrajectoryResult> runs, std::uint64_t base_seed);

/// First branch of the step-size condition required by M2:
/// η ≤ (1−μ_max)/(μ_max L_G)·sqrt(ς/(6κ_□κ_⋄)). nullopt when L_G is unknown.
[[nodiscard]] std::optional<bool> small_eta_holds(const OptimizerConfig& config, std::optional<double> lipschitz,
                                                  double kappa_box = 2.0, double kappa_diamond = 1.0);

/// Worker count from ADPREC_THREADS (unset or invalid: OpenMP default).
[[nodiscard]] int thread_cap();

} // namespace adprec
