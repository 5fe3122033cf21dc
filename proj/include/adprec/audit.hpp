#pragma once

// Numerical checks of the trace lemmas, structural identities, pathwise
// potentials, the Θ_k envelope and the rate regimes. Every audit is
// deterministic given its seed; trial loops run on OpenMP threads and give
// bit-identical reports to the serial path.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adprec/optimizer.hpp"

namespace adprec {

enum class Execution { Parallel, Serial };

struct AuditReport {
    std::string check_name;
    std::size_t trials = 0;
    /// Most negative normalized slack, 0 when nothing is violated.
    double worst_violation = 0.0;
    double tolerance = 0.0;
    bool pass = true;
    std::string context;
    std::map<std::string, double> metrics;
};

/// Shared fields of the bound audits.
struct BoundConstants {
    double kappa_gap = 0.0;
    double kappa_0 = 0.0;
    double n_total = 0.0; ///< N = Σ_ℓ d_ℓ
    double eta = 1.0;
    double varsigma = 1.0;
    std::optional<double> lipschitz;
    double omega = 0.0;
    double f0 = 0.0;
    double f_low = 0.0;
};

/// κ_gap = f0 − f_low + ηςN and κ₀ = −Σ d_ℓ log d_ℓ − N log ς.
[[nodiscard]] BoundConstants make_bound_constants(std::span<const BlockShape> shapes, double f0, double f_low,
                                                  std::optional<double> lipschitz, double eta, double varsigma,
                                                  double omega = 0.0);
[[nodiscard]] BoundConstants make_bound_constants(const Problem& problem, const OptimizerConfig& config,
                                                  double omega = 0.0);

/// Extra constants for the M2 envelope.
struct AltConstants {
    double mu_max = 0.0;
    double kappa_box = 2.0;
    double kappa_diamond = 1.0;
    /// κ_μZ, used only when the small-η branch fails.
    double kappa_mu_z = 0.0;
};

struct AltDerived {
    double kappa_1nu = 0.0;
    double kappa_1z = 0.0;
    double kappa_2nu = 0.0;
    double kappa_2z = 0.0;
    double kappa_gap = 0.0;
    double kappa_nunu = 0.0;
    double kappa_nudelta = 0.0;
    double kappa_delta = 0.0;
    bool small_eta = false;
};

[[nodiscard]] AltDerived alt_constants(const BoundConstants& c, const AltConstants& alt);

/// Θ_k for the memoryless (and M1) analysis. Throws InvalidConfig without L_G.
[[nodiscard]] double compute_theta(const BoundConstants& c, double nu_k);
/// Θ_k for M2, θ_k² = Σ_j μ_j² E‖G̃_j − G_j‖².
[[nodiscard]] double compute_theta_alt(const BoundConstants& c, const AltConstants& alt, double theta_sq);

/// Right-hand side of the rate bound for M1 (constants already mapped).
[[nodiscard]] double momentum_rate_rhs(const BoundConstants& c, double theta_k, std::size_t k);

// Trace lemmas on random PSD inputs, dimensions in [dim_lo, dim_hi].
[[nodiscard]] AuditReport audit_sqrt_trace(std::size_t trials, int dim_lo, int dim_hi, std::uint64_t seed,
                                           Execution exec = Execution::Parallel);
[[nodiscard]] AuditReport audit_log_increment(std::size_t trials, int dim_lo, int dim_hi, std::uint64_t seed,
                                              Execution exec = Execution::Parallel);
[[nodiscard]] AuditReport audit_spectral_log(std::size_t trials, std::uint64_t seed,
                                             Execution exec = Execution::Parallel);
[[nodiscard]] AuditReport audit_techn(std::size_t trials, std::uint64_t seed);

enum class Identity { Ineq1, Ineq2, Compatibility };

/// Random (state, V) draws for one geometry.
[[nodiscard]] AuditReport audit_identity(GeometryTag tag, Identity which, std::size_t trials, std::uint64_t seed,
                                         Execution exec = Execution::Parallel);

/// Factored Shampoo preconditioning and diagnostics against the explicit
/// Kronecker operator.
[[nodiscard]] AuditReport audit_shampoo_kronecker(std::size_t trials, Eigen::Index rows, Eigen::Index cols,
                                                  std::uint64_t seed);
/// One DiagAdaGrad block against n scalar AdaNorm blocks over K steps.
[[nodiscard]] AuditReport audit_diag_vs_adanorm(Eigen::Index n, std::size_t iters, std::uint64_t seed);

/// Pathwise sqrt-potential, log-potential and Δ bound at every record.
[[nodiscard]] AuditReport audit_path_potentials(std::span<const IterationRecord> records,
                                                std::span<const BlockShape> shapes, double varsigma);

enum class BoundMode { Deterministic, Statistical };

/// Telescoping bound, Θ_k bound and rate bound along a trajectory.
/// Deterministic mode requires an exact oracle and uses one run; statistical
/// mode averages `replicates` runs and allows 3 standard errors.
[[nodiscard]] AuditReport audit_master_and_theta(const Problem& problem, const NoiseModel& noise,
                                                 const OptimizerConfig& config, BoundMode mode,
                                                 std::size_t replicates = 32);

/// E-bound and momentum rate bound for an M1 run with exact oracle.
[[nodiscard]] AuditReport audit_momentum_error(const Problem& problem, std::span<const IterationRecord> records,
                                               const OptimizerConfig& config);

/// Empirical κ_□ (probe-weighted and Löwner) and κ_⋄ for one geometry.
[[nodiscard]] AuditReport audit_subadditivity_constants(GeometryTag tag, std::size_t trials, std::uint64_t seed,
                                                        Execution exec = Execution::Parallel);

/// Least-squares slope of log y against log(k+1) over k in [lo, hi).
[[nodiscard]] double loglog_slope(std::span<const double> y, std::size_t lo, std::size_t hi);

/// Rate exponent predicted for the given noise decay and momentum schedule.
[[nodiscard]] double theoretical_exponent(double alpha, double beta, MomentumMode mode);

struct RatePoint {
    double alpha = 0.0;
    double slope = 0.0;
    double exponent = 0.0;
    bool bound_dominates = false;
    double worst_bound_slack = 0.0;
};

struct RateAudit {
    AuditReport report;
    std::vector<RatePoint> points;
};

/// Replicate-mean min-gradient curve per α: slope over the last decade of k
/// against the predicted exponent (+0.15) and pointwise domination by the
/// bound curve within 3 standard errors.
[[nodiscard]] RateAudit audit_rate_regimes(const Problem& problem, const NoiseModel& base_noise,
                                           const OptimizerConfig& config, std::span<const double> alphas,
                                           std::size_t replicates);

struct Envelope {
    std::vector<double> theta; ///< Θ_k
    std::vector<double> bound; ///< bound on (1/(k+1))Σ_j E‖G_j‖_*
};

/// Θ_k and the rate bound per k for the configured momentum mode. Entries
/// are NaN when L_G is unknown or the oracle has no variance model
/// (mini-batch, or multiplicative noise combined with M1).
[[nodiscard]] Envelope envelope(const Problem& problem, const NoiseModel& noise, const OptimizerConfig& config,
                                std::size_t horizon);

/// Slope gain of the momentum schedule β against β=0 for M2.
[[nodiscard]] AuditReport audit_m2_schedule(const Problem& problem, const NoiseModel& noise,
                                            const OptimizerConfig& config, double beta, std::size_t replicates,
                                            double required_gain);

/// A named trajectory setup used by the standard suites.
struct Scenario {
    std::string label;
    Problem problem;
    NoiseModel noise;
    OptimizerConfig config;
};

/// 5 geometries plus a mixed Muon+AdaNorm space, each with an exact and a
/// noisy oracle.
[[nodiscard]] std::vector<Scenario> potential_scenarios(std::size_t iters, std::uint64_t seed);
/// Quadratic with AdaNorm and trigquad with DiagAdaGrad, exact oracle.
[[nodiscard]] std::vector<Scenario> bound_scenarios(std::size_t iters, std::uint64_t seed);
/// Quadratic with one DiagAdaGrad block of size 10.
[[nodiscard]] Scenario rate_scenario(std::size_t iters, std::uint64_t seed);
/// rate_scenario with α = 0.5, M2 momentum (μ_max = 0.5) and the largest η
/// admitted by the small-step condition.
[[nodiscard]] Scenario m2_scenario(std::size_t iters, std::uint64_t seed);

[[nodiscard]] const std::vector<std::string>& suite_names();
/// Runs a named suite. Throws InvalidConfig for an unknown name.
[[nodiscard]] std::vector<AuditReport> run_suite(const std::string& suite, std::size_t trials, std::uint64_t seed);

[[nodiscard]] std::string report_to_json(const std::vector<AuditReport>& reports);

} // namespace adprec
