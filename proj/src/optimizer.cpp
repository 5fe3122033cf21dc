#include "adprec/optimizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace adprec {

namespace {

double relative_gap(double lhs, double rhs) {
    const double scale = std::max(std::abs(lhs), std::abs(rhs));
    if (scale == 0.0) {
        return 0.0;
    }
    return std::abs(lhs - rhs) / scale;
}

constexpr std::array<RecordField, 15> kFields{{
    {"f_value", &IterationRecord::f_value},
    {"grad_dual_norm", &IterationRecord::grad_dual_norm},
    {"gtilde_dual_norm", &IterationRecord::gtilde_dual_norm},
    {"z_dual_norm_sq", &IterationRecord::z_dual_norm_sq},
    {"trace_sqrt_total", &IterationRecord::trace_sqrt_total},
    {"delta_k", &IterationRecord::delta_k},
    {"resid_ineq1", &IterationRecord::resid_ineq1},
    {"resid_ineq2", &IterationRecord::resid_ineq2},
    {"step_dual_norm", &IterationRecord::step_dual_norm},
    {"mu", &IterationRecord::mu},
    {"potential_invsqrt", &IterationRecord::potential_invsqrt},
    {"potential_inv", &IterationRecord::potential_inv},
    {"momentum_dual_norm", &IterationRecord::momentum_dual_norm},
    {"momentum_error_sq", &IterationRecord::momentum_error_sq},
    {"k_unused", nullptr},
}};

} // namespace

std::span<const RecordField> record_fields() {
    return std::span(kFields).first(kFields.size() - 1);
}

std::string_view to_string(MomentumMode mode) {
    switch (mode) {
    case MomentumMode::None: return "None";
    case MomentumMode::M1: return "M1";
    case MomentumMode::M2: return "M2";
    }
    return "?";
}

MomentumMode parse_momentum_mode(std::string_view name) {
    for (auto m : {MomentumMode::None, MomentumMode::M1, MomentumMode::M2}) {
        if (to_string(m) == name) {
            return m;
        }
    }
    throw InvalidConfig("unknown momentum mode '" + std::string(name) + "'");
}

void OptimizerConfig::validate() const {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw InvalidConfig("eta must be positive and finite");
    }
    if (!(varsigma > 0.0) || !std::isfinite(varsigma)) {
        throw InvalidConfig("varsigma must be positive and finite");
    }
    if (!(mu_max >= 0.0 && mu_max < 1.0)) {
        throw InvalidConfig("mu_max must lie in [0, 1)");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
        throw InvalidConfig("beta must be nonnegative");
    }
}

double mu_schedule(std::size_t k, const OptimizerConfig& config) {
    if (config.momentum_mode == MomentumMode::None) {
        return 0.0;
    }
    if (config.beta == 0.0) {
        return config.mu_max;
    }
    return config.mu_max / std::pow(static_cast<double>(k + 1), config.beta);
}

std::vector<GeometryState> init_states(std::span<const BlockShape> shapes, double varsigma) {
    std::vector<GeometryState> states;
    states.reserve(shapes.size());
    for (const auto& s : shapes) {
        states.push_back(geom_init(s, varsigma));
    }
    return states;
}

StepResult adprec_step(const ProductPoint& x, const ProductPoint& g_tilde, const std::vector<GeometryState>& states,
                       const MomentumState& momentum, const OptimizerConfig& config, std::size_t k) {
    const std::size_t num_blocks = states.size();
    if (x.num_blocks() != num_blocks || !x.same_shape(g_tilde)) {
        throw ShapeMismatch("adprec_step: point, gradient and states disagree on the block structure");
    }

    StepResult out;
    IterationRecord& rec = out.record;
    rec.k = k;
    rec.mu = mu_schedule(k, config);

    // Momentum update (M_0 = G̃_0 exactly).
    out.momentum = momentum;
    if (config.momentum_mode != MomentumMode::None) {
        if (!momentum.initialized) {
            out.momentum.m = g_tilde;
            out.momentum.initialized = true;
        } else {
            std::vector<Matrix> m;
            m.reserve(num_blocks);
            for (std::size_t l = 0; l < num_blocks; ++l) {
                m.push_back(rec.mu * momentum.m[l] + (1.0 - rec.mu) * g_tilde[l]);
            }
            out.momentum.m = ProductPoint(std::move(m));
        }
    }
    const bool use_m = config.momentum_mode != MomentumMode::None;
    const ProductPoint& direction_src = use_m ? out.momentum.m : g_tilde;
    const ProductPoint& accumulated = config.momentum_mode == MomentumMode::M1 ? out.momentum.m : g_tilde;

    out.states.reserve(num_blocks);
    std::vector<Matrix> z_blocks;
    std::vector<Matrix> x_next;
    z_blocks.reserve(num_blocks);
    x_next.reserve(num_blocks);
    double step_sq = 0.0;
    double trace_log_total = 0.0;
    double trace_log_init = 0.0;

    for (std::size_t l = 0; l < num_blocks; ++l) {
        const GeometryTag tag = states[l].tag();
        GeometryState next = geom_accumulate(states[l], accumulated[l]);
        Matrix z = geom_precondition(next, direction_src[l]);
        const GeometryDiagnostics diag = geom_diagnostics(next, accumulated[l]);

        const double z_norm = geom_dual_norm(tag, z);
        const Matrix sel = geom_selector(tag, z);
        const Matrix step = (-config.eta * z_norm) * sel;
        const double step_norm = block_primal_norm(tag, step);

        rec.z_dual_norm_sq += z_norm * z_norm;
        rec.trace_sqrt_total += diag.trace_sqrt;
        trace_log_total += diag.trace_log;
        trace_log_init += static_cast<double>(states[l].shape.size()) * std::log(states[l].varsigma);
        rec.potential_invsqrt += diag.weighted_invsqrt;
        rec.potential_inv += diag.weighted_inv;

        const double lhs1 = z_norm * direction_src[l].cwiseProduct(sel).sum();
        rec.resid_ineq1 = std::max(rec.resid_ineq1, relative_gap(lhs1, diag.weighted_invsqrt));
        rec.resid_ineq2 = std::max(rec.resid_ineq2, relative_gap(z_norm * z_norm, diag.weighted_inv));

        const double gt = block_dual_norm(tag, g_tilde[l]);
        rec.gtilde_dual_norm += gt * gt;
        const double mn = block_dual_norm(tag, direction_src[l]);
        rec.momentum_dual_norm += mn * mn;
        if (use_m) {
            const double e = block_dual_norm(tag, direction_src[l] - g_tilde[l]);
            rec.momentum_error_sq += e * e;
        }

        step_sq += step_norm * step_norm;
        x_next.push_back(x[l] + step);
        z_blocks.push_back(std::move(z));
        out.states.push_back(std::move(next));
    }

    rec.gtilde_dual_norm = std::sqrt(rec.gtilde_dual_norm);
    rec.momentum_dual_norm = std::sqrt(rec.momentum_dual_norm);
    rec.step_dual_norm = std::sqrt(step_sq);
    rec.delta_k = trace_log_total - trace_log_init;

    out.x_next = ProductPoint(std::move(x_next));
    out.z = ProductPoint(std::move(z_blocks));
    if (!out.x_next.all_finite() || !std::isfinite(rec.trace_sqrt_total) || !std::isfinite(rec.delta_k)) {
        throw NonFiniteIterate("non-finite iterate at k = " + std::to_string(k));
    }
    return out;
}

TrajectoryResult run_trajectory(const Problem& problem, const NoiseModel& noise, const OptimizerConfig& config) {
    config.validate();
    check_noise_compatible(problem, noise);
    TrajectoryResult result;
    result.records.reserve(config.max_iters);
    std::mt19937_64 rng(config.seed);

    ProductPoint x = problem.x0;
    x.check_shapes(problem.shapes);
    std::vector<GeometryState> states = init_states(problem.shapes, config.varsigma);
    MomentumState mom;
    ProductPoint z_prev = ProductPoint::zeros(problem.shapes);

    try {
        for (std::size_t k = 0; k < config.max_iters; ++k) {
            const ProductPoint g = problem.eval_grad(x);
            const double f = config.evaluate_f ? problem.eval_f(x) : std::numeric_limits<double>::quiet_NaN();
            const ProductPoint g_tilde = sample_gradient(problem, noise, x, g, k, rng, z_prev);
            if (!g_tilde.all_finite()) {
                throw NonFiniteIterate("non-finite gradient at k = " + std::to_string(k));
            }
            StepResult step = adprec_step(x, g_tilde, states, mom, config, k);
            step.record.f_value = f;
            step.record.grad_dual_norm = std::sqrt(product_dual_norm_sq(g, problem.shapes));
            result.records.push_back(step.record);
            x = std::move(step.x_next);
            states = std::move(step.states);
            mom = std::move(step.momentum);
            z_prev = std::move(step.z);
        }
    } catch (const NonFiniteIterate& e) {
        result.status = RunStatus::NonFinite;
        result.message = e.what();
    } catch (const NonPositiveDefinite& e) {
        result.status = RunStatus::NumericalError;
        result.message = e.what();
    }
    result.final_point = std::move(x);
    result.final_states = std::move(states);
    return result;
}

bool ReplicateSummary::all_ok() const {
    return std::all_of(replicates.begin(), replicates.end(),
                       [](const TrajectoryResult& r) { return r.status == RunStatus::Ok; });
}

ReplicateSummary aggregate_replicates(std::vector<TrajectoryResult> runs, std::uint64_t base_seed) {
    ReplicateSummary summary;
    summary.base_seed = base_seed;
    if (runs.empty()) {
        return summary;
    }
    std::size_t len = runs.front().records.size();
    for (const auto& r : runs) {
        len = std::min(len, r.records.size());
    }
    const double count = static_cast<double>(runs.size());
    summary.mean.resize(len);
    summary.grad_norm_se.resize(len);
    summary.min_mean_grad.resize(len);
    for (std::size_t k = 0; k < len; ++k) {
        IterationRecord& m = summary.mean[k];
        m.k = k;
        for (const auto& field : record_fields()) {
            double acc = 0.0;
            for (const auto& r : runs) {
                acc += r.records[k].*field.member;
            }
            m.*field.member = acc / count;
        }
        double var = 0.0;
        for (const auto& r : runs) {
            const double d = r.records[k].grad_dual_norm - m.grad_dual_norm;
            var += d * d;
        }
        summary.grad_norm_se[k] = runs.size() > 1 ? std::sqrt(var / (count - 1.0) / count) : 0.0;
        summary.min_mean_grad[k] =
            k == 0 ? m.grad_dual_norm : std::min(summary.min_mean_grad[k - 1], m.grad_dual_norm);
    }
    summary.replicates = std::move(runs);
    return summary;
}

int thread_cap() {
    if (const char* env = std::getenv("ADPREC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) {
            return n;
        }
    }
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

ReplicateSummary run_replicates(const Problem& problem, const NoiseModel& noise, const OptimizerConfig& config,
                                std::size_t replicates) {
    if (replicates < 1) {
        throw InvalidConfig("at least one replicate is required");
    }
    config.validate();
    check_noise_compatible(problem, noise);
    std::vector<TrajectoryResult> runs(replicates);
    std::vector<std::exception_ptr> errors(replicates);
    const auto count = static_cast<std::ptrdiff_t>(replicates);
#pragma omp parallel for schedule(dynamic, 1) num_threads(thread_cap())
    for (std::ptrdiff_t r = 0; r < count; ++r) {
        OptimizerConfig local = config;
        local.seed = config.seed + static_cast<std::uint64_t>(r);
        try {
            runs[static_cast<std::size_t>(r)] = run_trajectory(problem, noise, local);
        } catch (...) {
            errors[static_cast<std::size_t>(r)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
    return aggregate_replicates(std::move(runs), config.seed);
}

ReplicateSummary run_replicates_serial(const Problem& problem, const NoiseModel& noise,
                                       const OptimizerConfig& config, std::size_t replicates) {
    if (replicates < 1) {
        throw InvalidConfig("at least one replicate is required");
    }
    std::vector<TrajectoryResult> runs;
    runs.reserve(replicates);
    for (std::size_t r = 0; r < replicates; ++r) {
        OptimizerConfig local = config;
        local.seed = config.seed + r;
        runs.push_back(run_trajectory(problem, noise, local));
    }
    return aggregate_replicates(std::move(runs), config.seed);
}

std::optional<bool> small_eta_holds(const OptimizerConfig& config, std::optional<double> lipschitz,
                                    double kappa_box, double kappa_diamond) {
    if (!lipschitz) {
        return std::nullopt;
    }
    if (config.mu_max == 0.0 || *lipschitz == 0.0) {
        return true;
    }
    const double bound = (1.0 - config.mu_max) / (config.mu_max * *lipschitz) *
                         std::sqrt(config.varsigma / (6.0 * kappa_box * kappa_diamond));
    return config.eta <= bound;
}

} // namespace adprec
