#include "adprec/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace adprec {

namespace {

// Factor turning a Euclidean Lipschitz constant into one valid for the
// product (primal, dual) norm pair: ‖·‖_* ≤ √r‖·‖_F and ‖·‖_F ≤ √r‖·‖_s on
// a Muon block of rank at most r.
double norm_pair_factor(const std::vector<BlockShape>& shapes) {
    double r = 1.0;
    for (const auto& s : shapes) {
        if (!is_euclidean(s.geometry)) {
            r = std::max(r, static_cast<double>(std::min(s.rows, s.cols)));
        }
    }
    return r;
}

void validate_shapes(const std::vector<BlockShape>& shapes) {
    if (shapes.empty()) {
        throw InvalidConfig("a problem needs at least one block");
    }
    for (const auto& s : shapes) {
        s.validate();
    }
}

Vector draw_vector(Eigen::Index n, std::mt19937_64& rng) {
    return linalg::gaussian_matrix(n, 1, rng).col(0);
}

double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

} // namespace

double Problem::eval_f(const ProductPoint& x) const {
    x.check_shapes(shapes);
    return f(x);
}

ProductPoint Problem::eval_grad(const ProductPoint& x) const {
    x.check_shapes(shapes);
    return grad(x);
}

Problem make_quadratic(std::vector<BlockShape> shapes, const linalg::SymMatrix& h, const Vector& b,
                       ProductPoint x0) {
    validate_shapes(shapes);
    const auto n = total_dimension(shapes);
    if (h.dim() != n || b.size() != n) {
        throw InvalidConfig("quadratic: H and b must match the total dimension");
    }
    x0.check_shapes(shapes);
    const auto [eig, q] = linalg::eigh(h);
    const double lmin = eig(0);
    const double lmax = eig(eig.size() - 1);
    double f_low = 0.0;
    if (b.squaredNorm() > 0.0) {
        if (!(lmin > 0.0)) {
            throw InvalidConfig("quadratic: H must be positive definite when b != 0");
        }
        const Vector w = q.transpose() * b;
        f_low = -0.5 * (w.array().square() / eig.array()).sum();
    } else if (lmin < -1e-12 * std::max(1.0, lmax)) {
        throw InvalidConfig("quadratic: H must be positive semidefinite");
    }

    Problem p;
    p.name = "quadratic";
    p.f_low = f_low;
    p.lipschitz = lmax * norm_pair_factor(shapes);
    const Matrix hm = h.matrix();
    p.f = [hm, b](const ProductPoint& x) {
        const Vector v = x.flatten();
        return 0.5 * v.dot(hm * v) - b.dot(v);
    };
    p.grad = [hm, b, shapes](const ProductPoint& x) {
        return ProductPoint::unflatten(hm * x.flatten() - b, shapes);
    };
    p.shapes = std::move(shapes);
    p.x0 = std::move(x0);
    return p;
}

Problem make_trigquad(std::vector<BlockShape> shapes, const Matrix& a, const Vector& b, double c,
                      ProductPoint x0) {
    validate_shapes(shapes);
    const auto n = total_dimension(shapes);
    if (a.cols() != n || b.size() != a.rows()) {
        throw InvalidConfig("trigquad: A must have N columns and b one entry per row of A");
    }
    if (!(c >= 0.0)) {
        throw InvalidConfig("trigquad: c must be nonnegative");
    }
    x0.check_shapes(shapes);
    const double ata = linalg::eigh(linalg::SymMatrix(a.transpose() * a)).values.maxCoeff();

    Problem p;
    p.name = "trigquad";
    p.f_low = -c * static_cast<double>(n);
    p.lipschitz = (ata + c) * norm_pair_factor(shapes);
    p.f = [a, b, c](const ProductPoint& x) {
        const Vector v = x.flatten();
        return 0.5 * (a * v - b).squaredNorm() + c * v.array().cos().sum();
    };
    p.grad = [a, b, c, shapes](const ProductPoint& x) {
        const Vector v = x.flatten();
        const Vector g = a.transpose() * (a * v - b) - c * v.array().sin().matrix();
        return ProductPoint::unflatten(g, shapes);
    };
    p.shapes = std::move(shapes);
    p.x0 = std::move(x0);
    return p;
}

Problem make_logistic(std::vector<BlockShape> shapes, std::uint64_t data_seed, std::size_t samples,
                      double reg, ProductPoint x0) {
    validate_shapes(shapes);
    if (samples < 1 || !(reg >= 0.0)) {
        throw InvalidConfig("logistic: need samples >= 1 and reg >= 0");
    }
    x0.check_shapes(shapes);
    const auto n = total_dimension(shapes);
    std::mt19937_64 rng(data_seed);
    const Matrix a = linalg::gaussian_matrix(static_cast<Eigen::Index>(samples), n, rng);
    const Vector w_star = draw_vector(n, rng);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector y(static_cast<Eigen::Index>(samples));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y(i) = (a.row(i).dot(w_star) + 0.5 * normal(rng)) >= 0.0 ? 1.0 : -1.0;
    }
    const double m = static_cast<double>(samples);
    const double ata = linalg::eigh(linalg::SymMatrix(a.transpose() * a)).values.maxCoeff();

    Problem p;
    p.name = "logistic";
    p.f_low = 0.0;
    p.lipschitz = (ata / (4.0 * m) + reg) * norm_pair_factor(shapes);
    p.num_samples = samples;
    p.f = [a, y, reg, m](const ProductPoint& x) {
        const Vector v = x.flatten();
        const Vector margins = (a * v).cwiseProduct(y);
        double total = 0.0;
        for (double t : margins) {
            total += softplus(-t);
        }
        return total / m + 0.5 * reg * v.squaredNorm();
    };
    p.grad = [a, y, reg, m, shapes](const ProductPoint& x) {
        const Vector v = x.flatten();
        const Vector margins = (a * v).cwiseProduct(y);
        Vector coeff(margins.size());
        for (Eigen::Index i = 0; i < margins.size(); ++i) {
            coeff(i) = -y(i) * sigmoid(-margins(i));
        }
        return ProductPoint::unflatten(a.transpose() * coeff / m + reg * v, shapes);
    };
    p.sample_grad = [a, y, reg, shapes](const ProductPoint& x, std::size_t i) {
        const Vector v = x.flatten();
        const auto row = static_cast<Eigen::Index>(i);
        const double t = y(row) * a.row(row).dot(v);
        const Vector g = (-y(row) * sigmoid(-t)) * a.row(row).transpose() + reg * v;
        return ProductPoint::unflatten(g, shapes);
    };
    p.shapes = std::move(shapes);
    p.x0 = std::move(x0);
    return p;
}

Problem make_matfact(const Matrix& target, Eigen::Index rank, GeometryTag geometry, ProductPoint x0) {
    if (rank < 1) {
        throw InvalidConfig("matfact: rank must be positive");
    }
    std::vector<BlockShape> shapes{{rank, target.cols(), geometry}, {target.rows(), rank, geometry}};
    validate_shapes(shapes);
    x0.check_shapes(shapes);

    Problem p;
    p.name = "matfact";
    p.f_low = 0.0;
    p.lipschitz = std::nullopt;
    p.f = [target](const ProductPoint& x) { return 0.5 * (x[1] * x[0] - target).squaredNorm(); };
    p.grad = [target](const ProductPoint& x) {
        const Matrix r = x[1] * x[0] - target;
        return ProductPoint(std::vector<Matrix>{x[1].transpose() * r, r * x[0].transpose()});
    };
    p.shapes = std::move(shapes);
    p.x0 = std::move(x0);
    return p;
}

Problem make_problem(const ProblemSpec& spec) {
    std::mt19937_64 rng(spec.seed);
    if (spec.kind == "matfact") {
        if (spec.mf_rows < 1 || spec.mf_cols < 1) {
            throw InvalidConfig("matfact: target dimensions must be positive");
        }
        const Matrix target = spec.target_scale * linalg::gaussian_matrix(spec.mf_rows, spec.mf_cols, rng);
        std::vector<Matrix> blocks{spec.x0_scale * linalg::gaussian_matrix(spec.mf_rank, spec.mf_cols, rng),
                                   spec.x0_scale * linalg::gaussian_matrix(spec.mf_rows, spec.mf_rank, rng)};
        return make_matfact(target, spec.mf_rank, spec.mf_geometry, ProductPoint(std::move(blocks)));
    }

    validate_shapes(spec.blocks);
    const auto n = total_dimension(spec.blocks);
    const auto x0_of = [&](std::mt19937_64& r) {
        return ProductPoint::unflatten(spec.x0_scale * draw_vector(n, r), spec.blocks);
    };

    if (spec.kind == "quadratic") {
        if (!(spec.condition >= 1.0) || !(spec.lmax > 0.0)) {
            throw InvalidConfig("quadratic: need condition >= 1 and lmax > 0");
        }
        linalg::SymMatrix h;
        if (spec.hessian == "identity") {
            h = linalg::SymMatrix::identity(n, spec.lmax);
        } else if (spec.hessian == "diagonal") {
            Vector d(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double t = n == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(n - 1);
                d(i) = spec.lmax * std::pow(spec.condition, t - 1.0);
            }
            h = linalg::SymMatrix::diagonal(d);
        } else if (spec.hessian == "random") {
            const auto raw = linalg::random_psd(n, spec.condition, rng);
            h = (spec.lmax / linalg::eigh(raw).values.maxCoeff()) * raw;
        } else {
            throw InvalidConfig("quadratic: unknown hessian '" + spec.hessian + "'");
        }
        const Vector b = spec.b_scale * draw_vector(n, rng);
        return make_quadratic(spec.blocks, h, b, x0_of(rng));
    }
    if (spec.kind == "trigquad") {
        Matrix a;
        Vector b;
        if (spec.design == "identity") {
            a = Matrix::Identity(n, n);
        } else if (spec.design == "random") {
            const auto rows = spec.design_rows > 0 ? spec.design_rows : n;
            a = linalg::gaussian_matrix(rows, n, rng) / std::sqrt(static_cast<double>(rows));
        } else {
            throw InvalidConfig("trigquad: unknown design '" + spec.design + "'");
        }
        b = spec.b_scale * draw_vector(a.rows(), rng);
        return make_trigquad(spec.blocks, a, b, spec.trig_c, x0_of(rng));
    }
    if (spec.kind == "logistic") {
        const std::uint64_t data_seed = rng();
        return make_logistic(spec.blocks, data_seed, spec.samples, spec.reg, x0_of(rng));
    }
    throw InvalidConfig("unknown problem kind '" + spec.kind + "'");
}

std::string_view to_string(NoiseKind kind) {
    switch (kind) {
    case NoiseKind::Exact: return "Exact";
    case NoiseKind::AdditiveDecaying: return "AdditiveDecaying";
    case NoiseKind::AdditivePlusMultiplicative: return "AdditivePlusMultiplicative";
    case NoiseKind::MiniBatch: return "MiniBatch";
    }
    return "?";
}

NoiseKind parse_noise_kind(std::string_view name) {
    for (auto k : {NoiseKind::Exact, NoiseKind::AdditiveDecaying, NoiseKind::AdditivePlusMultiplicative,
                   NoiseKind::MiniBatch}) {
        if (to_string(k) == name) {
            return k;
        }
    }
    throw InvalidConfig("unknown noise kind '" + std::string(name) + "'");
}

double NoiseModel::sigma_for(std::size_t block) const {
    if (sigma.empty()) {
        return 0.0;
    }
    return sigma.size() == 1 ? sigma.front() : sigma.at(block);
}

double NoiseModel::sigma_tot_sq(std::size_t num_blocks) const {
    double total = 0.0;
    for (std::size_t l = 0; l < num_blocks; ++l) {
        total += sigma_for(l) * sigma_for(l);
    }
    return total;
}

void NoiseModel::validate() const {
    for (double s : sigma) {
        if (!(s >= 0.0) || !std::isfinite(s)) {
            throw InvalidConfig("noise sigma must be finite and nonnegative");
        }
    }
    if (kind == NoiseKind::AdditiveDecaying || kind == NoiseKind::AdditivePlusMultiplicative) {
        if (!(alpha > 0.0)) {
            throw InvalidConfig("noise alpha must be positive");
        }
    }
    if (!(omega >= 0.0)) {
        throw InvalidConfig("noise omega must be nonnegative");
    }
    if (kind == NoiseKind::MiniBatch && batch < 1) {
        throw InvalidConfig("mini-batch size must be positive");
    }
}

ProductPoint minibatch_gradient(const Problem& problem, const ProductPoint& x,
                                std::span<const std::size_t> indices) {
    if (!problem.sample_grad || problem.num_samples == 0) {
        throw InvalidConfig("problem '" + problem.name + "' is not a finite sum");
    }
    if (indices.empty()) {
        throw InvalidConfig("mini-batch must be nonempty");
    }
    ProductPoint acc = ProductPoint::zeros(problem.shapes);
    for (std::size_t i : indices) {
        acc = axpy(acc, 1.0, problem.sample_grad(x, i));
    }
    return axpy(ProductPoint::zeros(problem.shapes), 1.0 / static_cast<double>(indices.size()), acc);
}

void check_noise_compatible(const Problem& problem, const NoiseModel& noise) {
    noise.validate();
    if (noise.sigma.size() > 1 && noise.sigma.size() != problem.shapes.size()) {
        throw InvalidConfig("noise sigma has " + std::to_string(noise.sigma.size()) + " entries for " +
                            std::to_string(problem.shapes.size()) + " blocks");
    }
    if (noise.kind == NoiseKind::MiniBatch) {
        if (problem.num_samples == 0 || !problem.sample_grad) {
            throw InvalidConfig("problem '" + problem.name + "' has no per-sample gradients for mini-batching");
        }
        if (noise.batch > problem.num_samples) {
            throw InvalidConfig("mini-batch larger than the sample count");
        }
    }
}

ProductPoint sample_gradient(const Problem& problem, const NoiseModel& noise, const ProductPoint& x,
                             const ProductPoint& exact_grad, std::size_t k, std::mt19937_64& rng,
                             const ProductPoint& z_prev) {
    switch (noise.kind) {
    case NoiseKind::Exact:
        return exact_grad;
    case NoiseKind::MiniBatch: {
        const std::size_t m = problem.num_samples;
        if (noise.batch > m) {
            throw InvalidConfig("mini-batch larger than the sample count");
        }
        std::vector<std::size_t> idx(m);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        // partial Fisher–Yates: the first `batch` entries are a uniform subset
        for (std::size_t i = 0; i < noise.batch; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, m - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        return minibatch_gradient(problem, x, std::span(idx).first(noise.batch));
    }
    case NoiseKind::AdditiveDecaying:
    case NoiseKind::AdditivePlusMultiplicative: {
        std::normal_distribution<double> normal(0.0, 1.0);
        const double decay = std::pow(static_cast<double>(k + 1), -0.5 * noise.alpha);
        std::vector<Matrix> out;
        out.reserve(exact_grad.num_blocks());
        for (std::size_t l = 0; l < exact_grad.num_blocks(); ++l) {
            const auto& shape = problem.shapes[l];
            const double root_d = std::sqrt(static_cast<double>(shape.size()));
            const double additive = noise.sigma_for(l) * decay / root_d;
            double std_entry = additive;
            if (noise.kind == NoiseKind::AdditivePlusMultiplicative && noise.omega > 0.0) {
                const double mult = noise.omega * block_dual_norm(shape.geometry, z_prev[l]) / root_d;
                std_entry = std::hypot(additive, mult);
            }
            Matrix g = exact_grad[l];
            if (std_entry > 0.0) {
                for (Eigen::Index j = 0; j < g.cols(); ++j) {
                    for (Eigen::Index i = 0; i < g.rows(); ++i) {
                        g(i, j) += std_entry * normal(rng);
                    }
                }
            }
            out.push_back(std::move(g));
        }
        return ProductPoint(std::move(out));
    }
    }
    return exact_grad;
}

double nu_k_analytic(const NoiseModel& noise, std::size_t k, std::size_t num_blocks) {
    switch (noise.kind) {
    case NoiseKind::Exact:
        return 0.0;
    case NoiseKind::MiniBatch:
        throw InvalidConfig("nu_k is only defined for additive noise models");
    default:
        break;
    }
    double sum = 0.0;
    for (std::size_t j = 0; j <= k; ++j) {
        sum += std::pow(static_cast<double>(j + 1), -noise.alpha);
    }
    return std::sqrt(noise.sigma_tot_sq(num_blocks) * sum);
}

std::vector<double> nu_k_series(const NoiseModel& noise, std::size_t horizon, std::size_t num_blocks) {
    std::vector<double> out(horizon, 0.0);
    if (noise.kind == NoiseKind::Exact) {
        return out;
    }
    if (noise.kind == NoiseKind::MiniBatch) {
        throw InvalidConfig("nu_k is only defined for additive noise models");
    }
    const double tot = noise.sigma_tot_sq(num_blocks);
    double sum = 0.0;
    for (std::size_t j = 0; j < horizon; ++j) {
        sum += std::pow(static_cast<double>(j + 1), -noise.alpha);
        out[j] = std::sqrt(tot * sum);
    }
    return out;
}

} // namespace adprec
