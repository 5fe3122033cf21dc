#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "adprec/optimizer.hpp"
#include "test_support.hpp"

using namespace adprec;

namespace {

Matrix col(std::initializer_list<double> xs) {
    Matrix m(static_cast<Eigen::Index>(xs.size()), 1);
    Eigen::Index i = 0;
    for (double x : xs) {
        m(i++, 0) = x;
    }
    return m;
}

Problem mixed_quadratic(std::uint64_t seed) {
    ProblemSpec s;
    s.blocks = {{3, 1, GeometryTag::FullAdaGrad}, {2, 1, GeometryTag::DiagAdaGrad}, {2, 1, GeometryTag::AdaNorm},
                {3, 2, GeometryTag::Shampoo}, {2, 2, GeometryTag::Muon}};
    s.hessian = "random";
    s.condition = 10;
    s.b_scale = 1;
    s.seed = seed;
    return make_problem(s);
}

OptimizerConfig config(MomentumMode mode, double mu, std::size_t iters) {
    OptimizerConfig c;
    c.eta = 0.5;
    c.momentum_mode = mode;
    c.mu_max = mu;
    c.max_iters = iters;
    c.seed = 11;
    return c;
}

NoiseModel noisy() {
    NoiseModel n;
    n.kind = NoiseKind::AdditiveDecaying;
    n.sigma = {0.5};
    n.alpha = 0.5;
    return n;
}

// From-scratch reference iteration on explicit preconditioners.
std::vector<ProductPoint> reference_path(const Problem& p, const OptimizerConfig& c, std::size_t iters) {
    std::vector<oracle::ExplicitGamma> gam;
    for (const auto& s : p.shapes) {
        gam.emplace_back(s, c.varsigma);
    }
    std::vector<ProductPoint> path{p.x0};
    ProductPoint x = p.x0;
    ProductPoint m;
    for (std::size_t k = 0; k < iters; ++k) {
        const ProductPoint g = p.eval_grad(x);
        const double mu = c.momentum_mode == MomentumMode::None
                              ? 0.0
                              : c.mu_max / std::pow(static_cast<double>(k + 1), c.beta);
        if (k == 0) {
            m = g;
        } else {
            std::vector<Matrix> mb;
            for (std::size_t b = 0; b < g.num_blocks(); ++b) {
                mb.push_back(mu * m[b] + (1 - mu) * g[b]);
            }
            m = ProductPoint(mb);
        }
        std::vector<Matrix> next;
        for (std::size_t b = 0; b < g.num_blocks(); ++b) {
            const auto& s = p.shapes[b];
            const Matrix& acc = c.momentum_mode == MomentumMode::M1 ? m[b] : g[b];
            const Matrix& dir = c.momentum_mode == MomentumMode::None ? g[b] : m[b];
            gam[b].add(acc);
            const Matrix z = oracle::unvec(oracle::inv_sqrtm(gam[b].full()) * oracle::vec(dir), s.rows, s.cols);
            const Matrix step = s.geometry == GeometryTag::Muon ? Matrix(oracle::nuclear(z) * oracle::polar(z)) : z;
            next.push_back(x[b] - c.eta * step);
        }
        x = ProductPoint(next);
        path.push_back(x);
    }
    return path;
}

} // namespace

TEST_CASE("mu_schedule examples") {
    OptimizerConfig c;
    c.momentum_mode = MomentumMode::M1;
    c.mu_max = 0.9;
    CHECK(mu_schedule(5, c) == 0.9);
    c.beta = 1.0;
    CHECK(mu_schedule(8, c) == doctest::Approx(0.1));
    c.momentum_mode = MomentumMode::None;
    for (std::size_t k = 0; k < 10; ++k) {
        CHECK(mu_schedule(k, c) == 0.0);
    }
}

TEST_CASE("config validation") {
    OptimizerConfig c;
    c.mu_max = 1.0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c.mu_max = 0.5;
    c.eta = 0.0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c.eta = 1.0;
    c.varsigma = -1.0;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    c.varsigma = 1.0;
    c.beta = -0.1;
    CHECK_THROWS_AS(c.validate(), InvalidConfig);
    for (auto m : {MomentumMode::None, MomentumMode::M1, MomentumMode::M2}) {
        CHECK(parse_momentum_mode(to_string(m)) == m);
    }
}

TEST_CASE("single AdaNorm step") {
    const std::vector<BlockShape> shapes{{2, 1, GeometryTag::AdaNorm}};
    const ProductPoint x0({col({0.3, -0.2})});
    OptimizerConfig c;
    const auto r = adprec_step(x0, ProductPoint({col({1, 0})}), init_states(shapes, 1.0), {}, c, 0);
    CHECK(std::get<ScalarState>(r.states[0].rep).gamma == doctest::Approx(1.5));
    CHECK(r.z[0](0, 0) == doctest::Approx(1 / std::sqrt(1.5)));
    CHECK(r.x_next[0](0, 0) == doctest::Approx(0.3 - 0.8164965809277260));
    CHECK(r.x_next[0](1, 0) == -0.2);
}

TEST_CASE("zero gradient leaves iterate and state unchanged") {
    const std::vector<BlockShape> shapes{{2, 1, GeometryTag::FullAdaGrad}, {2, 3, GeometryTag::Shampoo},
                                         {3, 2, GeometryTag::Muon}};
    auto rng = oracle::rng_for(51);
    std::vector<Matrix> xb;
    for (const auto& s : shapes) {
        xb.push_back(oracle::gaussian(s.rows, s.cols, rng));
    }
    const ProductPoint x(xb);
    const auto states = init_states(shapes, 1.0);
    const auto r = adprec_step(x, ProductPoint::zeros(shapes), states, {}, OptimizerConfig{}, 0);
    CHECK(r.x_next.flatten() == x.flatten());
    CHECK(r.record.z_dual_norm_sq == 0.0);
    for (std::size_t b = 0; b < shapes.size(); ++b) {
        CHECK(state_spectrum(r.states[b]) == state_spectrum(states[b]));
    }
}

TEST_CASE("run_trajectory examples") {
    const std::vector<BlockShape> shapes{{1, 1, GeometryTag::AdaNorm}};
    const auto p = make_quadratic(shapes, linalg::SymMatrix::identity(1), Vector::Zero(1), ProductPoint({col({1})}));
    OptimizerConfig c;
    c.max_iters = 0;
    CHECK(run_trajectory(p, NoiseModel{}, c).records.empty());
    c.max_iters = 1;
    const auto t = run_trajectory(p, NoiseModel{}, c);
    REQUIRE(t.records.size() == 1);
    CHECK(t.final_point[0](0, 0) == doctest::Approx(1 - std::sqrt(0.5)));
    CHECK(t.records[0].f_value == doctest::Approx(0.5));
    CHECK(t.records[0].gtilde_dual_norm == 1.0);
}

TEST_CASE("determinism: same seed gives identical records") {
    const auto p = mixed_quadratic(1);
    auto c = config(MomentumMode::M2, 0.5, 50);
    const auto a = run_trajectory(p, noisy(), c);
    const auto b = run_trajectory(p, noisy(), c);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        for (const auto& f : record_fields()) {
            CHECK(a.records[k].*f.member == b.records[k].*f.member);
        }
    }
    c.seed = 12;
    const auto d = run_trajectory(p, noisy(), c);
    CHECK(d.final_point.flatten() != a.final_point.flatten());
}

TEST_CASE("property: trajectories match the explicit reference iteration") {
    for (auto mode : {MomentumMode::None, MomentumMode::M1, MomentumMode::M2}) {
        const auto p = mixed_quadratic(2);
        auto c = config(mode, mode == MomentumMode::None ? 0.0 : 0.6, 30);
        c.beta = 0.3;
        const auto t = run_trajectory(p, NoiseModel{}, c);
        const auto ref = reference_path(p, c, 30);
        INFO(to_string(mode));
        CHECK(oracle::rel_err(t.final_point.flatten(), ref.back().flatten()) < 1e-8);
    }
}

TEST_CASE("M1 with mu_max = 0 is bit-identical to no momentum") {
    const auto p = mixed_quadratic(3);
    const auto a = run_trajectory(p, noisy(), config(MomentumMode::None, 0.0, 100));
    const auto b = run_trajectory(p, noisy(), config(MomentumMode::M1, 0.0, 100));
    CHECK(a.final_point.flatten() == b.final_point.flatten());
    for (std::size_t k = 0; k < a.records.size(); ++k) {
        CHECK(a.records[k].trace_sqrt_total == b.records[k].trace_sqrt_total);
        CHECK(a.records[k].delta_k == b.records[k].delta_k);
    }
}

TEST_CASE("momentum recursion") {
    const std::vector<BlockShape> shapes{{2, 1, GeometryTag::AdaNorm}};
    OptimizerConfig c;
    c.momentum_mode = MomentumMode::M1;
    c.mu_max = 0.5;
    const ProductPoint x({col({0, 0})});
    const ProductPoint g0({col({1, 2})});
    const ProductPoint g1({col({-3, 4})});
    const auto s0 = adprec_step(x, g0, init_states(shapes, 1.0), {}, c, 0);
    CHECK(s0.momentum.m.flatten() == g0.flatten());
    const auto s1 = adprec_step(s0.x_next, g1, s0.states, s0.momentum, c, 1);
    CHECK(s1.momentum.m.flatten() == (0.5 * g0.flatten() + 0.5 * g1.flatten()));

    c.mu_max = 0.99;
    const auto t0 = adprec_step(x, g0, init_states(shapes, 1.0), {}, c, 0);
    CHECK(t0.momentum.m.flatten() == g0.flatten());
}

TEST_CASE("property: per-iteration invariants across modes") {
    for (auto mode : {MomentumMode::None, MomentumMode::M1, MomentumMode::M2}) {
        const auto p = mixed_quadratic(4);
        auto c = config(mode, mode == MomentumMode::None ? 0.0 : 0.7, 200);
        NoiseModel n;
        n.kind = NoiseKind::AdditivePlusMultiplicative;
        n.sigma = {0.5};
        n.alpha = 1.0;
        n.omega = 0.1;

        std::mt19937_64 rng(c.seed);
        auto states = init_states(p.shapes, c.varsigma);
        MomentumState mom;
        ProductPoint x = p.x0;
        ProductPoint z = ProductPoint::zeros(p.shapes);
        double prev_trace = 0.0;
        const auto tags = geometry_tags(p.shapes);
        for (std::size_t k = 0; k < c.max_iters; ++k) {
            const auto g = sample_gradient(p, n, x, p.eval_grad(x), k, rng, z);
            const auto r = adprec_step(x, g, states, mom, c, k);
            INFO(to_string(mode), " k=", k);
            CHECK(r.record.trace_sqrt_total >= prev_trace);
            prev_trace = r.record.trace_sqrt_total;
            for (const auto& st : r.states) {
                CHECK(satisfies_floor(st));
            }
            const double step = primal_product_norm(axpy(r.x_next, -1.0, x), tags);
            CHECK(oracle::rel_err(step, c.eta * std::sqrt(r.record.z_dual_norm_sq)) < 1e-10);
            CHECK(oracle::rel_err(r.record.step_dual_norm, step) < 1e-12);
            for (std::size_t b = 0; b < tags.size(); ++b) {
                if (r.z[b].norm() > 0) {
                    CHECK(block_primal_norm(tags[b], geom_selector(tags[b], r.z[b])) ==
                          doctest::Approx(1.0).epsilon(1e-10));
                }
            }
            if (mode != MomentumMode::M2) {
                CHECK(r.record.resid_ineq1 <= 1e-8);
                CHECK(r.record.resid_ineq2 <= 1e-8);
            }
            x = r.x_next;
            states = r.states;
            mom = r.momentum;
            z = r.z;
        }
    }
}

TEST_CASE("delta_k equals the log-det growth of the explicit preconditioner") {
    const auto p = mixed_quadratic(5);
    const auto c = config(MomentumMode::None, 0.0, 20);
    const auto t = run_trajectory(p, NoiseModel{}, c);
    std::vector<oracle::ExplicitGamma> gam;
    for (const auto& s : p.shapes) {
        gam.emplace_back(s, c.varsigma);
    }
    const auto path = reference_path(p, c, 20);
    for (std::size_t k = 0; k < 20; ++k) {
        const auto g = p.eval_grad(path[k]);
        double logdet = 0.0;
        double trsqrt = 0.0;
        for (std::size_t b = 0; b < gam.size(); ++b) {
            gam[b].add(g[b]);
            logdet += oracle::logdet(gam[b].full());
            trsqrt += oracle::sqrtm(gam[b].full()).trace();
        }
        CHECK(std::abs(t.records[k].delta_k - logdet) < 1e-8 * std::max(1.0, logdet));
        CHECK(oracle::rel_err(t.records[k].trace_sqrt_total, trsqrt) < 1e-9);
    }
}

TEST_CASE("replicates") {
    const auto p = mixed_quadratic(6);
    const auto c = config(MomentumMode::None, 0.0, 60);

    const auto one = run_replicates(p, noisy(), c, 1);
    const auto single = run_trajectory(p, noisy(), c);
    for (std::size_t k = 0; k < 60; ++k) {
        CHECK(one.mean[k].grad_dual_norm == single.records[k].grad_dual_norm);
    }

    const auto det = run_replicates(p, NoiseModel{}, c, 4);
    for (std::size_t r = 1; r < 4; ++r) {
        CHECK(det.replicates[r].final_point.flatten() == det.replicates[0].final_point.flatten());
    }
    for (std::size_t k = 0; k < 60; ++k) {
        CHECK(det.grad_norm_se[k] == doctest::Approx(0.0));
        if (k > 0) {
            CHECK(det.min_mean_grad[k] <= det.min_mean_grad[k - 1]);
        }
    }

    const auto many = run_replicates(p, noisy(), c, 8);
    for (std::size_t r = 0; r < 8; ++r) {
        auto cr = c;
        cr.seed = c.seed + r;
        CHECK(many.replicates[r].final_point.flatten() == run_trajectory(p, noisy(), cr).final_point.flatten());
    }
}

TEST_CASE("replicate averaging reduces sample variance") {
    ProblemSpec s;
    s.blocks = {{6, 1, GeometryTag::DiagAdaGrad}};
    s.hessian = "identity";
    s.lmax = 1e-6;
    s.b_scale = 1;
    const auto p = make_problem(s);
    NoiseModel n;
    n.kind = NoiseKind::AdditiveDecaying;
    n.sigma = {1.0};
    n.alpha = 0.01;
    auto c = config(MomentumMode::None, 0.0, 400);
    const auto sum = run_replicates(p, n, c, 8);
    const auto variance = [](const std::vector<IterationRecord>& recs) {
        double m = 0.0;
        for (const auto& r : recs) {
            m += r.gtilde_dual_norm - r.grad_dual_norm;
        }
        m /= static_cast<double>(recs.size());
        double v = 0.0;
        for (const auto& r : recs) {
            const double d = r.gtilde_dual_norm - r.grad_dual_norm - m;
            v += d * d;
        }
        return v / static_cast<double>(recs.size() - 1);
    };
    const double avg = variance(sum.mean);
    for (const auto& rep : sum.replicates) {
        CHECK(avg < variance(rep.records));
    }
}

TEST_CASE("parallel replicates are bit-identical to the serial reference") {
    const auto p = mixed_quadratic(7);
    const auto c = config(MomentumMode::M1, 0.5, 80);
    for (const char* threads : {"1", "3"}) {
        setenv("ADPREC_THREADS", threads, 1);
        CHECK(thread_cap() == std::atoi(threads));
        const auto par = run_replicates(p, noisy(), c, 6);
        const auto ser = run_replicates_serial(p, noisy(), c, 6);
        for (std::size_t k = 0; k < par.mean.size(); ++k) {
            for (const auto& f : record_fields()) {
                const double a = par.mean[k].*f.member;
                const double b = ser.mean[k].*f.member;
                CHECK((a == b || (std::isnan(a) && std::isnan(b))));
            }
        }
    }
    unsetenv("ADPREC_THREADS");
}

TEST_CASE("non-finite iterates stop the run with an error status") {
    const std::vector<BlockShape> shapes{{1, 1, GeometryTag::AdaNorm}};
    Problem p = make_quadratic(shapes, linalg::SymMatrix::identity(1), Vector::Zero(1), ProductPoint({col({1})}));
    p.grad = [](const ProductPoint& x) {
        return ProductPoint({Matrix::Constant(1, 1, x[0](0, 0) < 0 ? std::nan("") : 1.0)});
    };
    OptimizerConfig c;
    c.eta = 0.8;
    c.max_iters = 50;
    const auto t = run_trajectory(p, NoiseModel{}, c);
    CHECK(t.status != RunStatus::Ok);
    CHECK(t.records.size() < 50);
    CHECK_FALSE(t.message.empty());
}

TEST_CASE("objective is never consulted by the update") {
    const auto p = mixed_quadratic(8);
    Problem q = p;
    q.f = [](const ProductPoint&) { return 1e300; };
    auto c = config(MomentumMode::M2, 0.4, 40);
    CHECK(run_trajectory(p, noisy(), c).final_point.flatten() == run_trajectory(q, noisy(), c).final_point.flatten());
    c.evaluate_f = false;
    const auto t = run_trajectory(p, noisy(), c);
    CHECK(std::isnan(t.records[0].f_value));
}

TEST_CASE("small-eta check") {
    OptimizerConfig c;
    c.momentum_mode = MomentumMode::M2;
    c.mu_max = 0.5;
    c.eta = std::sqrt(1.0 / 12.0) * 0.999;
    CHECK(small_eta_holds(c, 1.0) == true);
    c.eta = std::sqrt(1.0 / 12.0) * 1.001;
    CHECK(small_eta_holds(c, 1.0) == false);
    CHECK_FALSE(small_eta_holds(c, std::nullopt).has_value());
}
