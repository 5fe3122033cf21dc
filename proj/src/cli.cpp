#include "adprec/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "adprec/audit.hpp"
#include "adprec/config.hpp"

namespace adprec {

namespace fs = std::filesystem;

std::string format_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

namespace {

const char* const kRecordHeader =
    "k,f_value,grad_dual_norm,gtilde_dual_norm,z_dual_norm_sq,trace_sqrt_total,delta_k,theta_k,bound_curve,"
    "resid_ineq1,resid_ineq2,step_dual_norm";

std::string records_csv(const std::vector<IterationRecord>& recs, const Envelope& env) {
    std::ostringstream out;
    out << kRecordHeader << '\n';
    for (const auto& r : recs) {
        const double theta = r.k < env.theta.size() ? env.theta[r.k] : std::nan("");
        const double bound = r.k < env.bound.size() ? env.bound[r.k] : std::nan("");
        out << r.k;
        for (double v : {r.f_value, r.grad_dual_norm, r.gtilde_dual_norm, r.z_dual_norm_sq, r.trace_sqrt_total,
                         r.delta_k, theta, bound, r.resid_ineq1, r.resid_ineq2, r.step_dual_norm}) {
            out << ',' << format_double(v);
        }
        out << '\n';
    }
    return out.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write '" + path.string() + "'");
    }
    f << text;
}

nlohmann::ordered_json json_number(double x) {
    return std::isfinite(x) ? nlohmann::ordered_json(x) : nlohmann::ordered_json(nullptr);
}

const char* status_text(RunStatus s) {
    switch (s) {
    case RunStatus::Ok: return "ok";
    case RunStatus::NonFinite: return "non-finite iterate";
    case RunStatus::NumericalError: return "numerical error";
    }
    return "?";
}

} // namespace

int cmd_run(const std::string& config_path, const std::string& out_dir) {
    ExperimentConfig cfg;
    Problem problem;
    try {
        cfg = load_config(config_path);
        problem = make_problem(cfg.problem);
        check_noise_compatible(problem, cfg.noise);
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    const auto t0 = std::chrono::steady_clock::now();
    const ReplicateSummary runs = run_replicates(problem, cfg.noise, cfg.optimizer, cfg.replicates);
    const Envelope env = envelope(problem, cfg.noise, cfg.optimizer, cfg.optimizer.max_iters);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    nlohmann::ordered_json summary;
    summary["status"] = "ok";
    summary["config_digest"] = cfg.digest();
    summary["seed"] = cfg.optimizer.seed;
    summary["replicates"] = cfg.replicates;
    summary["iterations"] = cfg.optimizer.max_iters;
    summary["final_min_grad"] = json_number(runs.min_mean_grad.empty() ? std::nan("") : runs.min_mean_grad.back());
    summary["lipschitz"] = problem.lipschitz ? json_number(*problem.lipschitz) : nullptr;
    summary["f_low"] = json_number(problem.f_low);
    if (cfg.optimizer.momentum_mode == MomentumMode::M2) {
        const auto small = small_eta_holds(cfg.optimizer, problem.lipschitz);
        summary["small_eta"] = small ? (*small ? "holds" : "fails") : "unverified (Lipschitz constant unknown)";
    }
    summary["wall_time_s"] = wall;

    try {
        fs::create_directories(out_dir);
        if (!runs.all_ok()) {
            for (std::size_t r = 0; r < runs.replicates.size(); ++r) {
                const auto& rep = runs.replicates[r];
                if (rep.status != RunStatus::Ok) {
                    summary["status"] = status_text(rep.status);
                    summary["message"] = "replicate " + std::to_string(r) + ": " + rep.message;
                    break;
                }
            }
            write_file(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
            std::cerr << "numerical failure: " << summary["message"].get<std::string>() << '\n';
            return kExitNumerical;
        }
        write_file(fs::path(out_dir) / "records.csv", records_csv(runs.mean, env));
        for (std::size_t r = 0; r < runs.replicates.size(); ++r) {
            write_file(fs::path(out_dir) / ("replicate_" + std::to_string(r) + ".csv"),
                       records_csv(runs.replicates[r].records, env));
        }
        write_file(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}

int cmd_audit(const std::string& suite, std::size_t trials, std::uint64_t seed, const std::string& out_dir) {
    const auto& names = suite_names();
    if (std::find(names.begin(), names.end(), suite) == names.end()) {
        std::cerr << "unknown suite '" << suite << "'\n";
        return kExitConfig;
    }
    std::vector<AuditReport> reports;
    try {
        reports = run_suite(suite, trials, seed);
    } catch (const InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
    bool all_pass = true;
    for (const auto& r : reports) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.check_name << " worst=" << format_double(r.worst_violation)
                  << '\n';
        all_pass = all_pass && r.pass;
    }
    try {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "audit_report.json", report_to_json(reports) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kExitConfig;
    }
    return all_pass ? kExitOk : kExitAuditFailure;
}

std::vector<double> parse_alpha_list(const std::string& text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find(',', pos);
        if (end == std::string::npos) {
            end = text.size();
        }
        std::string item = text.substr(pos, end - pos);
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        double v = 0.0;
        const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || !(v > 0.0) ||
            !std::isfinite(v)) {
            throw InvalidConfig("invalid alpha '" + item + "'");
        }
        out.push_back(v);
        pos = end + 1;
    }
    return out;
}

int cmd_sweep(const std::string& config_path, const std::vector<double>& alphas, const std::string& out_dir) {
    ExperimentConfig cfg;
    Problem problem;
    try {
        cfg = load_config(config_path);
        problem = make_problem(cfg.problem);
        check_noise_compatible(problem, cfg.noise);
        if (!problem.lipschitz) {
            throw InvalidConfig("sweep requires a problem with a known Lipschitz constant");
        }
    } catch (const Error& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    RateAudit audit;
    if (!alphas.empty()) {
        try {
            audit = audit_rate_regimes(problem, cfg.noise, cfg.optimizer, alphas, cfg.replicates);
        } catch (const InvalidConfig& e) {
            std::cerr << "config error: " << e.what() << '\n';
            return kExitConfig;
        }
    }
    std::ostringstream csv;
    csv << "alpha,slope,exponent,bound_dominates\n";
    bool numerical_failure = false;
    for (const auto& p : audit.points) {
        csv << format_double(p.alpha) << ',' << format_double(p.slope) << ',' << format_double(p.exponent) << ','
            << (p.bound_dominates ? "true" : "false") << '\n';
        numerical_failure = numerical_failure || std::isinf(p.worst_bound_slack);
    }
    try {
        fs::create_directories(out_dir);
        write_file(fs::path(out_dir) / "sweep.csv", csv.str());
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kExitConfig;
    }
    return numerical_failure ? kExitNumerical : kExitOk;
}

int cli_main(int argc, char** argv) {
    CLI::App app{"Adaptively preconditioned stochastic gradient methods: runs, audits and rate sweeps"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    auto* run = app.add_subcommand("run", "run replicated trajectories from a JSON config");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory")->required();

    std::string suite;
    std::size_t trials = 1000;
    std::uint64_t seed = 0;
    auto* audit = app.add_subcommand("audit", "run an audit suite");
    audit->add_option("--suite", suite, "trace|identities|potentials|bounds|momentum|rates|all")->required();
    audit->add_option("--trials", trials, "random trials per check");
    audit->add_option("--seed", seed, "base seed");
    audit->add_option("--out", out_dir, "output directory")->required();

    std::string alpha_text;
    auto* sweep = app.add_subcommand("sweep", "fit rate slopes over a list of noise decay exponents");
    sweep->add_option("--config", config_path, "base config file")->required();
    sweep->add_option("--alphas", alpha_text, "comma-separated list")->required();
    sweep->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (*run) {
            return cmd_run(config_path, out_dir);
        }
        if (*audit) {
            return cmd_audit(suite, trials, seed, out_dir);
        }
        return cmd_sweep(config_path, parse_alpha_list(alpha_text), out_dir);
    } catch (const InvalidConfig& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    }
}

} // namespace adprec
