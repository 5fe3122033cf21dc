#include "adprec/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace adprec {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) {
        throw InvalidConfig(where + " must be an object");
    }
    for (const auto& [key, _] : obj.items()) {
        if (!allowed.contains(key)) {
            throw InvalidConfig("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read(const json& obj, const char* key, T& out) {
    if (auto it = obj.find(key); it != obj.end()) {
        out = it->get<T>();
    }
}

void read_finite(const json& obj, const char* key, double& out) {
    read(obj, key, out);
    if (!std::isfinite(out)) {
        throw InvalidConfig(std::string("'") + key + "' must be finite");
    }
}

BlockShape parse_block(const json& j) {
    reject_unknown(j, {"rows", "cols", "geometry"}, "block");
    BlockShape s{j.at("rows").get<Eigen::Index>(), 1, parse_geometry(j.at("geometry").get<std::string>())};
    read(j, "cols", s.cols);
    s.validate();
    return s;
}

ProblemSpec parse_problem(const json& j) {
    reject_unknown(j,
                   {"kind", "blocks", "seed", "hessian", "condition", "lmax", "b_scale", "x0_scale", "design",
                    "design_rows", "trig_c", "samples", "reg", "mf_rows", "mf_cols", "mf_rank", "target_scale",
                    "mf_geometry"},
                   "problem");
    ProblemSpec p;
    read(j, "kind", p.kind);
    if (auto it = j.find("blocks"); it != j.end()) {
        for (const auto& b : *it) {
            p.blocks.push_back(parse_block(b));
        }
    }
    read(j, "seed", p.seed);
    read(j, "hessian", p.hessian);
    read_finite(j, "condition", p.condition);
    read_finite(j, "lmax", p.lmax);
    read_finite(j, "b_scale", p.b_scale);
    read_finite(j, "x0_scale", p.x0_scale);
    read(j, "design", p.design);
    read(j, "design_rows", p.design_rows);
    read_finite(j, "trig_c", p.trig_c);
    read(j, "samples", p.samples);
    read_finite(j, "reg", p.reg);
    read(j, "mf_rows", p.mf_rows);
    read(j, "mf_cols", p.mf_cols);
    read(j, "mf_rank", p.mf_rank);
    read_finite(j, "target_scale", p.target_scale);
    if (auto it = j.find("mf_geometry"); it != j.end()) {
        p.mf_geometry = parse_geometry(it->get<std::string>());
    }
    if (p.kind != "matfact" && p.blocks.empty()) {
        throw InvalidConfig("problem needs at least one block");
    }
    return p;
}

OptimizerConfig parse_optimizer(const json& j) {
    reject_unknown(j, {"eta", "varsigma", "momentum", "mu_max", "beta", "iters", "seed", "evaluate_f"}, "optimizer");
    OptimizerConfig c;
    read_finite(j, "eta", c.eta);
    read_finite(j, "varsigma", c.varsigma);
    if (auto it = j.find("momentum"); it != j.end()) {
        c.momentum_mode = parse_momentum_mode(it->get<std::string>());
    }
    read_finite(j, "mu_max", c.mu_max);
    read_finite(j, "beta", c.beta);
    read(j, "iters", c.max_iters);
    read(j, "seed", c.seed);
    read(j, "evaluate_f", c.evaluate_f);
    c.validate();
    return c;
}

NoiseModel parse_noise(const json& j) {
    reject_unknown(j, {"kind", "sigma", "alpha", "omega", "batch"}, "noise");
    NoiseModel n;
    if (auto it = j.find("kind"); it != j.end()) {
        n.kind = parse_noise_kind(it->get<std::string>());
    }
    if (auto it = j.find("sigma"); it != j.end()) {
        n.sigma = it->is_array() ? it->get<std::vector<double>>() : std::vector<double>{it->get<double>()};
    }
    read_finite(j, "alpha", n.alpha);
    read_finite(j, "omega", n.omega);
    read(j, "batch", n.batch);
    n.validate();
    return n;
}

json to_json(const BlockShape& s) {
    return json{{"rows", s.rows}, {"cols", s.cols}, {"geometry", std::string(to_string(s.geometry))}};
}

} // namespace

std::string ExperimentConfig::canonical_json() const {
    json blocks = json::array();
    for (const auto& b : problem.blocks) {
        blocks.push_back(to_json(b));
    }
    const json j{
        {"schema_version", kSchemaVersion},
        {"problem",
         {{"kind", problem.kind},
          {"blocks", blocks},
          {"seed", problem.seed},
          {"hessian", problem.hessian},
          {"condition", problem.condition},
          {"lmax", problem.lmax},
          {"b_scale", problem.b_scale},
          {"x0_scale", problem.x0_scale},
          {"design", problem.design},
          {"design_rows", problem.design_rows},
          {"trig_c", problem.trig_c},
          {"samples", problem.samples},
          {"reg", problem.reg},
          {"mf_rows", problem.mf_rows},
          {"mf_cols", problem.mf_cols},
          {"mf_rank", problem.mf_rank},
          {"target_scale", problem.target_scale},
          {"mf_geometry", std::string(to_string(problem.mf_geometry))}}},
        {"optimizer",
         {{"eta", optimizer.eta},
          {"varsigma", optimizer.varsigma},
          {"momentum", std::string(to_string(optimizer.momentum_mode))},
          {"mu_max", optimizer.mu_max},
          {"beta", optimizer.beta},
          {"iters", optimizer.max_iters},
          {"seed", optimizer.seed},
          {"evaluate_f", optimizer.evaluate_f}}},
        {"noise",
         {{"kind", std::string(to_string(noise.kind))},
          {"sigma", noise.sigma},
          {"alpha", noise.alpha},
          {"omega", noise.omega},
          {"batch", noise.batch}}},
        {"replicates", replicates},
    };
    return j.dump();
}

std::string ExperimentConfig::digest() const {
    // FNV-1a over the canonical text.
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : canonical_json()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ExperimentConfig parse_config(const std::string& json_text) {
    try {
        const json j = json::parse(json_text);
        reject_unknown(j, {"schema_version", "problem", "optimizer", "noise", "replicates"}, "config");
        const int version = j.at("schema_version").get<int>();
        if (version != kSchemaVersion) {
            throw InvalidConfig("unsupported schema_version " + std::to_string(version));
        }
        ExperimentConfig c;
        c.problem = parse_problem(j.at("problem"));
        if (auto it = j.find("optimizer"); it != j.end()) {
            c.optimizer = parse_optimizer(*it);
        }
        if (auto it = j.find("noise"); it != j.end()) {
            c.noise = parse_noise(*it);
        }
        read(j, "replicates", c.replicates);
        if (c.replicates < 1) {
            throw InvalidConfig("replicates must be at least 1");
        }
        return c;
    } catch (const json::exception& e) {
        throw InvalidConfig(std::string("config: ") + e.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidConfig("cannot read config file '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace adprec
