#pragma once

// JSON experiment configuration.
//
// {
//   "schema_version": 1,
//   "problem":   {"kind": "quadratic", "seed": 0,
//                 "blocks": [{"rows": 5, "cols": 1, "geometry": "AdaNorm"}], ...},
//   "optimizer": {"eta": 1.0, "varsigma": 1.0, "momentum": "None", "mu_max": 0.0,
//                 "beta": 0.0, "iters": 100, "seed": 0, "evaluate_f": true},
//   "noise":     {"kind": "Exact", "sigma": [0.0], "alpha": 1.0, "omega": 0.0, "batch": 1},
//   "replicates": 1
// }
//
// Unknown keys are rejected. Omitted keys take the defaults of the
// corresponding structs.

#include <string>

#include "adprec/optimizer.hpp"
#include "adprec/problems.hpp"

namespace adprec {

inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
    ProblemSpec problem;
    OptimizerConfig optimizer;
    NoiseModel noise;
    std::size_t replicates = 1;

    /// Canonical JSON of the effective configuration (defaults filled in).
    [[nodiscard]] std::string canonical_json() const;
    /// Stable 64-bit hex digest of canonical_json().
    [[nodiscard]] std::string digest() const;
};

/// Throws InvalidConfig on malformed JSON, schema violations or illegal values.
[[nodiscard]] ExperimentConfig parse_config(const std::string& json_text);
[[nodiscard]] ExperimentConfig load_config(const std::string& path);

} // namespace adprec
