#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace capo {

/// Result of one closed-form-vs-direct cross-check.
struct OracleCheck {
    std::string name;
    bool pass = false;
    double max_err = 0.0;
    double tol = 0.0;
    int instances = 0;
};

/// Runs every closed-form oracle against its direct recomputation:
/// single-coordinate weight deltas, full-batch weights, the fixed-step and
/// variable-step one-step improvement identities and lower bounds, the
/// performance-difference identity, and the advantage/visitation bounds.
/// All instance counts and tolerances are fixed internally.
std::vector<OracleCheck> run_oracle_checks(std::uint64_t seed);

}  // namespace capo
