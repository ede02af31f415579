#ifndef cqrrpt_verify_hh
#define cqrrpt_verify_hh

#include <cstdint>
#include <string>
#include <vector>

namespace cqrrpt {

// =============================================================================
/// The acceptance suite: every check the library promises, each runnable on
/// its own. Checks are keyed by short ids (thm2.1, thm2.2, cor3.1, stability,
/// rank, pivots-low, pivots-high, rrqr-inherit, maxnorm, pivot-equiv, flops,
/// sketch-struct).
///
struct VerifyOptions {
    uint64_t seed = 0;        // base seed; every check derives its streams from it
    double trial_scale = 1.0; // multiplies per-check trial counts
    std::string only;         // run a single check by id (empty = all)
    bool quiet = false;       // suppress per-check progress on stdout
};

struct CriterionResult {
    std::string id;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    std::string detail; // measured slacks and counts, machine-readable key=value
};

std::vector<CriterionResult> run_verification(const VerifyOptions &opts);

/// Pretty-prints one pass/fail line per criterion; returns the number of
/// failures.
int report_verification(const std::vector<CriterionResult> &results);

} // namespace cqrrpt

#endif
