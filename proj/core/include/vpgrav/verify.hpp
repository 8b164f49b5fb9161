#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vpgrav/config.hpp"
#include "vpgrav/dynamic.hpp"

namespace vpgrav {

enum class Severity { hard, soft };

struct CheckSpec {
    std::string id;
    std::string anchor;  // stable name of the inequality or property being tested
    int samples = 0;
    std::uint64_t seed = 0;
    double tol = 0.0;
    Severity severity = Severity::hard;
};

enum class CheckOutcome { pass, fail, warn, unchecked };

struct CheckResult {
    CheckSpec spec;
    int samples_run = 0;
    double worst_margin = 0.0;  // >= 0 passes; reduced by exact min over samples
    CheckOutcome outcome = CheckOutcome::unchecked;
    double wall_seconds = 0.0;  // excluded from the deterministic text
    std::string note;
};

struct VerifyReport {
    std::vector<CheckResult> checks;

    bool hard_failures() const;
    const CheckResult* find(const std::string& id) const;
    /// Deterministic record block: one line per check with id, anchor,
    /// samples, margin, status. Wall times only with timings = true.
    std::string to_text(bool timings = false) const;
};

/// Execute the full inequality battery on the configured scenario: the exact
/// transport/exit oracles, the solver bound monitors, the dynamic decay
/// certification, and the soft fitted-constant diagnostics. Hard checks are
/// exact inequalities with explicit constants; checks whose hypotheses fail
/// report unchecked rather than pass.
VerifyReport run_battery(const RunConfig& cfg);

}  // namespace vpgrav
