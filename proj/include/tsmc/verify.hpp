#pragma once

#include <string>
#include <vector>

namespace tsmc {

struct PropertyResult {
    std::string name;
    bool passed;
    std::string detail;
};

struct VerifyOptions {
    bool quick = false;         // smaller instances / step counts for smoke tests
    bool inject_fault = false;  // test hook: flips a sign to prove suite sensitivity
};

// Deterministic cross-module invariant suite: mass conservation, KFE/KBE
// duals, closed-form vs ODE agreement, reversal round trips, alpha = 1
// exactness, tempering bias witnesses, weight identities, ESS bounds, and
// thread determinism.  Every property is seeded and tolerance-pinned.
std::vector<PropertyResult> run_verification_suite(const VerifyOptions& options = {});

}  // namespace tsmc
