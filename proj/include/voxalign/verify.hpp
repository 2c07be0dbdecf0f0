#pragma once

#include <ostream>

namespace voxalign {

struct VerifyOptions {
    // Deliberately corrupts the relu backward rule so the gradient checks
    // must fail; proves the harness actually detects bad gradients.
    bool inject_grad_fault = false;
};

// Fast numerical self-audit: gradient fidelity, loss closed forms, modality
// symmetry, optimizer arithmetic, metrics oracle, storage round-trip, and
// construction/training determinism. Streams one "check <name>: ok" line
// per check; the first failure raises VerifyError.
void run_verify_suite(std::ostream& out, const VerifyOptions& options);

}  // namespace voxalign
