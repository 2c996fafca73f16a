#pragma once

#include <functional>
#include <string>
#include <vector>

#include "banet/losses.hpp"
#include "banet/tensor.hpp"

namespace banet::oracle {

struct OracleResult {
    std::string name;
    bool pass = false;
    std::string detail; // empty on pass, first mismatch otherwise
};

// Candidates under test. Defaults (empty function) check the production
// implementations; tests inject broken variants to prove the oracles bite.
using SobelFn = std::function<void(const Plane<double>&, Plane<double>&, Plane<double>&)>;
using DilateFn = std::function<Planef(const Planef&, int)>;

// Brute-force 3x3 cross-correlation with edge replication, compared at
// interior pixels to 1e-12; constant maps must come out exactly zero.
OracleResult sobel_oracle(const SobelFn& candidate = {}, std::uint64_t seed = 0x50be1,
                          int maps = 100);

// Direct Chebyshev window maximum on random binary masks up to 32x32, exact.
OracleResult dilation_oracle(const DilateFn& candidate = {}, std::uint64_t seed = 0xd11a7e,
                             int cases = 40);

// Adaptive kernel width rule against independent substitution, W = 50.
OracleResult kernel_size_oracle(std::uint64_t seed = 0x595e, int cases = 20);

// 2x2 -> 2x4 upsample must produce columns [0, 1/3, 2/3, 1]; identity resize
// must be bitwise.
OracleResult bilinear_oracle();

// Analytic values: BCE(t=1, p=1/2) = ln 2, the weighted composition identity,
// and a hand-built two-pixel refine fixture whose expected value bakes in the
// canonical margin/term weights, so perturbed weights fail here.
OracleResult loss_golden_oracle(const loss::LossWeights& w = {});

// Central finite differences against the analytic backward passes for bce,
// cos, mag, refine and the composed loss, in double, resampling inputs that
// sit near a kink (hinge edge, |dot| = 0, min/max ties, clamp range).
OracleResult fd_loss_oracle(std::uint64_t seed = 0xfd5eed, int trials = 3);

std::vector<OracleResult> oracle_suite();

bool all_pass(const std::vector<OracleResult>& rs);

// One line per result: "ok  name" or "FAIL name: detail".
std::string format_report(const std::vector<OracleResult>& rs);

} // namespace banet::oracle
