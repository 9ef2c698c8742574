#pragma once

// The frozen two-regime retention scenario. configs/canonical_two_regime.cfg
// carries the same text; a unit test keeps the two in sync.

namespace rlsol {

inline constexpr const char* kCanonicalConfig = R"(# Canonical two-regime retention scenario.
# Both regimes draw x ~ N(0, I); only the ground-truth map changes, by a
# perturbation of unit Frobenius norm.
kind = piecewise_linear_regression
input_dim = 16
output_dim = 1
block_size = 8
noise_sigma = 0.05
seed = 1000
eval_size = 256
window = 10
seeds = 50
iterations = 5

regimes = 2
regime.1.duration = 60
regime.1.truth = 0.2182 -0.2431 0.1368 0.3638 -0.4025 -0.2156 -0.1295 0.2194 -0.1007 0.1589 -0.3703 0.2150 -0.3611 -0.2838 0.2943 0.3457
regime.2.duration = 60
regime.2.truth = 0.1059 -0.2431 0.4106 0.0549 -0.1355 -0.2597 -0.4876 0.4947 0.0318 0.0013 -0.3125 -0.1157 -0.8681 0.0347 0.3187 0.1857

learners = rls_precond plain_bgd

learner.rls_precond.kind = rls_precond
learner.rls_precond.learning_rate = 0.2
learner.rls_precond.beta = 1
learner.rls_precond.delta = 1

learner.plain_bgd.kind = plain_bgd
learner.plain_bgd.learning_rate = 0.005
learner.plain_bgd.beta = 1
learner.plain_bgd.delta = 0.001
)";

}  // namespace rlsol
