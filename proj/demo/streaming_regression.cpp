// Streams a two-regime regression problem through a sliding window and prints
// how well each learner still fits the first regime after the switch.

#include <cstdio>
#include <vector>

#include "rlsol/rlsol.hpp"

int main() {
  using namespace rlsol;

  DriftScenario sc;
  sc.input_dim = 6;
  sc.output_dim = 1;
  sc.block_size = 4;
  sc.noise_sigma = 0.05;
  sc.seed = 11;
  sc.regimes = {{Matrix{{0.8, -0.4, 0.3, 0.0, 0.5, -0.2}}, 40}, {Matrix{{0.2, 0.3, -0.5, 0.4, 0.1, 0.6}}, 40}};

  const std::vector<LearnerSpec> learners = {
      {"rls_precond", LearnerKind::rls_precond, {0.2, 5, 0.0}, 1.0, 1.0},
      {"plain_bgd", LearnerKind::plain_bgd, {0.02, 5, 0.0}, 1.0, 1e-3},
      {"ema(0.5)", LearnerKind::ema, {0.02, 5, 0.0}, 1.0, 1e-3, 0.5},
  };

  const DriftStream stream = generate_stream(sc);
  std::vector<RunReport> reports;
  for (const auto& l : learners) reports.push_back(run_learner(l, sc, stream, {8, false}));

  std::printf("block  regime  ");
  for (const auto& r : reports) std::printf("%14s adapt/retain      ", r.learner.c_str());
  std::printf("\n");
  for (std::size_t t = 9; t < stream.blocks.size(); t += 10) {
    std::printf("%5zu  %6zu  ", t + 1, stream.regime_of_block[t] + 1);
    for (const auto& r : reports) std::printf("      %10.4f / %-10.4f", r.adaptation_error[t], r.retention_error[0][t]);
    std::printf("\n");
  }
  for (const auto& r : reports)
    std::printf("%-12s forgetting gap at stream end: %.4f\n", r.learner.c_str(), r.forgetting_gap.back());
  return 0;
}
