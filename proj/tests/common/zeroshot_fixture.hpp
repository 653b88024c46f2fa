#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "condet/random.hpp"
#include "condet/zeroshot.hpp"

namespace zsfixture {

struct Fixture {
  std::vector<condet::TokenLogProbRecord> logprob;
  std::vector<condet::PerturbationRecord> perturbation;
  std::vector<int> labels;  // 1 = AI-like
};

// AI-like: logp in [-1.5, -0.05], rank 1 or 2, entropy in [0.1, 1.2], original
// text clearly more likely than its perturbations. Human-like: logp in
// [-7, -2], rank in [3, 60], entropy in [2, 5], perturbations about as likely
// as the original.
inline Fixture make(std::size_t per_class, std::uint64_t seed) {
  condet::Rng rng(seed);
  Fixture f;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const bool ai = i < per_class;
    condet::TokenLogProbRecord r;
    r.id = (ai ? "ai-" : "human-") + std::to_string(i);
    const std::size_t n = 5 + rng.index(40);
    for (std::size_t t = 0; t < n; ++t) {
      r.tokens.push_back("tok" + std::to_string(rng.index(1000)));
      r.logp.push_back(ai ? rng.uniform(-1.5, -0.05) : rng.uniform(-7.0, -2.0));
      r.rank.push_back(ai ? 1 + rng.index(2) : 3 + rng.index(58));
      r.entropy.push_back(ai ? rng.uniform(0.1, 1.2) : rng.uniform(2.0, 5.0));
    }
    condet::PerturbationRecord p;
    p.id = r.id;
    double total = 0.0;
    for (double lp : r.logp) total += lp;
    p.orig_logp_sum = total;
    const std::size_t k = 2 + rng.index(9);
    for (std::size_t j = 0; j < k; ++j) {
      const double drop = ai ? rng.uniform(3.0, 8.0) : rng.uniform(-1.0, 1.0) - 1.5;
      p.perturbed_logp_sums.push_back(total - drop);
    }
    f.logprob.push_back(std::move(r));
    f.perturbation.push_back(std::move(p));
    f.labels.push_back(ai ? 1 : 0);
  }
  return f;
}

}  // namespace zsfixture
