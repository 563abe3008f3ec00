#pragma once

#include <span>
#include <vector>

namespace hmamba {

struct Metrics {
  double hr{0.0};
  double ndcg{0.0};
  double mrr{0.0};
  int k{0};
  int n_users{0};
};

/// Top-K ranking metrics for leave-one-out evaluation. Each ranking is a
/// (prefix of a) full-catalog ordering that must contain the user's
/// target; a missing target signals a broken protocol and throws. With
/// the target at 1-based rank r:
///   HR = 1[r<=K], NDCG = 1[r<=K]/log2(r+1), MRR = 1[r<=K]/r,
/// averaged over users. Per user these satisfy MRR <= NDCG <= HR.
Metrics compute_metrics(std::span<const std::vector<int>> rankings,
                        std::span<const int> targets, int k);

}  // namespace hmamba
