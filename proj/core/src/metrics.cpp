#include "hmamba/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace hmamba {

Metrics compute_metrics(std::span<const std::vector<int>> rankings,
                        std::span<const int> targets, int k) {
  if (rankings.size() != targets.size()) {
    throw std::invalid_argument("compute_metrics: rankings/targets size mismatch");
  }
  if (rankings.empty()) {
    throw std::invalid_argument("compute_metrics: no users");
  }
  if (k < 1) throw std::invalid_argument("compute_metrics: K must be >= 1");

  Metrics m;
  m.k = k;
  m.n_users = static_cast<int>(rankings.size());
  for (std::size_t u = 0; u < rankings.size(); ++u) {
    long rank = -1;
    for (std::size_t i = 0; i < rankings[u].size(); ++i) {
      if (rankings[u][i] == targets[u]) {
        rank = static_cast<long>(i) + 1;
        break;
      }
    }
    if (rank < 0) {
      throw std::runtime_error("compute_metrics: target absent from candidate set (user index " +
                               std::to_string(u) + ")");
    }
    if (rank <= k) {
      m.hr += 1.0;
      m.ndcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      m.mrr += 1.0 / static_cast<double>(rank);
    }
  }
  m.hr /= m.n_users;
  m.ndcg /= m.n_users;
  m.mrr /= m.n_users;
  return m;
}

}  // namespace hmamba
