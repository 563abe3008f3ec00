#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hmamba/dataset.hpp"
#include "hmamba/metrics.hpp"
#include "hmamba/model.hpp"

namespace hmamba {

/// Gradients aligned with ModelState::params order.
using GradMap = std::vector<Tensor>;

struct OptimizerState {
  enum class Kind { Sgd, SgdInvT, Adam };
  Kind kind{Kind::Adam};
  double lr{1e-3};
  long t{0};  // step count, incremented by exactly 1 per step
  double beta1{0.9}, beta2{0.999}, eps{1e-8};
  std::vector<Tensor> m, v;  // Adam moments, sized on first step
};

OptimizerState::Kind optimizer_from_string(const std::string& s);
std::string to_string(OptimizerState::Kind k);

double global_grad_norm(const GradMap& grads);
void clip_gradients(GradMap& grads, double max_norm);

/// Applies one update. SGD-1/t uses an effective rate lr/t; Adam uses
/// bias-corrected moments. Throws std::runtime_error on non-finite
/// gradients, naming the parameter.
void optimizer_step(OptimizerState& opt, ModelState& state, const GradMap& grads);

struct TrainOptions {
  int epochs{50};
  int batch_size{128};
  double grad_clip{5.0};  // global-norm clip; <= 0 disables
  std::uint64_t seed{7};
  bool deterministic_timing{true};  // report wall_seconds = 0 in the log
  bool collect_hooks{false};        // track manifold residuals / NaN events
  long max_steps{-1};               // optional cap on optimizer steps
};

struct EpochReport {
  int epoch{0};
  double mean_loss{0.0};
  double grad_norm_mean{0.0};
  double wall_seconds{0.0};
  std::uint64_t seed{0};
};

struct TrainStats {
  double max_manifold_residual{0.0};
  long nonfinite_events{0};
  long steps{0};
};

/// One pass over all users in a seeded deterministic order. Sequences are
/// processed one at a time, single thread; gradients are averaged per
/// batch. Aborts with the offending batch index on a non-finite loss.
EpochReport train_epoch(ModelState& state, const SequenceDataset& data, OptimizerState& opt,
                        const TrainOptions& opts, int epoch_index,
                        TrainStats* stats = nullptr);

/// Fixed-format log line: epoch, mean_loss, grad_norm_mean, wall_seconds,
/// seed.
std::string format_epoch_report(const EpochReport& r);

/// Central differences (f(x+h) - f(x-h)) / 2h per parameter coordinate.
/// Independent of the tape; this is the gradient oracle.
GradMap finite_difference_grad(const ModelState& state,
                               const std::function<double(const ModelState&)>& f,
                               double h = 1e-5);

struct GradCheckGroup {
  std::string name;
  double max_err{0.0};  // |analytic - fd| / max(|analytic|, |fd|, 1e-3)
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;  // one entry per parameter group
  double threshold{1e-4};
  bool pass{false};
  std::string worst_group;
  double worst_err{0.0};
};

/// Runs backward against the finite-difference oracle on a fixed tiny
/// batch under the given variant config. Enforces desk-scale dimensions
/// (d <= 8, max_seq_len <= 8, vocab <= 32). inject_fault corrupts one
/// analytic gradient group to exercise the failure path.
GradCheckReport gradcheck(const ModelConfig& cfg, std::uint64_t seed,
                          bool inject_fault = false);

struct EvalOptions {
  std::vector<int> ks{10};
  bool use_test{true};  // false: validation split (input = train, target = val)
  int threads{1};
  std::vector<int> bucket_bounds;  // training-length bucket upper bounds
};

struct BucketMetrics {
  std::string label;
  Metrics metrics;
};

struct EvalResult {
  std::vector<Metrics> at_k;
  std::vector<BucketMetrics> buckets;  // at ks[0] when bucketing is requested
};

/// Full-catalog leave-one-out evaluation: every non-padding item is a
/// candidate except the user's input items (the target itself is never
/// excluded). Per-user evaluation may run on several threads; the
/// reduction is by user index and deterministic.
EvalResult evaluate(const ModelState& state, const SequenceDataset& data,
                    const EvalOptions& opts);

}  // namespace hmamba
