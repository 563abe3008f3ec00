#include "hmamba/train.hpp"
#include "hmamba/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>
#include <thread>

#include "hmamba/rng.hpp"

namespace hmamba {

OptimizerState::Kind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerState::Kind::Sgd;
  if (s == "sgd1t") return OptimizerState::Kind::SgdInvT;
  if (s == "adam") return OptimizerState::Kind::Adam;
  throw std::invalid_argument("unknown optimizer '" + s + "' (expected sgd, sgd1t or adam)");
}

std::string to_string(OptimizerState::Kind k) {
  switch (k) {
    case OptimizerState::Kind::Sgd: return "sgd";
    case OptimizerState::Kind::SgdInvT: return "sgd1t";
    case OptimizerState::Kind::Adam: return "adam";
  }
  return "?";
}

double global_grad_norm(const GradMap& grads) {
  double s = 0.0;
  for (const Tensor& g : grads) {
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * g[i];
  }
  return std::sqrt(s);
}

void clip_gradients(GradMap& grads, double max_norm) {
  double n = global_grad_norm(grads);
  if (n <= max_norm || n == 0.0) return;
  double f = max_norm / n;
  for (Tensor& g : grads) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= f;
  }
}

void optimizer_step(OptimizerState& opt, ModelState& state, const GradMap& grads) {
  if (grads.size() != state.params.size()) {
    throw std::invalid_argument("optimizer_step: gradient count mismatch");
  }
  for (std::size_t p = 0; p < grads.size(); ++p) {
    if (!grads[p].all_finite()) {
      throw TrainAbort("optimizer_step aborted: non-finite gradient for " +
                       state.params[p].first);
    }
    if (!grads[p].same_shape(state.params[p].second)) {
      throw std::invalid_argument("optimizer_step: shape mismatch for " +
                                  state.params[p].first);
    }
  }
  opt.t += 1;
  switch (opt.kind) {
    case OptimizerState::Kind::Sgd: {
      for (std::size_t p = 0; p < grads.size(); ++p) {
        Tensor& w = state.params[p].second;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= opt.lr * grads[p][i];
      }
      break;
    }
    case OptimizerState::Kind::SgdInvT: {
      double lr_t = opt.lr / static_cast<double>(opt.t);
      for (std::size_t p = 0; p < grads.size(); ++p) {
        Tensor& w = state.params[p].second;
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_t * grads[p][i];
      }
      break;
    }
    case OptimizerState::Kind::Adam: {
      if (opt.m.empty()) {
        for (const auto& [name, t] : state.params) {
          opt.m.emplace_back(t.rows(), t.cols(), 0.0);
          opt.v.emplace_back(t.rows(), t.cols(), 0.0);
        }
      }
      double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
      double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
      for (std::size_t p = 0; p < grads.size(); ++p) {
        Tensor& w = state.params[p].second;
        Tensor& m = opt.m[p];
        Tensor& v = opt.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
          double g = grads[p][i];
          m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
          v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
          double mh = m[i] / bc1;
          double vh = v[i] / bc2;
          w[i] -= opt.lr * mh / (std::sqrt(vh) + opt.eps);
        }
      }
      break;
    }
  }
}

namespace {

GradMap zero_grads(const ModelState& state) {
  GradMap g;
  g.reserve(state.params.size());
  for (const auto& [name, t] : state.params) g.emplace_back(t.rows(), t.cols(), 0.0);
  return g;
}

/// Per-sequence loss graph for training; returns the loss node and the
/// number of loss terms for normalization. Negatives are drawn uniformly
/// from the non-target catalog.
int build_training_loss(Forward& f, const ModelConfig& cfg, const UserSequence& u,
                        Rng& neg_rng, int* n_terms) {
  if (cfg.variant == Variant::Full) {
    std::vector<int> input(u.train.begin(), u.train.end() - 1);
    int target = u.train.back();
    int enc = f.encode(left_pad(input, cfg.max_seq_len));
    *n_terms = 1;
    return f.loss_full(enc, target);
  }
  // BCE over positions: row holding train[i] predicts train[i+1]
  const int m = static_cast<int>(u.train.size());
  const int T = m - 1;
  std::vector<int> pos(T), neg(T);
  for (int i = 0; i < T; ++i) {
    pos[i] = u.train[i + 1];
    int r = 1 + static_cast<int>(neg_rng.uniform_int(cfg.vocab_size - 2));
    if (r >= pos[i]) ++r;  // uniform over non-padding items != positive
    neg[i] = r;
  }
  int enc = f.encode(left_pad(u.train, cfg.max_seq_len));
  int begin = cfg.max_seq_len - m;
  *n_terms = 2 * T;
  return f.loss_half(enc, begin, pos, neg);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace

EpochReport train_epoch(ModelState& state, const SequenceDataset& data, OptimizerState& opt,
                        const TrainOptions& opts, int epoch_index, TrainStats* stats) {
  const ModelConfig& cfg = state.cfg;
  auto t0 = std::chrono::steady_clock::now();

  std::vector<int> order;
  for (std::size_t i = 0; i < data.users.size(); ++i) {
    if (data.users[i].train.size() >= 2) order.push_back(static_cast<int>(i));
  }
  if (order.empty()) {
    throw std::runtime_error("train_epoch: no user has enough training interactions");
  }
  Rng shuffle_rng(mix_seed(opts.seed, 1000003ull + epoch_index));
  shuffle_rng.shuffle(order);
  Rng neg_rng(mix_seed(opts.seed, 2000003ull + epoch_index));
  Rng drop_rng(mix_seed(opts.seed, 3000003ull + epoch_index));

  double loss_sum = 0.0;
  long loss_count = 0;
  double grad_norm_sum = 0.0;
  long steps = 0;

  std::size_t pos = 0;
  int batch_index = 0;
  while (pos < order.size()) {
    if (stats && opts.max_steps >= 0 && stats->steps >= opts.max_steps) break;
    std::size_t end = std::min(pos + static_cast<std::size_t>(opts.batch_size), order.size());
    GradMap grads = zero_grads(state);
    double batch_loss = 0.0;
    int batch_n = 0;
    for (std::size_t j = pos; j < end; ++j) {
      const UserSequence& u = data.users[order[j]];
      ForwardHooks hooks;
      Forward f(state, /*training=*/true, &drop_rng, opts.collect_hooks ? &hooks : nullptr);
      int n_terms = 0;
      int loss = build_training_loss(f, cfg, u, neg_rng, &n_terms);
      double lv = f.tape().val(loss)[0] / n_terms;
      if (!std::isfinite(lv)) {
        throw TrainAbort("train_epoch: non-finite loss in batch " +
                         std::to_string(batch_index) + " (epoch " +
                         std::to_string(epoch_index) + ")");
      }
      batch_loss += lv;
      ++batch_n;
      f.tape().backward(loss);
      double inv_terms = 1.0 / n_terms;
      for (std::size_t p = 0; p < state.params.size(); ++p) {
        int node = f.param_nodes()[p].second;
        if (!f.tape().has_grad(node)) continue;
        const Tensor& g = f.tape().grad(node);
        for (std::size_t i = 0; i < g.size(); ++i) grads[p][i] += g[i] * inv_terms;
      }
      if (opts.collect_hooks && stats) {
        stats->max_manifold_residual =
            std::max(stats->max_manifold_residual, hooks.max_manifold_residual);
        stats->nonfinite_events += hooks.nonfinite_events;
      }
    }
    double inv_batch = 1.0 / batch_n;
    for (Tensor& g : grads) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= inv_batch;
    }
    // frozen padding row
    Tensor& emb_grad = grads[0];
    for (std::size_t c = 0; c < emb_grad.cols(); ++c) emb_grad(0, c) = 0.0;

    grad_norm_sum += global_grad_norm(grads);
    if (opts.grad_clip > 0.0) clip_gradients(grads, opts.grad_clip);
    optimizer_step(opt, state, grads);
    ++steps;
    if (stats) ++stats->steps;
    loss_sum += batch_loss;
    loss_count += batch_n;
    pos = end;
    ++batch_index;
  }

  if (!state.all_finite()) {
    throw TrainAbort("train_epoch: non-finite parameters after epoch " +
                     std::to_string(epoch_index));
  }

  auto t1 = std::chrono::steady_clock::now();
  EpochReport r;
  r.epoch = epoch_index;
  r.mean_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
  r.grad_norm_mean = steps > 0 ? grad_norm_sum / steps : 0.0;
  r.wall_seconds =
      opts.deterministic_timing ? 0.0 : std::chrono::duration<double>(t1 - t0).count();
  r.seed = opts.seed;
  return r;
}

std::string format_epoch_report(const EpochReport& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "epoch=%d mean_loss=%.12g grad_norm_mean=%.12g wall_seconds=%.6f seed=%llu",
                r.epoch, r.mean_loss, r.grad_norm_mean, r.wall_seconds,
                static_cast<unsigned long long>(r.seed));
  return buf;
}

GradMap finite_difference_grad(const ModelState& state,
                               const std::function<double(const ModelState&)>& f,
                               double h) {
  ModelState work = state;
  GradMap out;
  out.reserve(state.params.size());
  for (std::size_t p = 0; p < state.params.size(); ++p) {
    Tensor g(state.params[p].second.rows(), state.params[p].second.cols(), 0.0);
    Tensor& w = work.params[p].second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      double keep = w[i];
      w[i] = keep + h;
      double up = f(work);
      w[i] = keep - h;
      double down = f(work);
      w[i] = keep;
      g[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

GradCheckReport gradcheck(const ModelConfig& cfg, std::uint64_t seed, bool inject_fault) {
  if (cfg.d > 8 || cfg.max_seq_len > 8 || cfg.vocab_size > 32) {
    throw std::invalid_argument(
        "gradcheck: tiny dimensions required (d <= 8, L <= 8, vocab <= 32)");
  }
  ModelConfig c = cfg;
  c.dropout = 0.0;  // the check needs a deterministic differentiable path
  ModelState state = ModelState::init(c, seed);

  // Move every parameter to a generic position; the zero-initialized
  // output projection of a fresh model kills the gradient of everything
  // upstream of it, which would make the check vacuous.
  Rng data_rng(mix_seed(seed, 77));
  for (auto& [name, t] : state.params) {
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += 0.05 * data_rng.normal();
  }
  for (int col = 0; col < c.d; ++col) state.param("embedding")(0, col) = 0.0;
  std::vector<UserSequence> batch(2);
  for (auto& u : batch) {
    int len = c.max_seq_len - 1 + static_cast<int>(data_rng.uniform_int(2));
    for (int i = 0; i < len; ++i) {
      u.train.push_back(1 + static_cast<int>(data_rng.uniform_int(c.vocab_size - 1)));
    }
  }
  std::uint64_t neg_seed = mix_seed(seed, 78);

  auto loss_fn = [&](const ModelState& s) {
    Rng neg_rng(neg_seed);
    double total = 0.0;
    for (const auto& u : batch) {
      Forward f(s);
      int n_terms = 0;
      int loss = build_training_loss(f, s.cfg, u, neg_rng, &n_terms);
      total += f.tape().val(loss)[0];
    }
    return total;
  };

  // Analytic gradients via the tape.
  GradMap analytic = zero_grads(state);
  {
    Rng neg_rng(neg_seed);
    for (const auto& u : batch) {
      Forward f(state);
      int n_terms = 0;
      int loss = build_training_loss(f, state.cfg, u, neg_rng, &n_terms);
      f.tape().backward(loss);
      for (std::size_t p = 0; p < state.params.size(); ++p) {
        int node = f.param_nodes()[p].second;
        if (!f.tape().has_grad(node)) continue;
        const Tensor& g = f.tape().grad(node);
        for (std::size_t i = 0; i < g.size(); ++i) analytic[p][i] += g[i];
      }
    }
  }
  if (inject_fault) {
    for (std::size_t i = 0; i < analytic[0].size(); ++i) analytic[0][i] *= 1.01;
  }

  GradMap fd = finite_difference_grad(state, loss_fn, 1e-5);

  GradCheckReport rep;
  rep.threshold = 1e-4;
  for (std::size_t p = 0; p < state.params.size(); ++p) {
    GradCheckGroup grp;
    grp.name = state.params[p].first;
    for (std::size_t i = 0; i < analytic[p].size(); ++i) {
      double a = analytic[p][i], b = fd[p][i];
      double err = std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-3});
      grp.max_err = std::max(grp.max_err, err);
    }
    if (grp.max_err > rep.worst_err) {
      rep.worst_err = grp.max_err;
      rep.worst_group = grp.name;
    }
    rep.groups.push_back(std::move(grp));
  }
  rep.pass = rep.worst_err <= rep.threshold;
  return rep;
}

namespace {

struct UserEval {
  std::vector<int> ranking;  // candidates in model order
  int target;
  int train_len;
};

UserEval eval_one_user(const ModelState& state, const UserSequence& u, bool use_test) {
  std::vector<int> input = u.train;
  int target;
  if (use_test) {
    input.push_back(u.val_target);
    target = u.test_target;
  } else {
    target = u.val_target;
  }
  std::vector<int> full = predict_next(state, input);
  std::set<int> excluded(input.begin(), input.end());
  excluded.erase(target);  // the held-out target always stays rankable
  UserEval out;
  out.target = target;
  out.train_len = static_cast<int>(u.train.size());
  out.ranking.reserve(full.size());
  for (int id : full) {
    if (!excluded.count(id)) out.ranking.push_back(id);
  }
  return out;
}

}  // namespace

EvalResult evaluate(const ModelState& state, const SequenceDataset& data,
                    const EvalOptions& opts) {
  const std::size_t n = data.users.size();
  std::vector<UserEval> per_user(n);

  int threads = std::max(1, opts.threads);
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) {
      per_user[i] = eval_one_user(state, data.users[i], opts.use_test);
    }
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (n + threads - 1) / threads;
    for (int w = 0; w < threads; ++w) {
      std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back([&, lo, hi] {
        for (std::size_t i = lo; i < hi; ++i) {
          per_user[i] = eval_one_user(state, data.users[i], opts.use_test);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::vector<std::vector<int>> rankings(n);
  std::vector<int> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    rankings[i] = std::move(per_user[i].ranking);
    targets[i] = per_user[i].target;
  }

  EvalResult res;
  for (int k : opts.ks) res.at_k.push_back(compute_metrics(rankings, targets, k));

  if (!opts.bucket_bounds.empty()) {
    std::vector<int> bounds = opts.bucket_bounds;
    std::sort(bounds.begin(), bounds.end());
    for (std::size_t b = 0; b <= bounds.size(); ++b) {
      std::vector<std::vector<int>> rb;
      std::vector<int> tb;
      for (std::size_t i = 0; i < n; ++i) {
        int len = per_user[i].train_len;
        bool in_bucket = b < bounds.size()
                             ? (len < bounds[b] && (b == 0 || len >= bounds[b - 1]))
                             : (len >= bounds.back());
        if (in_bucket) {
          rb.push_back(rankings[i]);
          tb.push_back(targets[i]);
        }
      }
      if (rb.empty()) continue;
      BucketMetrics bm;
      bm.label = b < bounds.size() ? "<" + std::to_string(bounds[b])
                                   : ">=" + std::to_string(bounds.back());
      bm.metrics = compute_metrics(rb, tb, opts.ks.front());
      res.buckets.push_back(std::move(bm));
    }
  }
  return res;
}

}  // namespace hmamba
