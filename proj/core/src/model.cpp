#include "hmamba/model.hpp"
#include "hmamba/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "hmamba/manifold_graph.hpp"

namespace hmamba {

Variant variant_from_string(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "half") return Variant::Half;
  if (s == "euclidean") return Variant::Euclidean;
  throw std::invalid_argument("unknown variant '" + s + "' (expected full, half or euclidean)");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::Half: return "half";
    case Variant::Euclidean: return "euclidean";
  }
  return "?";
}

void ModelConfig::validate() const {
  if (d < 1 || d_state < 1 || n_layers < 1 || conv_width < 1 || expand < 1) {
    throw std::invalid_argument("ModelConfig: dimensions must be positive");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw std::invalid_argument("ModelConfig: dropout must be in [0,1)");
  }
  if (!(k > 0.0)) throw std::invalid_argument("ModelConfig: k must be positive");
  if (max_seq_len < 1) throw std::invalid_argument("ModelConfig: max_seq_len must be >= 1");
  if (vocab_size < 2) throw std::invalid_argument("ModelConfig: vocab_size must be >= 2");
}

namespace {

Tensor randn(Rng& rng, std::size_t r, std::size_t c, double scale) {
  Tensor t(r, c);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
  return t;
}

}  // namespace

ModelState ModelState::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelState s;
  s.cfg = cfg;
  Rng rng(seed);

  Tensor emb = randn(rng, cfg.vocab_size, cfg.d, 0.1);
  for (int c = 0; c < cfg.d; ++c) emb(0, c) = 0.0;  // frozen padding row
  s.params.emplace_back("embedding", std::move(emb));

  const int dw = cfg.scan_width();
  for (int l = 0; l < cfg.n_layers; ++l) {
    std::string p = "layers." + std::to_string(l) + ".";
    s.params.emplace_back(p + "ln_gamma", Tensor(1, cfg.d, 1.0));
    s.params.emplace_back(p + "ln_beta", Tensor(1, cfg.d, 0.0));
    if (!cfg.hyperbolic()) {
      s.params.emplace_back(p + "w_in", randn(rng, dw, cfg.d, 1.0 / std::sqrt(cfg.d)));
    }
    Tensor kernel = randn(rng, cfg.conv_width, dw, 0.02);
    for (int c = 0; c < dw; ++c) kernel(cfg.conv_width - 1, c) += 1.0;  // identity tap
    s.params.emplace_back(p + "conv_kernel", std::move(kernel));
    s.params.emplace_back(p + "w_delta", randn(rng, 1, dw, 1.0 / std::sqrt(dw)));
    s.params.emplace_back(p + "delta_bias",
                          Tensor::scalar(std::log(std::expm1(0.01))));  // softplus^-1(0.01)
    s.params.emplace_back(p + "w_b", randn(rng, cfg.d_state, dw, 1.0 / std::sqrt(dw)));
    s.params.emplace_back(p + "w_c", randn(rng, cfg.d_state, dw, 1.0 / std::sqrt(dw)));
    Tensor a_log(1, cfg.d_state);
    for (int i = 0; i < cfg.d_state; ++i) a_log(0, i) = std::log(i + 1.0);  // A = -(i+1)
    s.params.emplace_back(p + "a_log", std::move(a_log));
    s.params.emplace_back(p + "w_g", randn(rng, dw, cfg.d, 1.0 / std::sqrt(cfg.d)));
    s.params.emplace_back(p + "w_out", Tensor(cfg.d, dw, 0.0));
  }
  return s;
}

int ModelState::param_index(const std::string& name) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].first == name) return static_cast<int>(i);
  }
  return -1;
}

Tensor& ModelState::param(const std::string& name) {
  int i = param_index(name);
  if (i < 0) throw std::invalid_argument("no parameter named " + name);
  return params[i].second;
}

const Tensor& ModelState::param(const std::string& name) const {
  int i = param_index(name);
  if (i < 0) throw std::invalid_argument("no parameter named " + name);
  return params[i].second;
}

bool ModelState::all_finite() const {
  for (const auto& [name, t] : params) {
    if (!t.all_finite()) return false;
  }
  return true;
}

std::vector<int> left_pad(std::span<const int> ids, int target_len) {
  std::vector<int> out(target_len, 0);
  std::size_t n = std::min<std::size_t>(ids.size(), target_len);
  for (std::size_t i = 0; i < n; ++i) {
    out[target_len - n + i] = ids[ids.size() - n + i];
  }
  return out;
}

Tensor embed_sequence(std::span<const int> ids, const Tensor& table) {
  Tensor out(ids.size(), table.cols());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    int id = ids[r];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw std::out_of_range("embed_sequence: item id " + std::to_string(id) +
                              " outside vocabulary");
    }
    for (std::size_t c = 0; c < table.cols(); ++c) out(r, c) = table(id, c);
  }
  return out;
}

std::vector<LorentzPoint> to_hyperbolic(const Tensor& e, Curvature k) {
  std::vector<LorentzPoint> out;
  out.reserve(e.rows());
  for (std::size_t r = 0; r < e.rows(); ++r) {
    out.push_back(exp_map_origin(lift(e.row_span(r), k)));
  }
  return out;
}

Forward::Forward(const ModelState& state, bool training, Rng* dropout_rng,
                 ForwardHooks* hooks)
    : state_(state), training_(training), dropout_rng_(dropout_rng), hooks_(hooks) {
  for (const auto& [name, t] : state_.params) {
    param_nodes_.emplace_back(name, tape_.leaf(t));
  }
  if (state_.cfg.hyperbolic()) {
    Tensor o(1, state_.cfg.d + 1, 0.0);
    o(0, 0) = state_.cfg.curvature().sqrt_k();
    origin_row_ = tape_.constant(std::move(o));
  }
}

int Forward::param_node(const std::string& name) const {
  for (const auto& [n, id] : param_nodes_) {
    if (n == name) return id;
  }
  throw std::invalid_argument("no parameter node named " + name);
}

void Forward::observe_hyperbolic(int points) {
  if (!hooks_) return;
  const Tensor& v = tape_.val(points);
  const double k = state_.cfg.k;
  for (std::size_t r = 0; r < v.rows(); ++r) {
    double ip = -v(r, 0) * v(r, 0);
    for (std::size_t c = 1; c < v.cols(); ++c) ip += v(r, c) * v(r, c);
    if (!std::isfinite(ip)) {
      ++hooks_->nonfinite_events;
      continue;
    }
    hooks_->max_manifold_residual =
        std::max(hooks_->max_manifold_residual, std::fabs(ip + k) / k);
  }
}

int Forward::maybe_dropout(int x) {
  double p = state_.cfg.dropout;
  if (!training_ || p <= 0.0 || dropout_rng_ == nullptr) return x;
  const Tensor& v = tape_.val(x);
  Tensor mask(v.rows(), v.cols());
  double keep = 1.0 - p;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = dropout_rng_->uniform() < p ? 0.0 : 1.0 / keep;
  }
  return tape_.mul(x, tape_.constant(std::move(mask)));
}

int Forward::layer_norm(int x, int layer) {
  std::string p = "layers." + std::to_string(layer) + ".";
  int gamma = param_node(p + "ln_gamma");
  int beta = param_node(p + "ln_beta");
  const double n = static_cast<double>(tape_.val(x).cols());
  int mean = tape_.scale(tape_.row_sum(x), 1.0 / n);
  int centered = tape_.sub(x, mean);
  int var = tape_.scale(tape_.row_sum(tape_.mul(centered, centered)), 1.0 / n);
  int den = tape_.sqrt(tape_.add_const(var, 1e-5));
  return tape_.add(tape_.mul(tape_.div(centered, den), gamma), beta);
}

int Forward::conv_graph(int x, int kernel) {
  const int w = static_cast<int>(tape_.val(kernel).rows());
  int acc = tape_.mul(x, tape_.slice_rows(kernel, w - 1, w));
  for (int j = 0; j < w - 1; ++j) {
    int shifted = tape_.shift_rows(x, w - 1 - j);
    acc = tape_.add(acc, tape_.mul(shifted, tape_.slice_rows(kernel, j, j + 1)));
  }
  return acc;
}

int Forward::scan_graph(int xc, int delta, int b_seq, int c_seq, int a_eff, int basepoints) {
  const bool hyper = basepoints >= 0;
  const int L = static_cast<int>(tape_.val(xc).rows());
  const int C = static_cast<int>(tape_.val(xc).cols());
  const int S = static_cast<int>(tape_.val(a_eff).cols());
  const int A = hyper ? state_.cfg.d + 1 : C;

  int h = tape_.constant(Tensor(S, A, 0.0));
  int p_prev = origin_row_;
  std::vector<int> ys;
  ys.reserve(L);
  for (int t = 0; t < L; ++t) {
    int dt = tape_.slice_rows(delta, t, t + 1);
    int da = tape_.mul(a_eff, dt);
    int abar = tape_.exp(da);
    // exact ZOH input weight (exp(da)-1)/a per state channel
    int bbar = tape_.mul(tape_.div(tape_.expm1(da), a_eff), tape_.slice_rows(b_seq, t, t + 1));
    int x_t = tape_.slice_rows(xc, t, t + 1);
    int c_t = tape_.slice_rows(c_seq, t, t + 1);
    int carry = tape_.mul(h, tape_.transpose(abar));
    int y_t;
    if (hyper) {
      int p_t = tape_.slice_rows(basepoints, t, t + 1);
      carry = graph::parallel_transport_rows(tape_, carry, p_prev, p_t);
      int inj_dir = graph::parallel_transport_rows(tape_, graph::lift_rows(tape_, x_t),
                                                   origin_row_, p_t);
      h = tape_.add(carry, tape_.matmul(tape_.transpose(bbar), inj_dir));
      int y_amb = tape_.matmul(c_t, h);
      int y_o = graph::parallel_transport_rows(tape_, y_amb, p_t, origin_row_);
      y_t = tape_.slice_cols(y_o, 1, A);
      p_prev = p_t;
    } else {
      h = tape_.add(carry, tape_.matmul(tape_.transpose(bbar), x_t));
      y_t = tape_.matmul(c_t, h);
    }
    ys.push_back(y_t);
  }
  return tape_.stack_rows(ys);
}

int Forward::encoder_layer_hyper(int points, int layer) {
  const ModelConfig& cfg = state_.cfg;
  std::string p = "layers." + std::to_string(layer) + ".";

  int u = graph::log_map_rows(tape_, points, cfg.curvature());
  int un = maybe_dropout(layer_norm(u, layer));
  int xc = conv_graph(un, param_node(p + "conv_kernel"));

  int delta = tape_.softplus(tape_.add(
      tape_.matmul(xc, tape_.transpose(param_node(p + "w_delta"))),
      param_node(p + "delta_bias")));
  int b_seq = tape_.matmul(xc, tape_.transpose(param_node(p + "w_b")));
  int c_seq = tape_.matmul(xc, tape_.transpose(param_node(p + "w_c")));

  Tensor kap(1, cfg.d_state, 1.0);
  kap(0, 0) = cfg.curvature().sqrt_k();  // Ā = exp(ΔA ⊙ K(k))
  int a_eff = tape_.mul(tape_.neg(tape_.exp(param_node(p + "a_log"))), tape_.constant(kap));

  int y = scan_graph(xc, delta, b_seq, c_seq, a_eff, points);
  int g = tape_.silu(tape_.matmul(un, tape_.transpose(param_node(p + "w_g"))));
  int w_mix = tape_.matmul(tape_.mul(y, g), tape_.transpose(param_node(p + "w_out")));

  // Residual junction: the mixed tangent update enters the gyroproduct as
  // a formal ambient vector; zero update returns the residual exactly.
  int z = graph::mobius_rows(tape_, graph::lift_rows(tape_, w_mix), points,
                             cfg.curvature(), cfg.tol);
  int out = graph::reproject_rows(tape_, z, cfg.curvature());
  observe_hyperbolic(out);
  return out;
}

int Forward::encoder_layer_euclid(int x, int layer) {
  std::string p = "layers." + std::to_string(layer) + ".";
  int un = maybe_dropout(layer_norm(x, layer));
  int xin = tape_.matmul(un, tape_.transpose(param_node(p + "w_in")));
  int xc = conv_graph(xin, param_node(p + "conv_kernel"));

  int delta = tape_.softplus(tape_.add(
      tape_.matmul(xc, tape_.transpose(param_node(p + "w_delta"))),
      param_node(p + "delta_bias")));
  int b_seq = tape_.matmul(xc, tape_.transpose(param_node(p + "w_b")));
  int c_seq = tape_.matmul(xc, tape_.transpose(param_node(p + "w_c")));
  int a_eff = tape_.neg(tape_.exp(param_node(p + "a_log")));

  int y = scan_graph(xc, delta, b_seq, c_seq, a_eff, -1);
  int g = tape_.silu(tape_.matmul(un, tape_.transpose(param_node(p + "w_g"))));
  int w_mix = tape_.matmul(tape_.mul(y, g), tape_.transpose(param_node(p + "w_out")));
  return tape_.add(x, w_mix);
}

int Forward::encode(std::span<const int> padded_ids) {
  const ModelConfig& cfg = state_.cfg;
  std::vector<long> ids(padded_ids.begin(), padded_ids.end());
  for (long id : ids) {
    if (id < 0 || id >= cfg.vocab_size) {
      throw std::out_of_range("encode: item id " + std::to_string(id) +
                              " outside vocabulary");
    }
  }
  int emb = tape_.gather_rows(param_node("embedding"), std::move(ids));
  if (!cfg.hyperbolic()) {
    int x = emb;
    for (int l = 0; l < cfg.n_layers; ++l) x = encoder_layer_euclid(x, l);
    return x;
  }
  int h = graph::exp_map_rows(tape_, emb, cfg.curvature());
  observe_hyperbolic(h);
  for (int l = 0; l < cfg.n_layers; ++l) h = encoder_layer_hyper(h, l);
  return h;
}

int Forward::tangent_repr(int encoded) {
  if (!state_.cfg.hyperbolic()) return encoded;
  return graph::log_map_rows(tape_, encoded, state_.cfg.curvature());
}

int Forward::scores_half(int e_hat_row) {
  int table = tape_.slice_rows(param_node("embedding"), 1, state_.cfg.vocab_size);
  return tape_.matmul(table, tape_.transpose(e_hat_row));
}

int Forward::scores_full(int h_hat_row) {
  const ModelConfig& cfg = state_.cfg;
  int table = tape_.slice_rows(param_node("embedding"), 1, cfg.vocab_size);
  int table_h = graph::exp_map_rows(tape_, table, cfg.curvature());
  int dist = graph::distance_rows(tape_, table_h, h_hat_row, cfg.curvature(), cfg.tol);
  return tape_.neg(dist);
}

int Forward::scores(int encoded) {
  const int L = static_cast<int>(tape_.val(encoded).rows());
  int final_row = tape_.slice_rows(encoded, L - 1, L);
  switch (state_.cfg.variant) {
    case Variant::Full:
      return scores_full(final_row);
    case Variant::Half:
      return scores_half(graph::log_map_rows(tape_, final_row, state_.cfg.curvature()));
    case Variant::Euclidean:
      return scores_half(final_row);
  }
  throw std::logic_error("unreachable");
}

int Forward::loss_half(int encoded, int pos_begin, std::span<const int> pos_items,
                       std::span<const int> neg_items) {
  if (pos_items.size() != neg_items.size() || pos_items.empty()) {
    throw std::invalid_argument("loss_half: need matching non-empty position labels");
  }
  const int T = static_cast<int>(pos_items.size());
  int e_all = tangent_repr(encoded);
  int e_pos = tape_.slice_rows(e_all, pos_begin, pos_begin + T);
  int emb = param_node("embedding");
  int pos_emb = tape_.gather_rows(emb, std::vector<long>(pos_items.begin(), pos_items.end()));
  int neg_emb = tape_.gather_rows(emb, std::vector<long>(neg_items.begin(), neg_items.end()));
  int s_pos = tape_.clamp(tape_.row_sum(tape_.mul(e_pos, pos_emb)), -30.0, 30.0);
  int s_neg = tape_.clamp(tape_.row_sum(tape_.mul(e_pos, neg_emb)), -30.0, 30.0);
  // -log s(x) = softplus(-x), -log(1 - s(x)) = softplus(x)
  int loss_pos = tape_.sum_all(tape_.softplus(tape_.neg(s_pos)));
  int loss_neg = tape_.sum_all(tape_.softplus(s_neg));
  return tape_.add(loss_pos, loss_neg);
}

int Forward::loss_full(int encoded, int target_item) {
  if (target_item < 1 || target_item >= state_.cfg.vocab_size) {
    throw std::invalid_argument("loss_full: target must be a non-padding item id");
  }
  int s = scores(encoded);
  const Tensor& sv = tape_.val(s);
  double m = sv[0];
  for (std::size_t i = 1; i < sv.size(); ++i) m = std::max(m, sv[i]);
  // max-subtracted log-sum-exp; the shift is a constant and does not
  // change the gradient
  int z = tape_.sum_all(tape_.exp(tape_.add_const(s, -m)));
  int lse = tape_.add_const(tape_.log(z), m);
  int s_tgt = tape_.slice_rows(s, target_item - 1, target_item);
  return tape_.sub(lse, s_tgt);
}

std::vector<double> score_items(const ModelState& state, std::span<const int> sequence) {
  if (sequence.empty()) {
    throw std::invalid_argument("score_items: empty sequence");
  }
  Forward f(state);
  std::vector<int> padded = left_pad(sequence, state.cfg.max_seq_len);
  int enc = f.encode(padded);
  int sc = f.scores(enc);
  const Tensor& v = f.tape().val(sc);
  return {v.data(), v.data() + v.size()};
}

std::vector<int> predict_next(const ModelState& state, std::span<const int> sequence) {
  std::vector<double> s = score_items(state, sequence);
  std::vector<int> ranking(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) ranking[i] = static_cast<int>(i) + 1;
  std::sort(ranking.begin(), ranking.end(), [&](int a, int b) {
    double sa = s[a - 1], sb = s[b - 1];
    if (sa != sb) return sa > sb;
    return a < b;  // ties: lower item id first
  });
  return ranking;
}

double full_loss_diagnostic(double k, double distance) {
  // literal published objective, composed with the sign-carrying distance
  return -2.0 * k + 2.0 * distance;
}

namespace {

void write_bytes(std::ofstream& f, const void* p, std::size_t n) {
  f.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ofstream& f, T v) {
  write_bytes(f, &v, sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

}  // namespace

void save_checkpoint(const ModelState& state, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write("HMCKPT01", 8);
  const ModelConfig& c = state.cfg;
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(c.variant));
  write_pod<std::int32_t>(f, c.d);
  write_pod<std::int32_t>(f, c.d_state);
  write_pod<std::int32_t>(f, c.expand);
  write_pod<std::int32_t>(f, c.conv_width);
  write_pod<std::int32_t>(f, c.n_layers);
  write_pod<std::int32_t>(f, c.max_seq_len);
  write_pod<std::int32_t>(f, c.vocab_size);
  write_pod<double>(f, c.k);
  write_pod<double>(f, c.dropout);
  write_pod<double>(f, c.tol.eps_arcosh);
  write_pod<double>(f, c.tol.eps_norm);
  write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(state.params.size()));
  for (const auto& [name, t] : state.params) {
    write_pod<std::uint16_t>(f, static_cast<std::uint16_t>(name.size()));
    write_bytes(f, name.data(), name.size());
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.rows()));
    write_pod<std::uint32_t>(f, static_cast<std::uint32_t>(t.cols()));
    write_bytes(f, t.data(), t.size() * sizeof(double));
  }
  if (!f) throw DataError("checkpoint write failed: " + path);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open checkpoint: " + path);
  char magic[8];
  f.read(magic, 8);
  if (!f || std::memcmp(magic, "HMCKPT01", 8) != 0) {
    throw DataError("checkpoint: bad magic in " + path);
  }
  ModelState s;
  s.cfg.variant = static_cast<Variant>(read_pod<std::uint32_t>(f));
  s.cfg.d = read_pod<std::int32_t>(f);
  s.cfg.d_state = read_pod<std::int32_t>(f);
  s.cfg.expand = read_pod<std::int32_t>(f);
  s.cfg.conv_width = read_pod<std::int32_t>(f);
  s.cfg.n_layers = read_pod<std::int32_t>(f);
  s.cfg.max_seq_len = read_pod<std::int32_t>(f);
  s.cfg.vocab_size = read_pod<std::int32_t>(f);
  s.cfg.k = read_pod<double>(f);
  s.cfg.dropout = read_pod<double>(f);
  s.cfg.tol.eps_arcosh = read_pod<double>(f);
  s.cfg.tol.eps_norm = read_pod<double>(f);
  auto n = read_pod<std::uint32_t>(f);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto len = read_pod<std::uint16_t>(f);
    std::string name(len, '\0');
    f.read(name.data(), len);
    auto rows = read_pod<std::uint32_t>(f);
    auto cols = read_pod<std::uint32_t>(f);
    Tensor t(rows, cols);
    f.read(reinterpret_cast<char*>(t.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
    s.params.emplace_back(std::move(name), std::move(t));
  }
  if (!f) throw DataError("checkpoint: truncated file " + path);
  s.cfg.validate();
  return s;
}

}  // namespace hmamba
