#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hmamba/autodiff.hpp"
#include "hmamba/geometry.hpp"
#include "hmamba/rng.hpp"
#include "hmamba/tensor.hpp"

namespace hmamba {

enum class Variant { Full, Half, Euclidean };

Variant variant_from_string(const std::string& s);  // throws std::invalid_argument
std::string to_string(Variant v);

struct ModelConfig {
  Variant variant{Variant::Full};
  int d{32};           // embedding dimension
  int d_state{32};     // SSM state dimension d'
  int expand{1};       // inner-width multiplier (Euclidean block only)
  int conv_width{2};   // local convolution width
  int n_layers{1};
  double k{1.0};       // hyperboloid parameter
  double dropout{0.1};
  int max_seq_len{50};
  int vocab_size{0};   // includes the reserved padding id 0
  Tolerance tol{};

  void validate() const;
  Curvature curvature() const { return Curvature(k); }
  bool hyperbolic() const { return variant != Variant::Euclidean; }
  /// Channel width of the selective scan. The transported scan works on
  /// ambient tangent coordinates, which pins it to d for the hyperbolic
  /// variants; the Euclidean block uses the expanded width.
  int scan_width() const { return hyperbolic() ? d : d * expand; }
};

/// All learnable tensors in a stable order (the checkpoint and gradient
/// accumulation both rely on it). Row 0 of the embedding table is the
/// frozen padding row.
struct ModelState {
  ModelConfig cfg;
  std::vector<std::pair<std::string, Tensor>> params;

  static ModelState init(const ModelConfig& cfg, std::uint64_t seed);

  Tensor& param(const std::string& name);
  const Tensor& param(const std::string& name) const;
  int param_index(const std::string& name) const;  // -1 if absent
  bool all_finite() const;
};

/// Per-forward observability: hyperboloid-constraint residuals of every
/// intermediate hyperbolic tensor and non-finite value events.
struct ForwardHooks {
  double max_manifold_residual{0.0};
  long nonfinite_events{0};
};

/// Left-pad (or truncate to the most recent entries) with the padding id.
std::vector<int> left_pad(std::span<const int> ids, int target_len);

/// Plain embedding lookup: row i = table[ids[i]]. Padding rows are zero.
/// Throws std::out_of_range for ids outside [0, vocab).
Tensor embed_sequence(std::span<const int> ids, const Tensor& table);

/// Rowwise lift-then-exp of Euclidean embeddings; zero rows map exactly to
/// the origin.
std::vector<LorentzPoint> to_hyperbolic(const Tensor& e, Curvature k);

/// Define-by-run forward builder for one sequence. Creates one tape,
/// parameter leaves in ModelState order, and the variant-appropriate
/// encoder and heads.
class Forward {
 public:
  Forward(const ModelState& state, bool training = false, Rng* dropout_rng = nullptr,
          ForwardHooks* hooks = nullptr);

  ad::Tape& tape() { return tape_; }
  int param_node(const std::string& name) const;
  const std::vector<std::pair<std::string, int>>& param_nodes() const { return param_nodes_; }

  /// Embedding + (variant-dependent lift) + encoder layers. Input must be
  /// padded/truncated to a fixed length already. Returns per-position
  /// representations: (L, d+1) manifold rows for hyperbolic variants,
  /// (L, d) for the Euclidean one.
  int encode(std::span<const int> padded_ids);

  /// Per-position tangent representations (log map + dropped time column
  /// for hyperbolic variants, identity for Euclidean): (L, d).
  int tangent_repr(int encoded);

  /// Scores over the non-padding catalog (ids 1..V-1), shape (V-1, 1).
  int scores_half(int e_hat_row);  // dot products against the table
  int scores_full(int h_hat_row);  // negative hyperbolic distances
  int scores(int encoded);         // variant dispatch on the final position

  /// Binary cross-entropy over positions [pos_begin, pos_begin+T) with
  /// per-position positive and sampled negative item ids; logits are
  /// clamped to [-30, 30]. Returns the summed loss node (1,1).
  int loss_half(int encoded, int pos_begin, std::span<const int> pos_items,
                std::span<const int> neg_items);

  /// Softmax cross-entropy of the final position's negative-distance (or
  /// dot) scores against the target item. Throws if target is padding.
  int loss_full(int encoded, int target_item);

 private:
  int encoder_layer_hyper(int points, int layer);
  int encoder_layer_euclid(int x, int layer);
  int layer_norm(int x, int layer);
  int conv_graph(int x, int kernel);
  int scan_graph(int xc, int delta, int b_seq, int c_seq, int a_eff, int basepoints);
  int maybe_dropout(int x);
  void observe_hyperbolic(int points);

  const ModelState& state_;
  bool training_;
  Rng* dropout_rng_;
  ForwardHooks* hooks_;
  ad::Tape tape_;
  std::vector<std::pair<std::string, int>> param_nodes_;
  int origin_row_{-1};
};

/// Scores for items 1..V-1 under an initialized/trained model (evaluation
/// mode). The input is an unpadded 1-based id sequence.
std::vector<double> score_items(const ModelState& state, std::span<const int> sequence);

/// Full ranking of the non-padding catalog by descending score, ties
/// broken by ascending item id. Throws on an empty sequence.
std::vector<int> predict_next(const ModelState& state, std::span<const int> sequence);

/// The literal distance-based objective value -2k - 2*(-d_L) published for
/// diagnostics only; training uses loss_full.
double full_loss_diagnostic(double k, double distance);

/// Checkpoint container: magic + config + named tensors, raw little-endian
/// doubles. Round-trips bit-exactly (save -> load -> save is identical).
void save_checkpoint(const ModelState& state, const std::string& path);
ModelState load_checkpoint(const std::string& path);

}  // namespace hmamba
