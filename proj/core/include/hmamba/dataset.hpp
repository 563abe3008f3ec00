#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace hmamba {

struct Interaction {
  std::int64_t user_id;
  std::int64_t item_id;
  std::int64_t timestamp;
};

struct InteractionLog {
  std::vector<Interaction> records;
  std::size_t malformed_rows{0};
};

/// Parses header-bearing comma-separated text with columns
/// user_id,item_id,timestamp (extra columns ignored, order free).
/// Malformed rows are skipped and counted. Throws on unreadable files or
/// a missing required column.
InteractionLog load_interactions(const std::string& path);
InteractionLog parse_interactions(std::istream& in);

/// One user's chronological sequence after leave-one-out splitting.
struct UserSequence {
  std::int64_t original_user_id;
  std::vector<int> train;  // contiguous 1-based item ids
  int val_target;
  int test_target;
};

struct SequenceDataset {
  std::vector<std::int64_t> item_ids;  // index i holds the original id of item i+1
  std::vector<UserSequence> users;
  int max_seq_len{0};

  int vocab_size() const { return static_cast<int>(item_ids.size()) + 1; }  // id 0 = padding
};

/// Chronological ordering (stable on input order for timestamp ties),
/// item re-indexing to contiguous 1-based ids (sorted by original id),
/// per-user truncation to the most recent max_seq_len + 2 events, and
/// leave-one-out assignment (last -> test, second-to-last -> validation).
/// Users with fewer than min_user_len events and items with fewer than
/// min_item_count occurrences are dropped. Throws when no user survives.
SequenceDataset build_sequences(const InteractionLog& log, int min_user_len,
                                int min_item_count, int max_seq_len);

/// Byte-stable versioned text container for a SequenceDataset.
void save_dataset(const SequenceDataset& ds, std::ostream& out);
SequenceDataset load_dataset(std::istream& in);

/// Complete b-ary item hierarchy used by the synthetic generator.
struct HierarchyTree {
  int depth{0};
  int branching{0};

  int leaf_count() const;
  /// Index of the depth-1 subtree containing a leaf (0-based).
  int home_of_leaf(int leaf) const;
  /// Root-to-leaf path as child indices, e.g. "0/2/1".
  std::string leaf_path(int leaf) const;
};

struct SyntheticDataset {
  InteractionLog log;
  HierarchyTree tree;
  std::vector<int> user_home;  // depth-1 subtree sampled per user
};

/// Items are the b^depth leaves of a complete b-ary tree. Each user picks
/// a home depth-1 subtree and walks L steps, drawing the next leaf from
/// the home subtree with probability 0.9 and uniformly from all leaves
/// otherwise. Deterministic under a fixed seed.
SyntheticDataset synth_hierarchical_dataset(std::uint64_t seed, int depth, int branching,
                                            int users, int seq_len);

/// Writes the ground-truth tree (one "leaf_id,path" line per leaf).
void save_tree(const HierarchyTree& tree, std::ostream& out);

}  // namespace hmamba
