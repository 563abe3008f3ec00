#include "hmamba/dataset.hpp"
#include "hmamba/errors.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hmamba/rng.hpp"

namespace hmamba {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool parse_i64(const std::string& s, std::int64_t& out) {
  std::string v = trim(s);
  if (v.empty()) return false;
  errno = 0;
  char* end = nullptr;
  long long x = std::strtoll(v.c_str(), &end, 10);
  if (errno != 0 || end != v.c_str() + v.size()) return false;
  out = static_cast<std::int64_t>(x);
  return true;
}

}  // namespace

InteractionLog parse_interactions(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) {
    throw DataError("interaction file: missing header row");
  }
  auto cols = split_csv_line(header);
  int iu = -1, ii = -1, it = -1;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    std::string name = trim(cols[j]);
    if (name == "user_id") iu = static_cast<int>(j);
    if (name == "item_id") ii = static_cast<int>(j);
    if (name == "timestamp") it = static_cast<int>(j);
  }
  if (iu < 0 || ii < 0 || it < 0) {
    throw DataError(
        "interaction file: header must name user_id, item_id and timestamp columns");
  }

  InteractionLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    std::size_t need = static_cast<std::size_t>(std::max({iu, ii, it})) + 1;
    Interaction rec{};
    if (fields.size() < need || !parse_i64(fields[iu], rec.user_id) ||
        !parse_i64(fields[ii], rec.item_id) || !parse_i64(fields[it], rec.timestamp)) {
      ++log.malformed_rows;
      continue;
    }
    log.records.push_back(rec);
  }
  return log;
}

InteractionLog load_interactions(const std::string& path) {
  std::ifstream f(path);
  if (!f) {
    throw DataError("cannot open interaction file: " + path);
  }
  return parse_interactions(f);
}

SequenceDataset build_sequences(const InteractionLog& log, int min_user_len,
                                int min_item_count, int max_seq_len) {
  if (max_seq_len < 1) throw std::invalid_argument("build_sequences: max_seq_len must be >= 1");

  std::map<std::int64_t, std::size_t> item_count;
  for (const auto& r : log.records) ++item_count[r.item_id];

  // Contiguous 1-based ids assigned in ascending original-id order.
  std::vector<std::int64_t> kept_items;
  for (const auto& [id, n] : item_count) {
    if (static_cast<int>(n) >= min_item_count) kept_items.push_back(id);
  }
  std::map<std::int64_t, int> remap;
  for (std::size_t i = 0; i < kept_items.size(); ++i) {
    remap[kept_items[i]] = static_cast<int>(i) + 1;
  }

  // Group per user preserving input order, then stable-sort by timestamp.
  std::map<std::int64_t, std::vector<std::pair<std::int64_t, int>>> per_user;
  for (const auto& r : log.records) {
    auto it = remap.find(r.item_id);
    if (it == remap.end()) continue;
    per_user[r.user_id].push_back({r.timestamp, it->second});
  }

  SequenceDataset ds;
  ds.item_ids = kept_items;
  ds.max_seq_len = max_seq_len;
  for (auto& [uid, events] : per_user) {
    if (static_cast<int>(events.size()) < min_user_len) continue;
    std::stable_sort(events.begin(), events.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::size_t keep = std::min(events.size(), static_cast<std::size_t>(max_seq_len) + 2);
    std::size_t start = events.size() - keep;

    UserSequence u;
    u.original_user_id = uid;
    for (std::size_t i = start; i + 2 < events.size(); ++i) u.train.push_back(events[i].second);
    u.val_target = events[events.size() - 2].second;
    u.test_target = events[events.size() - 1].second;
    ds.users.push_back(std::move(u));
  }
  if (ds.users.empty()) {
    throw DataError("build_sequences: no user survives filtering");
  }
  return ds;
}

void save_dataset(const SequenceDataset& ds, std::ostream& out) {
  out << "HMDATA 1\n";
  out << "max_seq_len " << ds.max_seq_len << "\n";
  out << "items " << ds.item_ids.size() << "\n";
  for (std::size_t i = 0; i < ds.item_ids.size(); ++i) {
    out << i + 1 << " " << ds.item_ids[i] << "\n";
  }
  out << "users " << ds.users.size() << "\n";
  for (const auto& u : ds.users) {
    out << u.original_user_id << " " << u.train.size();
    for (int id : u.train) out << " " << id;
    out << " " << u.val_target << " " << u.test_target << "\n";
  }
}

SequenceDataset load_dataset(std::istream& in) {
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "HMDATA" || version != 1) {
    throw DataError("dataset container: bad magic or version");
  }
  SequenceDataset ds;
  std::string key;
  std::size_t n = 0;
  in >> key >> ds.max_seq_len;
  if (key != "max_seq_len") throw DataError("dataset container: expected max_seq_len");
  in >> key >> n;
  if (key != "items") throw DataError("dataset container: expected items");
  ds.item_ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t new_id;
    in >> new_id >> ds.item_ids[i];
    if (new_id != i + 1) throw DataError("dataset container: ids not contiguous");
  }
  in >> key >> n;
  if (key != "users") throw DataError("dataset container: expected users");
  ds.users.resize(n);
  for (auto& u : ds.users) {
    std::size_t len;
    in >> u.original_user_id >> len;
    u.train.resize(len);
    for (auto& id : u.train) in >> id;
    in >> u.val_target >> u.test_target;
  }
  if (!in) throw DataError("dataset container: truncated");
  return ds;
}

int HierarchyTree::leaf_count() const {
  int n = 1;
  for (int i = 0; i < depth; ++i) n *= branching;
  return n;
}

int HierarchyTree::home_of_leaf(int leaf) const {
  int per_home = leaf_count() / branching;
  return leaf / per_home;
}

std::string HierarchyTree::leaf_path(int leaf) const {
  std::string path;
  int span = leaf_count();
  int rem = leaf;
  for (int level = 0; level < depth; ++level) {
    span /= branching;
    int child = rem / span;
    rem %= span;
    if (level > 0) path += "/";
    path += std::to_string(child);
  }
  return path;
}

SyntheticDataset synth_hierarchical_dataset(std::uint64_t seed, int depth, int branching,
                                            int users, int seq_len) {
  if (depth < 1 || branching < 2) {
    throw std::invalid_argument("synth_hierarchical_dataset: need depth >= 1, branching >= 2");
  }
  SyntheticDataset out;
  out.tree = HierarchyTree{depth, branching};
  const int leaves = out.tree.leaf_count();
  const int per_home = leaves / branching;

  Rng rng(seed);
  for (int u = 0; u < users; ++u) {
    int home = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(branching)));
    out.user_home.push_back(home);
    for (int s = 0; s < seq_len; ++s) {
      int leaf;
      if (rng.uniform() < 0.9) {
        leaf = home * per_home + static_cast<int>(rng.uniform_int(per_home));
      } else {
        leaf = static_cast<int>(rng.uniform_int(leaves));
      }
      // leaf ids are 1-based item ids in the emitted log
      out.log.records.push_back({u + 1, leaf + 1, s});
    }
  }
  return out;
}

void save_tree(const HierarchyTree& tree, std::ostream& out) {
  out << "HMTREE 1\n";
  out << "depth " << tree.depth << " branching " << tree.branching << "\n";
  for (int leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    out << leaf + 1 << "," << tree.leaf_path(leaf) << "\n";
  }
}

}  // namespace hmamba
