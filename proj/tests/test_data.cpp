#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <set>
#include <sstream>
#include <vector>

#include "hmamba/dataset.hpp"
#include "hmamba/errors.hpp"
#include "hmamba/metrics.hpp"
#include "hmamba/rng.hpp"

using namespace hmamba;

TEST_CASE("interaction parsing") {
  SUBCASE("well-formed rows") {
    std::istringstream in("user_id,item_id,timestamp\n1,10,100\n1,11,101\n2,10,50\n");
    InteractionLog log = parse_interactions(in);
    CHECK(log.records.size() == 3);
    CHECK(log.malformed_rows == 0);
    CHECK(log.records[2].user_id == 2);
  }
  SUBCASE("extra columns are ignored, order is free") {
    std::istringstream in("item_id,rating,user_id,timestamp\n7,4.5,1,9\n");
    InteractionLog log = parse_interactions(in);
    CHECK(log.records.size() == 1);
    CHECK(log.records[0].item_id == 7);
    CHECK(log.records[0].user_id == 1);
    CHECK(log.records[0].timestamp == 9);
  }
  SUBCASE("malformed rows are skipped and counted") {
    std::istringstream in("user_id,item_id,timestamp\n1,10,not_a_time\n1,11,5\n");
    InteractionLog log = parse_interactions(in);
    CHECK(log.records.size() == 1);
    CHECK(log.malformed_rows == 1);
  }
  SUBCASE("empty file with a valid header") {
    std::istringstream in("user_id,item_id,timestamp\n");
    InteractionLog log = parse_interactions(in);
    CHECK(log.records.empty());
    CHECK(log.malformed_rows == 0);
  }
  SUBCASE("missing required column") {
    std::istringstream in("user_id,timestamp\n1,2\n");
    CHECK_THROWS_AS(parse_interactions(in), DataError);
  }
  SUBCASE("unreadable file") {
    CHECK_THROWS_AS(load_interactions("/nonexistent/zzz.csv"), DataError);
  }
}

namespace {

InteractionLog make_log(const std::vector<std::array<std::int64_t, 3>>& rows) {
  InteractionLog log;
  for (auto& r : rows) log.records.push_back({r[0], r[1], r[2]});
  return log;
}

}  // namespace

TEST_CASE("sequence construction and leave-one-out") {
  SUBCASE("five events split 3/1/1") {
    auto log = make_log({{1, 10, 0}, {1, 11, 1}, {1, 12, 2}, {1, 13, 3}, {1, 14, 4}});
    SequenceDataset ds = build_sequences(log, 3, 1, 10);
    REQUIRE(ds.users.size() == 1);
    CHECK(ds.users[0].train.size() == 3);
    CHECK(ds.users[0].val_target == 4);   // item 13 -> contiguous id 4
    CHECK(ds.users[0].test_target == 5);  // item 14 -> contiguous id 5
  }
  SUBCASE("short users are dropped") {
    auto log = make_log({{1, 10, 0}, {1, 11, 1}, {2, 10, 0}, {2, 11, 1}, {2, 12, 2}});
    SequenceDataset ds = build_sequences(log, 3, 1, 10);
    CHECK(ds.users.size() == 1);
    CHECK(ds.users[0].original_user_id == 2);
  }
  SUBCASE("timestamp ties keep input order") {
    auto log = make_log({{1, 10, 5}, {1, 11, 5}, {1, 12, 5}, {1, 13, 5}});
    SequenceDataset ds = build_sequences(log, 3, 1, 10);
    CHECK(ds.users[0].train == std::vector<int>{1, 2});
    CHECK(ds.users[0].val_target == 3);
    CHECK(ds.users[0].test_target == 4);
  }
  SUBCASE("truncation keeps the most recent events") {
    std::vector<std::array<std::int64_t, 3>> rows;
    for (int i = 0; i < 10; ++i) rows.push_back({1, 100 + i, i});
    SequenceDataset ds = build_sequences(make_log(rows), 3, 1, 4);
    CHECK(ds.users[0].train.size() == 4);
    CHECK(ds.users[0].train.front() == 5);  // item 104
    CHECK(ds.users[0].test_target == 10);   // item 109
  }
  SUBCASE("item count filter") {
    auto log = make_log({{1, 10, 0}, {1, 11, 1}, {1, 10, 2}, {1, 10, 3}, {1, 12, 4}});
    SequenceDataset ds = build_sequences(log, 3, 2, 10);
    // only item 10 survives the count filter; user keeps 3 events
    CHECK(ds.item_ids == std::vector<std::int64_t>{10});
    CHECK(ds.users[0].train.size() == 1);
  }
  SUBCASE("nothing survives") {
    auto log = make_log({{1, 10, 0}});
    CHECK_THROWS_AS(build_sequences(log, 3, 1, 10), DataError);
  }
  SUBCASE("the held-out test event never sits in the input") {
    // repeat-free history: the positional guarantee is visible on ids
    auto log = make_log({{1, 10, 0}, {1, 11, 1}, {1, 12, 2}, {1, 13, 3}, {1, 14, 4}});
    SequenceDataset ds = build_sequences(log, 3, 1, 10);
    std::vector<int> input = ds.users[0].train;
    input.push_back(ds.users[0].val_target);
    for (int id : input) CHECK(id != ds.users[0].test_target);
  }
}

TEST_CASE("dataset container round trip is byte-stable") {
  auto log = make_log({{1, 10, 0}, {1, 11, 1}, {1, 12, 2}, {2, 11, 0}, {2, 12, 1}, {2, 13, 2}});
  SequenceDataset ds = build_sequences(log, 3, 1, 10);
  std::ostringstream a;
  save_dataset(ds, a);
  std::istringstream in(a.str());
  SequenceDataset ds2 = load_dataset(in);
  std::ostringstream b;
  save_dataset(ds2, b);
  CHECK(a.str() == b.str());
  CHECK(ds2.users.size() == ds.users.size());
  CHECK(ds2.item_ids == ds.item_ids);

  std::istringstream bad("HMDATA 999\n");
  CHECK_THROWS_AS(load_dataset(bad), DataError);
}

TEST_CASE("synthetic hierarchical generator") {
  SUBCASE("leaf count is branching^depth") {
    SyntheticDataset ds = synth_hierarchical_dataset(7, 2, 3, 5, 4);
    CHECK(ds.tree.leaf_count() == 9);
    CHECK(ds.log.records.size() == 20);
  }
  SUBCASE("identical seeds give identical datasets") {
    SyntheticDataset a = synth_hierarchical_dataset(42, 3, 3, 20, 10);
    SyntheticDataset b = synth_hierarchical_dataset(42, 3, 3, 20, 10);
    REQUIRE(a.log.records.size() == b.log.records.size());
    for (std::size_t i = 0; i < a.log.records.size(); ++i) {
      CHECK(a.log.records[i].item_id == b.log.records[i].item_id);
    }
    CHECK(a.user_home == b.user_home);
    SyntheticDataset c = synth_hierarchical_dataset(43, 3, 3, 20, 10);
    bool differs = false;
    for (std::size_t i = 0; i < a.log.records.size(); ++i) {
      differs = differs || a.log.records[i].item_id != c.log.records[i].item_id;
    }
    CHECK(differs);
  }
  SUBCASE("within-home frequency lands in [0.85, 0.95]") {
    SyntheticDataset ds = synth_hierarchical_dataset(7, 3, 3, 500, 20);  // 10000 draws
    long in_home = 0, total = 0;
    for (const auto& r : ds.log.records) {
      int user_idx = static_cast<int>(r.user_id) - 1;
      int leaf = static_cast<int>(r.item_id) - 1;
      if (ds.tree.home_of_leaf(leaf) == ds.user_home[user_idx]) ++in_home;
      ++total;
    }
    double freq = static_cast<double>(in_home) / total;
    CHECK(freq >= 0.85);
    CHECK(freq <= 0.95);
  }
  SUBCASE("leaf paths") {
    HierarchyTree t{2, 3};
    CHECK(t.leaf_path(0) == "0/0");
    CHECK(t.leaf_path(5) == "1/2");
    CHECK(t.home_of_leaf(5) == 1);
  }
  SUBCASE("parameter validation") {
    CHECK_THROWS_AS(synth_hierarchical_dataset(1, 0, 3, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(synth_hierarchical_dataset(1, 2, 1, 1, 1), std::invalid_argument);
  }
}

TEST_CASE("ranking metrics") {
  SUBCASE("hand values at ranks 1, 2 and 11") {
    std::vector<std::vector<int>> rankings{{5, 1, 2, 3, 4, 6, 7, 8, 9, 10, 11}};
    std::vector<int> targets{5};
    Metrics m1 = compute_metrics(rankings, targets, 10);
    CHECK(m1.hr == doctest::Approx(1.0));
    CHECK(m1.ndcg == doctest::Approx(1.0));
    CHECK(m1.mrr == doctest::Approx(1.0));

    targets[0] = 1;  // rank 2
    Metrics m2 = compute_metrics(rankings, targets, 10);
    CHECK(m2.hr == doctest::Approx(1.0));
    CHECK(m2.ndcg == doctest::Approx(0.63092975).epsilon(1e-6));
    CHECK(m2.mrr == doctest::Approx(0.5));

    targets[0] = 11;  // rank 11, outside the cutoff
    Metrics m3 = compute_metrics(rankings, targets, 10);
    CHECK(m3.hr == 0.0);
    CHECK(m3.ndcg == 0.0);
    CHECK(m3.mrr == 0.0);
  }
  SUBCASE("ordering invariant MRR <= NDCG <= HR on random rankings") {
    Rng rng(23);
    for (int trial = 0; trial < 50; ++trial) {
      int n_items = 20;
      std::vector<std::vector<int>> rankings;
      std::vector<int> targets;
      for (int u = 0; u < 30; ++u) {
        std::vector<int> ids(n_items);
        for (int i = 0; i < n_items; ++i) ids[i] = i + 1;
        rng.shuffle(ids);
        rankings.push_back(ids);
        targets.push_back(1 + static_cast<int>(rng.uniform_int(n_items)));
      }
      Metrics m = compute_metrics(rankings, targets, 5);
      CHECK(m.mrr <= m.ndcg + 1e-12);
      CHECK(m.ndcg <= m.hr + 1e-12);
      CHECK(m.hr <= 1.0);
    }
  }
  SUBCASE("user order does not matter") {
    std::vector<std::vector<int>> rankings{{1, 2, 3}, {3, 2, 1}, {2, 3, 1}};
    std::vector<int> targets{2, 1, 1};
    Metrics a = compute_metrics(rankings, targets, 2);
    std::vector<std::vector<int>> r2{rankings[2], rankings[0], rankings[1]};
    std::vector<int> t2{targets[2], targets[0], targets[1]};
    Metrics b = compute_metrics(r2, t2, 2);
    CHECK(a.hr == doctest::Approx(b.hr));
    CHECK(a.ndcg == doctest::Approx(b.ndcg));
    CHECK(a.mrr == doctest::Approx(b.mrr));
  }
  SUBCASE("missing target is a protocol error") {
    std::vector<std::vector<int>> rankings{{1, 2, 3}};
    std::vector<int> targets{9};
    CHECK_THROWS_AS(compute_metrics(rankings, targets, 2), std::runtime_error);
  }
}
