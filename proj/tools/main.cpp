#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "attention_ref.hpp"
#include "hmamba/config.hpp"
#include "hmamba/dataset.hpp"
#include "hmamba/errors.hpp"
#include "hmamba/geometry.hpp"
#include "hmamba/model.hpp"
#include "hmamba/rng.hpp"
#include "hmamba/ssm.hpp"
#include "hmamba/train.hpp"

namespace fs = std::filesystem;
using namespace hmamba;

namespace {

// Exit codes: 0 success, 1 check failure, 2 usage error, 3 data/IO error.
constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

void fill_defaults(RunConfig& cfg) {
  auto def = [&](const char* key, const std::string& v) {
    if (!cfg.has(key)) cfg.set(key, v);
  };
  def("seed", "7");
  def("threads", "1");
  def("out.dir", "runs");
  def("run.name", "run");
  def("data.path", "");
  def("data.max_seq_len", "50");
  def("data.min_user_len", "3");
  def("data.min_item_count", "1");
  def("model.variant", "full");
  def("model.d", "32");
  def("model.d_state", "32");
  def("model.expand", "1");
  def("model.conv_width", "2");
  def("model.n_layers", "1");
  def("model.k", "1");
  def("model.dropout", "0.1");
  def("tol.eps_arcosh", "1e-12");
  def("tol.eps_norm", "1e-12");
  def("train.epochs", "50");
  def("train.batch_size", "128");
  def("train.lr", "0.001");
  def("train.optimizer", "adam");
  def("train.grad_clip", "5");
  def("train.deterministic_timing", "true");
  def("eval.k_values", "10");
  def("eval.buckets", "");
  def("eval.split", "test");
  def("bench.lengths", "256,512,1024,2048,4096,8192");
  def("bench.reps", "10");
  def("bench.warmup", "3");
  def("bench.variants", "full,half,euclidean,attention");
  def("bench.d", "32");
  def("bench.d_state", "8");
  def("bench.vocab", "1000");
  def("gradcheck.d", "4");
  def("gradcheck.d_state", "4");
  def("gradcheck.seq_len", "6");
  def("gradcheck.vocab", "20");
  def("synth.depth", "3");
  def("synth.branching", "3");
  def("synth.users", "500");
  def("synth.seq_len", "20");
}

/// Output root precedence: --out flag (already in cfg) > HMAMBA_OUT > config.
fs::path resolve_run_dir(const RunConfig& cfg, bool out_flag_given) {
  std::string root = cfg.get_str("out.dir", "runs");
  if (!out_flag_given) {
    if (const char* env = std::getenv("HMAMBA_OUT")) root = env;
  }
  return fs::path(root) / cfg.get_str("run.name", "run");
}

ModelConfig model_config_from(const RunConfig& cfg, int vocab_size) {
  ModelConfig mc;
  mc.variant = variant_from_string(cfg.get_str("model.variant", "full"));
  mc.d = static_cast<int>(cfg.get_int("model.d", 32));
  mc.d_state = static_cast<int>(cfg.get_int("model.d_state", 32));
  mc.expand = static_cast<int>(cfg.get_int("model.expand", 1));
  mc.conv_width = static_cast<int>(cfg.get_int("model.conv_width", 2));
  mc.n_layers = static_cast<int>(cfg.get_int("model.n_layers", 1));
  mc.k = cfg.get_double("model.k", 1.0);
  mc.dropout = cfg.get_double("model.dropout", 0.1);
  mc.max_seq_len = static_cast<int>(cfg.get_int("data.max_seq_len", 50));
  mc.vocab_size = vocab_size;
  mc.tol = Tolerance(cfg.get_double("tol.eps_arcosh", 1e-12),
                     cfg.get_double("tol.eps_norm", 1e-12));
  mc.validate();
  return mc;
}

SequenceDataset load_and_build(const RunConfig& cfg) {
  std::string path = cfg.get_str("data.path", "");
  if (path.empty()) {
    throw std::invalid_argument("no dataset given (set --data or data.path)");
  }
  InteractionLog log = load_interactions(path);
  if (log.malformed_rows > 0) {
    std::cerr << "warning: skipped " << log.malformed_rows << " malformed rows in " << path
              << "\n";
  }
  return build_sequences(log, static_cast<int>(cfg.get_int("data.min_user_len", 3)),
                         static_cast<int>(cfg.get_int("data.min_item_count", 1)),
                         static_cast<int>(cfg.get_int("data.max_seq_len", 50)));
}

std::string metrics_report(const EvalResult& res, const EvalOptions& opts) {
  std::string out;
  char buf[160];
  const char* names[3] = {"HR", "NDCG", "MRR"};
  for (std::size_t i = 0; i < res.at_k.size(); ++i) {
    const Metrics& m = res.at_k[i];
    double vals[3] = {m.hr, m.ndcg, m.mrr};
    for (int j = 0; j < 3; ++j) {
      std::snprintf(buf, sizeof(buf), "metric=%s k=%d value=%.6f n_users=%d\n", names[j], m.k,
                    vals[j], m.n_users);
      out += buf;
    }
  }
  for (const auto& b : res.buckets) {
    double vals[3] = {b.metrics.hr, b.metrics.ndcg, b.metrics.mrr};
    for (int j = 0; j < 3; ++j) {
      std::snprintf(buf, sizeof(buf), "bucket=%s metric=%s k=%d value=%.6f n_users=%d\n",
                    b.label.c_str(), names[j], b.metrics.k, vals[j], b.metrics.n_users);
      out += buf;
    }
  }
  (void)opts;
  return out;
}

void print_metrics_table(const EvalResult& res) {
  std::fprintf(stderr, "%-8s %10s %10s %10s %8s\n", "cutoff", "HR", "NDCG", "MRR", "users");
  for (const auto& m : res.at_k) {
    std::fprintf(stderr, "@%-7d %10.4f %10.4f %10.4f %8d\n", m.k, m.hr, m.ndcg, m.mrr,
                 m.n_users);
  }
}

int cmd_train(RunConfig& cfg, bool out_flag_given) {
  SequenceDataset data = load_and_build(cfg);
  ModelConfig mc = model_config_from(cfg, data.vocab_size());
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 7));
  ModelState state = ModelState::init(mc, seed);

  fs::path dir = resolve_run_dir(cfg, out_flag_given);
  fs::create_directories(dir);
  cfg.set_int("model.vocab_size.resolved", mc.vocab_size);
  cfg.save((dir / "resolved.cfg").string());

  TrainOptions topts;
  topts.epochs = static_cast<int>(cfg.get_int("train.epochs", 50));
  topts.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 128));
  topts.grad_clip = cfg.get_double("train.grad_clip", 5.0);
  topts.seed = seed;
  topts.deterministic_timing = cfg.get_bool("train.deterministic_timing", true);

  OptimizerState opt;
  opt.kind = optimizer_from_string(cfg.get_str("train.optimizer", "adam"));
  opt.lr = cfg.get_double("train.lr", 1e-3);

  std::ofstream log(dir / "train_log.txt", std::ios::trunc);
  if (!log) throw DataError("cannot write training log in " + dir.string());
  for (int e = 1; e <= topts.epochs; ++e) {
    auto t0 = std::chrono::steady_clock::now();
    EpochReport r = train_epoch(state, data, opt, topts, e);
    auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log << format_epoch_report(r) << "\n";
    std::fprintf(stderr, "epoch %d/%d mean_loss=%.6f (%.2fs)\n", e, topts.epochs, r.mean_loss,
                 dt);
  }
  log.close();
  save_checkpoint(state, (dir / "checkpoint.hmc").string());
  std::fprintf(stderr, "checkpoint written to %s\n", (dir / "checkpoint.hmc").c_str());
  return kExitOk;
}

int cmd_eval(RunConfig& cfg, bool out_flag_given, const std::string& checkpoint_path) {
  if (checkpoint_path.empty()) {
    throw std::invalid_argument("eval needs --checkpoint");
  }
  ModelState state = load_checkpoint(checkpoint_path);
  SequenceDataset data = load_and_build(cfg);
  if (data.vocab_size() != state.cfg.vocab_size) {
    throw DataError("checkpoint/config mismatch: checkpoint vocabulary " +
                    std::to_string(state.cfg.vocab_size) + " vs dataset " +
                    std::to_string(data.vocab_size()));
  }
  if (static_cast<int>(cfg.get_int("data.max_seq_len", 50)) != state.cfg.max_seq_len) {
    throw DataError("checkpoint/config mismatch: max_seq_len differs");
  }

  EvalOptions eopts;
  eopts.ks = cfg.get_int_list("eval.k_values", {10});
  std::string split = cfg.get_str("eval.split", "test");
  if (split != "test" && split != "val") {
    throw std::invalid_argument("eval.split must be 'test' or 'val'");
  }
  eopts.use_test = split == "test";
  eopts.threads = static_cast<int>(cfg.get_int("threads", 1));
  if (cfg.get_str("eval.buckets", "") != "") {
    eopts.bucket_bounds = cfg.get_int_list("eval.buckets", {});
  }

  EvalResult res = evaluate(state, data, eopts);

  fs::path dir = resolve_run_dir(cfg, out_flag_given);
  fs::create_directories(dir);
  cfg.save((dir / "resolved.cfg").string());
  std::string report = metrics_report(res, eopts);
  std::ofstream f(dir / "metrics.txt", std::ios::trunc);
  f << report;
  f.close();
  std::fputs(report.c_str(), stdout);
  print_metrics_table(res);
  return kExitOk;
}

int cmd_bench(RunConfig& cfg, bool out_flag_given) {
  std::vector<int> lengths = cfg.get_int_list("bench.lengths", {256, 512, 1024, 2048, 4096, 8192});
  int reps = static_cast<int>(cfg.get_int("bench.reps", 10));
  int warmup = static_cast<int>(cfg.get_int("bench.warmup", 3));
  int d = static_cast<int>(cfg.get_int("bench.d", 32));
  int d_state = static_cast<int>(cfg.get_int("bench.d_state", 8));
  int vocab = static_cast<int>(cfg.get_int("bench.vocab", 1000));
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 7));

  std::vector<std::string> variants;
  {
    std::string raw = cfg.get_str("bench.variants", "full,half,euclidean,attention");
    std::string cur;
    for (char ch : raw + ",") {
      if (ch == ',') {
        if (!cur.empty()) variants.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
  }

  std::string csv = "variant,L,mean_ms,std_ms,reps\n";
  char buf[160];
  volatile double sink = 0.0;
  for (const std::string& variant : variants) {
    for (int L : lengths) {
      Rng rng(seed + L);
      std::vector<double> times_ms;
      auto run_once = [&]() -> double {
        auto t0 = std::chrono::steady_clock::now();
        if (variant == "attention") {
          Tensor x(L, d);
          for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
          sink = sink + bench::attention_reference_forward(x);
        } else if (variant == "kernel") {
          // the plain time-invariant scan kernel
          std::vector<DiscretizedStep> steps(L);
          Tensor c(d, d_state);
          for (std::size_t i = 0; i < c.size(); ++i) c[i] = rng.normal();
          Tensor x(L, d);
          for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
          DiscretizedStep step;
          for (int n = 0; n < d_state; ++n) {
            step.a_bar.push_back(std::exp(-0.01 * (n + 1)));
            step.b_bar_x.push_back(0.01 * rng.normal());
          }
          step.delta = 0.01;
          std::vector<Tensor> cs(L, c);
          for (auto& s : steps) s = step;
          t0 = std::chrono::steady_clock::now();
          Tensor y = ssm_scan(steps, cs, x);
          sink = sink + y(L - 1, 0);
        } else {
          ModelConfig mc;
          mc.variant = variant_from_string(variant);
          mc.d = d;
          mc.d_state = d_state;
          mc.expand = 1;
          mc.conv_width = 2;
          mc.n_layers = 1;
          mc.k = 1.0;
          mc.dropout = 0.0;
          mc.max_seq_len = L;
          mc.vocab_size = vocab;
          ModelState state = ModelState::init(mc, seed);
          std::vector<int> ids(L);
          for (int i = 0; i < L; ++i) {
            ids[i] = 1 + static_cast<int>(rng.uniform_int(vocab - 1));
          }
          t0 = std::chrono::steady_clock::now();
          Forward f(state);
          int enc = f.encode(ids);
          sink = sink + f.tape().val(enc)(L - 1, 0);
        }
        auto t1 = std::chrono::steady_clock::now();
        return std::chrono::duration<double, std::milli>(t1 - t0).count();
      };
      for (int w = 0; w < warmup; ++w) run_once();
      for (int rpt = 0; rpt < reps; ++rpt) times_ms.push_back(run_once());
      double mean = 0.0;
      for (double v : times_ms) mean += v;
      mean /= times_ms.size();
      double var = 0.0;
      for (double v : times_ms) var += (v - mean) * (v - mean);
      double sd = std::sqrt(var / times_ms.size());
      std::snprintf(buf, sizeof(buf), "%s,%d,%.4f,%.4f,%d\n", variant.c_str(), L, mean, sd,
                    reps);
      csv += buf;
      std::fprintf(stderr, "bench %-10s L=%-6d %.3f ms (+- %.3f)\n", variant.c_str(), L, mean,
                   sd);
    }
  }
  fs::path dir = resolve_run_dir(cfg, out_flag_given);
  fs::create_directories(dir);
  cfg.save((dir / "resolved.cfg").string());
  std::ofstream f(dir / "bench.csv", std::ios::trunc);
  f << csv;
  f.close();
  std::fputs(csv.c_str(), stdout);
  return kExitOk;
}

int cmd_gradcheck(RunConfig& cfg, const std::string& only_variant, bool inject_fault) {
  ModelConfig mc;
  mc.d = static_cast<int>(cfg.get_int("gradcheck.d", 4));
  mc.d_state = static_cast<int>(cfg.get_int("gradcheck.d_state", 4));
  mc.expand = 1;
  mc.conv_width = 2;
  mc.n_layers = 1;
  mc.k = cfg.get_double("model.k", 1.0);
  mc.dropout = 0.0;
  mc.max_seq_len = static_cast<int>(cfg.get_int("gradcheck.seq_len", 6));
  mc.vocab_size = static_cast<int>(cfg.get_int("gradcheck.vocab", 20));
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 7));

  std::vector<std::string> variants = {"full", "half", "euclidean"};
  if (!only_variant.empty()) variants = {only_variant};

  bool all_pass = true;
  for (const std::string& v : variants) {
    mc.variant = variant_from_string(v);
    GradCheckReport rep = gradcheck(mc, seed, inject_fault);
    std::printf("variant %s\n", v.c_str());
    for (const auto& g : rep.groups) {
      std::printf("  group %-22s max_rel_err %.3e %s\n", g.name.c_str(), g.max_err,
                  g.max_err <= rep.threshold ? "ok" : "FAIL");
    }
    std::printf("variant %s worst: %s (%.3e) -> %s\n", v.c_str(), rep.worst_group.c_str(),
                rep.worst_err, rep.pass ? "PASS" : "FAIL");
    all_pass = all_pass && rep.pass;
  }
  return all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_synth(RunConfig& cfg, bool out_flag_given, const std::string& data_out) {
  int depth = static_cast<int>(cfg.get_int("synth.depth", 3));
  int branching = static_cast<int>(cfg.get_int("synth.branching", 3));
  int users = static_cast<int>(cfg.get_int("synth.users", 500));
  int seq_len = static_cast<int>(cfg.get_int("synth.seq_len", 20));
  std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed", 7));

  SyntheticDataset ds = synth_hierarchical_dataset(seed, depth, branching, users, seq_len);

  fs::path csv_path;
  if (!data_out.empty()) {
    csv_path = data_out;
    if (csv_path.has_parent_path()) fs::create_directories(csv_path.parent_path());
  } else {
    fs::path dir = resolve_run_dir(cfg, out_flag_given);
    fs::create_directories(dir);
    cfg.save((dir / "resolved.cfg").string());
    csv_path = dir / "synthetic.csv";
  }
  std::ofstream f(csv_path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + csv_path.string());
  f << "user_id,item_id,timestamp\n";
  for (const auto& r : ds.log.records) {
    f << r.user_id << "," << r.item_id << "," << r.timestamp << "\n";
  }
  f.close();

  fs::path tree_path = csv_path;
  tree_path.replace_extension(".tree.txt");
  std::ofstream tf(tree_path, std::ios::trunc);
  save_tree(ds.tree, tf);
  tf.close();
  std::fprintf(stderr, "wrote %zu interactions to %s (tree: %s)\n", ds.log.records.size(),
               csv_path.c_str(), tree_path.c_str());
  return kExitOk;
}

int cmd_export_embeddings(RunConfig& cfg, bool out_flag_given,
                          const std::string& checkpoint_path, const std::string& out_file) {
  if (checkpoint_path.empty()) {
    throw std::invalid_argument("export-embeddings needs --checkpoint");
  }
  ModelState state = load_checkpoint(checkpoint_path);
  const Tensor& emb = state.param("embedding");

  fs::path path;
  if (!out_file.empty()) {
    path = out_file;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
  } else {
    fs::path dir = resolve_run_dir(cfg, out_flag_given);
    fs::create_directories(dir);
    path = dir / "embeddings.csv";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  char num[48];
  bool poincare = state.cfg.variant == Variant::Full;
  // padding id 0 stays out of the export
  for (int id = 1; id < state.cfg.vocab_size; ++id) {
    std::vector<double> coords;
    if (poincare) {
      LorentzPoint p = exp_map_origin(lift(emb.row_span(id), state.cfg.curvature()));
      coords = project_to_poincare(p);
    } else {
      auto row = emb.row_span(id);
      coords.assign(row.begin(), row.end());
    }
    f << id;
    for (double c : coords) {
      std::snprintf(num, sizeof(num), "%.12g", c);
      f << "," << num;
    }
    f << "\n";
  }
  f.close();
  std::fprintf(stderr, "wrote %d embedding rows to %s\n", state.cfg.vocab_size - 1,
               path.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hmamba: hyperbolic selective state-space sequential recommender"};
  app.require_subcommand(1);

  std::string config_path, out_dir, run_name, checkpoint, data_path, variant, optimizer;
  std::string split, data_out, out_file, bench_variants, k_values, buckets, only_variant;
  long seed = -1, threads = -1, epochs = -1, batch = -1, d = -1, d_state = -1, expand = -1;
  long conv_width = -1, layers = -1, max_seq_len = -1;
  double lr = -1, kcurv = -1, dropout = -1, grad_clip = -1;
  bool inject_fault = false;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "config file (flat dotted keys)");
    sub->add_option("--out", out_dir, "output root directory");
    sub->add_option("--name", run_name, "run name (subdirectory of the output root)");
    sub->add_option("--seed", seed, "RNG seed");
    sub->add_option("--threads", threads, "evaluation threads");
  };
  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--variant", variant, "model variant: full|half|euclidean");
    sub->add_option("--d", d, "embedding dimension");
    sub->add_option("--d-state", d_state, "SSM state dimension");
    sub->add_option("--expand", expand, "inner width multiplier (euclidean block)");
    sub->add_option("--conv-width", conv_width, "local convolution width");
    sub->add_option("--layers", layers, "encoder layers");
    sub->add_option("--curvature-k", kcurv, "hyperboloid parameter k > 0");
    sub->add_option("--dropout", dropout, "dropout rate");
    sub->add_option("--max-seq-len", max_seq_len, "sequence window length");
  };

  CLI::App* train = app.add_subcommand("train", "train a model");
  add_common(train);
  add_model(train);
  train->add_option("--data", data_path, "interactions CSV");
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--batch-size", batch, "sequences per optimizer step");
  train->add_option("--lr", lr, "learning rate");
  train->add_option("--optimizer", optimizer, "adam|sgd|sgd1t");
  train->add_option("--grad-clip", grad_clip, "global gradient-norm clip (<=0 disables)");

  CLI::App* evalc = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(evalc);
  evalc->add_option("--data", data_path, "interactions CSV");
  evalc->add_option("--checkpoint", checkpoint, "checkpoint file");
  evalc->add_option("--k-values", k_values, "comma-separated cutoffs, e.g. 5,10");
  evalc->add_option("--buckets", buckets, "training-length bucket bounds, e.g. 100,200,300");
  evalc->add_option("--split", split, "test|val");
  evalc->add_option("--max-seq-len", max_seq_len, "sequence window length");

  CLI::App* bench = app.add_subcommand("bench", "runtime scaling benchmark");
  add_common(bench);
  std::string bench_lengths;
  bench->add_option("--lengths", bench_lengths, "comma-separated sequence lengths");
  bench->add_option("--variants", bench_variants,
                    "comma-separated: full,half,euclidean,kernel,attention");
  long bench_reps = -1, bench_warmup = -1, bench_d = -1, bench_d_state = -1;
  bench->add_option("--reps", bench_reps, "measured repetitions");
  bench->add_option("--warmup", bench_warmup, "warmup repetitions");
  bench->add_option("--bench-d", bench_d, "embedding dimension for the benchmark");
  bench->add_option("--bench-d-state", bench_d_state, "state dimension for the benchmark");

  CLI::App* gradcheckc = app.add_subcommand("gradcheck", "finite-difference gradient check");
  add_common(gradcheckc);
  gradcheckc->add_option("--variant", only_variant, "restrict to one variant");
  gradcheckc->add_option("--curvature-k", kcurv, "hyperboloid parameter k > 0");
  gradcheckc->add_flag("--inject-fault", inject_fault,
                       "corrupt one gradient group (failure-path test hook)");

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic hierarchical dataset");
  add_common(synth);
  long s_depth = -1, s_branch = -1, s_users = -1, s_len = -1;
  synth->add_option("--depth", s_depth, "tree depth");
  synth->add_option("--branching", s_branch, "tree branching factor");
  synth->add_option("--users", s_users, "number of users");
  synth->add_option("--seq-len", s_len, "interactions per user");
  synth->add_option("--data-out", data_out, "output CSV path");

  CLI::App* exportc = app.add_subcommand("export-embeddings", "write item coordinates as CSV");
  add_common(exportc);
  exportc->add_option("--checkpoint", checkpoint, "checkpoint file");
  exportc->add_option("--out-file", out_file, "output CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge_file(config_path);
    fill_defaults(cfg);

    CLI::App* sub = app.get_subcommands().front();
    auto given = [&](const char* name) { return sub->count(name) > 0; };

    if (given("--out")) cfg.set("out.dir", out_dir);
    if (given("--name")) cfg.set("run.name", run_name);
    if (given("--seed")) cfg.set_int("seed", seed);
    if (given("--threads")) cfg.set_int("threads", threads);

    const std::string name = sub->get_name();
    if (name == "train" || name == "eval") {
      if (given("--data")) cfg.set("data.path", data_path);
      if (given("--max-seq-len")) cfg.set_int("data.max_seq_len", max_seq_len);
    }
    if (name == "train") {
      if (given("--variant")) cfg.set("model.variant", variant);
      if (given("--d")) cfg.set_int("model.d", d);
      if (given("--d-state")) cfg.set_int("model.d_state", d_state);
      if (given("--expand")) cfg.set_int("model.expand", expand);
      if (given("--conv-width")) cfg.set_int("model.conv_width", conv_width);
      if (given("--layers")) cfg.set_int("model.n_layers", layers);
      if (given("--curvature-k")) cfg.set_double("model.k", kcurv);
      if (given("--dropout")) cfg.set_double("model.dropout", dropout);
      if (given("--epochs")) cfg.set_int("train.epochs", epochs);
      if (given("--batch-size")) cfg.set_int("train.batch_size", batch);
      if (given("--lr")) cfg.set_double("train.lr", lr);
      if (given("--optimizer")) cfg.set("train.optimizer", optimizer);
      if (given("--grad-clip")) cfg.set_double("train.grad_clip", grad_clip);
      return cmd_train(cfg, given("--out"));
    }
    if (name == "eval") {
      if (given("--k-values")) cfg.set("eval.k_values", k_values);
      if (given("--buckets")) cfg.set("eval.buckets", buckets);
      if (given("--split")) cfg.set("eval.split", split);
      return cmd_eval(cfg, given("--out"), checkpoint);
    }
    if (name == "bench") {
      if (given("--lengths")) cfg.set("bench.lengths", bench_lengths);
      if (given("--variants")) cfg.set("bench.variants", bench_variants);
      if (given("--reps")) cfg.set_int("bench.reps", bench_reps);
      if (given("--warmup")) cfg.set_int("bench.warmup", bench_warmup);
      if (given("--bench-d")) cfg.set_int("bench.d", bench_d);
      if (given("--bench-d-state")) cfg.set_int("bench.d_state", bench_d_state);
      return cmd_bench(cfg, given("--out"));
    }
    if (name == "gradcheck") {
      if (given("--curvature-k")) cfg.set_double("model.k", kcurv);
      return cmd_gradcheck(cfg, only_variant, inject_fault);
    }
    if (name == "synth") {
      if (given("--depth")) cfg.set_int("synth.depth", s_depth);
      if (given("--branching")) cfg.set_int("synth.branching", s_branch);
      if (given("--users")) cfg.set_int("synth.users", s_users);
      if (given("--seq-len")) cfg.set_int("synth.seq_len", s_len);
      return cmd_synth(cfg, given("--out"), data_out);
    }
    if (name == "export-embeddings") {
      return cmd_export_embeddings(cfg, given("--out"), checkpoint, out_file);
    }
    std::cerr << "unknown subcommand\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}
