// Acceptance suite: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass criterion numbers as arguments to run
// a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "hdot/hdot.hpp"
#include "oracles.hpp"

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Closed form against the exact solver.
Outcome closed_form_vs_solver() {
  const auto start = Clock::now();
  std::mt19937_64 rng(hdot::derive_seed(0, "acceptance-1"));
  std::uniform_int_distribution<std::size_t> width(2, 32);
  const hdot::GroundTransform transforms[] = {hdot::GroundTransform::identity(), hdot::GroundTransform::power(2.0),
                                              hdot::GroundTransform::power(0.5), hdot::GroundTransform::huber(1.5)};
  double worst_loss = 0.0;
  double worst_plan = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const std::size_t n = width(rng);
    hdot::Matrix d;
    if (k % 2 == 0) {
      d = hdot::testing::random_ground(n, rng);
    } else {
      // Tree-induced ground matrix: n named leaves hung under a random tree.
      std::uniform_int_distribution<std::size_t> inner_size(1, 10);
      const std::size_t m = inner_size(rng);
      std::vector<std::pair<std::string, std::string>> edges;
      if (m > 1) {
        const auto inner = hdot::testing::random_tree(m, rng);
        for (const auto& e : inner.edges()) edges.emplace_back(inner.name(e.parent), inner.name(e.child));
      }
      std::uniform_int_distribution<std::size_t> attach(0, m - 1);
      for (std::size_t c = 0; c < n; ++c) edges.emplace_back("v" + std::to_string(attach(rng)), "leaf" + std::to_string(c));
      const auto t = hdot::Taxonomy::from_edges(edges);
      hdot::LevelIndex idx;
      for (std::size_t c = 0; c < n; ++c) idx.classes.push_back("leaf" + std::to_string(c));
      for (std::size_t c = 0; c < n; ++c) {
        idx.nodes.push_back(t.id(idx.classes[c]));
        idx.index[idx.classes[c]] = c;
      }
      d = hdot::build_ground_matrix(t, idx, transforms[static_cast<std::size_t>(k / 2) % 4]).entries();
    }
    const auto s = hdot::testing::random_histogram(n, rng);
    std::uniform_int_distribution<std::size_t> target(0, n - 1);
    const std::size_t j = target(rng);
    const double closed = hdot::one_hot_loss(s, j, d);
    const auto exact = hdot::solve_exact_ot(s, hdot::one_hot_target(s, j), d);
    worst_loss = std::max(worst_loss, std::abs(closed - exact.loss));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < n; ++c) {
        const double want = c == j ? s[i] : 0.0;
        worst_plan = std::max(worst_plan, std::abs(exact.plan(i, c) - want));
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst_loss < 1e-9 && worst_plan < 1e-9 && secs < 30.0,
          "1000 instances, max |loss diff| " + fmt("%.2e", worst_loss) + ", max plan deviation " +
              fmt("%.2e", worst_plan) + ", " + fmt("%.2f", secs) + " s"};
}

// 2. Analytic gradients against central differences.
Outcome gradient_checks() {
  const auto start = Clock::now();
  std::mt19937_64 rng(hdot::derive_seed(0, "acceptance-2"));
  std::normal_distribution<double> normal(0.0, 1.5);
  double worst_logit = 0.0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(k) % 15;
    const auto d = hdot::testing::random_ground(n, rng);
    const std::size_t j = static_cast<std::size_t>(k) % n;
    std::vector<double> z(n);
    for (double& x : z) x = normal(rng);
    const auto analytic = hdot::one_hot_loss_grad_logits(z, j, d);
    const auto numeric = hdot::testing::central_difference(
        [&](const std::vector<double>& v) { return hdot::one_hot_loss(hdot::softmax(v), j, d); }, z, 1e-5);
    worst_logit = std::max(worst_logit, hdot::testing::relative_error(analytic, numeric));
  }

  const hdot::Hierarchy h(hdot::Taxonomy::parse("root\tA\nroot\tB\nA\ta1\nA\ta2\nB\tb1\nB\tb2\n"));
  double worst_model = 0.0;
  for (int k = 0; k < 10; ++k) {
    auto m = hdot::LevelModel::initialized({4, 3, h.level_widths()},
                                           hdot::level_weights(h.num_levels(), hdot::WeightMode::eq3_magnitude),
                                           static_cast<std::uint64_t>(k));
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    auto p = m.params();
    for (std::size_t i = m.trunk_bias_offset(); i < m.trunk_bias_offset() + 3; ++i) p[i] = u(rng);
    std::vector<double> x(4);
    for (double& v : x) v = normal(rng);
    const std::size_t leaf = static_cast<std::size_t>(k) % 4;
    std::vector<double> analytic(m.num_params(), 0.0);
    hdot::accumulate_gradient(m, h, x, leaf, hdot::LossKind::dot, analytic);
    const std::vector<double> theta(m.params().begin(), m.params().end());
    const auto numeric = hdot::testing::central_difference(
        [&](const std::vector<double>& q) {
          auto probe = m;
          std::copy(q.begin(), q.end(), probe.params().begin());
          return hdot::combined_loss(probe, h, x, leaf);
        },
        theta, 1e-4);
    worst_model = std::max(worst_model, hdot::testing::relative_error(analytic, numeric));
  }
  const double secs = seconds_since(start);
  return {worst_logit < 1e-5 && worst_model < 1e-4 && secs < 30.0,
          "logit rel err " + fmt("%.2e", worst_logit) + " (100 instances), model rel err " +
              fmt("%.2e", worst_model) + " (10 tiny models), " + fmt("%.2f", secs) + " s"};
}

// 3. TIE is a tree metric that equals the shortest path length.
Outcome tie_axioms() {
  const auto start = Clock::now();
  std::mt19937_64 rng(hdot::derive_seed(0, "acceptance-3"));
  std::uniform_int_distribution<std::size_t> size(1, 50);
  std::size_t violations = 0;
  std::size_t pairs = 0;
  for (int k = 0; k < 200; ++k) {
    const auto t = hdot::testing::random_tree(std::max<std::size_t>(2, size(rng)), rng);
    const std::size_t n = t.size();
    std::vector<std::size_t> dist(n * n);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t d = t.tie_distance(a, b);
        dist[a * n + b] = d;
        ++pairs;
        if (d != hdot::testing::bfs_distance(t, a, b)) ++violations;
        if ((d == 0) != (a == b)) ++violations;
      }
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        if (dist[a * n + b] != dist[b * n + a]) ++violations;
        for (std::size_t c = 0; c < n; ++c) {
          if (dist[a * n + c] > dist[a * n + b] + dist[b * n + c]) ++violations;
        }
      }
    }
  }
  const double secs = seconds_since(start);
  return {violations == 0 && secs < 10.0,
          std::to_string(pairs) + " node pairs over 200 trees, " + std::to_string(violations) + " violations, " +
              fmt("%.2f", secs) + " s"};
}

// 4. The worked one-hot example on a four-leaf star.
Outcome worked_example() {
  const auto t = hdot::Taxonomy::parse("root\tc1\nroot\tc2\nroot\tc3\nroot\tc4\n");
  const auto level = hdot::make_level_index(t, 1);
  const auto d = hdot::build_ground_matrix(t, level);
  const std::vector<double> s{0.2, 0.2, 0.5, 0.1};
  const auto sol = hdot::solve_exact_ot(s, hdot::one_hot_target(s, 2), d);
  bool ok = std::abs(sol.loss - 1.0) <= 1e-12 && std::abs(hdot::one_hot_loss(s, 2, d) - 1.0) <= 1e-12;
  double moved = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (j != 2 && sol.plan(i, j) != 0.0) ok = false;
    }
    if (i != 2) {
      ok = ok && std::abs(sol.plan(i, 2) - s[i]) <= 1e-12;
      moved += sol.plan(i, 2);
    }
  }
  ok = ok && std::abs(sol.plan(2, 2) - 0.5) <= 1e-12;
  return {ok, "loss " + fmt("%.17g", sol.loss) + ", moved {" + fmt("%.3g", sol.plan(0, 2)) + ", " +
                  fmt("%.3g", sol.plan(1, 2)) + ", " + fmt("%.3g", sol.plan(3, 2)) + "} (total " +
                  fmt("%.3g", moved) + ") into column 3"};
}

// 5 and 6 share one comparison run on the benchmark configuration.
struct Benchmark {
  hdot::ComparisonReport report;
  double secs = 0.0;
};

const Benchmark& benchmark() {
  static const Benchmark b = [] {
    const auto start = Clock::now();
    const std::uint64_t master = 0;
    const auto data = hdot::generate(hdot::GenConfig::benchmark(master));
    hdot::ExperimentConfig cfg;
    cfg.trials = 10;
    cfg.seed = master;
    cfg.threads = 1;
    Benchmark out{hdot::run_comparison(data.taxonomy, data.data, cfg), 0.0};
    out.secs = seconds_since(start);
    return out;
  }();
  return b;
}

double pooled_se(const hdot::Stat& a, const hdot::Stat& b, std::size_t n) {
  return std::sqrt((a.std * a.std + b.std * b.std) / static_cast<double>(n));
}

std::string tie_of(const hdot::EvalReport& r) {
  return r.name + " " + fmt("%.4f", r.mean_tie.mean) + " +- " + fmt("%.4f", r.mean_tie.std);
}

Outcome dot_beats_ce() {
  const auto& b = benchmark();
  const auto& ce = b.report.row("CE");
  const auto& dot = b.report.row("DOT");
  const double se = pooled_se(ce.mean_tie, dot.mean_tie, ce.trials);
  const double gap = ce.mean_tie.mean - dot.mean_tie.mean;
  const double acc_gap = 100.0 * (dot.top1_accuracy.mean - ce.top1_accuracy.mean);
  const bool ok = gap > se && acc_gap >= -1.0 && b.secs < 600.0;
  return {ok, tie_of(dot) + " vs " + tie_of(ce) + ", CE - DOT = " + fmt("%.4f", gap) + " (pooled SE " +
                  fmt("%.4f", se) + "); top-1 DOT " + fmt("%.2f", 100.0 * dot.top1_accuracy.mean) + "% vs CE " +
                  fmt("%.2f", 100.0 * ce.top1_accuracy.mean) + "%; 10 trials x 4 methods in " +
                  fmt("%.0f", b.secs) + " s"};
}

Outcome ablation_order() {
  const auto& b = benchmark();
  const auto& dot = b.report.row("DOT");
  const auto& leaf = b.report.row("DOT-leaf-only");
  const auto& equal = b.report.row("DOT-equal");
  const bool ordered = dot.mean_tie.mean <= leaf.mean_tie.mean && dot.mean_tie.mean <= equal.mean_tie.mean;
  const double se = pooled_se(dot.mean_tie, leaf.mean_tie, dot.trials);
  const bool within = dot.mean_tie.mean - leaf.mean_tie.mean <= se;
  std::string detail = tie_of(dot) + ", " + tie_of(leaf) + ", " + tie_of(equal);
  detail += ordered ? "; ordering holds" : "; ordering fails, DOT - leaf-only = " +
                                               fmt("%.4f", dot.mean_tie.mean - leaf.mean_tie.mean) +
                                               " vs pooled SE " + fmt("%.4f", se);
  return {ordered || within, detail};
}

// 7. Repeated CLI invocations produce identical bytes.
Outcome cli_determinism() {
  namespace fs = std::filesystem;
  using hdot::testing::run_cli;
  const auto dir = hdot::testing::scratch_dir("acceptance-7");
  const auto tree = (dir / "tree.tsv").string();
  const auto data = (dir / "data.csv").string();
  std::vector<std::string> mismatched;
  int failures = 0;
  auto twice = [&](const std::string& name, const std::string& args, const std::vector<std::string>& files) {
    std::vector<std::string> outputs[2];
    for (int r = 0; r < 2; ++r) {
      for (const auto& f : files) fs::remove(dir / f);
      const auto res = run_cli(args);
      if (res.code != 0) ++failures;
      outputs[r].push_back(res.out);
      for (const auto& f : files) outputs[r].push_back(hdot::testing::slurp(dir / f));
    }
    if (outputs[0] != outputs[1]) mismatched.push_back(name);
  };
  const std::string gen = "gen --branching 3 --depth 2 --dim 8 --samples-per-leaf 30 --seed 7";
  twice("gen", gen + " -o " + data + " --out-tree " + tree, {"data.csv", "tree.tsv"});
  twice("tree", "tree " + tree + " --matrix --transform huber:1.5", {});
  const std::string train = "train --tree " + tree + " --data " + data + " --epochs 5 --hidden 32 --seed 7";
  twice("train", train + " -o " + (dir / "model.ckpt").string(), {"model.ckpt"});
  twice("train-ce", train + " --loss ce --weights leaf-only -o " + (dir / "ce.ckpt").string(), {"ce.ckpt"});
  for (const char* format : {"json", "table", "csv"}) {
    twice(std::string("eval-") + format,
          "eval --tree " + tree + " --data " + data + " --checkpoint " + (dir / "model.ckpt").string() +
              " --rows test --seed 7 --format " + format + " -o " + (dir / "eval.out").string(),
          {"eval.out"});
  }
  twice("compare", "compare --tree " + tree + " --data " + data +
                       " --trials 1 --seed 7 --epochs 5 --hidden 32 --format json -o " + (dir / "cmp.json").string(),
        {"cmp.json"});
  twice("compare-threads", "compare --tree " + tree + " --data " + data +
                               " --trials 2 --threads 2 --seed 7 --epochs 3 --hidden 16 -o " +
                               (dir / "cmp.txt").string(),
        {"cmp.txt"});
  std::string detail = "9 invocations run twice";
  if (failures) detail += ", " + std::to_string(failures) + " nonzero exits";
  for (const auto& m : mismatched) detail += ", differs: " + m;
  if (mismatched.empty() && !failures) detail += ", all outputs byte-identical";
  return {mismatched.empty() && failures == 0, detail};
}

// 8. Level weights against direct log arithmetic.
Outcome level_weight_formula() {
  double worst = 0.0;
  std::size_t checked = 0;
  for (std::size_t levels : {3u, 5u, 19u}) {
    for (std::size_t l = 1; l < levels; ++l) {
      const double direct = std::log(static_cast<double>(levels - l)) - std::log(static_cast<double>(levels));
      worst = std::max(worst, std::abs(hdot::level_weight(levels, l, hdot::WeightMode::eq3_literal) - direct));
      worst = std::max(worst, std::abs(hdot::level_weight(levels, l, hdot::WeightMode::eq3_magnitude) + direct));
      ++checked;
    }
  }
  return {worst <= 1e-12, std::to_string(checked) + " (|V|, l) pairs, max deviation " + fmt("%.2e", worst)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"closed-form loss equals exact transport", closed_form_vs_solver},
      {"gradient checks", gradient_checks},
      {"TIE metric axioms", tie_axioms},
      {"worked one-hot example", worked_example},
      {"DOT beats CE on mean TIE without losing accuracy", dot_beats_ce},
      {"level-weight ablation ordering", ablation_order},
      {"CLI determinism", cli_determinism},
      {"level weight formula", level_weight_formula},
  };
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (!only.empty() && !only.count(k + 1)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %zu: %s - %s: %s\n", k + 1, o.pass ? "PASS" : "FAIL", criteria[k].first,
                o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
