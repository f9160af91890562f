#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "hdot/dataset.hpp"
#include "hdot/error.hpp"
#include "hdot/model.hpp"
#include "hdot/taxonomy.hpp"

namespace hdot {

/// Mean TIE between predicted and true nodes.
inline double mean_tie(const Taxonomy& t, std::span<const Taxonomy::NodeId> predictions,
                       std::span<const Taxonomy::NodeId> labels) {
  if (predictions.size() != labels.size()) throw InvalidArgument("prediction / label length mismatch");
  if (predictions.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += static_cast<double>(t.tie_distance(predictions[i], labels[i]));
  }
  return total / static_cast<double>(predictions.size());
}

/// Same, over leaf-level class indices of a hierarchy.
inline double mean_tie(const Hierarchy& h, std::span<const std::size_t> predictions,
                       std::span<const std::size_t> labels) {
  if (predictions.size() != labels.size()) throw InvalidArgument("prediction / label length mismatch");
  if (predictions.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    total += static_cast<double>(h.leaf_tie(predictions[i], labels[i]));
  }
  return total / static_cast<double>(predictions.size());
}

/// True when `label` is among the k best scores; equal scores rank the
/// lower index first.
inline bool in_top_k(std::span<const double> scores, std::size_t label, std::size_t k) {
  std::size_t rank = 0;
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] > scores[label] || (scores[j] == scores[label] && j < label)) ++rank;
  }
  return rank < k;
}

/// Fraction of samples whose label is not among the k highest scores.
inline double topk_error(const std::vector<std::vector<double>>& scores,
                         std::span<const std::size_t> labels, std::size_t k) {
  if (scores.size() != labels.size()) throw InvalidArgument("score / label length mismatch");
  if (scores.empty()) return 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (k < 1 || k > scores[i].size()) throw InvalidArgument("k out of range");
    if (labels[i] >= scores[i].size()) throw InvalidArgument("label index out of range");
  }
  std::size_t misses = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!in_top_k(scores[i], labels[i], k)) ++misses;
  }
  return static_cast<double>(misses) / static_cast<double>(scores.size());
}

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single value
};

inline Stat summarize(std::span<const double> xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct TrialMetrics {
  std::size_t trial = 0;
  std::uint64_t split_hash = 0;
  std::size_t best_epoch = 0;
  double mean_tie = 0.0;
  double top1_accuracy = 0.0;
  std::map<std::size_t, double> topk_error;
};

struct EvalReport {
  std::string name;
  std::size_t trials = 0;
  Stat mean_tie;
  Stat top1_accuracy;
  std::map<std::size_t, Stat> topk_error;
  std::vector<std::string> classes;
  std::vector<std::size_t> confusion;  // row = true leaf, column = predicted, summed over trials
  std::vector<TrialMetrics> per_trial;
};

/// Scores every row of `ds` with the leaf head; adds to `confusion` if given.
inline TrialMetrics evaluate_model(const LevelModel& m, const Hierarchy& h, const Dataset& ds,
                                   std::span<const std::size_t> ks,
                                   std::vector<std::size_t>* confusion = nullptr) {
  const auto labels = h.encode(ds);
  const std::size_t n = h.num_leaves();
  std::vector<std::vector<double>> scores;
  std::vector<std::size_t> preds;
  scores.reserve(ds.size());
  ForwardPass fp;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    forward_into(m, ds.row(i), fp);
    scores.push_back(fp.probs.back());
    preds.push_back(argmax(std::span<const double>(scores.back())));
  }
  TrialMetrics t;
  t.mean_tie = mean_tie(h, preds, labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i] == labels[i];
  t.top1_accuracy = preds.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(preds.size());
  for (auto k : ks) {
    if (k >= 1 && k <= n) t.topk_error[k] = topk_error(scores, labels, k);
  }
  if (confusion) {
    confusion->resize(n * n, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) ++(*confusion)[labels[i] * n + preds[i]];
  }
  return t;
}

inline EvalReport make_report(std::string name, const Hierarchy& h, std::vector<TrialMetrics> trials,
                              std::vector<std::size_t> confusion) {
  std::sort(trials.begin(), trials.end(),
            [](const TrialMetrics& a, const TrialMetrics& b) { return a.trial < b.trial; });
  EvalReport r;
  r.name = std::move(name);
  r.trials = trials.size();
  std::vector<double> ties;
  std::vector<double> accs;
  std::map<std::size_t, std::vector<double>> topk;
  for (const auto& t : trials) {
    ties.push_back(t.mean_tie);
    accs.push_back(t.top1_accuracy);
    for (const auto& [k, e] : t.topk_error) topk[k].push_back(e);
  }
  r.mean_tie = summarize(ties);
  r.top1_accuracy = summarize(accs);
  for (const auto& [k, es] : topk) r.topk_error[k] = summarize(es);
  r.classes = h.leaf_level().classes;
  r.confusion = std::move(confusion);
  r.per_trial = std::move(trials);
  return r;
}

struct ExperimentConfig {
  TrainConfig train;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::vector<std::size_t> ks{1, 2, 5, 10};
  std::size_t threads = 1;
};

/// Split seed and training seed of trial `k`, both derived from the master
/// seed so every method sees the same splits and initializations.
inline std::uint64_t trial_split_seed(std::uint64_t master, std::size_t k) {
  return derive_seed(master, "split", k);
}
inline std::uint64_t trial_train_seed(std::uint64_t master, std::size_t k) {
  return derive_seed(master, "train", k);
}

inline TrialMetrics run_trial(const Hierarchy& h, const Dataset& data, const ExperimentConfig& cfg,
                              std::size_t k, std::vector<std::size_t>* confusion) {
  const Split split = split_50_30_20(data.size(), trial_split_seed(cfg.seed, k));
  const Dataset train_set = data.subset(split.train);
  const Dataset val_set = data.subset(split.val);
  const Dataset test_set = data.subset(split.test);
  TrainConfig tc = cfg.train;
  tc.seed = trial_train_seed(cfg.seed, k);
  LevelModel m = make_model(h, data.dim, tc);
  const TrainResult tr = train(m, h, train_set, tc, &val_set);
  TrialMetrics t = evaluate_model(m, h, test_set, cfg.ks, confusion);
  t.trial = k;
  t.split_hash = split.hash();
  t.best_epoch = tr.best_epoch;
  return t;
}

/// Repeats split / train / test `trials` times. Trials are independent and
/// may run on several threads; results are reduced in trial order.
inline EvalReport run_trials(std::string name, const Taxonomy& taxonomy, const Dataset& data,
                             const ExperimentConfig& cfg) {
  if (cfg.trials < 1) throw InvalidArgument("trials must be >= 1");
  cfg.train.validate();
  const Hierarchy h(taxonomy, cfg.train.transform);
  h.encode(data);
  split_50_30_20(data.size(), 0);

  std::vector<TrialMetrics> results(cfg.trials);
  std::vector<std::vector<std::size_t>> confusions(cfg.trials);
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.trials));
  if (workers == 1) {
    for (std::size_t k = 0; k < cfg.trials; ++k) results[k] = run_trial(h, data, cfg, k, &confusions[k]);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < cfg.trials; k += workers) {
            results[k] = run_trial(h, data, cfg, k, &confusions[k]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  std::vector<std::size_t> confusion(h.num_leaves() * h.num_leaves(), 0);
  for (const auto& c : confusions) {
    for (std::size_t i = 0; i < c.size(); ++i) confusion[i] += c[i];
  }
  return make_report(std::move(name), h, std::move(results), std::move(confusion));
}

struct Method {
  std::string name;
  LossKind loss;
  WeightMode weights;
};

/// Rows of the loss comparison: flat cross-entropy, multi-level DOT with
/// information-gain weights, and the two DOT ablations.
inline std::vector<Method> comparison_methods() {
  return {{"CE", LossKind::ce, WeightMode::leaf_only},
          {"DOT", LossKind::dot, WeightMode::eq3_magnitude},
          {"DOT-leaf-only", LossKind::dot, WeightMode::leaf_only},
          {"DOT-equal", LossKind::dot, WeightMode::uniform}};
}

struct ComparisonReport {
  std::vector<EvalReport> rows;
  bool splits_shared = true;

  const EvalReport& row(std::string_view name) const {
    for (const auto& r : rows) {
      if (r.name == name) return r;
    }
    throw InvalidArgument("no comparison row '" + std::string(name) + "'");
  }
};

inline ComparisonReport run_comparison(const Taxonomy& taxonomy, const Dataset& data,
                                       const ExperimentConfig& base,
                                       const std::vector<Method>& methods = comparison_methods()) {
  ComparisonReport out;
  for (const auto& method : methods) {
    ExperimentConfig cfg = base;
    cfg.train.loss = method.loss;
    cfg.train.weights = method.weights;
    out.rows.push_back(run_trials(method.name, taxonomy, data, cfg));
  }
  for (const auto& r : out.rows) {
    for (std::size_t k = 0; k < r.per_trial.size(); ++k) {
      if (r.per_trial[k].split_hash != out.rows.front().per_trial[k].split_hash) out.splits_shared = false;
    }
  }
  if (!out.splits_shared) throw NumericError("comparison rows were evaluated on different splits");
  return out;
}

// ---------------------------------------------------------------------------
// Formatting

inline std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline nlohmann::ordered_json to_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["trials"] = r.trials;
  j["mean_tie"] = {{"mean", r.mean_tie.mean}, {"std", r.mean_tie.std}};
  j["top1_accuracy"] = {{"mean", r.top1_accuracy.mean}, {"std", r.top1_accuracy.std}};
  auto& topk = j["topk_error"] = nlohmann::ordered_json::object();
  for (const auto& [k, s] : r.topk_error) topk[std::to_string(k)] = {{"mean", s.mean}, {"std", s.std}};
  j["classes"] = r.classes;
  j["confusion"] = r.confusion;
  auto& trials = j["per_trial"] = nlohmann::ordered_json::array();
  for (const auto& t : r.per_trial) {
    nlohmann::ordered_json tj;
    tj["trial"] = t.trial;
    tj["split_hash"] = hex64(t.split_hash);
    tj["best_epoch"] = t.best_epoch;
    tj["mean_tie"] = t.mean_tie;
    tj["top1_accuracy"] = t.top1_accuracy;
    for (const auto& [k, e] : t.topk_error) tj["topk_error"][std::to_string(k)] = e;
    trials.push_back(std::move(tj));
  }
  return j;
}

inline nlohmann::ordered_json to_json(const ComparisonReport& c) {
  nlohmann::ordered_json j;
  j["splits_shared"] = c.splits_shared;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& r : c.rows) rows.push_back(to_json(r));
  return j;
}

namespace detail {
inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}
}  // namespace detail

inline std::string to_table(const std::vector<const EvalReport*>& rows) {
  std::size_t name_w = 6;
  for (const auto* r : rows) name_w = std::max(name_w, r->name.size());
  std::string out = detail::pad("method", name_w + 2) + detail::pad("mean TIE", 20) +
                    detail::pad("top-1 acc", 20) + "trials\n";
  for (const auto* r : rows) {
    out += detail::pad(r->name, name_w + 2);
    out += detail::pad(detail::fixed(r->mean_tie.mean, 4) + " +- " + detail::fixed(r->mean_tie.std, 4), 20);
    out += detail::pad(detail::fixed(100.0 * r->top1_accuracy.mean, 2) + "% +- " +
                           detail::fixed(100.0 * r->top1_accuracy.std, 2),
                       20);
    out += std::to_string(r->trials) + "\n";
  }
  return out;
}

inline std::string to_table(const EvalReport& r) {
  std::string out = to_table(std::vector<const EvalReport*>{&r});
  for (const auto& [k, s] : r.topk_error) {
    out += "top-" + std::to_string(k) + " error: " + detail::fixed(100.0 * s.mean, 2) + "%\n";
  }
  return out;
}

inline std::string to_table(const ComparisonReport& c) {
  std::vector<const EvalReport*> rows;
  for (const auto& r : c.rows) rows.push_back(&r);
  std::string out = to_table(rows);
  out += std::string("splits shared: ") + (c.splits_shared ? "yes" : "no") + "\n";
  return out;
}

inline std::string to_csv(const std::vector<const EvalReport*>& rows) {
  std::string out = "method,trials,mean_tie,mean_tie_std,top1_accuracy,top1_accuracy_std\n";
  char buf[256];
  for (const auto* r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%.17g,%.17g,%.17g,%.17g\n", r->name.c_str(), r->trials,
                  r->mean_tie.mean, r->mean_tie.std, r->top1_accuracy.mean, r->top1_accuracy.std);
    out += buf;
  }
  return out;
}

inline std::string to_csv(const EvalReport& r) { return to_csv(std::vector<const EvalReport*>{&r}); }

inline std::string to_csv(const ComparisonReport& c) {
  std::vector<const EvalReport*> rows;
  for (const auto& r : c.rows) rows.push_back(&r);
  return to_csv(rows);
}

}  // namespace hdot
