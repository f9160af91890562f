#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hdot/dataset.hpp"
#include "hdot/error.hpp"
#include "hdot/ground.hpp"
#include "hdot/loss.hpp"
#include "hdot/rng.hpp"
#include "hdot/taxonomy.hpp"

namespace hdot {

/// Per-level label spaces, ground matrices and leaf-to-level targets.
class Hierarchy {
 public:
  explicit Hierarchy(Taxonomy t, GroundTransform f = {}) : taxonomy_(std::move(t)), transform_(f) {
    const std::size_t depth = taxonomy_.num_levels();
    for (std::size_t l = 1; l <= depth; ++l) {
      levels_.push_back(make_level_index(taxonomy_, l));
      grounds_.push_back(build_ground_matrix(taxonomy_, levels_.back(), transform_));
    }
    const auto& leaves = levels_.back();
    targets_.assign(leaves.size(), std::vector<std::size_t>(depth));
    for (std::size_t k = 0; k < leaves.size(); ++k) {
      for (std::size_t l = 1; l <= depth; ++l) {
        const auto node = taxonomy_.lift_to_level(leaves.nodes[k], l);
        targets_[k][l - 1] = levels_[l - 1].index_of(taxonomy_.name(node));
      }
    }
    const std::size_t n = leaves.size();
    leaf_tie_.assign(n * n, 0);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < n; ++b) {
        leaf_tie_[a * n + b] = taxonomy_.tie_distance(leaves.nodes[a], leaves.nodes[b]);
      }
    }
  }

  const Taxonomy& taxonomy() const noexcept { return taxonomy_; }
  const GroundTransform& transform() const noexcept { return transform_; }
  std::size_t num_levels() const noexcept { return levels_.size(); }

  /// 1-based level access.
  const LevelIndex& level(std::size_t l) const { return levels_.at(l - 1); }
  const GroundMatrix& ground(std::size_t l) const { return grounds_.at(l - 1); }
  const LevelIndex& leaf_level() const { return levels_.back(); }
  std::size_t num_leaves() const { return levels_.back().size(); }

  std::vector<std::size_t> level_widths() const {
    std::vector<std::size_t> w;
    for (const auto& l : levels_) w.push_back(l.size());
    return w;
  }

  /// Class index at level l of the leaf with leaf-level index `leaf`.
  std::size_t target(std::size_t leaf, std::size_t l) const { return targets_.at(leaf).at(l - 1); }

  std::size_t leaf_index(std::string_view name) const {
    const auto& leaves = levels_.back();
    auto it = leaves.index.find(name);
    if (it == leaves.index.end()) throw DataError("unknown leaf label '" + std::string(name) + "'");
    return it->second;
  }

  std::vector<std::size_t> encode(const Dataset& ds) const {
    std::vector<std::size_t> out;
    out.reserve(ds.size());
    for (const auto& name : ds.labels) out.push_back(leaf_index(name));
    return out;
  }

  /// Untransformed TIE between two leaves, by leaf-level index.
  std::size_t leaf_tie(std::size_t a, std::size_t b) const {
    const std::size_t n = num_leaves();
    if (a >= n || b >= n) throw InvalidArgument("leaf index out of range");
    return leaf_tie_[a * n + b];
  }

 private:
  Taxonomy taxonomy_;
  GroundTransform transform_;
  std::vector<LevelIndex> levels_;
  std::vector<GroundMatrix> grounds_;
  std::vector<std::vector<std::size_t>> targets_;
  std::vector<std::size_t> leaf_tie_;
};

struct ModelShape {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  std::vector<std::size_t> level_widths;  // class count per level, coarse to leaf

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

enum class HeadInit { random, zero };

/// Shared rectified dense trunk feeding one affine softmax head per level.
///
/// Parameters live in one flat array laid out as
///   trunk W (hidden x input), trunk b (hidden),
///   then per level: head W (width x hidden), head b (width).
class LevelModel {
 public:
  LevelModel(ModelShape shape, std::vector<double> level_weights)
      : shape_(std::move(shape)), weights_(std::move(level_weights)) {
    if (shape_.input_dim == 0 || shape_.hidden_dim == 0 || shape_.level_widths.empty()) {
      throw InvalidArgument("model needs input, hidden and at least one level");
    }
    if (weights_.size() != shape_.level_widths.size()) {
      throw InvalidArgument("one level weight per head required");
    }
    std::size_t off = shape_.hidden_dim * shape_.input_dim + shape_.hidden_dim;
    for (auto w : shape_.level_widths) {
      if (w == 0) throw InvalidArgument("empty level");
      head_offsets_.push_back(off);
      off += w * shape_.hidden_dim + w;
    }
    params_.assign(off, 0.0);
  }

  /// He-normal trunk, Glorot-uniform heads (or zero heads), zero biases.
  static LevelModel initialized(ModelShape shape, std::vector<double> level_weights,
                                std::uint64_t seed, HeadInit heads = HeadInit::random) {
    LevelModel m(std::move(shape), std::move(level_weights));
    Rng rng(derive_seed(seed, "init"));
    const auto& s = m.shape_;
    std::normal_distribution<double> trunk(0.0, std::sqrt(2.0 / static_cast<double>(s.input_dim)));
    for (std::size_t k = 0; k < s.hidden_dim * s.input_dim; ++k) m.params_[k] = trunk(rng);
    if (heads == HeadInit::random) {
      for (std::size_t l = 0; l < s.level_widths.size(); ++l) {
        const double limit =
            std::sqrt(6.0 / static_cast<double>(s.hidden_dim + s.level_widths[l]));
        std::uniform_real_distribution<double> u(-limit, limit);
        const std::size_t off = m.head_offsets_[l];
        for (std::size_t k = 0; k < s.level_widths[l] * s.hidden_dim; ++k) m.params_[off + k] = u(rng);
      }
    }
    return m;
  }

  const ModelShape& shape() const noexcept { return shape_; }
  std::size_t num_levels() const noexcept { return shape_.level_widths.size(); }
  const std::vector<double>& level_weights() const noexcept { return weights_; }

  std::span<const double> params() const noexcept { return params_; }
  std::span<double> params() noexcept { return params_; }
  std::size_t num_params() const noexcept { return params_.size(); }

  std::size_t trunk_bias_offset() const noexcept { return shape_.hidden_dim * shape_.input_dim; }
  std::size_t head_offset(std::size_t level_pos) const { return head_offsets_.at(level_pos); }
  std::size_t head_bias_offset(std::size_t level_pos) const {
    return head_offsets_.at(level_pos) + shape_.level_widths[level_pos] * shape_.hidden_dim;
  }

  friend bool operator==(const LevelModel&, const LevelModel&) = default;

 private:
  ModelShape shape_;
  std::vector<double> weights_;
  std::vector<std::size_t> head_offsets_;
  std::vector<double> params_;
};

/// Activations of one forward pass, kept for backpropagation.
struct ForwardPass {
  std::vector<double> pre;     // trunk pre-activation
  std::vector<double> hidden;  // rectified trunk output
  std::vector<std::vector<double>> logits;
  std::vector<std::vector<double>> probs;
};

inline void forward_into(const LevelModel& m, std::span<const double> x, ForwardPass& fp) {
  const auto& s = m.shape();
  if (x.size() != s.input_dim) throw InvalidArgument("input has wrong dimension");
  const auto p = m.params();
  fp.pre.resize(s.hidden_dim);
  fp.hidden.resize(s.hidden_dim);
  const std::size_t bias = m.trunk_bias_offset();
  for (std::size_t h = 0; h < s.hidden_dim; ++h) {
    double acc = p[bias + h];
    const double* w = p.data() + h * s.input_dim;
    for (std::size_t i = 0; i < s.input_dim; ++i) acc += w[i] * x[i];
    fp.pre[h] = acc;
    fp.hidden[h] = acc > 0.0 ? acc : 0.0;
  }
  fp.logits.resize(m.num_levels());
  fp.probs.resize(m.num_levels());
  for (std::size_t l = 0; l < m.num_levels(); ++l) {
    const std::size_t width = s.level_widths[l];
    const std::size_t off = m.head_offset(l);
    const std::size_t boff = m.head_bias_offset(l);
    auto& z = fp.logits[l];
    z.resize(width);
    for (std::size_t c = 0; c < width; ++c) {
      double acc = p[boff + c];
      const double* w = p.data() + off + c * s.hidden_dim;
      for (std::size_t h = 0; h < s.hidden_dim; ++h) acc += w[h] * fp.hidden[h];
      z[c] = acc;
    }
    fp.probs[l] = softmax(std::span<const double>(z));
  }
}

/// One softmax histogram per level, coarse to leaf.
inline std::vector<std::vector<double>> forward(const LevelModel& m, std::span<const double> x) {
  ForwardPass fp;
  forward_into(m, x, fp);
  return std::move(fp.probs);
}

/// Leaf-level argmax, lowest index on ties.
inline std::size_t predict_leaf(const LevelModel& m, std::span<const double> x) {
  ForwardPass fp;
  forward_into(m, x, fp);
  return argmax(std::span<const double>(fp.probs.back()));
}

/// Per-level loss values L^l for one sample.
inline std::vector<double> level_losses(const LevelModel& m, const Hierarchy& h,
                                        std::span<const double> x, std::size_t leaf,
                                        LossKind kind) {
  if (leaf >= h.num_leaves()) throw InvalidArgument("unknown leaf index");
  ForwardPass fp;
  forward_into(m, x, fp);
  std::vector<double> out(m.num_levels());
  for (std::size_t l = 0; l < m.num_levels(); ++l) {
    const std::size_t target = h.target(leaf, l + 1);
    switch (kind) {
      case LossKind::dot: out[l] = one_hot_loss(fp.probs[l], target, h.ground(l + 1)); break;
      case LossKind::ce: out[l] = ce_loss(fp.probs[l], target).value; break;
      case LossKind::regression: out[l] = regression_loss(fp.probs[l], target, h.ground(l + 1)); break;
    }
  }
  return out;
}

/// E = sum_l lambda^l L^l.
inline double combine(std::span<const double> weights, std::span<const double> losses) {
  if (weights.size() != losses.size()) throw InvalidArgument("weight / loss count mismatch");
  double e = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != 0.0) e += weights[l] * losses[l];
  }
  return e;
}

inline double combined_loss(const LevelModel& m, const Hierarchy& h, std::span<const double> x,
                            std::size_t leaf, LossKind kind = LossKind::dot) {
  return combine(m.level_weights(), level_losses(m, h, x, leaf, kind));
}

/// Adds dE/dtheta for one sample to `grad` (scaled by `scale`) and returns E.
inline double accumulate_gradient(const LevelModel& m, const Hierarchy& h,
                                  std::span<const double> x, std::size_t leaf, LossKind kind,
                                  std::span<double> grad, double scale, ForwardPass& fp,
                                  std::vector<double>& d_hidden, std::vector<double>& g) {
  if (kind == LossKind::regression) throw InvalidArgument("regression loss has no useful gradient");
  if (leaf >= h.num_leaves()) throw InvalidArgument("unknown leaf index");
  if (grad.size() != m.num_params()) throw InvalidArgument("gradient buffer size mismatch");
  forward_into(m, x, fp);
  const auto& s = m.shape();
  const auto p = m.params();
  const auto& weights = m.level_weights();
  d_hidden.assign(s.hidden_dim, 0.0);
  double e = 0.0;
  for (std::size_t l = 0; l < m.num_levels(); ++l) {
    const double lambda = weights[l];
    if (lambda == 0.0) continue;
    const std::size_t target = h.target(leaf, l + 1);
    const auto& prob = fp.probs[l];
    const std::size_t width = prob.size();
    g.resize(width);
    if (kind == LossKind::dot) {
      const Matrix& d = h.ground(l + 1).entries();
      const double loss = one_hot_loss(prob, target, d);
      for (std::size_t k = 0; k < width; ++k) g[k] = prob[k] * (d(k, target) - loss);
      e += lambda * loss;
    } else {
      e += lambda * ce_loss(prob, target).value;
      for (std::size_t k = 0; k < width; ++k) g[k] = prob[k] - (k == target ? 1.0 : 0.0);
    }
    const std::size_t off = m.head_offset(l);
    const std::size_t boff = m.head_bias_offset(l);
    for (std::size_t c = 0; c < width; ++c) {
      const double gc = scale * lambda * g[c];
      if (gc == 0.0) continue;
      double* gw = grad.data() + off + c * s.hidden_dim;
      const double* w = p.data() + off + c * s.hidden_dim;
      for (std::size_t k = 0; k < s.hidden_dim; ++k) {
        gw[k] += gc * fp.hidden[k];
        d_hidden[k] += gc * w[k];
      }
      grad[boff + c] += gc;
    }
  }
  const std::size_t bias = m.trunk_bias_offset();
  for (std::size_t k = 0; k < s.hidden_dim; ++k) {
    if (fp.pre[k] <= 0.0 || d_hidden[k] == 0.0) continue;
    const double dk = d_hidden[k];
    double* gw = grad.data() + k * s.input_dim;
    for (std::size_t i = 0; i < s.input_dim; ++i) gw[i] += dk * x[i];
    grad[bias + k] += dk;
  }
  return e;
}

inline double accumulate_gradient(const LevelModel& m, const Hierarchy& h,
                                  std::span<const double> x, std::size_t leaf, LossKind kind,
                                  std::span<double> grad, double scale = 1.0) {
  ForwardPass fp;
  std::vector<double> d_hidden;
  std::vector<double> g;
  return accumulate_gradient(m, h, x, leaf, kind, grad, scale, fp, d_hidden, g);
}

// ---------------------------------------------------------------------------
// Optimization

enum class OptimizerKind { adam, sgd };

inline std::string_view to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw InvalidArgument("unknown optimizer '" + std::string(s) + "'");
}

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class Adam {
 public:
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}

  void step(std::span<double> params, std::span<const double> grad, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

struct TrainConfig {
  double lr = 3e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 60;
  std::size_t hidden = 256;
  OptimizerKind optimizer = OptimizerKind::adam;
  LossKind loss = LossKind::dot;
  WeightMode weights = WeightMode::eq3_magnitude;
  // Zero heads start every level at the uniform histogram; the DOT loss
  // collapses classes noticeably more often from random heads.
  HeadInit head_init = HeadInit::zero;
  GroundTransform transform;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("learning rate must be >= 0");
    if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (hidden < 1) throw InvalidArgument("hidden width must be >= 1");
    if (loss == LossKind::regression) throw InvalidArgument("training supports dot or ce loss");
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainResult {
  std::vector<double> epoch_loss;  // mean E over the epoch's samples
  std::vector<double> val_tie;     // validation mean TIE after each epoch (if any)
  std::size_t best_epoch = 0;      // 1-based epoch whose parameters were kept
};

/// Mean leaf-level TIE of the model's predictions on `rows` of `ds`.
inline double model_mean_tie(const LevelModel& m, const Hierarchy& h, const Dataset& ds,
                             std::span<const std::size_t> leaves) {
  if (ds.size() == 0) return 0.0;
  ForwardPass fp;
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    forward_into(m, ds.row(i), fp);
    total += static_cast<double>(h.leaf_tie(argmax(std::span<const double>(fp.probs.back())), leaves[i]));
  }
  return total / static_cast<double>(ds.size());
}

inline std::vector<double> training_weights(const Hierarchy& h, const TrainConfig& cfg) {
  return level_weights(h.num_levels(), cfg.weights);
}

inline LevelModel make_model(const Hierarchy& h, std::size_t input_dim, const TrainConfig& cfg) {
  return LevelModel::initialized({input_dim, cfg.hidden, h.level_widths()}, training_weights(h, cfg),
                                 cfg.seed, cfg.head_init);
}

/// Mini-batch training of E. With a validation set, the parameters with the
/// lowest validation mean TIE (earliest on ties) are kept at the end.
inline TrainResult train(LevelModel& m, const Hierarchy& h, const Dataset& train_set,
                         const TrainConfig& cfg, const Dataset* val_set = nullptr) {
  cfg.validate();
  if (train_set.size() == 0) throw DataError("empty training set");
  if (train_set.dim != m.shape().input_dim) throw DataError("feature dimension does not match model");
  if (m.shape().level_widths != h.level_widths()) throw InvalidArgument("model does not fit hierarchy");
  const auto leaves = h.encode(train_set);
  std::vector<std::size_t> val_leaves;
  if (val_set) val_leaves = h.encode(*val_set);

  TrainResult result;
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> grad(m.num_params());
  Adam adam(m.num_params());
  ForwardPass fp;
  std::vector<double> d_hidden;
  std::vector<double> g;
  std::vector<double> best_params;
  double best_tie = std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<std::size_t>(shuffle_rng() % (i + 1))]);
    }
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t r = order[b];
        epoch_total += accumulate_gradient(m, h, train_set.row(r), leaves[r], cfg.loss, grad, scale,
                                           fp, d_hidden, g);
      }
      for (double v : grad) {
        if (!std::isfinite(v)) {
          throw NumericError("non-finite gradient in epoch " + std::to_string(epoch));
        }
      }
      if (cfg.optimizer == OptimizerKind::adam) {
        adam.step(m.params(), grad, cfg.lr);
      } else {
        auto p = m.params();
        for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * grad[k];
      }
    }
    const double mean_loss = epoch_total / static_cast<double>(order.size());
    if (!std::isfinite(mean_loss)) {
      throw NumericError("non-finite loss in epoch " + std::to_string(epoch));
    }
    for (double v : m.params()) {
      if (!std::isfinite(v)) throw NumericError("non-finite parameter in epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean_loss);
    if (val_set) {
      const double tie = model_mean_tie(m, h, *val_set, val_leaves);
      result.val_tie.push_back(tie);
      if (tie < best_tie) {
        best_tie = tie;
        best_params.assign(m.params().begin(), m.params().end());
        result.best_epoch = epoch;
      }
    }
  }
  if (val_set) {
    std::copy(best_params.begin(), best_params.end(), m.params().begin());
  } else {
    result.best_epoch = cfg.epochs;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: line-oriented text; doubles stored as hex floats so a reload
// reproduces every parameter bit for bit.

struct Checkpoint {
  LevelModel model;
  TrainConfig config;
  std::uint64_t taxonomy_hash = 0;
};

inline constexpr std::string_view kCheckpointMagic = "hdot-checkpoint 1";

namespace detail {
inline std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw DataError("bad number in checkpoint: " + s);
  return v;
}
}  // namespace detail

inline std::string save_checkpoint(const LevelModel& m, const TrainConfig& cfg,
                                   std::uint64_t taxonomy_hash) {
  std::ostringstream out;
  const auto& s = m.shape();
  char hash[24];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(taxonomy_hash));
  out << kCheckpointMagic << '\n';
  out << "taxonomy_hash " << hash << '\n';
  out << "seed " << cfg.seed << '\n';
  out << "lr " << detail::hex_double(cfg.lr) << '\n';
  out << "batch_size " << cfg.batch_size << '\n';
  out << "epochs " << cfg.epochs << '\n';
  out << "hidden " << cfg.hidden << '\n';
  out << "optimizer " << to_string(cfg.optimizer) << '\n';
  out << "loss " << to_string(cfg.loss) << '\n';
  out << "weights " << to_string(cfg.weights) << '\n';
  out << "head_init " << (cfg.head_init == HeadInit::zero ? "zero" : "random") << '\n';
  out << "transform " << cfg.transform.to_string() << '\n';
  out << "input_dim " << s.input_dim << '\n';
  out << "hidden_dim " << s.hidden_dim << '\n';
  out << "levels";
  for (auto w : s.level_widths) out << ' ' << w;
  out << '\n';
  out << "level_weights";
  for (double w : m.level_weights()) out << ' ' << detail::hex_double(w);
  out << '\n';
  out << "params " << m.num_params() << '\n';
  for (double v : m.params()) out << detail::hex_double(v) << '\n';
  out << "end\n";
  return out.str();
}

inline Checkpoint load_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw DataError("not an hdot checkpoint");

  auto expect = [&](std::string_view key) {
    std::string got;
    if (!(in >> got) || got != key) throw DataError("checkpoint: expected '" + std::string(key) + "'");
  };
  auto word = [&]() {
    std::string w;
    if (!(in >> w)) throw DataError("checkpoint truncated");
    return w;
  };
  auto count = [&]() -> std::size_t {
    const std::string w = word();
    try {
      return static_cast<std::size_t>(std::stoull(w));
    } catch (const std::exception&) {
      throw DataError("checkpoint: bad integer '" + w + "'");
    }
  };

  TrainConfig cfg;
  expect("taxonomy_hash");
  const std::uint64_t hash = std::stoull(word(), nullptr, 16);
  expect("seed");
  cfg.seed = std::stoull(word());
  expect("lr");
  cfg.lr = detail::parse_double(word());
  expect("batch_size");
  cfg.batch_size = count();
  expect("epochs");
  cfg.epochs = count();
  expect("hidden");
  cfg.hidden = count();
  expect("optimizer");
  cfg.optimizer = parse_optimizer(word());
  expect("loss");
  cfg.loss = parse_loss_kind(word());
  expect("weights");
  cfg.weights = parse_weight_mode(word());
  expect("head_init");
  cfg.head_init = word() == "zero" ? HeadInit::zero : HeadInit::random;
  expect("transform");
  cfg.transform = GroundTransform::parse(word());

  ModelShape shape;
  expect("input_dim");
  shape.input_dim = count();
  expect("hidden_dim");
  shape.hidden_dim = count();
  expect("levels");
  std::getline(in, line);
  {
    std::istringstream ls(line);
    std::size_t w = 0;
    while (ls >> w) shape.level_widths.push_back(w);
  }
  expect("level_weights");
  std::getline(in, line);
  std::vector<double> weights;
  {
    std::istringstream ls(line);
    std::string w;
    while (ls >> w) weights.push_back(detail::parse_double(w));
  }
  LevelModel m(shape, weights);
  expect("params");
  if (count() != m.num_params()) throw DataError("checkpoint parameter count mismatch");
  for (double& v : m.params()) v = detail::parse_double(word());
  expect("end");
  return {std::move(m), cfg, hash};
}

}  // namespace hdot
