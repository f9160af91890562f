#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdot/error.hpp"
#include "hdot/rng.hpp"
#include "hdot/taxonomy.hpp"

namespace hdot {

/// Feature rows with leaf-name labels.
struct Dataset {
  std::size_t dim = 0;
  std::vector<double> features;  // row-major, size() * dim
  std::vector<std::string> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * dim, dim}; }

  void push_back(std::span<const double> x, std::string label) {
    if (x.size() != dim) throw InvalidArgument("feature row has wrong dimension");
    features.insert(features.end(), x.begin(), x.end());
    labels.push_back(std::move(label));
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out;
    out.dim = dim;
    out.features.reserve(rows.size() * dim);
    out.labels.reserve(rows.size());
    for (auto r : rows) out.push_back(row(r), labels.at(r));
    return out;
  }

  /// Header `label,f0,...,f{d-1}`; values printed with 17 significant digits.
  std::string to_csv() const;
  static Dataset from_csv(std::string_view text);
};

/// Index sets of a train / validation / test split.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  std::uint64_t hash() const;
};

/// Shuffled 50% / 30% / 20% split (floor for train and validation, the rest
/// to test). Throws DataError if any part would be empty.
Split split_50_30_20(std::size_t n, std::uint64_t seed);

/// Parameters of the hierarchical Gaussian generator.
///
/// Every node mean is its parent's mean plus an i.i.d. Gaussian offset whose
/// scale is sigma0 * decay^(depth - 1), so depth-1 nodes move at sigma0 and
/// each deeper level moves by a shrinking amount. Samples add isotropic noise
/// at sigma_x around their leaf's mean.
struct GenConfig {
  std::optional<Taxonomy> taxonomy;  // when empty a full tree is built
  std::size_t branching = 3;
  std::size_t depth = 3;
  std::size_t dim = 16;
  double sigma0 = 1.0;
  double decay = 0.5;
  double sigma_x = 0.8;
  std::size_t samples_per_leaf = 200;
  std::uint64_t seed = 0;

  static GenConfig benchmark(std::uint64_t seed = 0) {
    GenConfig c;
    c.seed = seed;
    return c;
  }

  double level_scale(std::size_t node_depth) const {
    return sigma0 * std::pow(decay, static_cast<double>(node_depth) - 1.0);
  }

  void validate() const;
};

struct GeneratedData {
  Taxonomy taxonomy;
  Dataset data;
  std::vector<std::vector<double>> node_means;  // indexed by Taxonomy::NodeId
};

/// Complete tree with `branching` children per internal node and every leaf
/// at `depth`. Nodes are named by their child-index path: root, n0, n0_2, ...
Taxonomy full_tree(std::size_t branching, std::size_t depth);

GeneratedData generate(const GenConfig& cfg);

// ---------------------------------------------------------------------------

inline std::string Dataset::to_csv() const {
  std::string out = "label";
  for (std::size_t k = 0; k < dim; ++k) out += ",f" + std::to_string(k);
  out += '\n';
  char buf[32];
  for (std::size_t i = 0; i < size(); ++i) {
    out += labels[i];
    for (double x : row(i)) {
      std::snprintf(buf, sizeof buf, ",%.17g", x);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline Dataset Dataset::from_csv(std::string_view text) {
  Dataset ds;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header = true;
  std::vector<double> row;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (header) {
      if (fields.empty() || fields[0] != "label" || fields.size() < 2) {
        throw ParseError(line_no, "dataset header must be label,f0,...");
      }
      ds.dim = fields.size() - 1;
      header = false;
      continue;
    }
    if (fields.size() != ds.dim + 1) {
      throw ParseError(line_no, "expected " + std::to_string(ds.dim + 1) + " fields");
    }
    if (fields[0].empty()) throw ParseError(line_no, "empty label");
    row.clear();
    for (std::size_t k = 1; k < fields.size(); ++k) {
      std::string f(fields[k]);
      char* stop = nullptr;
      const double v = std::strtod(f.c_str(), &stop);
      if (f.empty() || stop != f.c_str() + f.size() || !std::isfinite(v)) {
        throw ParseError(line_no, "bad feature value '" + f + "'");
      }
      row.push_back(v);
    }
    ds.push_back(row, std::string(fields[0]));
  }
  if (header) throw ParseError(1, "empty dataset file");
  return ds;
}

inline std::uint64_t Split::hash() const {
  std::uint64_t h = fnv1a("split");
  auto mix = [&h](const std::vector<std::size_t>& part, char tag) {
    h = fnv1a(std::string_view(&tag, 1), h);
    for (auto i : part) h = fnv1a(std::to_string(i) + ",", h);
  };
  mix(train, 't');
  mix(val, 'v');
  mix(test, 'e');
  return h;
}

inline Split split_50_30_20(std::size_t n, std::uint64_t seed) {
  const std::size_t n_train = n / 2;
  const std::size_t n_val = n * 3 / 10;
  if (n_train == 0 || n_val == 0 || n - n_train - n_val == 0) {
    throw DataError("dataset too small to split 50/30/20 (" + std::to_string(n) + " rows)");
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  // Fisher-Yates with explicit draws: std::shuffle's sequence is not
  // specified across standard libraries.
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % (i + 1));
    std::swap(idx[i], idx[j]);
  }
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
               idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return s;
}

inline void GenConfig::validate() const {
  if (!taxonomy) {
    if (branching < 1) throw InvalidArgument("branching factor must be >= 1");
    if (depth < 1) throw InvalidArgument("depth must be >= 1");
  }
  if (dim < 2) throw InvalidArgument("feature dimension must be >= 2");
  if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw InvalidArgument("sigma0 must be > 0");
  if (!(decay > 0.0) || !std::isfinite(decay)) throw InvalidArgument("decay must be > 0");
  if (!(sigma_x > 0.0) || !std::isfinite(sigma_x)) throw InvalidArgument("sigma_x must be > 0");
  if (samples_per_leaf < 1) throw InvalidArgument("samples per leaf must be >= 1");
}

inline Taxonomy full_tree(std::size_t branching, std::size_t depth) {
  if (branching < 1 || depth < 1) throw InvalidArgument("full tree needs branching, depth >= 1");
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<std::string> frontier{"root"};
  for (std::size_t d = 1; d <= depth; ++d) {
    std::vector<std::string> next;
    for (const auto& p : frontier) {
      for (std::size_t k = 0; k < branching; ++k) {
        std::string c = (d == 1 ? "n" : p + "_") + std::to_string(k);
        edges.emplace_back(p, c);
        next.push_back(std::move(c));
      }
    }
    frontier = std::move(next);
  }
  return Taxonomy::from_edges(edges);
}

inline GeneratedData generate(const GenConfig& cfg) {
  cfg.validate();
  GeneratedData out{cfg.taxonomy ? *cfg.taxonomy : full_tree(cfg.branching, cfg.depth), {}, {}};
  const Taxonomy& t = out.taxonomy;

  out.node_means.assign(t.size(), std::vector<double>(cfg.dim, 0.0));
  Rng mean_rng(derive_seed(cfg.seed, "means"));
  std::normal_distribution<double> unit(0.0, 1.0);

  // Breadth-first with children in name order fixes the draw sequence.
  std::vector<Taxonomy::NodeId> order{t.root()};
  for (std::size_t k = 0; k < order.size(); ++k) {
    auto kids = t.children(order[k]);
    std::sort(kids.begin(), kids.end(),
              [&](auto a, auto b) { return t.name(a) < t.name(b); });
    for (auto c : kids) {
      const auto& pm = out.node_means[order[k]];
      auto& cm = out.node_means[c];
      const double scale = cfg.level_scale(t.depth(c));
      for (std::size_t i = 0; i < cfg.dim; ++i) cm[i] = pm[i] + scale * unit(mean_rng);
      order.push_back(c);
    }
  }

  Rng noise_rng(derive_seed(cfg.seed, "noise"));
  out.data.dim = cfg.dim;
  std::vector<double> x(cfg.dim);
  for (auto leaf : t.leaves()) {
    const auto& mu = out.node_means[leaf];
    for (std::size_t r = 0; r < cfg.samples_per_leaf; ++r) {
      for (std::size_t i = 0; i < cfg.dim; ++i) x[i] = mu[i] + cfg.sigma_x * unit(noise_rng);
      out.data.push_back(x, t.name(leaf));
    }
  }
  return out;
}

}  // namespace hdot
