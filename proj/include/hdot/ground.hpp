#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>

#include "hdot/error.hpp"
#include "hdot/matrix.hpp"
#include "hdot/taxonomy.hpp"

namespace hdot {

/// Nondecreasing map f with f(0) = 0 applied to tree distances.
struct GroundTransform {
  enum class Kind { identity, power, huber };

  Kind kind = Kind::identity;
  double param = 1.0;  // exponent p for power, threshold delta for huber

  static GroundTransform identity() { return {}; }
  static GroundTransform power(double p) {
    if (!(p > 0.0) || !std::isfinite(p)) throw InvalidArgument("power exponent must be > 0");
    return {Kind::power, p};
  }
  static GroundTransform huber(double delta) {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw InvalidArgument("huber delta must be > 0");
    return {Kind::huber, delta};
  }

  /// "identity", "power:<p>" or "huber:<delta>".
  static GroundTransform parse(std::string_view spec);
  std::string to_string() const;

  friend bool operator==(const GroundTransform&, const GroundTransform&) = default;
};

template <typename T>
T apply_transform(const GroundTransform& f, T d) {
  if (d < T(0)) throw InvalidArgument("ground distance must be nonnegative");
  switch (f.kind) {
    case GroundTransform::Kind::identity:
      return d;
    case GroundTransform::Kind::power:
      return std::pow(d, static_cast<T>(f.param));
    case GroundTransform::Kind::huber: {
      const T delta = static_cast<T>(f.param);
      return d <= delta ? T(0.5) * d * d : delta * (d - T(0.5) * delta);
    }
  }
  return d;
}

/// Symmetric, zero-diagonal cost matrix D[i][j] = f(tie(class_i, class_j))
/// over the classes of one taxonomy level.
class GroundMatrix {
 public:
  GroundMatrix(LevelIndex level, Matrix entries, GroundTransform transform)
      : level_(std::move(level)), entries_(std::move(entries)), transform_(transform) {}

  std::size_t size() const noexcept { return entries_.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return entries_(i, j); }
  const Matrix& entries() const noexcept { return entries_; }
  const LevelIndex& level() const noexcept { return level_; }
  const GroundTransform& transform() const noexcept { return transform_; }

  /// Header row of class names, then one row per class.
  std::string to_csv() const;

 private:
  LevelIndex level_;
  Matrix entries_;
  GroundTransform transform_;
};

GroundMatrix build_ground_matrix(const Taxonomy& t, const LevelIndex& level,
                                 const GroundTransform& f = {});

// ---------------------------------------------------------------------------

inline GroundTransform GroundTransform::parse(std::string_view spec) {
  if (spec == "identity") return identity();
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) {
    throw InvalidArgument("transform must be identity, power:<p> or huber:<delta>");
  }
  const std::string kind(spec.substr(0, colon));
  const std::string value(spec.substr(colon + 1));
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size()) {
    throw InvalidArgument("bad transform parameter '" + value + "'");
  }
  if (kind == "power") return power(v);
  if (kind == "huber") return huber(v);
  throw InvalidArgument("unknown transform '" + kind + "'");
}

inline std::string GroundTransform::to_string() const {
  char buf[64];
  switch (kind) {
    case Kind::identity: return "identity";
    case Kind::power: std::snprintf(buf, sizeof buf, "power:%.17g", param); return buf;
    case Kind::huber: std::snprintf(buf, sizeof buf, "huber:%.17g", param); return buf;
  }
  return "identity";
}

inline std::string GroundMatrix::to_csv() const {
  std::string out;
  const auto& names = level_.classes;
  for (std::size_t j = 0; j < names.size(); ++j) {
    out += j ? "," : "";
    out += names[j];
  }
  out += '\n';
  char buf[32];
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", entries_(i, j));
      out += j ? "," : "";
      out += buf;
    }
    out += '\n';
  }
  return out;
}

inline GroundMatrix build_ground_matrix(const Taxonomy& t, const LevelIndex& level,
                                        const GroundTransform& f) {
  const std::size_t n = level.size();
  std::vector<Taxonomy::NodeId> ids;
  ids.reserve(n);
  for (const auto& name : level.classes) {
    auto v = t.find(name);
    if (!v) throw InvalidArgument("class '" + name + "' is not in the taxonomy");
    ids.push_back(*v);
  }
  Matrix d(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = apply_transform(f, static_cast<double>(t.tie_distance(ids[i], ids[j])));
      d(i, j) = v;
      d(j, i) = v;
    }
  }
  return GroundMatrix(level, std::move(d), f);
}

}  // namespace hdot
