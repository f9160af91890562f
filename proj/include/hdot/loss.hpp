#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdot/error.hpp"
#include "hdot/ground.hpp"
#include "hdot/matrix.hpp"

namespace hdot {

enum class LossKind { dot, ce, regression };

inline std::string_view to_string(LossKind k) {
  switch (k) {
    case LossKind::dot: return "dot";
    case LossKind::ce: return "ce";
    case LossKind::regression: return "regression";
  }
  return "?";
}

inline LossKind parse_loss_kind(std::string_view s) {
  if (s == "dot") return LossKind::dot;
  if (s == "ce") return LossKind::ce;
  if (s == "regression") return LossKind::regression;
  throw InvalidArgument("unknown loss '" + std::string(s) + "'");
}

/// Max-subtracted softmax; the output sums to 1 up to rounding for any
/// finite logits.
template <typename T>
std::vector<T> softmax(std::span<const T> z) {
  if (z.empty()) throw InvalidArgument("softmax of an empty vector");
  T hi = z[0];
  for (T x : z) {
    if (!std::isfinite(x)) throw NumericError("non-finite logit");
    hi = std::max(hi, x);
  }
  std::vector<T> s(z.size());
  T sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    s[i] = std::exp(z[i] - hi);
    sum += s[i];
  }
  for (T& x : s) x /= sum;
  return s;
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& z) {
  return softmax(std::span<const T>(z));
}

/// Index of the largest entry; ties go to the lowest index.
template <typename T>
std::size_t argmax(std::span<const T> s) {
  if (s.empty()) throw InvalidArgument("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i) {
    if (s[i] > s[best]) best = i;
  }
  return best;
}

template <typename T>
std::size_t argmax(const std::vector<T>& s) {
  return argmax(std::span<const T>(s));
}

/// One-hot target carrying the full source mass at `target`, so the
/// transport problem is balanced exactly.
inline std::vector<double> one_hot_target(std::span<const double> s, std::size_t target) {
  if (target >= s.size()) throw InvalidArgument("target index out of range");
  std::vector<double> t(s.size(), 0.0);
  t[target] = std::accumulate(s.begin(), s.end(), 0.0);
  return t;
}

namespace detail {
inline void check_target(std::size_t n, std::size_t target, const Matrix& d) {
  if (target >= n) throw InvalidArgument("target index out of range");
  if (d.rows() != n || d.cols() != n) throw InvalidArgument("ground matrix size mismatch");
}
}  // namespace detail

/// Closed-form OT loss against a one-hot target: sum_i s_i D[i][target].
/// The only feasible plan moves every s_i into column `target`, so this is
/// exact and O(N).
inline double one_hot_loss(std::span<const double> s, std::size_t target, const Matrix& d) {
  detail::check_target(s.size(), target, d);
  double loss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) loss += s[i] * d(i, target);
  return loss;
}

inline double one_hot_loss(std::span<const double> s, std::size_t target, const GroundMatrix& d) {
  return one_hot_loss(s, target, d.entries());
}

/// d loss / d s_i = D[i][target].
inline std::vector<double> one_hot_loss_grad_probs(std::span<const double> s, std::size_t target,
                                                   const Matrix& d) {
  detail::check_target(s.size(), target, d);
  return d.column(target);
}

/// Gradient of one_hot_loss(softmax(z)) with respect to the logits:
/// g_k = s_k (D[k][target] - loss). Components sum to zero.
inline std::vector<double> one_hot_loss_grad_logits(std::span<const double> z, std::size_t target,
                                                    const Matrix& d) {
  detail::check_target(z.size(), target, d);
  const auto s = softmax(z);
  const double loss = one_hot_loss(s, target, d);
  std::vector<double> g(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) g[k] = s[k] * (d(k, target) - loss);
  return g;
}

inline std::vector<double> one_hot_loss_grad_logits(std::span<const double> z, std::size_t target,
                                                    const GroundMatrix& d) {
  return one_hot_loss_grad_logits(z, target, d.entries());
}

struct CeLoss {
  double value = 0.0;
  bool clamped = false;  // s[target] fell below the 1e-12 floor
};

inline constexpr double kCeFloor = 1e-12;

/// -log s[target], with s[target] floored at 1e-12.
inline CeLoss ce_loss(std::span<const double> s, std::size_t target) {
  if (target >= s.size()) throw InvalidArgument("target index out of range");
  const double p = s[target];
  if (p < kCeFloor) return {-std::log(kCeFloor), true};
  return {-std::log(p), false};
}

/// Hard-prediction cost D[argmax s][target].
inline double regression_loss(std::span<const double> s, std::size_t target, const Matrix& d) {
  detail::check_target(s.size(), target, d);
  return d(argmax(s), target);
}

inline double regression_loss(std::span<const double> s, std::size_t target,
                              const GroundMatrix& d) {
  return regression_loss(s, target, d.entries());
}

}  // namespace hdot
