#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace ramiflow {

// Coincidence tolerance for positions, in normalized coordinates.
inline constexpr double kSnapTolerance = 1e-9;

/// A point (or displacement) in R^n. The dimension is a runtime property of
/// the problem instance.
class Point {
 public:
  Point() = default;
  explicit Point(std::size_t dim) : x_(dim, 0.0) {}
  Point(std::initializer_list<double> coords) : x_(coords) {}
  explicit Point(std::vector<double> coords) : x_(std::move(coords)) {}

  std::size_t dim() const noexcept { return x_.size(); }
  double operator[](std::size_t i) const { return x_[i]; }
  double& operator[](std::size_t i) { return x_[i]; }
  std::span<const double> coords() const noexcept { return x_; }

  Point& operator+=(const Point& o) {
    for (std::size_t i = 0; i < x_.size(); ++i) x_[i] += o.x_[i];
    return *this;
  }
  Point& operator-=(const Point& o) {
    for (std::size_t i = 0; i < x_.size(); ++i) x_[i] -= o.x_[i];
    return *this;
  }
  Point& operator*=(double s) {
    for (double& v : x_) v *= s;
    return *this;
  }

  friend Point operator+(Point a, const Point& b) { return a += b; }
  friend Point operator-(Point a, const Point& b) { return a -= b; }
  friend Point operator*(Point a, double s) { return a *= s; }
  friend Point operator*(double s, Point a) { return a *= s; }
  friend bool operator==(const Point&, const Point&) = default;
  friend auto operator<=>(const Point& a, const Point& b) { return a.x_ <=> b.x_; }

  double dot(const Point& o) const {
    double s = 0.0;
    for (std::size_t i = 0; i < x_.size(); ++i) s += x_[i] * o.x_[i];
    return s;
  }
  double norm() const { return std::sqrt(dot(*this)); }
  double max_abs() const {
    double m = 0.0;
    for (double v : x_) m = std::max(m, std::abs(v));
    return m;
  }
  bool finite() const {
    for (double v : x_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  std::vector<double> x_;
};

inline double distance(const Point& a, const Point& b) { return (a - b).norm(); }

// Linear interpolation a + t (b - a).
inline Point lerp(const Point& a, const Point& b, double t) { return a + (b - a) * t; }

/// Nonnegative real extended by +infinity. Infinity is an explicit state, not
/// a floating-point sentinel.
class ExtendedReal {
 public:
  constexpr ExtendedReal() = default;
  constexpr ExtendedReal(double v) : value_(v) {}  // NOLINT(implicit)
  static constexpr ExtendedReal infinity() {
    ExtendedReal r;
    r.infinite_ = true;
    return r;
  }

  constexpr bool is_infinite() const noexcept { return infinite_; }
  constexpr bool is_finite() const noexcept { return !infinite_; }
  // Finite value; only meaningful when is_finite().
  constexpr double value() const noexcept { return value_; }

  friend ExtendedReal operator+(ExtendedReal a, ExtendedReal b) {
    if (a.infinite_ || b.infinite_) return infinity();
    return {a.value_ + b.value_};
  }
  // 0 * inf is taken as 0 (measure-theoretic convention).
  friend ExtendedReal operator*(ExtendedReal a, double s) {
    if (s == 0.0) return {0.0};
    if (a.infinite_) return infinity();
    return {a.value_ * s};
  }
  friend bool operator==(const ExtendedReal& a, const ExtendedReal& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }
  friend bool operator<(const ExtendedReal& a, const ExtendedReal& b) {
    if (a.infinite_) return false;
    if (b.infinite_) return true;
    return a.value_ < b.value_;
  }
  friend bool operator<=(const ExtendedReal& a, const ExtendedReal& b) { return !(b < a); }

 private:
  double value_ = 0.0;
  bool infinite_ = false;
};

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double v) {
    add(v);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Registry of distinct points: positions closer than the tolerance (per
/// coordinate) resolve to the same index. Lookup is hashed on a grid of the
/// tolerance, probing neighbouring cells.
class PointIndex {
 public:
  explicit PointIndex(double tolerance = kSnapTolerance) : tol_(tolerance) {}

  std::optional<std::size_t> find(const Point& p) const;
  // Returns the index of p, registering it if no point within tolerance exists.
  std::size_t insert(const Point& p);
  const std::vector<Point>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }

 private:
  std::vector<std::int64_t> key(const Point& p) const;
  std::uint64_t hash(std::span<const std::int64_t> k) const;

  double tol_;
  std::vector<Point> points_;
  std::unordered_multimap<std::uint64_t, std::size_t> buckets_;
};

bool near(const Point& a, const Point& b, double tol = kSnapTolerance);

}  // namespace ramiflow
