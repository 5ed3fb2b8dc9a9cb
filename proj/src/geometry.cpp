#include "ramiflow/geometry.hpp"

namespace ramiflow {

bool near(const Point& a, const Point& b, double tol) {
  if (a.dim() != b.dim()) return false;
  for (std::size_t i = 0; i < a.dim(); ++i)
    if (std::abs(a[i] - b[i]) > tol) return false;
  return true;
}

std::vector<std::int64_t> PointIndex::key(const Point& p) const {
  std::vector<std::int64_t> k(p.dim());
  for (std::size_t i = 0; i < p.dim(); ++i)
    k[i] = static_cast<std::int64_t>(std::floor(p[i] / tol_));
  return k;
}

std::uint64_t PointIndex::hash(std::span<const std::int64_t> k) const {
  std::uint64_t h = 1469598103934665603ull;
  for (std::int64_t v : k) {
    h ^= static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 1099511628211ull;
  }
  return h;
}

std::optional<std::size_t> PointIndex::find(const Point& p) const {
  const auto base = key(p);
  const std::size_t n = base.size();
  std::vector<std::int64_t> probe(base);
  // Enumerate the 3^n neighbouring cells.
  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;
  for (std::size_t c = 0; c < combos; ++c) {
    std::size_t r = c;
    for (std::size_t i = 0; i < n; ++i) {
      probe[i] = base[i] + static_cast<std::int64_t>(r % 3) - 1;
      r /= 3;
    }
    auto [lo, hi] = buckets_.equal_range(hash(probe));
    std::optional<std::size_t> best;
    for (auto it = lo; it != hi; ++it)
      if (near(points_[it->second], p, tol_) && (!best || it->second < *best)) best = it->second;
    if (best) return best;
  }
  return std::nullopt;
}

std::size_t PointIndex::insert(const Point& p) {
  if (auto found = find(p)) return *found;
  points_.push_back(p);
  buckets_.emplace(hash(key(p)), points_.size() - 1);
  return points_.size() - 1;
}

}  // namespace ramiflow
