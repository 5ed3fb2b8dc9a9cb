#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "ramiflow/geometry.hpp"

namespace ramiflow {

// Collinearity threshold: |d1 x d2| < kCollinearTolerance * |d1| |d2|.
inline constexpr double kCollinearTolerance = 1e-12;

/// Arrangement of straight segments in R^n: every input segment is cut at
/// crossings, touching endpoints and overlap endpoints, so that the resulting
/// pieces have pairwise disjoint relative interiors. Coincident pieces of
/// different inputs are identified.
class Arrangement {
 public:
  struct Cover {
    std::size_t input = 0;
    int sign = 1;  // +1 if the input runs from piece.a to piece.b
  };
  struct Piece {
    std::size_t a = 0;  // point ids, a < b
    std::size_t b = 0;
    std::vector<Cover> covers;
  };

  explicit Arrangement(const std::vector<std::pair<Point, Point>>& segments);

  const std::vector<Point>& points() const noexcept { return points_; }
  const std::vector<Piece>& pieces() const noexcept { return pieces_; }
  double length(const Piece& p) const { return distance(points_[p.a], points_[p.b]); }

 private:
  std::vector<Point> points_;
  std::vector<Piece> pieces_;
};

// Closest-approach parameters (s, t) of segments [a1,b1], [a2,b2] and their
// distance, for non-parallel segments.
struct SegmentApproach {
  double s = 0.0;
  double t = 0.0;
  double dist = 0.0;
};
SegmentApproach closest_approach(const Point& a1, const Point& b1, const Point& a2, const Point& b2);

bool parallel(const Point& d1, const Point& d2);

}  // namespace ramiflow
