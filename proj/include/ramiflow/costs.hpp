#pragma once

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ramiflow/geometry.hpp"

namespace ramiflow {

namespace family {
struct Wasserstein {
  double a = 1.0;
};
struct Branched {
  double alpha = 0.5;
};
struct Urban {
  double a = 2.0;
  double eps = 0.1;
};
struct Discrete {};
// height * ceil(w / delta); height defaults to delta.
struct Step {
  double delta = 1.0;
  double height = 1.0;
};
// Piecewise-linear interpolation of knots (w_i, tau_i), w_0 = 0, tau_0 = 0,
// with nonincreasing slopes; extended beyond the last knot by the last slope.
struct Tabulated {
  std::vector<std::pair<double, double>> knots;
};
}  // namespace family

/// A transportation cost tau: [0, inf) -> [0, inf), tau(0) = 0, positive,
/// nondecreasing, subadditive and lower semicontinuous, drawn from one of the
/// parameterized families. An optional mass scale m turns tau into
/// w -> tau(m w).
class TransportCost {
 public:
  using Family = std::variant<family::Wasserstein, family::Branched, family::Urban,
                              family::Discrete, family::Step, family::Tabulated>;

  static TransportCost wasserstein(double a = 1.0);
  static TransportCost branched(double alpha);
  static TransportCost urban(double a, double eps);
  static TransportCost discrete();
  static TransportCost step(double delta);
  static TransportCost step(double delta, double height);
  // Concave envelope (upper hull) of the given samples together with (0, 0).
  static TransportCost tabulated(std::vector<std::pair<double, double>> samples);

  const Family& family() const noexcept { return family_; }
  double mass_scale() const noexcept { return mass_scale_; }
  TransportCost with_mass_scale(double m) const;

  // tau(w) for w >= 0 (w < 0 throws DomainError).
  double operator()(double w) const;
  bool is_concave() const;
  // Right derivative; an element of the supergradient for concave families.
  double supergradient(double w) const;
  // lim_{w -> 0+} tau(w) / w.
  ExtendedReal slope_at_zero() const;
  // Masses in (lo, hi) at which tau fails to be concave (step jumps).
  std::vector<double> nonconcave_points(double lo, double hi) const;
  std::string describe() const;

 private:
  explicit TransportCost(Family f) : family_(std::move(f)) {}
  double base(double w) const;

  Family family_;
  double mass_scale_ = 1.0;
};

double eval_tau(const TransportCost& tau, double w);

/// lambda^tau(m) = inf { tau(w) / w : w in (m/2, m] }.
double lambda_tau(const TransportCost& tau, double m);

/// Marginal cost per particle r^tau(w) = tau(w)/w, extended to w = 0 by tau'(0).
ExtendedReal marginal_cost(const TransportCost& tau, double w);

/// A concave upper bound beta of a transportation cost, used by the series
/// S^beta(n,k) = 2^{(n-1)k} beta(2^{-nk}).
class ConcaveMajorant {
 public:
  // beta = tau; tau must be concave.
  explicit ConcaveMajorant(const TransportCost& concave_tau);
  // beta(w) = slope * w + offset.
  static ConcaveMajorant affine(double slope, double offset);
  // Built-in majorant: tau itself when concave, (height/delta) w + height
  // for a step cost. Empty when none is known.
  static std::optional<ConcaveMajorant> of(const TransportCost& tau);

  double operator()(double w) const;

 private:
  ConcaveMajorant() = default;
  std::optional<TransportCost> tau_;
  double slope_ = 0.0;
  double offset_ = 0.0;
};

// S^beta(n,k).
double series_term(const ConcaveMajorant& beta, int n, int k);
// sum_{j=from}^{to} S^beta(n,j).
double series_sum(const ConcaveMajorant& beta, int n, int from, int to);

enum class Admissibility { Admissible, NotAdmissible, Unknown };

struct AdmissibilityReport {
  Admissibility verdict = Admissibility::Unknown;
  std::vector<double> partial_sums;  // partial_sums[k-1] = sum_{j<=k} S^beta(n,j)
  // Geometric tail certificate: terms beyond K bounded by ratio^j * S(n,K).
  double tail_ratio = 0.0;
  ExtendedReal tail_bound;
  ExtendedReal series_estimate;  // partial sum plus tail bound
  // integral_0^1 beta(w) / w^{2-1/n} dw, truncated estimate plus tail.
  ExtendedReal integral_estimate;
  bool integral_converges = false;
  bool consistent = false;  // series and integral verdicts agree

  bool admissible() const { return verdict == Admissibility::Admissible; }
};

AdmissibilityReport check_admissible(const TransportCost& tau, int n, int K = 64);

}  // namespace ramiflow
