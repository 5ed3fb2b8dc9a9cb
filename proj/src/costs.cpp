#include "ramiflow/costs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ramiflow/errors.hpp"

namespace ramiflow {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// ceil(q), with q within a relative 1e-9 of an integer taken as that integer.
// Step costs are evaluated at masses like 0.65 - 0.05 that should land exactly
// on a jump; the lower (lsc) value applies there.
double snapped_ceil(double q) {
  const double r = std::nearbyint(q);
  if (std::abs(q - r) <= 1e-9 * std::max(1.0, std::abs(q))) return r;
  return std::ceil(q);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::InvalidCost, what);
}

double tabulated_value(const family::Tabulated& t, double w) {
  const auto& k = t.knots;
  for (std::size_t i = 1; i < k.size(); ++i) {
    if (w <= k[i].first) {
      const double s = (k[i].second - k[i - 1].second) / (k[i].first - k[i - 1].first);
      return k[i - 1].second + s * (w - k[i - 1].first);
    }
  }
  const std::size_t n = k.size();
  const double s = (k[n - 1].second - k[n - 2].second) / (k[n - 1].first - k[n - 2].first);
  return k[n - 1].second + s * (w - k[n - 1].first);
}

double tabulated_slope(const family::Tabulated& t, double w) {
  const auto& k = t.knots;
  for (std::size_t i = 1; i < k.size(); ++i)
    if (w < k[i].first)
      return (k[i].second - k[i - 1].second) / (k[i].first - k[i - 1].first);
  const std::size_t n = k.size();
  return (k[n - 1].second - k[n - 2].second) / (k[n - 1].first - k[n - 2].first);
}

}  // namespace

TransportCost TransportCost::wasserstein(double a) {
  require(std::isfinite(a) && a > 0, "wasserstein cost needs a > 0");
  return TransportCost(family::Wasserstein{a});
}

TransportCost TransportCost::branched(double alpha) {
  require(std::isfinite(alpha) && alpha > 0 && alpha < 1, "branched cost needs alpha in (0,1)");
  return TransportCost(family::Branched{alpha});
}

TransportCost TransportCost::urban(double a, double eps) {
  require(std::isfinite(a) && a > 1, "urban cost needs a > 1");
  require(std::isfinite(eps) && eps > 0, "urban cost needs eps > 0");
  return TransportCost(family::Urban{a, eps});
}

TransportCost TransportCost::discrete() { return TransportCost(family::Discrete{}); }

TransportCost TransportCost::step(double delta) { return step(delta, delta); }

TransportCost TransportCost::step(double delta, double height) {
  require(std::isfinite(delta) && delta > 0, "step cost needs delta > 0");
  require(std::isfinite(height) && height > 0, "step cost needs height > 0");
  return TransportCost(family::Step{delta, height});
}

TransportCost TransportCost::tabulated(std::vector<std::pair<double, double>> samples) {
  require(!samples.empty(), "tabulated cost needs samples");
  for (const auto& [w, v] : samples) {
    require(std::isfinite(w) && std::isfinite(v), "tabulated samples must be finite");
    require(w > 0 && v > 0, "tabulated samples need w > 0 and tau(w) > 0");
  }
  samples.emplace_back(0.0, 0.0);
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 1; i < samples.size(); ++i)
    require(samples[i].first != samples[i - 1].first, "tabulated samples need distinct masses");
  for (std::size_t i = 1; i < samples.size(); ++i)
    require(samples[i].second >= samples[i - 1].second, "tabulated samples must be nondecreasing");
  // Upper hull (monotone chain).
  std::vector<std::pair<double, double>> hull;
  for (const auto& p : samples) {
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull[hull.size() - 1];
      const double cross = (b.first - a.first) * (p.second - a.second) -
                           (b.second - a.second) * (p.first - a.first);
      if (cross >= 0) hull.pop_back();
      else break;
    }
    hull.push_back(p);
  }
  return TransportCost(family::Tabulated{std::move(hull)});
}

TransportCost TransportCost::with_mass_scale(double m) const {
  require(std::isfinite(m) && m > 0, "mass scale must be positive");
  TransportCost c = *this;
  c.mass_scale_ = mass_scale_ * m;
  return c;
}

double TransportCost::base(double w) const {
  if (w == 0.0) return 0.0;
  return std::visit(
      Overloaded{
          [&](const family::Wasserstein& f) { return f.a * w; },
          [&](const family::Branched& f) { return std::pow(w, f.alpha); },
          [&](const family::Urban& f) { return std::min(f.a * w, w + f.eps); },
          [&](const family::Discrete&) { return 1.0; },
          [&](const family::Step& f) { return f.height * snapped_ceil(w / f.delta); },
          [&](const family::Tabulated& f) { return tabulated_value(f, w); },
      },
      family_);
}

double TransportCost::operator()(double w) const {
  if (!(w >= 0.0)) throw Error(ErrorCode::DomainError, "transportation cost evaluated at w < 0");
  return base(mass_scale_ * w);
}

bool TransportCost::is_concave() const { return !std::holds_alternative<family::Step>(family_); }

double TransportCost::supergradient(double w) const {
  const double x = mass_scale_ * w;
  const double d = std::visit(
      Overloaded{
          [&](const family::Wasserstein& f) { return f.a; },
          [&](const family::Branched& f) {
            return x > 0 ? f.alpha * std::pow(x, f.alpha - 1) : HUGE_VAL;
          },
          [&](const family::Urban& f) { return x < f.eps / (f.a - 1) ? f.a : 1.0; },
          [&](const family::Discrete&) { return x > 0 ? 0.0 : HUGE_VAL; },
          [&](const family::Step&) { return 0.0; },
          [&](const family::Tabulated& f) { return tabulated_slope(f, x); },
      },
      family_);
  return mass_scale_ * d;
}

ExtendedReal TransportCost::slope_at_zero() const {
  return std::visit(
      Overloaded{
          [&](const family::Wasserstein& f) { return ExtendedReal(mass_scale_ * f.a); },
          [&](const family::Branched&) { return ExtendedReal::infinity(); },
          [&](const family::Urban& f) { return ExtendedReal(mass_scale_ * f.a); },
          [&](const family::Discrete&) { return ExtendedReal::infinity(); },
          [&](const family::Step&) { return ExtendedReal::infinity(); },
          [&](const family::Tabulated& f) {
            return ExtendedReal(mass_scale_ * tabulated_slope(f, 0.0));
          },
      },
      family_);
}

std::vector<double> TransportCost::nonconcave_points(double lo, double hi) const {
  std::vector<double> pts;
  if (const auto* s = std::get_if<family::Step>(&family_)) {
    const double unit = s->delta / mass_scale_;
    const double first = std::max(1.0, std::floor(lo / unit));
    for (double j = first; j * unit < hi; j += 1.0)
      if (j * unit > lo) pts.push_back(j * unit);
  }
  return pts;
}

std::string TransportCost::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const family::Wasserstein& f) { os << "wasserstein(a=" << f.a << ")"; },
                 [&](const family::Branched& f) { os << "branched(alpha=" << f.alpha << ")"; },
                 [&](const family::Urban& f) { os << "urban(a=" << f.a << ", eps=" << f.eps << ")"; },
                 [&](const family::Discrete&) { os << "discrete"; },
                 [&](const family::Step& f) {
                   os << "step(delta=" << f.delta << ", height=" << f.height << ")";
                 },
                 [&](const family::Tabulated& f) { os << "tabulated(" << f.knots.size() << " knots)"; },
             },
             family_);
  if (mass_scale_ != 1.0) os << " with mass scale " << mass_scale_;
  return os.str();
}

double eval_tau(const TransportCost& tau, double w) { return tau(w); }

double lambda_tau(const TransportCost& tau, double m) {
  if (!(m > 0)) throw Error(ErrorCode::DomainError, "lambda_tau needs m > 0");
  if (tau.is_concave()) return tau(m) / m;
  // tau(w)/w on each continuity piece is minimized at the piece's right end.
  double best = tau(m) / m;
  for (double w : tau.nonconcave_points(m / 2, m)) best = std::min(best, tau(w) / w);
  return best;
}

ExtendedReal marginal_cost(const TransportCost& tau, double w) {
  if (!(w >= 0.0)) throw Error(ErrorCode::DomainError, "marginal cost evaluated at w < 0");
  if (w == 0.0) return tau.slope_at_zero();
  return ExtendedReal(tau(w) / w);
}

ConcaveMajorant::ConcaveMajorant(const TransportCost& concave_tau) : tau_(concave_tau) {
  if (!concave_tau.is_concave())
    throw Error(ErrorCode::NonConcaveCost, "majorant must be concave: " + concave_tau.describe());
}

ConcaveMajorant ConcaveMajorant::affine(double slope, double offset) {
  require(slope >= 0 && offset >= 0 && std::isfinite(slope) && std::isfinite(offset),
          "affine majorant needs nonnegative coefficients");
  ConcaveMajorant b;
  b.slope_ = slope;
  b.offset_ = offset;
  return b;
}

std::optional<ConcaveMajorant> ConcaveMajorant::of(const TransportCost& tau) {
  if (tau.is_concave()) return ConcaveMajorant(tau);
  if (const auto* s = std::get_if<family::Step>(&tau.family())) {
    // height * ceil(m w / delta) <= (height / delta) m w + height.
    return affine(s->height / s->delta * tau.mass_scale(), s->height);
  }
  return std::nullopt;
}

double ConcaveMajorant::operator()(double w) const {
  if (tau_) return (*tau_)(w);
  return slope_ * w + offset_;
}

double series_term(const ConcaveMajorant& beta, int n, int k) {
  return std::exp2(static_cast<double>((n - 1) * k)) * beta(std::exp2(-static_cast<double>(n * k)));
}

double series_sum(const ConcaveMajorant& beta, int n, int from, int to) {
  CompensatedSum s;
  for (int k = from; k <= to; ++k) s += series_term(beta, n, k);
  return s.value();
}

AdmissibilityReport check_admissible(const TransportCost& tau, int n, int K) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be >= 1");
  if (K < 4) throw Error(ErrorCode::InvalidArgument, "series cutoff must be >= 4");
  AdmissibilityReport report;
  const auto beta = ConcaveMajorant::of(tau);
  if (!beta) return report;

  std::vector<double> terms(K + 1, 0.0);
  CompensatedSum partial;
  for (int k = 1; k <= K; ++k) {
    terms[k] = series_term(*beta, n, k);
    partial += terms[k];
    report.partial_sums.push_back(partial.value());
  }
  // Ratio certificate over the last quarter of the computed terms.
  constexpr double kRatioSlack = 1e-9;
  double ratio = 0.0;
  for (int k = K - K / 4; k <= K; ++k) ratio = std::max(ratio, terms[k] / terms[k - 1]);
  report.tail_ratio = ratio;
  const bool series_converges = ratio < 1.0 - kRatioSlack;
  if (series_converges) {
    report.tail_bound = terms[K] * ratio / (1.0 - ratio);
    report.series_estimate = partial.value() + report.tail_bound.value();
  } else {
    report.tail_bound = ExtendedReal::infinity();
    report.series_estimate = ExtendedReal::infinity();
  }

  // Integral test in the variable w = 2^{-n x}:
  //   int_0^1 beta(w) w^{1/n-2} dw = n ln 2 int_0^inf 2^{(n-1)x} beta(2^{-nx}) dx.
  const auto g = [&](double x) {
    return std::exp2((n - 1) * x) * (*beta)(std::exp2(-n * x));
  };
  constexpr int kPerUnit = 64;  // Simpson panels per unit of x
  CompensatedSum integral;
  const double h = 1.0 / kPerUnit;
  for (int i = 0; i < K * kPerUnit; ++i) {
    const double a = i * h;
    integral += h / 6.0 * (g(a) + 4.0 * g(a + h / 2) + g(a + h));
  }
  const double decay = g(static_cast<double>(K)) / g(static_cast<double>(K - 1));
  report.integral_converges = decay < 1.0 - kRatioSlack;
  const double scale = n * std::numbers::ln2;
  if (report.integral_converges) {
    const double tail = g(static_cast<double>(K)) / -std::log(decay);
    report.integral_estimate = scale * (integral.value() + tail);
  } else {
    report.integral_estimate = ExtendedReal::infinity();
  }

  report.verdict = series_converges ? Admissibility::Admissible : Admissibility::NotAdmissible;
  report.consistent = series_converges == report.integral_converges;
  return report;
}

}  // namespace ramiflow
