#include "bcbf/risk_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <boost/math/special_functions/beta.hpp>

#include "bcbf/errors.hpp"

namespace bcbf {

std::string_view to_string(RiskMeasure m) {
  switch (m) {
    case RiskMeasure::kVaR:
      return "var";
    case RiskMeasure::kCVaR:
      return "cvar";
    case RiskMeasure::kExpectation:
      return "expectation";
  }
  return "unknown";
}

RiskMeasure parse_risk_measure(std::string_view name) {
  if (name == "var" || name == "VaR") return RiskMeasure::kVaR;
  if (name == "cvar" || name == "CVaR") return RiskMeasure::kCVaR;
  if (name == "expectation" || name == "mean" || name == "E") return RiskMeasure::kExpectation;
  throw std::invalid_argument("unknown risk measure '" + std::string(name) + "'");
}

RiskSpec RiskSpec::var(double tau, double delta, double ell) {
  RiskSpec s;
  s.measure = RiskMeasure::kVaR;
  s.tau = tau;
  s.delta = delta;
  s.ell = ell;
  return s;
}

RiskSpec RiskSpec::cvar(double tau, double delta, double essential_lb, double ell) {
  RiskSpec s;
  s.measure = RiskMeasure::kCVaR;
  s.tau = tau;
  s.delta = delta;
  s.ell = ell;
  s.essential_lb = essential_lb;
  return s;
}

RiskSpec RiskSpec::expectation(double delta, double essential_lb, double ell) {
  RiskSpec s;
  s.measure = RiskMeasure::kExpectation;
  s.tau = 1.0;
  s.delta = delta;
  s.ell = ell;
  s.essential_lb = essential_lb;
  return s;
}

void RiskSpec::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("invalid risk spec: " + what); };
  if (!std::isfinite(tau) || !std::isfinite(delta) || !std::isfinite(ell)) fail("non-finite parameter");
  if (!std::isfinite(essential_lb)) fail("essential lower bound must be finite");
  switch (measure) {
    case RiskMeasure::kVaR:
      if (!(tau > 0.0 && tau < 1.0)) fail("VaR requires tau in (0, 1)");
      if (!(delta > 0.0 && delta < 1.0)) fail("VaR requires delta in (0, 1)");
      break;
    case RiskMeasure::kCVaR:
      if (!(tau > 0.0 && tau <= 1.0)) fail("CVaR requires tau in (0, 1]");
      if (!(delta > 0.0 && delta <= 0.5)) fail("CVaR requires delta in (0, 0.5]");
      break;
    case RiskMeasure::kExpectation:
      if (tau != 1.0) fail("expectation bound is defined at tau = 1");
      if (!(delta > 0.0 && delta <= 0.5)) fail("expectation requires delta in (0, 0.5]");
      break;
  }
  if (!(ell >= 0.0 && ell < tau)) fail("ell must lie in [0, tau)");
}

std::string RiskSpec::label() const {
  std::ostringstream os;
  switch (measure) {
    case RiskMeasure::kVaR:
      os << "VaR_" << tau;
      break;
    case RiskMeasure::kCVaR:
      os << "CVaR_" << tau;
      break;
    case RiskMeasure::kExpectation:
      os << "E";
      break;
  }
  if (ell > 0.0) os << "^" << ell;
  return os.str();
}

namespace {

void check_finite(std::span<const double> samples) {
  for (double v : samples) {
    if (!std::isfinite(v)) throw std::invalid_argument("samples must be finite");
  }
}

// Strict total order: larger value first, then smaller original index.
struct DescendingByValue {
  std::span<const double> v;
  bool operator()(std::size_t a, std::size_t b) const {
    return v[a] > v[b] || (v[a] == v[b] && a < b);
  }
};

double dkw_epsilon(std::size_t n, double delta) {
  return std::sqrt(-std::log(delta) / (2.0 * static_cast<double>(n)));
}

}  // namespace

OrderedSamples order_descending(std::span<const double> samples) {
  OrderedSamples out;
  out.perm.resize(samples.size());
  std::iota(out.perm.begin(), out.perm.end(), std::size_t{0});
  std::sort(out.perm.begin(), out.perm.end(), DescendingByValue{samples});
  out.values.reserve(samples.size());
  for (std::size_t i : out.perm) out.values.push_back(samples[i]);
  return out;
}

std::vector<std::size_t> BoundResult::active_set() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] != 0.0) out.push_back(i);
  }
  return out;
}

double binomial_cdf(long long k, long long n, double p) {
  if (n < 0 || k < 0 || k > n) throw std::invalid_argument("binomial_cdf requires 0 <= k <= n");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("binomial_cdf requires p in [0, 1]");
  if (k == n) return 1.0;
  if (p == 0.0) return 1.0;
  if (p == 1.0) return 0.0;
  // P[X <= k] = 1 - I_p(k + 1, n - k)
  return boost::math::ibetac(static_cast<double>(k + 1), static_cast<double>(n - k), p);
}

std::size_t min_samples(const RiskSpec& spec) {
  spec.validate();
  const double log_delta = std::log(spec.delta);
  switch (spec.measure) {
    case RiskMeasure::kVaR: {
      const double tau_eff = spec.tau - spec.ell;
      return static_cast<std::size_t>(std::ceil(log_delta / std::log1p(-tau_eff)));
    }
    case RiskMeasure::kCVaR:
      return static_cast<std::size_t>(std::ceil(-0.5 * log_delta / (spec.tau * spec.tau)));
    case RiskMeasure::kExpectation:
      return static_cast<std::size_t>(std::ceil(-0.5 * log_delta));
  }
  return 0;
}

std::size_t var_k_index(std::size_t n, double tau_eff, double delta) {
  if (n == 0) throw std::invalid_argument("var_k_index requires n >= 1");
  if (!(tau_eff > 0.0 && tau_eff < 1.0) || !(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("var_k_index requires tau, delta in (0, 1)");
  }
  const auto nn = static_cast<long long>(n);
  const double p = 1.0 - tau_eff;
  const double target = 1.0 - delta;
  auto ok = [&](long long k) { return binomial_cdf(k - 1, nn, p) >= target; };
  if (!ok(nn)) throw NoValidIndex("no order statistic satisfies the confidence level; sample count too small");
  // The CDF is non-decreasing in k, so bisect for the first passing index.
  long long lo = 1;
  long long hi = nn;
  while (lo < hi) {
    const long long mid = lo + (hi - lo) / 2;
    if (ok(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return static_cast<std::size_t>(lo);
}

BoundEvaluator::BoundEvaluator(const RiskSpec& spec, std::size_t n) : spec_(spec), n_(n) {
  spec_.validate();
  const std::size_t required = min_samples(spec_);
  if (n_ < required || n_ == 0) throw InsufficientSamples(std::max<std::size_t>(required, 1), n_);

  if (spec_.measure == RiskMeasure::kVaR) {
    tau_ = spec_.tau;
    k_ = var_k_index(n_, spec_.tau - spec_.ell, spec_.delta);
    eps_eff_ = 0.0;
    return;
  }

  tau_ = spec_.measure == RiskMeasure::kExpectation ? 1.0 : spec_.tau;
  const double eps = dkw_epsilon(n_, spec_.delta);
  eps_eff_ = spec_.robust_slack_sign == SlackSign::kConservative ? eps + spec_.ell
                                                                   : std::max(0.0, eps - spec_.ell);
  if (tau_ - eps_eff_ <= 0.0) {
    degenerate_ = true;
    k_ = n_;
    return;
  }
  const double nd = static_cast<double>(n_);
  auto coeff = [&](std::size_t k) { return static_cast<double>(k) / nd - eps_eff_ - 1.0 + tau_; };
  auto k = static_cast<long long>(std::ceil(nd * (1.0 - tau_ + eps_eff_)));
  k = std::clamp<long long>(k, 1, static_cast<long long>(n_));
  std::size_t ku = static_cast<std::size_t>(k);
  while (ku > 1 && coeff(ku - 1) >= 0.0) --ku;
  while (ku < n_ && coeff(ku) < 0.0) ++ku;
  k_ = ku;
}

BoundResult BoundEvaluator::operator()(std::span<const double> samples) const {
  if (samples.size() != n_) {
    throw std::invalid_argument("bound evaluator built for " + std::to_string(n_) + " samples, got " +
                                std::to_string(samples.size()));
  }
  check_finite(samples);
  if (spec_.measure == RiskMeasure::kVaR) return evaluate_var(samples);
  return evaluate_cvar(samples);
}

BoundResult BoundEvaluator::evaluate_var(std::span<const double> samples) const {
  std::vector<std::size_t> idx(n_);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto nth = idx.begin() + static_cast<std::ptrdiff_t>(k_ - 1);
  std::nth_element(idx.begin(), nth, idx.end(), DescendingByValue{samples});

  BoundResult r;
  r.weights.assign(n_, 0.0);
  r.weights[*nth] = 1.0;
  r.value = samples[*nth];
  r.b_coeff = 0.0;
  r.k_index = k_;
  r.epsilon_eff = 0.0;
  return r;
}

BoundResult BoundEvaluator::evaluate_cvar(std::span<const double> samples) const {
  const double b = spec_.essential_lb;
  const double lowest = *std::min_element(samples.begin(), samples.end());
  if (lowest < b) {
    throw EssentialLowerBoundViolated("sample " + std::to_string(lowest) + " is below the essential lower bound " +
                                      std::to_string(b));
  }

  BoundResult r;
  r.weights.assign(n_, 0.0);
  r.k_index = k_;
  r.epsilon_eff = eps_eff_;
  if (degenerate_) {
    r.value = b;
    r.b_coeff = 1.0;
    return r;
  }

  std::vector<std::size_t> idx(n_);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto nth = idx.begin() + static_cast<std::ptrdiff_t>(k_ - 1);
  std::nth_element(idx.begin(), nth, idx.end(), DescendingByValue{samples});

  const double nd = static_cast<double>(n_);
  const double inv_tau = 1.0 / tau_;
  const double kth_coeff = static_cast<double>(k_) / nd - eps_eff_ - 1.0 + tau_;
  const double tail_weight = inv_tau / nd;

  double tail_sum = 0.0;
  for (auto it = nth + 1; it != idx.end(); ++it) {
    tail_sum += samples[*it];
    r.weights[*it] = tail_weight;
  }
  r.weights[*nth] = kth_coeff * inv_tau;
  r.b_coeff = eps_eff_ * inv_tau;
  r.value = inv_tau * (eps_eff_ * b + kth_coeff * samples[*nth] + tail_sum / nd);
  return r;
}

BoundResult var_lower_bound(std::span<const double> samples, const RiskSpec& spec) {
  RiskSpec s = spec;
  s.measure = RiskMeasure::kVaR;
  return BoundEvaluator(s, samples.size())(samples);
}

BoundResult cvar_lower_bound(std::span<const double> samples, const RiskSpec& spec) {
  RiskSpec s = spec;
  s.measure = RiskMeasure::kCVaR;
  return BoundEvaluator(s, samples.size())(samples);
}

BoundResult expectation_lower_bound(std::span<const double> samples, const RiskSpec& spec) {
  RiskSpec s = spec;
  s.measure = RiskMeasure::kExpectation;
  s.tau = 1.0;
  return BoundEvaluator(s, samples.size())(samples);
}

BoundResult lower_bound(std::span<const double> samples, const RiskSpec& spec) {
  return BoundEvaluator(spec, samples.size())(samples);
}

double empirical_var(std::span<const double> samples, double tau) {
  if (samples.empty()) throw std::invalid_argument("empirical_var requires at least one sample");
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("empirical_var requires tau in (0, 1)");
  const std::size_t n = samples.size();
  // Guard against N*tau landing a hair below an integer.
  const auto j = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(n) * tau * (1.0 + 1e-12))));
  std::vector<double> v(samples.begin(), samples.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(j - 1), v.end());
  return v[j - 1];
}

double empirical_cvar(std::span<const double> samples, double tau) {
  if (samples.empty()) throw std::invalid_argument("empirical_cvar requires at least one sample");
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("empirical_cvar requires tau in (0, 1]");
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  const double nd = static_cast<double>(v.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double lo = static_cast<double>(j) / nd;
    if (lo >= tau) break;
    const double hi = std::min(static_cast<double>(j + 1) / nd, tau);
    acc += v[j] * (hi - lo);
  }
  return acc / tau;
}

}  // namespace bcbf
