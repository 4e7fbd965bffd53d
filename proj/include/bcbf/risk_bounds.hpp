#pragma once

// Sample-based lower confidence bounds on lower-tail risk measures.
//
// All bounds are affine in the sample values with non-negative weights, which
// is what lets the barrier layer differentiate them: a BoundResult carries the
// weight of every sample (over original indices) plus the coefficient on the
// essential lower bound b.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bcbf {

enum class RiskMeasure { kVaR, kCVaR, kExpectation };

/// Sign applied to the distribution-shift budget in the robust CVaR slack.
///   kConservative: eps_eff = eps + ell (robust bound <= nominal bound)
///   kAsPrinted:    eps_eff = max(0, eps - ell)
enum class SlackSign { kConservative, kAsPrinted };

std::string_view to_string(RiskMeasure m);
RiskMeasure parse_risk_measure(std::string_view name);

struct RiskSpec {
  RiskMeasure measure = RiskMeasure::kVaR;
  double tau = 0.1;
  double delta = 0.05;
  double ell = 0.0;
  double essential_lb = 0.0;
  SlackSign robust_slack_sign = SlackSign::kConservative;

  static RiskSpec var(double tau, double delta, double ell = 0.0);
  static RiskSpec cvar(double tau, double delta, double essential_lb, double ell = 0.0);
  static RiskSpec expectation(double delta, double essential_lb, double ell = 0.0);

  /// Throws std::invalid_argument when the parameters are outside their domains.
  void validate() const;

  RiskSpec with_essential_lb(double b) const {
    RiskSpec s = *this;
    s.essential_lb = b;
    return s;
  }
  RiskSpec with_ell(double e) const {
    RiskSpec s = *this;
    s.ell = e;
    return s;
  }

  std::string label() const;
};

/// Samples sorted in descending order: values[0] is the largest.
/// Ties are broken by ascending original index.
struct OrderedSamples {
  std::vector<double> values;
  std::vector<std::size_t> perm;  // sorted position -> original index
};

OrderedSamples order_descending(std::span<const double> samples);

struct BoundResult {
  double value = 0.0;
  std::vector<double> weights;  // over original sample indices
  double b_coeff = 0.0;
  std::size_t k_index = 0;  // 1-based descending order-statistic index
  double epsilon_eff = 0.0;

  /// Original indices with non-zero weight.
  std::vector<std::size_t> active_set() const;
};

/// P[X <= k] for X ~ Binomial(n, p).
double binomial_cdf(long long k, long long n, double p);

/// Minimum sample count for the bound described by spec. For VaR this is
/// evaluated at the shifted level tau - ell.
std::size_t min_samples(const RiskSpec& spec);

/// Smallest k in [1, n] with binomial_cdf(k - 1, n, 1 - tau_eff) >= 1 - delta.
std::size_t var_k_index(std::size_t n, double tau_eff, double delta);

BoundResult var_lower_bound(std::span<const double> samples, const RiskSpec& spec);
BoundResult cvar_lower_bound(std::span<const double> samples, const RiskSpec& spec);
BoundResult expectation_lower_bound(std::span<const double> samples, const RiskSpec& spec);

/// Dispatches on spec.measure.
BoundResult lower_bound(std::span<const double> samples, const RiskSpec& spec);

/// Empirical lower tau-quantile: ascending order statistic j = max(1, floor(N tau)).
double empirical_var(std::span<const double> samples, double tau);

/// Empirical CVaR: (1/tau) times the integral of the empirical quantile function on (0, tau].
double empirical_cvar(std::span<const double> samples, double tau);

/// Precomputed bound for a fixed sample count.
///
/// The order-statistic index and DKW slack only depend on (spec, n), so the
/// control loop builds one evaluator per barrier and reuses it every step.
class BoundEvaluator {
 public:
  BoundEvaluator(const RiskSpec& spec, std::size_t n);

  const RiskSpec& spec() const noexcept { return spec_; }
  std::size_t sample_count() const noexcept { return n_; }
  std::size_t k_index() const noexcept { return k_; }
  double epsilon_eff() const noexcept { return eps_eff_; }

  BoundResult operator()(std::span<const double> samples) const;

 private:
  BoundResult evaluate_var(std::span<const double> samples) const;
  BoundResult evaluate_cvar(std::span<const double> samples) const;

  RiskSpec spec_;
  std::size_t n_;
  double tau_ = 0.0;  // 1 for expectation
  std::size_t k_ = 0;
  double eps_eff_ = 0.0;
  bool degenerate_ = false;
};

}  // namespace bcbf
