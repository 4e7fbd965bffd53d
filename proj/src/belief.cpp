#include "bcbf/belief.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace bcbf {

void GaussianMixture::validate() const {
  if (weights.empty()) throw std::invalid_argument("mixture needs at least one component");
  if (means.size() != weights.size() || covariances.size() != weights.size()) {
    throw std::invalid_argument("mixture weights, means and covariances differ in length");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("mixture weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw std::invalid_argument("mixture weights must sum to 1");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!means[i].allFinite()) throw std::invalid_argument("mixture means must be finite");
    mixture_cholesky(covariances[i]);
  }
}

Mat2 mixture_cholesky(const Mat2& cov) {
  const double a = cov(0, 0);
  const double b = cov(1, 0);
  const double c = cov(1, 1);
  const double scale = std::max({std::abs(a), std::abs(c), 1.0});
  if (!cov.allFinite() || std::abs(cov(0, 1) - b) > 1e-12 * scale) {
    throw std::invalid_argument("covariance must be finite and symmetric");
  }
  if (a < 0.0 || c < 0.0) throw std::invalid_argument("covariance is not positive semidefinite");
  Mat2 l = Mat2::Zero();
  l(0, 0) = std::sqrt(a);
  if (a > 0.0) {
    l(1, 0) = b / l(0, 0);
  } else if (b != 0.0) {
    throw std::invalid_argument("covariance is not positive semidefinite");
  }
  const double schur = c - l(1, 0) * l(1, 0);
  if (schur < -1e-12 * scale) throw std::invalid_argument("covariance is not positive semidefinite");
  l(1, 1) = std::sqrt(std::max(schur, 0.0));
  return l;
}

ObjectState draw_from_mixture(const GaussianMixture& mix, double u_component, const Vec2& normals) {
  std::size_t comp = mix.size() - 1;
  double acc = 0.0;
  for (std::size_t j = 0; j < mix.size(); ++j) {
    acc += mix.weights[j];
    if (u_component <= acc && mix.weights[j] > 0.0) {
      comp = j;
      break;
    }
  }
  // Rounding can leave u just above the cumulative sum; fall back to the last non-empty component.
  while (mix.weights[comp] == 0.0 && comp > 0) --comp;
  return ObjectState::from_vector(mix.means[comp] + mixture_cholesky(mix.covariances[comp]) * normals);
}

namespace {

ObjectState draw_indexed(const GaussianMixture& mix, const CounterStream& stream, std::uint64_t i) {
  const double u = stream.uniform(i, 0);
  const auto z = stream.normal_pair(i, 1);
  return draw_from_mixture(mix, u, Vec2(z[0], z[1]));
}

}  // namespace

BeliefState sample_initial_belief(const GaussianMixture& mix, std::size_t n, std::uint64_t seed) {
  mix.validate();
  if (n == 0) throw std::invalid_argument("belief needs at least one sample");
  const CounterStream stream(derive_key(seed, StreamTag::kBeliefInit));
  BeliefState b;
  b.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) b.samples.push_back(draw_indexed(mix, stream, i));
  return b;
}

ObjectState draw_ground_truth(const GaussianMixture& mix, std::uint64_t seed) {
  mix.validate();
  return draw_indexed(mix, CounterStream(derive_key(seed, StreamTag::kTruthInit)), 0);
}

void propagate_belief_inplace(BeliefState& b, const Vec2& velocity, const Vec2& d_diag, double dt,
                              std::uint64_t seed, std::uint64_t step) {
  if (!(dt > 0.0)) throw std::invalid_argument("propagate_belief requires dt > 0");
  const std::uint64_t key = derive_key(seed, StreamTag::kBeliefNoise);
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    const auto z = CounterStream(derive_key(key, 0, i)).normal_pair(step);
    b.samples[i] = step_object(b.samples[i], velocity, d_diag, dt, Vec2(z[0], z[1]));
  }
}

BeliefState propagate_belief(const BeliefState& b, const Vec2& velocity, const Vec2& d_diag, double dt,
                             std::uint64_t seed, std::uint64_t step) {
  BeliefState next = b;
  propagate_belief_inplace(next, velocity, d_diag, dt, seed, step);
  return next;
}

void write_belief_trace(std::ostream& os, const BeliefState& b, std::uint64_t step) {
  for (std::size_t i = 0; i < b.samples.size(); ++i) {
    os << step << ',' << i << ',' << b.samples[i].qx << ',' << b.samples[i].qy << '\n';
  }
}

}  // namespace bcbf
