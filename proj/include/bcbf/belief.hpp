#pragma once

// Sample-based belief over the object state. Samples are never resampled or
// reweighted; sample i keeps its lineage for the whole run.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "bcbf/linalg.hpp"
#include "bcbf/rng.hpp"
#include "bcbf/sde_models.hpp"

namespace bcbf {

struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Vec2> means;
  std::vector<Mat2> covariances;

  /// Weights on the simplex (1e-12), matching sizes, symmetric PSD covariances.
  void validate() const;
  std::size_t size() const noexcept { return weights.size(); }
};

struct BeliefState {
  std::vector<ObjectState> samples;

  std::size_t size() const noexcept { return samples.size(); }
};

/// Lower-triangular factor L with L L^T = cov. Accepts positive semidefinite
/// input (zero variance collapses the component onto its mean).
Mat2 mixture_cholesky(const Mat2& cov);

/// One draw from the mixture using uniform u_component and two standard normals.
ObjectState draw_from_mixture(const GaussianMixture& mix, double u_component, const Vec2& normals);

/// n i.i.d. draws; sample i depends only on (seed, i).
BeliefState sample_initial_belief(const GaussianMixture& mix, std::size_t n, std::uint64_t seed);

/// Ground-truth initial object state, drawn from its own stream.
ObjectState draw_ground_truth(const GaussianMixture& mix, std::uint64_t seed);

/// Advances every sample by one Euler-Maruyama step with an independent
/// Brownian increment per sample. Increment (i, step) depends only on
/// (seed, i, step).
BeliefState propagate_belief(const BeliefState& b, const Vec2& velocity, const Vec2& d_diag, double dt,
                             std::uint64_t seed, std::uint64_t step);

/// In-place variant of propagate_belief for the control loop.
void propagate_belief_inplace(BeliefState& b, const Vec2& velocity, const Vec2& d_diag, double dt,
                              std::uint64_t seed, std::uint64_t step);

/// Writes "step,sample,q_x,q_y" rows (no header).
void write_belief_trace(std::ostream& os, const BeliefState& b, std::uint64_t step);

}  // namespace bcbf
