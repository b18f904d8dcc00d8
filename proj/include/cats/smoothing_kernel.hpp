#pragma once

#include <cstddef>
#include <functional>

#include "cats/random.hpp"

namespace cats {

// Clipped support [center - h, center + h] ∩ [0, 1] of a smoothed action.
struct SupportInterval {
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double a) const { return a >= lo && a <= hi; }
};

// Boundary-clipped uniform smoothing of an action in [0, 1].
//
// Smoothing an action `a` with bandwidth h yields the uniform distribution on
// [a - h, a + h] ∩ [0, 1]. h = 0 is the point mass at `a`; it has no density
// and is only reachable through `sample` and the point-mass cost path.
class SmoothingKernel {
 public:
  explicit SmoothingKernel(double bandwidth);

  double bandwidth() const { return h_; }
  bool is_point_mass() const { return h_ == 0.0; }

  SupportInterval support(double center) const;

  // Density at `query` of the distribution smoothed around `center`.
  // Throws std::invalid_argument for h = 0 or arguments outside [0, 1].
  double density(double center, double query) const;

  // Draws one action. `u` must be uniform on [0, 1).
  double sample_from_uniform(double center, double u) const;

  double sample(double center, Rng& rng) const {
    return sample_from_uniform(center, uniform01(rng));
  }

  // Midpoint-rule estimate of E_{a' ~ Smooth_h(a)}[loss(a')].
  double smoothed_loss(const std::function<double(double)>& loss, double a,
                       std::size_t quadrature_points) const;

 private:
  double h_;
};

}  // namespace cats
