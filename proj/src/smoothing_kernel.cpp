#include "cats/smoothing_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace cats {

namespace {

void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1], got " +
                                std::to_string(v));
  }
}

}  // namespace

SmoothingKernel::SmoothingKernel(double bandwidth) : h_(bandwidth) {
  if (!(bandwidth >= 0.0 && bandwidth <= 0.5)) {
    throw std::invalid_argument("bandwidth must lie in [0, 1/2], got " +
                                std::to_string(bandwidth));
  }
}

SupportInterval SmoothingKernel::support(double center) const {
  require_unit(center, "center");
  return {std::max(center - h_, 0.0), std::min(center + h_, 1.0)};
}

double SmoothingKernel::density(double center, double query) const {
  if (is_point_mass()) {
    throw std::invalid_argument("density is undefined for a zero bandwidth");
  }
  require_unit(query, "query");
  const SupportInterval s = support(center);
  if (std::abs(query - center) > h_) return 0.0;
  // Unclipped windows have length exactly 2h; avoid the rounding of hi - lo.
  const bool interior = center - h_ >= 0.0 && center + h_ <= 1.0;
  return 1.0 / (interior ? 2.0 * h_ : s.length());
}

double SmoothingKernel::sample_from_uniform(double center, double u) const {
  if (is_point_mass()) {
    require_unit(center, "center");
    return center;
  }
  const SupportInterval s = support(center);
  // Clamp against rounding at the upper end of the interval.
  return std::min(s.lo + u * s.length(), s.hi);
}

double SmoothingKernel::smoothed_loss(const std::function<double(double)>& loss, double a,
                                      std::size_t quadrature_points) const {
  if (is_point_mass()) {
    require_unit(a, "action");
    return loss(a);
  }
  if (quadrature_points < 2) {
    throw std::invalid_argument("smoothed_loss needs at least 2 quadrature points");
  }
  const SupportInterval s = support(a);
  const double step = s.length() / static_cast<double>(quadrature_points);
  double sum = 0.0;
  for (std::size_t i = 0; i < quadrature_points; ++i) {
    sum += loss(s.lo + (static_cast<double>(i) + 0.5) * step);
  }
  return sum / static_cast<double>(quadrature_points);
}

}  // namespace cats
