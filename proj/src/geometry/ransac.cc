#include "aerotri/geometry/ransac.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aerotri/common/error.h"

namespace aerotri {

void RansacConfig::Validate() const {
  if (!(threshold > 0.0) || !(confidence > 0.0 && confidence < 1.0) ||
      max_iterations < min_iterations || max_iterations == 0) {
    throw Error(ErrorCode::kConfigError,
                "RANSAC needs threshold > 0, 0 < confidence < 1 and "
                "min_iterations <= max_iterations");
  }
}

size_t RequiredRansacIterations(size_t num_inliers, size_t num_samples,
                                size_t sample_size, double confidence) {
  if (num_samples == 0 || num_inliers == 0) {
    return std::numeric_limits<size_t>::max();
  }
  const double inlier_ratio =
      static_cast<double>(num_inliers) / static_cast<double>(num_samples);
  const double p_good = std::pow(inlier_ratio, static_cast<double>(sample_size));
  if (p_good >= 1.0) {
    return 0;
  }
  if (p_good <= 0.0) {
    return std::numeric_limits<size_t>::max();
  }
  const double n = std::log(1.0 - confidence) / std::log(1.0 - p_good);
  if (!std::isfinite(n) || n >= 1e18) {
    return std::numeric_limits<size_t>::max();
  }
  return static_cast<size_t>(std::ceil(n));
}

}  // namespace aerotri
