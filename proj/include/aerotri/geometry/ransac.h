#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace aerotri {

struct RansacConfig {
  // Inlier threshold in pixels. Sampson distance for two-view estimation,
  // reprojection error for absolute pose.
  double threshold = 1.0;
  double confidence = 0.9999;
  size_t min_iterations = 100;
  size_t max_iterations = 10000;
  uint64_t seed = 42;

  void Validate() const;
};

// Number of iterations needed to draw one all-inlier sample of
// `sample_size` with the given confidence.
size_t RequiredRansacIterations(size_t num_inliers, size_t num_samples,
                                size_t sample_size, double confidence);

// Draws distinct indices from [0, n). One instance per estimation call.
class RandomSampler {
 public:
  RandomSampler(uint64_t seed, size_t n) : engine_(seed), indices_(n) {
    for (size_t i = 0; i < n; ++i) indices_[i] = i;
  }

  // Partial Fisher-Yates shuffle.
  std::vector<size_t> Sample(size_t k) {
    const size_t n = indices_.size();
    for (size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<size_t> dist(i, n - 1);
      std::swap(indices_[i], indices_[dist(engine_)]);
    }
    return {indices_.begin(), indices_.begin() + static_cast<std::ptrdiff_t>(k)};
  }

 private:
  std::mt19937_64 engine_;
  std::vector<size_t> indices_;
};

}  // namespace aerotri
