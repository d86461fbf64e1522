#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "aerotri/features/feature_set.h"
#include "aerotri/geometry/camera.h"

namespace aerotri {

enum class LossType { kTrivial, kHuber };

struct LossSpec {
  LossType type = LossType::kHuber;
  // Huber threshold on the residual norm, pixels.
  double scale = 2.0;

  // rho(s) for a squared residual norm s.
  double Evaluate(double squared_norm) const;
  // rho'(s), the IRLS weight.
  double Weight(double squared_norm) const;
};

struct BACamera {
  Pose pose;
  bool fixed_rotation = false;
  std::array<bool, 3> fixed_center = {false, false, false};

  void Fix() {
    fixed_rotation = true;
    fixed_center = {true, true, true};
  }
  bool FullyFixed() const {
    return fixed_rotation && fixed_center[0] && fixed_center[1] &&
           fixed_center[2];
  }
};

struct BAObservation {
  size_t camera = 0;
  size_t point = 0;
  Keypoint keypoint;
};

struct PositionPrior {
  size_t camera = 0;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d sigma = Eigen::Vector3d::Ones();
};

// Shared-intrinsics bundle adjustment problem. Tangent-space parameter order
// (used by every dense vector and matrix below): for each camera in order
// its free entries of [rotation (3), center (3)], then the free intrinsics in
// CameraModel::Params order, then 3 entries per free point.
struct BAProblem {
  CameraModel intrinsics;
  std::array<bool, CameraModel::kNumParams> refine_intrinsics = {};
  std::vector<BACamera> cameras;
  std::vector<Eigen::Vector3d> points;
  // Empty means every point is free.
  std::vector<bool> fixed_points;
  std::vector<BAObservation> observations;
  std::vector<PositionPrior> priors;
  LossSpec loss;

  bool PointFixed(size_t i) const {
    return !fixed_points.empty() && fixed_points[i];
  }
  size_t NumResiduals() const {
    return 2 * observations.size() + 3 * priors.size();
  }
  size_t NumFreeParameters() const;

  // Throws InvariantViolation for out-of-range indices, non-positive prior
  // sigmas or points observed fewer than twice.
  void Validate() const;
};

enum class Termination { kConverged, kMaxIterations, kTrustRegionFailure };

const char* TerminationName(Termination termination);

struct SolverOptions {
  size_t max_iterations = 100;
  double gradient_tolerance = 1e-10;
  // Relative cost decrease over the last 3 iterations.
  double cost_relative_tolerance = 1e-9;
  // Step norm relative to the norm of the free parameters.
  double parameter_tolerance = 1e-12;
  double initial_lambda = 1e-4;
  int max_consecutive_rejections = 32;
};

struct BAResult {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  size_t iterations = 0;
  Termination termination = Termination::kConverged;
  double rms_reprojection = 0.0;
  double mean_reprojection = 0.0;
  // Cost after every accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

// Sum of rho(|r|^2) over observations plus sum |(c - c_prior) / sigma|^2.
// Returns +inf when a point has non-positive depth.
double EvaluateCost(const BAProblem& problem);

// Raw residuals: 2 per observation (projection minus keypoint, pixels)
// followed by 3 per prior. Throws NonFiniteResidual for non-positive depth.
Eigen::VectorXd EvaluateResiduals(const BAProblem& problem);

// Pixel reprojection error per observation; +inf for non-positive depth.
std::vector<double> ReprojectionErrors(const BAProblem& problem);

struct DenseLinearization {
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd residuals;
};

// Analytic Jacobian of EvaluateResiduals with respect to the free tangent
// parameters. With `apply_loss_weights`, observation rows are scaled by the
// square root of the IRLS weight at the current residual.
DenseLinearization LinearizeDense(const BAProblem& problem,
                                  bool apply_loss_weights);

// Applies a tangent-space step to the free parameters.
void ApplyStep(BAProblem* problem, const Eigen::VectorXd& step);

// Levenberg-Marquardt step solving (H + lambda diag(H)) dx = -g with the
// IRLS-weighted Gauss-Newton H and g, by Schur complement over point blocks.
// Throws NumericalFailure when the reduced system is not positive definite.
Eigen::VectorXd ComputeLMStep(const BAProblem& problem, double lambda);

// True unless the problem has no priors and fewer than 7 fixed pose scalars,
// no fixed rotation, or fixed center components on fewer than two cameras.
bool GaugeIsFixed(const BAProblem& problem);

// Refines the free parameters in place. Throws NumericalFailure for a
// non-finite initial cost, an unfixed gauge, or 10 consecutive failed
// factorizations.
BAResult SolveBundleAdjustment(BAProblem* problem,
                               const SolverOptions& options = {});

// Maximum relative Frobenius discrepancy between analytic and central
// finite-difference Jacobian blocks (one block per residual group and
// parameter group). Step per parameter is eps * max(1, |x|). Throws
// NonFiniteResidual when a residual is not finite.
double CheckJacobian(const BAProblem& problem, double eps = 1e-6);

}  // namespace aerotri
