#include "aerotri/ba/bundle_adjustment.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "aerotri/common/error.h"

namespace aerotri {
namespace {

constexpr int kCameraSideBlock = 12;
constexpr int kMaxFactorizationFailures = 10;

using CameraSideJacobian = Eigen::Matrix<double, 2, kCameraSideBlock>;
using CameraSideIndices = std::array<int, kCameraSideBlock>;

struct Layout {
  std::vector<std::array<int, 6>> camera_cols;
  std::array<int, CameraModel::kNumParams> intrinsic_cols{};
  int num_camera_side = 0;
  std::vector<int> point_cols;
  int num_total = 0;

  CameraSideIndices ObservationCols(size_t camera) const {
    CameraSideIndices cols;
    std::copy(camera_cols[camera].begin(), camera_cols[camera].end(),
              cols.begin());
    std::copy(intrinsic_cols.begin(), intrinsic_cols.end(), cols.begin() + 6);
    return cols;
  }
};

Layout MakeLayout(const BAProblem& problem) {
  Layout layout;
  int col = 0;
  layout.camera_cols.resize(problem.cameras.size());
  for (size_t c = 0; c < problem.cameras.size(); ++c) {
    const BACamera& cam = problem.cameras[c];
    for (int k = 0; k < 3; ++k) {
      layout.camera_cols[c][k] = cam.fixed_rotation ? -1 : col++;
    }
    for (int k = 0; k < 3; ++k) {
      layout.camera_cols[c][3 + k] = cam.fixed_center[k] ? -1 : col++;
    }
  }
  for (int k = 0; k < CameraModel::kNumParams; ++k) {
    layout.intrinsic_cols[k] = problem.refine_intrinsics[k] ? col++ : -1;
  }
  layout.num_camera_side = col;
  layout.point_cols.resize(problem.points.size());
  for (size_t i = 0; i < problem.points.size(); ++i) {
    if (problem.PointFixed(i)) {
      layout.point_cols[i] = -1;
    } else {
      layout.point_cols[i] = col;
      col += 3;
    }
  }
  layout.num_total = col;
  return layout;
}

struct ObservationLinearization {
  CameraSideJacobian camera_side;
  Eigen::Matrix<double, 2, 3> point;
  Eigen::Vector2d residual;
};

bool Project(const BAProblem& problem, const BAObservation& obs,
             Eigen::Vector2d* residual) {
  const Pose& pose = problem.cameras[obs.camera].pose;
  Eigen::Vector2d pixel;
  if (!ProjectCameraPoint(problem.intrinsics,
                          pose.ToCamera(problem.points[obs.point]), &pixel)) {
    return false;
  }
  *residual = pixel - obs.keypoint.Position();
  return true;
}

bool Linearize(const BAProblem& problem, const BAObservation& obs,
               ObservationLinearization* lin) {
  const Pose& pose = problem.cameras[obs.camera].pose;
  const Eigen::Matrix3d r = pose.R();
  const Eigen::Vector3d xc = r * (problem.points[obs.point] - pose.center);
  Eigen::Vector2d pixel;
  ProjectionJacobian jac;
  if (!ProjectCameraPoint(problem.intrinsics, xc, &pixel, &jac)) {
    return false;
  }
  lin->residual = pixel - obs.keypoint.Position();
  lin->camera_side.leftCols<3>() = -jac.wrt_camera_point * Skew(xc);
  lin->camera_side.middleCols<3>(3) = -jac.wrt_camera_point * r;
  lin->camera_side.rightCols<6>() = jac.wrt_intrinsics;
  lin->point = jac.wrt_camera_point * r;
  return true;
}

Eigen::Vector3d PriorResidual(const BAProblem& problem,
                              const PositionPrior& prior) {
  return (problem.cameras[prior.camera].pose.center - prior.center)
      .cwiseQuotient(prior.sigma);
}

double FreeParameterNorm(const BAProblem& problem, const Layout& layout) {
  double sq = 0.0;
  for (size_t c = 0; c < problem.cameras.size(); ++c) {
    for (int k = 0; k < 3; ++k) {
      if (layout.camera_cols[c][3 + k] >= 0) {
        sq += problem.cameras[c].pose.center(k) * problem.cameras[c].pose.center(k);
      }
    }
  }
  const auto params = problem.intrinsics.Params();
  for (int k = 0; k < CameraModel::kNumParams; ++k) {
    if (layout.intrinsic_cols[k] >= 0) sq += params(k) * params(k);
  }
  for (size_t i = 0; i < problem.points.size(); ++i) {
    if (layout.point_cols[i] >= 0) sq += problem.points[i].squaredNorm();
  }
  return std::sqrt(sq);
}

struct FactorizationFailure {};

// Normal equations in Schur form for one linearization point.
class SchurSystem {
 public:
  SchurSystem(const BAProblem& problem, const Layout& layout)
      : problem_(problem), layout_(layout) {
    const int nc = layout.num_camera_side;
    u_ = Eigen::MatrixXd::Zero(nc, nc);
    gc_ = Eigen::VectorXd::Zero(nc);
    const size_t np = problem.points.size();
    v_.assign(np, Eigen::Matrix3d::Zero());
    gp_.assign(np, Eigen::Vector3d::Zero());
    point_obs_.resize(np);
    w_.resize(problem.observations.size());
    cols_.resize(problem.observations.size());

    for (size_t o = 0; o < problem.observations.size(); ++o) {
      const BAObservation& obs = problem.observations[o];
      ObservationLinearization lin;
      if (!Linearize(problem, obs, &lin)) {
        throw Error(ErrorCode::kNonFiniteResidual,
                    "point " + std::to_string(obs.point) +
                        " has non-positive depth in camera " +
                        std::to_string(obs.camera));
      }
      const double weight = problem.loss.Weight(lin.residual.squaredNorm());
      const CameraSideIndices cols = layout.ObservationCols(obs.camera);
      cols_[o] = cols;
      const Eigen::Matrix<double, kCameraSideBlock, kCameraSideBlock> jtj =
          weight * lin.camera_side.transpose() * lin.camera_side;
      const Eigen::Matrix<double, kCameraSideBlock, 1> jtr =
          weight * lin.camera_side.transpose() * lin.residual;
      for (int a = 0; a < kCameraSideBlock; ++a) {
        if (cols[a] < 0) continue;
        gc_(cols[a]) += jtr(a);
        for (int b = 0; b < kCameraSideBlock; ++b) {
          if (cols[b] >= 0) u_(cols[a], cols[b]) += jtj(a, b);
        }
      }
      if (layout.point_cols[obs.point] >= 0) {
        v_[obs.point] += weight * lin.point.transpose() * lin.point;
        gp_[obs.point] += weight * lin.point.transpose() * lin.residual;
        w_[o] = weight * lin.camera_side.transpose() * lin.point;
        point_obs_[obs.point].push_back(o);
      }
    }
    for (const PositionPrior& prior : problem.priors) {
      const Eigen::Vector3d r = PriorResidual(problem, prior);
      for (int k = 0; k < 3; ++k) {
        const int col = layout.camera_cols[prior.camera][3 + k];
        if (col < 0) continue;
        u_(col, col) += 1.0 / (prior.sigma(k) * prior.sigma(k));
        gc_(col) += r(k) / prior.sigma(k);
      }
    }
  }

  double GradientMaxNorm() const {
    double g = gc_.size() > 0 ? gc_.lpNorm<Eigen::Infinity>() : 0.0;
    for (size_t i = 0; i < gp_.size(); ++i) {
      if (layout_.point_cols[i] >= 0) {
        g = std::max(g, gp_[i].lpNorm<Eigen::Infinity>());
      }
    }
    return g;
  }

  // Throws FactorizationFailure when a damped block is not positive definite.
  Eigen::VectorXd Solve(double lambda) const {
    const int nc = layout_.num_camera_side;
    Eigen::MatrixXd s = u_;
    s.diagonal() *= 1.0 + lambda;
    Eigen::VectorXd rhs = -gc_;

    const size_t np = problem_.points.size();
    std::vector<Eigen::Matrix3d> v_inv(np);
    std::vector<Eigen::Matrix<double, kCameraSideBlock, 3>> wv(
        problem_.observations.size());
    for (size_t j = 0; j < np; ++j) {
      if (layout_.point_cols[j] < 0) continue;
      Eigen::Matrix3d v = v_[j];
      v.diagonal() *= 1.0 + lambda;
      const Eigen::LLT<Eigen::Matrix3d> llt(v);
      if (llt.info() != Eigen::Success) {
        throw FactorizationFailure{};
      }
      v_inv[j] = llt.solve(Eigen::Matrix3d::Identity());
      const std::vector<size_t>& obs = point_obs_[j];
      for (size_t o : obs) wv[o] = w_[o] * v_inv[j];
      for (size_t a : obs) {
        const CameraSideIndices& ca = cols_[a];
        const Eigen::Matrix<double, kCameraSideBlock, 1> r = wv[a] * gp_[j];
        for (int p = 0; p < kCameraSideBlock; ++p) {
          if (ca[p] >= 0) rhs(ca[p]) += r(p);
        }
        for (size_t b : obs) {
          const CameraSideIndices& cb = cols_[b];
          const Eigen::Matrix<double, kCameraSideBlock, kCameraSideBlock> blk =
              wv[a] * w_[b].transpose();
          for (int p = 0; p < kCameraSideBlock; ++p) {
            if (ca[p] < 0) continue;
            for (int q = 0; q < kCameraSideBlock; ++q) {
              if (cb[q] >= 0) s(ca[p], cb[q]) -= blk(p, q);
            }
          }
        }
      }
    }

    Eigen::VectorXd step = Eigen::VectorXd::Zero(layout_.num_total);
    if (nc > 0) {
      const Eigen::LLT<Eigen::MatrixXd> llt(s);
      if (llt.info() != Eigen::Success) {
        throw FactorizationFailure{};
      }
      step.head(nc) = llt.solve(rhs);
    }
    for (size_t j = 0; j < np; ++j) {
      const int col = layout_.point_cols[j];
      if (col < 0) continue;
      Eigen::Vector3d b = -gp_[j];
      for (size_t o : point_obs_[j]) {
        const CameraSideIndices& co = cols_[o];
        for (int p = 0; p < kCameraSideBlock; ++p) {
          if (co[p] >= 0) b -= w_[o].row(p).transpose() * step(co[p]);
        }
      }
      step.segment<3>(col) = v_inv[j] * b;
    }
    if (!step.allFinite()) {
      throw FactorizationFailure{};
    }
    return step;
  }

 private:
  const BAProblem& problem_;
  const Layout& layout_;
  Eigen::MatrixXd u_;
  Eigen::VectorXd gc_;
  std::vector<Eigen::Matrix3d> v_;
  std::vector<Eigen::Vector3d> gp_;
  std::vector<std::vector<size_t>> point_obs_;
  std::vector<Eigen::Matrix<double, kCameraSideBlock, 3>> w_;
  std::vector<CameraSideIndices> cols_;
};

void ApplyStepWithLayout(BAProblem* problem, const Layout& layout,
                         const Eigen::VectorXd& step) {
  for (size_t c = 0; c < problem->cameras.size(); ++c) {
    Pose& pose = problem->cameras[c].pose;
    const auto& cols = layout.camera_cols[c];
    if (cols[0] >= 0) {
      const Eigen::Vector3d dtheta(step(cols[0]), step(cols[1]), step(cols[2]));
      pose.rotation =
          RetractPose(pose, dtheta, Eigen::Vector3d::Zero()).rotation;
    }
    for (int k = 0; k < 3; ++k) {
      if (cols[3 + k] >= 0) pose.center(k) += step(cols[3 + k]);
    }
  }
  Eigen::Matrix<double, CameraModel::kNumParams, 1> params =
      problem->intrinsics.Params();
  bool intrinsics_changed = false;
  for (int k = 0; k < CameraModel::kNumParams; ++k) {
    if (layout.intrinsic_cols[k] >= 0) {
      params(k) += step(layout.intrinsic_cols[k]);
      intrinsics_changed = true;
    }
  }
  if (intrinsics_changed) {
    problem->intrinsics.SetParams(params);
  }
  for (size_t i = 0; i < problem->points.size(); ++i) {
    if (layout.point_cols[i] >= 0) {
      problem->points[i] += step.segment<3>(layout.point_cols[i]);
    }
  }
}

void FillReprojectionStats(const BAProblem& problem, BAResult* result) {
  const std::vector<double> errors = ReprojectionErrors(problem);
  if (errors.empty()) {
    return;
  }
  double sum = 0.0;
  double sq = 0.0;
  for (double e : errors) {
    sum += e;
    sq += e * e;
  }
  const auto n = static_cast<double>(errors.size());
  result->mean_reprojection = sum / n;
  result->rms_reprojection = std::sqrt(sq / n);
}

}  // namespace

double LossSpec::Evaluate(double squared_norm) const {
  if (type == LossType::kTrivial || squared_norm <= scale * scale) {
    return squared_norm;
  }
  return 2.0 * scale * std::sqrt(squared_norm) - scale * scale;
}

double LossSpec::Weight(double squared_norm) const {
  if (type == LossType::kTrivial || squared_norm <= scale * scale) {
    return 1.0;
  }
  return scale / std::sqrt(squared_norm);
}

size_t BAProblem::NumFreeParameters() const {
  return static_cast<size_t>(MakeLayout(*this).num_total);
}

void BAProblem::Validate() const {
  if (!fixed_points.empty() && fixed_points.size() != points.size()) {
    throw Error(ErrorCode::kInvariantViolation,
                "fixed_points size does not match points");
  }
  std::vector<size_t> counts(points.size(), 0);
  for (const BAObservation& obs : observations) {
    if (obs.camera >= cameras.size() || obs.point >= points.size()) {
      throw Error(ErrorCode::kInvariantViolation,
                  "observation references an unknown camera or point");
    }
    ++counts[obs.point];
  }
  for (size_t i = 0; i < points.size(); ++i) {
    if (counts[i] < 2) {
      throw Error(ErrorCode::kInvariantViolation,
                  "point " + std::to_string(i) + " observed fewer than twice");
    }
  }
  for (const PositionPrior& prior : priors) {
    if (prior.camera >= cameras.size()) {
      throw Error(ErrorCode::kInvariantViolation,
                  "prior references an unknown camera");
    }
    if (!(prior.sigma.minCoeff() > 0.0)) {
      throw Error(ErrorCode::kInvariantViolation, "prior sigma must be > 0");
    }
  }
  if (loss.type == LossType::kHuber && !(loss.scale > 0.0)) {
    throw Error(ErrorCode::kInvariantViolation, "Huber scale must be > 0");
  }
}

const char* TerminationName(Termination termination) {
  switch (termination) {
    case Termination::kConverged:
      return "Converged";
    case Termination::kMaxIterations:
      return "MaxIterations";
    case Termination::kTrustRegionFailure:
      return "TrustRegionFailure";
  }
  return "Unknown";
}

double EvaluateCost(const BAProblem& problem) {
  double cost = 0.0;
  for (const BAObservation& obs : problem.observations) {
    Eigen::Vector2d r;
    if (!Project(problem, obs, &r)) {
      return std::numeric_limits<double>::infinity();
    }
    cost += problem.loss.Evaluate(r.squaredNorm());
  }
  for (const PositionPrior& prior : problem.priors) {
    cost += PriorResidual(problem, prior).squaredNorm();
  }
  return cost;
}

Eigen::VectorXd EvaluateResiduals(const BAProblem& problem) {
  Eigen::VectorXd residuals(static_cast<Eigen::Index>(problem.NumResiduals()));
  Eigen::Index row = 0;
  for (const BAObservation& obs : problem.observations) {
    Eigen::Vector2d r;
    if (!Project(problem, obs, &r) || !r.allFinite()) {
      throw Error(ErrorCode::kNonFiniteResidual,
                  "point " + std::to_string(obs.point) +
                      " has non-positive depth in camera " +
                      std::to_string(obs.camera));
    }
    residuals.segment<2>(row) = r;
    row += 2;
  }
  for (const PositionPrior& prior : problem.priors) {
    residuals.segment<3>(row) = PriorResidual(problem, prior);
    row += 3;
  }
  return residuals;
}

std::vector<double> ReprojectionErrors(const BAProblem& problem) {
  std::vector<double> errors;
  errors.reserve(problem.observations.size());
  for (const BAObservation& obs : problem.observations) {
    Eigen::Vector2d r;
    errors.push_back(Project(problem, obs, &r)
                         ? r.norm()
                         : std::numeric_limits<double>::infinity());
  }
  return errors;
}

DenseLinearization LinearizeDense(const BAProblem& problem,
                                  bool apply_loss_weights) {
  const Layout layout = MakeLayout(problem);
  DenseLinearization out;
  const auto rows = static_cast<Eigen::Index>(problem.NumResiduals());
  out.jacobian = Eigen::MatrixXd::Zero(rows, layout.num_total);
  out.residuals = Eigen::VectorXd::Zero(rows);
  Eigen::Index row = 0;
  for (const BAObservation& obs : problem.observations) {
    ObservationLinearization lin;
    if (!Linearize(problem, obs, &lin)) {
      throw Error(ErrorCode::kNonFiniteResidual,
                  "point has non-positive depth");
    }
    const double scale =
        apply_loss_weights
            ? std::sqrt(problem.loss.Weight(lin.residual.squaredNorm()))
            : 1.0;
    const CameraSideIndices cols = layout.ObservationCols(obs.camera);
    for (int a = 0; a < kCameraSideBlock; ++a) {
      if (cols[a] >= 0) {
        out.jacobian.block<2, 1>(row, cols[a]) = scale * lin.camera_side.col(a);
      }
    }
    const int pc = layout.point_cols[obs.point];
    if (pc >= 0) {
      out.jacobian.block<2, 3>(row, pc) = scale * lin.point;
    }
    out.residuals.segment<2>(row) = scale * lin.residual;
    row += 2;
  }
  for (const PositionPrior& prior : problem.priors) {
    out.residuals.segment<3>(row) = PriorResidual(problem, prior);
    for (int k = 0; k < 3; ++k) {
      const int col = layout.camera_cols[prior.camera][3 + k];
      if (col >= 0) out.jacobian(row + k, col) = 1.0 / prior.sigma(k);
    }
    row += 3;
  }
  return out;
}

void ApplyStep(BAProblem* problem, const Eigen::VectorXd& step) {
  const Layout layout = MakeLayout(*problem);
  if (step.size() != layout.num_total) {
    throw Error(ErrorCode::kDimensionMismatch,
                "step size does not match the free parameter count");
  }
  ApplyStepWithLayout(problem, layout, step);
}

Eigen::VectorXd ComputeLMStep(const BAProblem& problem, double lambda) {
  const Layout layout = MakeLayout(problem);
  const SchurSystem system(problem, layout);
  try {
    return system.Solve(lambda);
  } catch (const FactorizationFailure&) {
    throw Error(ErrorCode::kNumericalFailure,
                "damped normal equations are not positive definite");
  }
}

bool GaugeIsFixed(const BAProblem& problem) {
  if (!problem.priors.empty() || problem.NumFreeParameters() == 0) {
    return true;
  }
  bool any_rotation = false;
  int fixed_scalars = 0;
  int cameras_with_fixed_center = 0;
  for (const BACamera& cam : problem.cameras) {
    if (cam.fixed_rotation) {
      any_rotation = true;
      fixed_scalars += 3;
    }
    const int n = static_cast<int>(std::count(cam.fixed_center.begin(),
                                              cam.fixed_center.end(), true));
    fixed_scalars += n;
    if (n > 0) ++cameras_with_fixed_center;
  }
  return any_rotation && fixed_scalars >= 7 && cameras_with_fixed_center >= 2;
}

BAResult SolveBundleAdjustment(BAProblem* problem,
                               const SolverOptions& options) {
  problem->Validate();
  if (!GaugeIsFixed(*problem)) {
    throw Error(ErrorCode::kNumericalFailure,
                "gauge is not fixed: no priors and fewer than 7 fixed pose "
                "scalars over two cameras");
  }
  BAResult result;
  double cost = EvaluateCost(*problem);
  if (!std::isfinite(cost)) {
    throw Error(ErrorCode::kNumericalFailure, "initial cost is not finite");
  }
  result.initial_cost = cost;
  result.cost_history.push_back(cost);

  const Layout layout = MakeLayout(*problem);
  if (layout.num_total == 0) {
    result.final_cost = cost;
    FillReprojectionStats(*problem, &result);
    return result;
  }

  double lambda = options.initial_lambda;
  result.termination = Termination::kMaxIterations;
  bool done = false;
  while (!done && result.iterations < options.max_iterations) {
    const SchurSystem system(*problem, layout);
    if (system.GradientMaxNorm() < options.gradient_tolerance) {
      result.termination = Termination::kConverged;
      break;
    }
    ++result.iterations;

    int factorization_failures = 0;
    int rejections = 0;
    while (true) {
      Eigen::VectorXd step;
      try {
        step = system.Solve(lambda);
      } catch (const FactorizationFailure&) {
        if (++factorization_failures >= kMaxFactorizationFailures) {
          throw Error(ErrorCode::kNumericalFailure,
                      "reduced camera system not positive definite after " +
                          std::to_string(kMaxFactorizationFailures) +
                          " damping increases");
        }
        lambda *= 2.0;
        continue;
      }
      if (step.norm() <= options.parameter_tolerance *
                             (FreeParameterNorm(*problem, layout) +
                              options.parameter_tolerance)) {
        result.termination = Termination::kConverged;
        done = true;
        break;
      }
      BAProblem trial = *problem;
      ApplyStepWithLayout(&trial, layout, step);
      const double trial_cost = EvaluateCost(trial);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        *problem = std::move(trial);
        cost = trial_cost;
        result.cost_history.push_back(cost);
        lambda = std::max(lambda / 3.0, 1e-16);
        break;
      }
      lambda *= 2.0;
      if (++rejections >= options.max_consecutive_rejections) {
        result.termination = Termination::kTrustRegionFailure;
        done = true;
        break;
      }
    }
    if (done) break;

    const size_t k = result.cost_history.size();
    if (cost == 0.0) {
      result.termination = Termination::kConverged;
      break;
    }
    if (k > 3) {
      const double before = result.cost_history[k - 4];
      if (before - cost <= options.cost_relative_tolerance * before) {
        result.termination = Termination::kConverged;
        break;
      }
    }
  }
  result.final_cost = cost;
  FillReprojectionStats(*problem, &result);
  return result;
}

double CheckJacobian(const BAProblem& problem, double eps) {
  const Layout layout = MakeLayout(problem);
  // Throws NonFiniteResidual at the linearization point.
  EvaluateResiduals(problem);
  if (layout.num_total == 0) {
    return 0.0;
  }
  const Eigen::MatrixXd analytic = LinearizeDense(problem, false).jacobian;
  Eigen::MatrixXd numeric(analytic.rows(), analytic.cols());

  // Current value of each free tangent coordinate, for the step size. The
  // rotation tangent is always at 0.
  Eigen::VectorXd values = Eigen::VectorXd::Zero(layout.num_total);
  for (size_t c = 0; c < problem.cameras.size(); ++c) {
    for (int k = 0; k < 3; ++k) {
      const int col = layout.camera_cols[c][3 + k];
      if (col >= 0) values(col) = problem.cameras[c].pose.center(k);
    }
  }
  const auto params = problem.intrinsics.Params();
  for (int k = 0; k < CameraModel::kNumParams; ++k) {
    if (layout.intrinsic_cols[k] >= 0) values(layout.intrinsic_cols[k]) = params(k);
  }
  for (size_t i = 0; i < problem.points.size(); ++i) {
    if (layout.point_cols[i] >= 0) {
      values.segment<3>(layout.point_cols[i]) = problem.points[i];
    }
  }

  for (int col = 0; col < layout.num_total; ++col) {
    const double h = eps * std::max(1.0, std::abs(values(col)));
    Eigen::VectorXd step = Eigen::VectorXd::Zero(layout.num_total);
    step(col) = h;
    BAProblem plus = problem;
    ApplyStepWithLayout(&plus, layout, step);
    BAProblem minus = problem;
    ApplyStepWithLayout(&minus, layout, -step);
    numeric.col(col) =
        (EvaluateResiduals(plus) - EvaluateResiduals(minus)) / (2.0 * h);
  }

  // Parameter groups: rotation and center per camera, intrinsics, each point.
  std::vector<std::vector<int>> groups;
  for (const auto& cols : layout.camera_cols) {
    for (int g = 0; g < 2; ++g) {
      std::vector<int> group;
      for (int k = 0; k < 3; ++k) {
        if (cols[3 * g + k] >= 0) group.push_back(cols[3 * g + k]);
      }
      if (!group.empty()) groups.push_back(std::move(group));
    }
  }
  {
    std::vector<int> group;
    for (int col : layout.intrinsic_cols) {
      if (col >= 0) group.push_back(col);
    }
    if (!group.empty()) groups.push_back(std::move(group));
  }
  for (int col : layout.point_cols) {
    if (col >= 0) groups.push_back({col, col + 1, col + 2});
  }

  std::vector<std::pair<Eigen::Index, Eigen::Index>> row_blocks;
  for (size_t o = 0; o < problem.observations.size(); ++o) {
    row_blocks.emplace_back(static_cast<Eigen::Index>(2 * o), 2);
  }
  const auto prior_start =
      static_cast<Eigen::Index>(2 * problem.observations.size());
  for (size_t p = 0; p < problem.priors.size(); ++p) {
    row_blocks.emplace_back(prior_start + static_cast<Eigen::Index>(3 * p), 3);
  }

  double worst = 0.0;
  for (const auto& [row, nrows] : row_blocks) {
    for (const std::vector<int>& group : groups) {
      double diff_sq = 0.0;
      double a_sq = 0.0;
      double n_sq = 0.0;
      for (int col : group) {
        for (Eigen::Index r = row; r < row + nrows; ++r) {
          const double a = analytic(r, col);
          const double n = numeric(r, col);
          diff_sq += (a - n) * (a - n);
          a_sq += a * a;
          n_sq += n * n;
        }
      }
      const double scale = std::sqrt(std::max(a_sq, n_sq));
      if (scale > 0.0) {
        worst = std::max(worst, std::sqrt(diff_sq) / scale);
      }
    }
  }
  return worst;
}

}  // namespace aerotri
