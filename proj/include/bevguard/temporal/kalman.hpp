#pragma once

#include <Eigen/Dense>

#include "bevguard/core/geometry.hpp"
#include "bevguard/temporal/config.hpp"
#include "bevguard/temporal/flow.hpp"

namespace bevguard::temporal {

/// Constant-velocity filter over the 8 corner coordinates. The state stacks corners and corner
/// velocities (16 values); observations select the corner half.
struct KalmanState {
  Eigen::VectorXd state = Eigen::VectorXd::Zero(16);
  Eigen::MatrixXd covariance = Eigen::MatrixXd::Identity(16, 16);
  double q_scale = 0.01;
  double r_scale = 0.05;

  Corners corners() const;
};

Eigen::MatrixXd transition_matrix(double dt);
Eigen::MatrixXd observation_matrix();

/// State at the first observation: zero velocity with a wide velocity prior.
KalmanState kf_init(const Corners& z, const KalmanParams& params);

KalmanState kf_predict(const KalmanState& ks, double dt);

/// Throws NumericalError when the innovation covariance is singular.
KalmanState kf_update(const KalmanState& ks, const Corners& z);

/// Filters a chain of observations (oldest first, with frame numbers) and predicts to `frame`.
KalmanState kf_track(const std::vector<Corners>& observations, const std::vector<std::int64_t>& frames,
                     std::int64_t frame, const KalmanParams& params);

/// Synthesizes the missing frame of a collaborator: every box of the newest cached frame is
/// chained backwards through the cache, filtered, and predicted forward. Boxes keep the
/// confidence of their newest observation.
scene::DetectionSet kf_interpolate(FlowCache& cache, std::int64_t missing_frame, const KalmanParams& params);

/// Handles a gap in a collaborator's stream: interpolates while the consecutive counter is
/// below L, otherwise flushes the cache. An empty cache has nothing to extend.
GapOutcome handle_gap(FlowCache& cache, std::int64_t missing_frame, const KalmanParams& params);

}  // namespace bevguard::temporal
