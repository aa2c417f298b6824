#include "bevguard/temporal/kalman.hpp"

#include "bevguard/core/error.hpp"

namespace bevguard::temporal {

namespace {

constexpr int kDim = 8;
constexpr int kState = 16;

Eigen::VectorXd to_vector(const Corners& c) {
  Eigen::VectorXd v(kDim);
  for (int k = 0; k < kDim; ++k) v[k] = c[k];
  return v;
}

}  // namespace

Corners KalmanState::corners() const {
  Corners c{};
  for (int k = 0; k < kDim; ++k) c[k] = state[k];
  return c;
}

Eigen::MatrixXd transition_matrix(double dt) {
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(kState, kState);
  f.topRightCorner(kDim, kDim) = dt * Eigen::MatrixXd::Identity(kDim, kDim);
  return f;
}

Eigen::MatrixXd observation_matrix() {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(kDim, kState);
  h.leftCols(kDim) = Eigen::MatrixXd::Identity(kDim, kDim);
  return h;
}

KalmanState kf_init(const Corners& z, const KalmanParams& params) {
  KalmanState ks;
  ks.q_scale = params.q_scale;
  ks.r_scale = params.r_scale;
  ks.state.head(kDim) = to_vector(z);
  ks.covariance.setZero();
  ks.covariance.topLeftCorner(kDim, kDim).diagonal().setConstant(params.r_scale);
  ks.covariance.bottomRightCorner(kDim, kDim).diagonal().setConstant(params.velocity_prior);
  return ks;
}

KalmanState kf_predict(const KalmanState& ks, double dt) {
  if (dt < 0.0) throw InputError("kf_predict: negative dt");
  const Eigen::MatrixXd f = transition_matrix(dt);
  KalmanState out = ks;
  out.state = f * ks.state;
  out.covariance = f * ks.covariance * f.transpose();
  out.covariance.diagonal().array() += ks.q_scale;
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

KalmanState kf_update(const KalmanState& ks, const Corners& z) {
  const Eigen::MatrixXd h = observation_matrix();
  const Eigen::MatrixXd r = ks.r_scale * Eigen::MatrixXd::Identity(kDim, kDim);
  const Eigen::MatrixXd s = h * ks.covariance * h.transpose() + r;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    throw NumericalError("kf_update: singular innovation covariance");
  }
  const Eigen::MatrixXd gain = ldlt.solve(h * ks.covariance).transpose();
  KalmanState out = ks;
  out.state = ks.state + gain * (to_vector(z) - h * ks.state);
  // Joseph form: algebraically (I - KH) P for the optimal gain, and keeps P symmetric PSD.
  const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(kState, kState) - gain * h;
  out.covariance = ikh * ks.covariance * ikh.transpose() + gain * r * gain.transpose();
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

KalmanState kf_track(const std::vector<Corners>& observations, const std::vector<std::int64_t>& frames,
                     std::int64_t frame, const KalmanParams& params) {
  if (observations.empty() || observations.size() != frames.size()) {
    throw InputError("kf_track: observations and frames must be non-empty and aligned");
  }
  KalmanState ks = kf_init(observations.front(), params);
  for (std::size_t i = 1; i < observations.size(); ++i) {
    ks = kf_predict(ks, static_cast<double>(frames[i] - frames[i - 1]));
    ks = kf_update(ks, observations[i]);
  }
  return kf_predict(ks, static_cast<double>(frame - frames.back()));
}

scene::DetectionSet kf_interpolate(FlowCache& cache, std::int64_t missing_frame, const KalmanParams& params) {
  if (cache.empty()) throw InputError("kf_interpolate: empty cache");
  const auto& newest = cache.from_newest(0);
  if (missing_frame <= newest.set.frame) throw InputError("kf_interpolate: missing frame is not after the cache");
  const double tau = cache.config().tau;
  scene::DetectionSet out;
  out.frame = missing_frame;
  out.owner = newest.set.owner;
  for (std::size_t b = 0; b < newest.set.size(); ++b) {
    std::vector<Corners> obs{newest.set.boxes[b].corners};
    std::vector<std::int64_t> frames{newest.set.frame};
    int curr = static_cast<int>(b);
    for (std::size_t j = 0; j + 1 < cache.size(); ++j) {
      const ChainLink l = cache.link(j, curr);
      if (l.target < 0 || !(l.cost < tau)) break;
      const auto& older = cache.from_newest(j + 1).set;
      obs.push_back(older.boxes[static_cast<std::size_t>(l.target)].corners);
      frames.push_back(older.frame);
      curr = l.target;
    }
    std::reverse(obs.begin(), obs.end());
    std::reverse(frames.begin(), frames.end());
    auto box = newest.set.boxes[b];
    const Corners predicted = kf_track(obs, frames, missing_frame, params).corners();
    if (is_convex_quad(predicted)) box.corners = predicted;
    out.boxes.push_back(box);
  }
  return out;
}

GapOutcome handle_gap(FlowCache& cache, std::int64_t missing_frame, const KalmanParams& params) {
  if (cache.empty()) return GapOutcome::skipped;
  if (cache.consecutive_interpolations() >= cache.config().l_interp) {
    cache.flush();
    return GapOutcome::flushed;
  }
  cache.push_interpolated(kf_interpolate(cache, missing_frame, params));
  return GapOutcome::interpolated;
}

}  // namespace bevguard::temporal
