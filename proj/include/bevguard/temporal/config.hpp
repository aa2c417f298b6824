#pragma once

namespace bevguard::temporal {

struct TemporalConfig {
  int k_hist = 5;          // K cached frames
  int l_interp = 3;        // L max consecutive interpolations
  double tau = 1.0;        // chain-link cost threshold
  double conf_low = 0.3;   // ego cell confidence below this marks a box low-confidence
  double kappa_p = 0.1;    // penalty per unmatched flow
  double phi = 1.0;
  double unseen_iou = 0.5;  // fused boxes below this IoU with every ego box count as ego-unseen

  void validate() const;
};

/// Noise scales of the constant-velocity corner filter (grid units squared).
struct KalmanParams {
  double q_scale = 0.01;
  double r_scale = 0.05;
  double velocity_prior = 1e6;  // initial variance of the corner velocities
};

}  // namespace bevguard::temporal
