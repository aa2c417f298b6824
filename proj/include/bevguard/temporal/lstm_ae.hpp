#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bevguard/core/geometry.hpp"
#include "bevguard/temporal/config.hpp"
#include "bevguard/temporal/flow.hpp"

namespace bevguard::temporal {

/// Gate rows are stacked [input; forget; candidate; output], each `hidden` rows, acting on the
/// concatenation [h_prev; x].
struct LstmLayer {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;

  int hidden() const { return static_cast<int>(b.size() / 4); }
  int input_dim() const { return static_cast<int>(w.cols()) - hidden(); }
};

struct LstmCellCache {
  Eigen::VectorXd z, i, f, g, o, c_prev, c, tanh_c;
};

struct LstmCellOutput {
  Eigen::VectorXd h;
  Eigen::VectorXd c;
};

LstmCellOutput lstm_cell(const Eigen::VectorXd& h_prev, const Eigen::VectorXd& c_prev, const Eigen::VectorXd& x,
                         const LstmLayer& layer, LstmCellCache* cache = nullptr);

struct LstmLayerGrad {
  Eigen::MatrixXd w;
  Eigen::VectorXd b;
};

/// Backward pass of one cell. dh, dc are gradients w.r.t. this step's outputs; returns
/// gradients for h_prev, c_prev, x and accumulates parameter gradients.
struct LstmCellBackward {
  Eigen::VectorXd dh_prev, dc_prev, dx;
};
LstmCellBackward lstm_cell_backward(const Eigen::VectorXd& dh, const Eigen::VectorXd& dc, const LstmCellCache& cache,
                                    const LstmLayer& layer, LstmLayerGrad& grad);

struct LstmAeArch {
  int input_dim = 8;
  int hidden = 32;
  int encoder_layers = 2;
  int decoder_layers = 3;
};

struct TrainConfig {
  double learning_rate = 0.001;
  int epochs = 40;
  int batch_size = 32;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct LstmAeModel {
  LstmAeArch arch;
  std::vector<LstmLayer> encoder;
  std::vector<LstmLayer> decoder;
  Eigen::MatrixXd proj_w;  // input_dim x hidden, applied per step
  Eigen::VectorXd proj_b;
  Vec2 coord_scale{64.0, 64.0};  // grid extent used to normalize corner coordinates
  int k_hist = 5;
  TrainConfig train;
  double final_loss = 0.0;
  std::vector<double> loss_curve;  // mean training L_tr per epoch

  std::size_t parameter_count() const;
};

LstmAeModel init_lstm_ae(const LstmAeArch& arch, Vec2 coord_scale, int k_hist, std::uint64_t seed);

/// Flow corners as a (steps x 8) matrix scaled to [0, 1] by the model's grid extent.
Eigen::MatrixXd flow_matrix(const BevFlow& flow, const LstmAeModel& model);

/// Final top-layer hidden state repeated once per step: (steps x hidden), rows identical.
Eigen::MatrixXd encode_flow(const Eigen::MatrixXd& seq, const LstmAeModel& model);
/// Decoder LSTM stack over the latent rows, projected per step to (steps x input_dim).
Eigen::MatrixXd decode_flow(const Eigen::MatrixXd& h_bf, const LstmAeModel& model);
Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& seq, const LstmAeModel& model);

/// Mean absolute error over the K history steps (all rows but the last) and the 8 coordinates.
/// A single-step flow averages over that step.
double l_tr(const Eigen::MatrixXd& flow, const Eigen::MatrixXd& reconstruction);
/// Gradient of l_tr w.r.t. the reconstruction (sign subgradient, zero at ties).
Eigen::MatrixXd l_tr_grad(const Eigen::MatrixXd& flow, const Eigen::MatrixXd& reconstruction);

double flow_l_tr(const BevFlow& flow, const LstmAeModel& model);

/// Sum of candidate reconstruction losses plus kappa_p per unmatched flow.
double l_ta(const FlowSets& sets, const LstmAeModel& model, const TemporalConfig& cfg);

/// Flat parameter vector (encoder, decoder, projection) and its inverse.
Eigen::VectorXd flatten_parameters(const LstmAeModel& model);
void assign_parameters(LstmAeModel& model, const Eigen::VectorXd& flat);

/// Full backward pass: gradient of sum(d_out .* reconstruct(seq)) w.r.t. the flat parameters.
Eigen::VectorXd reconstruction_gradient(const Eigen::MatrixXd& seq, const LstmAeModel& model,
                                        const Eigen::MatrixXd& d_out);

/// Adam on the mean training L_tr. Throws ConfigError on an empty dataset.
LstmAeModel train_ae(const std::vector<Eigen::MatrixXd>& flows, LstmAeModel model, const TrainConfig& cfg);

double mean_l_tr(const std::vector<Eigen::MatrixXd>& flows, const LstmAeModel& model);

void save_model(const LstmAeModel& model, const std::string& path);
LstmAeModel load_model(const std::string& path);

}  // namespace bevguard::temporal
