#include "bevguard/temporal/lstm_ae.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "bevguard/core/error.hpp"
#include "bevguard/core/rng.hpp"

namespace bevguard::temporal {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd sigmoid(const VectorXd& a) { return (1.0 + (-a.array()).exp()).inverse().matrix(); }

}  // namespace

LstmCellOutput lstm_cell(const VectorXd& h_prev, const VectorXd& c_prev, const VectorXd& x, const LstmLayer& layer,
                         LstmCellCache* cache) {
  const int hd = layer.hidden();
  if (h_prev.size() != hd || c_prev.size() != hd || x.size() != layer.input_dim()) {
    throw InputError("lstm_cell: shape mismatch");
  }
  VectorXd z(hd + x.size());
  z << h_prev, x;
  const VectorXd a = layer.w * z + layer.b;
  VectorXd i = sigmoid(a.segment(0, hd));
  VectorXd f = sigmoid(a.segment(hd, hd));
  VectorXd g = a.segment(2 * hd, hd).array().tanh().matrix();
  VectorXd o = sigmoid(a.segment(3 * hd, hd));
  VectorXd c = f.cwiseProduct(c_prev) + i.cwiseProduct(g);
  VectorXd tc = c.array().tanh().matrix();
  LstmCellOutput out{o.cwiseProduct(tc), c};
  if (cache) *cache = {std::move(z), std::move(i), std::move(f), std::move(g), std::move(o), c_prev, c, std::move(tc)};
  return out;
}

LstmCellBackward lstm_cell_backward(const VectorXd& dh, const VectorXd& dc_in, const LstmCellCache& k,
                                    const LstmLayer& layer, LstmLayerGrad& grad) {
  const int hd = layer.hidden();
  const VectorXd d_o = dh.cwiseProduct(k.tanh_c);
  const VectorXd dc =
      dc_in + dh.cwiseProduct(k.o).cwiseProduct((1.0 - k.tanh_c.array().square()).matrix());
  VectorXd da(4 * hd);
  da.segment(0, hd) = dc.cwiseProduct(k.g).cwiseProduct((k.i.array() * (1.0 - k.i.array())).matrix());
  da.segment(hd, hd) = dc.cwiseProduct(k.c_prev).cwiseProduct((k.f.array() * (1.0 - k.f.array())).matrix());
  da.segment(2 * hd, hd) = dc.cwiseProduct(k.i).cwiseProduct((1.0 - k.g.array().square()).matrix());
  da.segment(3 * hd, hd) = d_o.cwiseProduct((k.o.array() * (1.0 - k.o.array())).matrix());
  grad.w.noalias() += da * k.z.transpose();
  grad.b += da;
  const VectorXd dz = layer.w.transpose() * da;
  return {dz.head(hd), dc.cwiseProduct(k.f), dz.tail(dz.size() - hd)};
}

std::size_t LstmAeModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : encoder) n += l.w.size() + l.b.size();
  for (const auto& l : decoder) n += l.w.size() + l.b.size();
  return n + proj_w.size() + proj_b.size();
}

LstmAeModel init_lstm_ae(const LstmAeArch& arch, Vec2 coord_scale, int k_hist, std::uint64_t seed) {
  if (arch.input_dim < 1 || arch.hidden < 1 || arch.encoder_layers < 1 || arch.decoder_layers < 1) {
    throw ConfigError("init_lstm_ae: layer sizes must be positive");
  }
  if (k_hist < 0) throw ConfigError("init_lstm_ae: k_hist must be >= 0");
  Rng rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(arch.hidden));
  auto uniform_matrix = [&](int r, int c) {
    MatrixXd m(r, c);
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) m(i, j) = rng.uniform(-bound, bound);
    }
    return m;
  };
  auto make_layer = [&](int in) {
    LstmLayer l{uniform_matrix(4 * arch.hidden, arch.hidden + in), VectorXd::Zero(4 * arch.hidden)};
    l.b.segment(arch.hidden, arch.hidden).setOnes();  // forget-gate bias
    return l;
  };
  LstmAeModel m;
  m.arch = arch;
  m.coord_scale = coord_scale;
  m.k_hist = k_hist;
  for (int i = 0; i < arch.encoder_layers; ++i) m.encoder.push_back(make_layer(i == 0 ? arch.input_dim : arch.hidden));
  for (int i = 0; i < arch.decoder_layers; ++i) m.decoder.push_back(make_layer(arch.hidden));
  m.proj_w = uniform_matrix(arch.input_dim, arch.hidden);
  m.proj_b = VectorXd::Zero(arch.input_dim);
  return m;
}

MatrixXd flow_matrix(const BevFlow& flow, const LstmAeModel& model) {
  MatrixXd m(static_cast<Eigen::Index>(flow.length()), 8);
  for (std::size_t t = 0; t < flow.length(); ++t) {
    for (int k = 0; k < 4; ++k) {
      m(t, 2 * k) = flow.boxes[t][2 * k] / model.coord_scale.x;
      m(t, 2 * k + 1) = flow.boxes[t][2 * k + 1] / model.coord_scale.y;
    }
  }
  return m;
}

namespace {

struct LayerTrace {
  std::vector<VectorXd> h;
  std::vector<LstmCellCache> caches;
};

LayerTrace run_layer(const LstmLayer& layer, const std::vector<VectorXd>& xs, bool keep) {
  const int hd = layer.hidden();
  VectorXd h = VectorXd::Zero(hd), c = VectorXd::Zero(hd);
  LayerTrace t;
  t.h.reserve(xs.size());
  if (keep) t.caches.resize(xs.size());
  for (std::size_t s = 0; s < xs.size(); ++s) {
    auto out = lstm_cell(h, c, xs[s], layer, keep ? &t.caches[s] : nullptr);
    h = std::move(out.h);
    c = std::move(out.c);
    t.h.push_back(h);
  }
  return t;
}

// BPTT through one layer; dh holds the gradient reaching each step's output from above.
std::vector<VectorXd> backprop_layer(const LstmLayer& layer, const LayerTrace& trace, const std::vector<VectorXd>& dh,
                                     LstmLayerGrad& grad) {
  const int hd = layer.hidden();
  VectorXd dh_rec = VectorXd::Zero(hd), dc = VectorXd::Zero(hd);
  std::vector<VectorXd> dx(dh.size());
  for (std::size_t s = dh.size(); s-- > 0;) {
    auto back = lstm_cell_backward(dh[s] + dh_rec, dc, trace.caches[s], layer, grad);
    dh_rec = std::move(back.dh_prev);
    dc = std::move(back.dc_prev);
    dx[s] = std::move(back.dx);
  }
  return dx;
}

std::vector<VectorXd> rows_of(const MatrixXd& m) {
  std::vector<VectorXd> out;
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(m.row(r).transpose());
  return out;
}

struct ForwardTrace {
  std::vector<LayerTrace> enc;
  std::vector<LayerTrace> dec;
  VectorXd latent;
  MatrixXd out;
};

ForwardTrace forward(const MatrixXd& seq, const LstmAeModel& model, bool keep) {
  if (seq.rows() < 1 || seq.cols() != model.arch.input_dim) throw InputError("LSTM-AE: bad input shape");
  ForwardTrace ft;
  std::vector<VectorXd> xs = rows_of(seq);
  for (const auto& l : model.encoder) {
    ft.enc.push_back(run_layer(l, xs, keep));
    xs = ft.enc.back().h;
  }
  ft.latent = xs.back();
  xs.assign(static_cast<std::size_t>(seq.rows()), ft.latent);
  for (const auto& l : model.decoder) {
    ft.dec.push_back(run_layer(l, xs, keep));
    xs = ft.dec.back().h;
  }
  ft.out.resize(seq.rows(), model.arch.input_dim);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    ft.out.row(static_cast<Eigen::Index>(s)) = (model.proj_w * xs[s] + model.proj_b).transpose();
  }
  return ft;
}

LstmLayerGrad zero_grad(const LstmLayer& l) {
  return {MatrixXd::Zero(l.w.rows(), l.w.cols()), VectorXd::Zero(l.b.size())};
}

}  // namespace

MatrixXd encode_flow(const MatrixXd& seq, const LstmAeModel& model) {
  if (seq.rows() < 1 || seq.cols() != model.arch.input_dim) throw InputError("encode_flow: bad input shape");
  std::vector<VectorXd> xs = rows_of(seq);
  for (const auto& l : model.encoder) xs = run_layer(l, xs, false).h;
  MatrixXd h_bf(seq.rows(), model.arch.hidden);
  for (Eigen::Index r = 0; r < seq.rows(); ++r) h_bf.row(r) = xs.back().transpose();
  return h_bf;
}

MatrixXd decode_flow(const MatrixXd& h_bf, const LstmAeModel& model) {
  if (h_bf.cols() != model.arch.hidden) throw InputError("decode_flow: bad latent shape");
  std::vector<VectorXd> xs = rows_of(h_bf);
  for (const auto& l : model.decoder) xs = run_layer(l, xs, false).h;
  MatrixXd out(h_bf.rows(), model.arch.input_dim);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    out.row(static_cast<Eigen::Index>(s)) = (model.proj_w * xs[s] + model.proj_b).transpose();
  }
  return out;
}

MatrixXd reconstruct(const MatrixXd& seq, const LstmAeModel& model) { return forward(seq, model, false).out; }

namespace {

Eigen::Index history_rows(const MatrixXd& flow) { return flow.rows() > 1 ? flow.rows() - 1 : flow.rows(); }

}  // namespace

double l_tr(const MatrixXd& flow, const MatrixXd& rec) {
  if (flow.rows() != rec.rows() || flow.cols() != rec.cols() || flow.rows() < 1) {
    throw InputError("l_tr: shape mismatch");
  }
  const Eigen::Index n = history_rows(flow);
  return (flow.topRows(n) - rec.topRows(n)).cwiseAbs().mean();
}

MatrixXd l_tr_grad(const MatrixXd& flow, const MatrixXd& rec) {
  const Eigen::Index n = history_rows(flow);
  MatrixXd g = MatrixXd::Zero(rec.rows(), rec.cols());
  const double scale = 1.0 / static_cast<double>(n * flow.cols());
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < flow.cols(); ++c) {
      const double d = rec(r, c) - flow(r, c);
      g(r, c) = d > 0 ? scale : (d < 0 ? -scale : 0.0);
    }
  }
  return g;
}

double flow_l_tr(const BevFlow& flow, const LstmAeModel& model) {
  const MatrixXd seq = flow_matrix(flow, model);
  return l_tr(seq, reconstruct(seq, model));
}

double l_ta(const FlowSets& sets, const LstmAeModel& model, const TemporalConfig& cfg) {
  double total = 0.0;
  for (const auto& f : sets.candidates) total += flow_l_tr(f, model);
  return total + cfg.kappa_p * static_cast<double>(sets.unmatched.size());
}

namespace {

template <typename Fn>
void for_each_block(LstmAeModel& m, Fn&& fn) {
  for (auto& l : m.encoder) {
    fn(l.w.data(), l.w.size());
    fn(l.b.data(), l.b.size());
  }
  for (auto& l : m.decoder) {
    fn(l.w.data(), l.w.size());
    fn(l.b.data(), l.b.size());
  }
  fn(m.proj_w.data(), m.proj_w.size());
  fn(m.proj_b.data(), m.proj_b.size());
}

}  // namespace

VectorXd flatten_parameters(const LstmAeModel& model) {
  VectorXd flat(static_cast<Eigen::Index>(model.parameter_count()));
  Eigen::Index at = 0;
  for_each_block(const_cast<LstmAeModel&>(model), [&](double* p, Eigen::Index n) {
    flat.segment(at, n) = Eigen::Map<VectorXd>(p, n);
    at += n;
  });
  return flat;
}

void assign_parameters(LstmAeModel& model, const VectorXd& flat) {
  if (flat.size() != static_cast<Eigen::Index>(model.parameter_count())) {
    throw InputError("assign_parameters: size mismatch");
  }
  Eigen::Index at = 0;
  for_each_block(model, [&](double* p, Eigen::Index n) {
    Eigen::Map<VectorXd>(p, n) = flat.segment(at, n);
    at += n;
  });
}

namespace {

VectorXd gradient_from_trace(const ForwardTrace& ft, const MatrixXd& seq, const LstmAeModel& model,
                             const MatrixXd& d_out) {
  std::vector<LstmLayerGrad> g_enc, g_dec;
  for (const auto& l : model.encoder) g_enc.push_back(zero_grad(l));
  for (const auto& l : model.decoder) g_dec.push_back(zero_grad(l));
  MatrixXd g_pw = MatrixXd::Zero(model.proj_w.rows(), model.proj_w.cols());
  VectorXd g_pb = VectorXd::Zero(model.proj_b.size());

  const auto steps = static_cast<std::size_t>(seq.rows());
  std::vector<VectorXd> dh(steps);
  const auto& top = ft.dec.back().h;
  for (std::size_t s = 0; s < steps; ++s) {
    const VectorXd d = d_out.row(static_cast<Eigen::Index>(s)).transpose();
    g_pw.noalias() += d * top[s].transpose();
    g_pb += d;
    dh[s] = model.proj_w.transpose() * d;
  }
  for (std::size_t li = model.decoder.size(); li-- > 0;) {
    dh = backprop_layer(model.decoder[li], ft.dec[li], dh, g_dec[li]);
  }
  VectorXd d_latent = VectorXd::Zero(model.arch.hidden);
  for (const auto& d : dh) d_latent += d;
  std::vector<VectorXd> de(steps, VectorXd::Zero(model.arch.hidden));
  de.back() = d_latent;
  for (std::size_t li = model.encoder.size(); li-- > 0;) {
    de = backprop_layer(model.encoder[li], ft.enc[li], de, g_enc[li]);
  }

  LstmAeModel shaped = model;
  for (std::size_t i = 0; i < g_enc.size(); ++i) shaped.encoder[i] = {g_enc[i].w, g_enc[i].b};
  for (std::size_t i = 0; i < g_dec.size(); ++i) shaped.decoder[i] = {g_dec[i].w, g_dec[i].b};
  shaped.proj_w = g_pw;
  shaped.proj_b = g_pb;
  return flatten_parameters(shaped);
}

}  // namespace

VectorXd reconstruction_gradient(const MatrixXd& seq, const LstmAeModel& model, const MatrixXd& d_out) {
  const ForwardTrace ft = forward(seq, model, true);
  if (d_out.rows() != ft.out.rows() || d_out.cols() != ft.out.cols()) {
    throw InputError("reconstruction_gradient: gradient shape mismatch");
  }
  return gradient_from_trace(ft, seq, model, d_out);
}

double mean_l_tr(const std::vector<MatrixXd>& flows, const LstmAeModel& model) {
  if (flows.empty()) return 0.0;
  double total = 0.0;
  for (const auto& f : flows) total += l_tr(f, reconstruct(f, model));
  return total / static_cast<double>(flows.size());
}

LstmAeModel train_ae(const std::vector<MatrixXd>& flows, LstmAeModel model, const TrainConfig& cfg) {
  if (flows.empty()) throw ConfigError("train_ae: empty flow dataset");
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.learning_rate > 0.0)) {
    throw ConfigError("train_ae: epochs, batch_size and learning_rate must be positive");
  }
  Rng rng(derive_seed(cfg.seed, 0x7a11));
  VectorXd theta = flatten_parameters(model);
  VectorXd m1 = VectorXd::Zero(theta.size()), m2 = VectorXd::Zero(theta.size());
  std::vector<std::size_t> order(flows.size());
  std::iota(order.begin(), order.end(), 0);
  long long step = 0;
  model.loss_curve.clear();
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      VectorXd grad = VectorXd::Zero(theta.size());
      for (std::size_t k = start; k < end; ++k) {
        const MatrixXd& seq = flows[order[k]];
        const ForwardTrace ft = forward(seq, model, true);
        epoch_loss += l_tr(seq, ft.out);
        grad += gradient_from_trace(ft, seq, model, l_tr_grad(seq, ft.out));
      }
      grad /= static_cast<double>(end - start);
      ++step;
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * grad;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
      assign_parameters(model, theta);
    }
    model.loss_curve.push_back(epoch_loss / static_cast<double>(flows.size()));
  }
  model.train = cfg;
  model.final_loss = mean_l_tr(flows, model);
  return model;
}

namespace {

using nlohmann::json;

json matrix_json(const MatrixXd& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

MatrixXd matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw InputError("model file: matrix size mismatch");
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
  }
  return m;
}

json layer_json(const LstmLayer& l) { return {{"w", matrix_json(l.w)}, {"b", matrix_json(l.b)}}; }

LstmLayer layer_from(const json& j) {
  return {matrix_from(j.at("w")), matrix_from(j.at("b")).col(0)};
}

constexpr const char* kModelSchema = "bevguard.lstm_ae/1";

}  // namespace

void save_model(const LstmAeModel& model, const std::string& path) {
  json j;
  j["schema"] = kModelSchema;
  j["arch"] = {{"input_dim", model.arch.input_dim},
               {"hidden", model.arch.hidden},
               {"encoder_layers", model.arch.encoder_layers},
               {"decoder_layers", model.arch.decoder_layers}};
  j["coord_scale"] = {model.coord_scale.x, model.coord_scale.y};
  j["k_hist"] = model.k_hist;
  j["train"] = {{"learning_rate", model.train.learning_rate},
                {"epochs", model.train.epochs},
                {"batch_size", model.train.batch_size},
                {"seed", model.train.seed}};
  j["final_loss"] = model.final_loss;
  j["loss_curve"] = model.loss_curve;
  for (const auto& l : model.encoder) j["encoder"].push_back(layer_json(l));
  for (const auto& l : model.decoder) j["decoder"].push_back(layer_json(l));
  j["proj_w"] = matrix_json(model.proj_w);
  j["proj_b"] = matrix_json(model.proj_b);
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file " + path);
  out << j.dump() << '\n';
}

LstmAeModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read model file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("model file " + path + ": " + e.what());
  }
  if (j.value("schema", "") != kModelSchema) throw InputError("model file " + path + ": unsupported schema");
  LstmAeModel m;
  const auto& a = j.at("arch");
  m.arch = {a.at("input_dim").get<int>(), a.at("hidden").get<int>(), a.at("encoder_layers").get<int>(),
            a.at("decoder_layers").get<int>()};
  m.coord_scale = {j.at("coord_scale").at(0).get<double>(), j.at("coord_scale").at(1).get<double>()};
  m.k_hist = j.at("k_hist").get<int>();
  const auto& t = j.at("train");
  m.train.learning_rate = t.at("learning_rate").get<double>();
  m.train.epochs = t.at("epochs").get<int>();
  m.train.batch_size = t.at("batch_size").get<int>();
  m.train.seed = t.at("seed").get<std::uint64_t>();
  m.final_loss = j.at("final_loss").get<double>();
  m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  for (const auto& l : j.at("encoder")) m.encoder.push_back(layer_from(l));
  for (const auto& l : j.at("decoder")) m.decoder.push_back(layer_from(l));
  m.proj_w = matrix_from(j.at("proj_w"));
  m.proj_b = matrix_from(j.at("proj_b")).col(0);
  if (static_cast<int>(m.encoder.size()) != m.arch.encoder_layers ||
      static_cast<int>(m.decoder.size()) != m.arch.decoder_layers) {
    throw InputError("model file " + path + ": layer count does not match arch");
  }
  return m;
}

}  // namespace bevguard::temporal
