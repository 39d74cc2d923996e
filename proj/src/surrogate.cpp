#include "avgpress/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "avgpress/errors.hpp"
#include "avgpress/log.hpp"
#include "avgpress/rng.hpp"

namespace avgpress {

namespace {

constexpr const char* kFormat = "avgpress-mlp";
constexpr int kVersion = 1;

void check_dims(std::span<const int> dims) {
  if (dims.size() < 2) throw ParameterError("network needs at least an input and an output layer");
  for (int d : dims) {
    if (d < 1) throw ParameterError("layer widths must be positive");
  }
}

Eigen::MatrixXd relu(const Eigen::MatrixXd& z) { return z.cwiseMax(0.0); }

std::string payload(const MlpModel& m) {
  std::string out;
  char buf[32];
  auto put_row = [&](auto&& values, Eigen::Index n) {
    for (Eigen::Index j = 0; j < n; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", values(j));
      if (j) out += ' ';
      out += buf;
    }
    out += '\n';
  };
  for (int k = 0; k < m.layer_count(); ++k) {
    const auto& w = m.weights[k];
    for (Eigen::Index i = 0; i < w.rows(); ++i) put_row(w.row(i), w.cols());
    put_row(m.biases[k], m.biases[k].size());
  }
  return out;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

struct AdamState {
  Gradients m, v;
  long t = 0;
};

Gradients zeros_like(const MlpModel& model) {
  Gradients g;
  for (int k = 0; k < model.layer_count(); ++k) {
    g.weights.push_back(Eigen::MatrixXd::Zero(model.weights[k].rows(), model.weights[k].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(model.biases[k].size()));
  }
  return g;
}

template <class P, class G>
void adam_update(P& p, P& m, P& v, const G& g, double lr, double b1, double b2, double c1, double c2,
                 double eps) {
  m = b1 * m + (1 - b1) * g;
  v = b2 * v + (1 - b2) * g.cwiseProduct(g);
  p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (int k = 0; k < layer_count(); ++k) n += weights[k].size() + biases[k].size();
  return n;
}

bool MlpModel::operator==(const MlpModel& o) const {
  if (dims != o.dims || weights.size() != o.weights.size()) return false;
  for (int k = 0; k < layer_count(); ++k) {
    if (weights[k] != o.weights[k] || biases[k] != o.biases[k]) return false;
  }
  return true;
}

MlpModel zero_model(std::span<const int> dims) {
  check_dims(dims);
  MlpModel m;
  m.dims.assign(dims.begin(), dims.end());
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    m.weights.push_back(Eigen::MatrixXd::Zero(dims[k + 1], dims[k]));
    m.biases.push_back(Eigen::VectorXd::Zero(dims[k + 1]));
  }
  return m;
}

MlpModel init_glorot(std::span<const int> dims, std::uint64_t seed) {
  MlpModel m = zero_model(dims);
  Rng rng(seed);
  for (auto& w : m.weights) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-limit, limit);
    }
  }
  return m;
}

Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x) {
  if (x.rows() != model.dims.front()) throw ParameterError("input width does not match the network");
  Eigen::MatrixXd a = x;
  for (int k = 0; k < model.layer_count(); ++k) {
    Eigen::MatrixXd z = model.weights[k] * a;
    z.colwise() += model.biases[k];
    a = k + 1 < model.layer_count() ? relu(z) : std::move(z);
  }
  return a.row(0).transpose();
}

double forward(const MlpModel& model, std::span<const double> x) {
  const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
  return forward_batch(model, v)(0);
}

LossAndGradients loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const Eigen::Index n = x.cols();
  if (n == 0) throw ParameterError("empty batch");
  if (y.size() != n) throw ParameterError("batch inputs and labels differ in length");
  if (x.rows() != model.dims.front()) throw ParameterError("input width does not match the network");
  const int layers = model.layer_count();
  std::vector<Eigen::MatrixXd> acts{x};
  std::vector<Eigen::MatrixXd> pre;
  for (int k = 0; k < layers; ++k) {
    Eigen::MatrixXd z = model.weights[k] * acts.back();
    z.colwise() += model.biases[k];
    pre.push_back(z);
    acts.push_back(k + 1 < layers ? relu(z) : z);
  }
  const Eigen::RowVectorXd err = acts.back().row(0) - y.transpose();
  LossAndGradients out;
  out.mse = err.squaredNorm() / static_cast<double>(n);
  out.grad.weights.resize(layers);
  out.grad.biases.resize(layers);
  Eigen::MatrixXd delta = (2.0 / static_cast<double>(n)) * err;
  for (int k = layers - 1; k >= 0; --k) {
    out.grad.weights[k] = delta * acts[k].transpose();
    out.grad.biases[k] = delta.rowwise().sum();
    if (k > 0) {
      delta = (model.weights[k].transpose() * delta).cwiseProduct(
          (pre[k - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

double mse(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.cols() == 0) throw ParameterError("empty batch");
  return (forward_batch(model, x) - y).squaredNorm() / static_cast<double>(x.cols());
}

void TrainConfig::validate() const {
  check_dims(layer_dims);
  if (layer_dims.back() != 1) throw ParameterError("network output width must be 1");
  if (!(s0 > 0 && s_end > 0 && decay_steps > 0 && decay_power > 0 && batch_size > 0 && max_epochs > 0 &&
        patience > 0 && min_delta >= 0 && adam_beta1 > 0 && adam_beta1 < 1 && adam_beta2 > 0 &&
        adam_beta2 < 1 && adam_eps > 0)) {
    throw ParameterError("training parameters must be positive (betas in (0, 1))");
  }
  if (!(val_fraction > 0 && val_fraction < 1)) throw ParameterError("val_fraction must lie in (0, 1)");
}

double lr_schedule(long step, const TrainConfig& c) {
  if (step < 0) throw ParameterError("negative step");
  const double frac = static_cast<double>(std::min(step, c.decay_steps)) / static_cast<double>(c.decay_steps);
  return (c.s0 - c.s_end) * std::pow(1.0 - frac, c.decay_power) + c.s_end;
}

std::pair<Eigen::MatrixXd, Eigen::VectorXd> to_matrix(std::span<const Sample> samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd x(kNetworkInputs, n);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < kNetworkInputs; ++j) x(j, i) = samples[i].radii[j];
    y(i) = samples[i].psi;
  }
  return {std::move(x), std::move(y)};
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config) {
  config.validate();
  if (config.layer_dims.front() != kNetworkInputs) throw ParameterError("network input width must be 5");
  if (train_set.size() == 0 || val_set.size() == 0) throw ParameterError("empty training or validation set");
  const auto [xt, yt] = to_matrix(train_set.samples);
  const auto [xv, yv] = to_matrix(val_set.samples);
  const Eigen::Index n = xt.cols();

  TrainResult best{init_glorot(config.layer_dims, config.init_seed), {}};
  MlpModel model = best.model;
  TrainHistory& h = best.history;
  AdamState adam{zeros_like(model), zeros_like(model), 0};

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  double best_val = std::numeric_limits<double>::infinity();
  double reference = std::numeric_limits<double>::infinity();
  int waited = 0;
  Eigen::MatrixXd xb;
  Eigen::VectorXd yb;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng rng(derive_seed(config.shuffle_seed, static_cast<std::uint64_t>(epoch)));
    for (Eigen::Index i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double loss_sum = 0.0;
    double lr = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      xb.resize(xt.rows(), b);
      yb.resize(b);
      for (Eigen::Index j = 0; j < b; ++j) {
        xb.col(j) = xt.col(order[start + j]);
        yb(j) = yt(order[start + j]);
      }
      const auto lg = loss_and_gradients(model, xb, yb);
      if (!std::isfinite(lg.mse)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(h.steps));
      }
      loss_sum += lg.mse * static_cast<double>(b);
      lr = lr_schedule(h.steps, config);
      ++adam.t;
      const double c1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(adam.t));
      const double c2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(adam.t));
      for (int k = 0; k < model.layer_count(); ++k) {
        adam_update(model.weights[k], adam.m.weights[k], adam.v.weights[k], lg.grad.weights[k], lr,
                    config.adam_beta1, config.adam_beta2, c1, c2, config.adam_eps);
        adam_update(model.biases[k], adam.m.biases[k], adam.v.biases[k], lg.grad.biases[k], lr,
                    config.adam_beta1, config.adam_beta2, c1, c2, config.adam_eps);
      }
      ++h.steps;
    }
    const double val = mse(model, xv, yv);
    if (!std::isfinite(val)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    h.train_mse.push_back(loss_sum / static_cast<double>(n));
    h.val_mse.push_back(val);
    h.lr.push_back(lr);
    logger().debug("epoch {} train {:.6e} val {:.6e} lr {:.3e}", epoch, h.train_mse.back(), val, lr);
    if (val < best_val) {
      best_val = val;
      best.model = model;
      h.best_epoch = epoch;
    }
    if (val < reference - config.min_delta) {
      reference = val;
      waited = 0;
    } else if (++waited >= config.patience) {
      h.stopped_early = true;
      break;
    }
  }
  return best;
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  config.validate();
  if (data.size() < 10) throw ParameterError("training needs at least 10 rows");
  const auto [tr, val] = split(data, config.val_fraction, config.shuffle_seed);
  return train(tr, val, config);
}

double predict(const MlpModel& model, std::span<const double> radii) {
  const RadialProfile p(std::vector<double>(radii.begin(), radii.end()));
  const auto x = p.network_input();
  return forward(model, x);
}

std::string model_id(const MlpModel& model) { return hex(fnv1a(payload(model))); }

void save_model(const MlpModel& model, const std::filesystem::path& path, const nlohmann::ordered_json& metadata) {
  const std::string body = payload(model);
  nlohmann::ordered_json header{{"format", kFormat},
                                {"version", kVersion},
                                {"layer_dims", model.dims},
                                {"activation", "relu"},
                                {"layout", "per layer: weight rows (out x in, row-major) then bias"},
                                {"parameter_count", model.parameter_count()},
                                {"id", hex(fnv1a(body))},
                                {"metadata", metadata.is_null() ? nlohmann::ordered_json::object() : metadata}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot open " + path.string() + " for writing");
  out << header.dump() << '\n' << body;
  if (!out) throw ParameterError("write failed: " + path.string());
}

namespace {

nlohmann::ordered_json read_header(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty model file " + path.string(), 1);
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad model header: " + std::string(e.what()), 1);
  }
  if (header.value("format", "") != kFormat) throw ParseError("not a model file", 1);
  if (header.value("version", -1) != kVersion) {
    throw ParseError("unsupported model version " + header.value("version", nlohmann::ordered_json()).dump(), 1);
  }
  return header;
}

}  // namespace

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  const auto header = read_header(in, path);
  std::vector<int> dims;
  try {
    dims = header.at("layer_dims").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad layer_dims: " + std::string(e.what()), 1);
  }
  MlpModel m;
  try {
    m = zero_model(dims);
  } catch (const ParameterError& e) {
    throw ParseError(e.what(), 1);
  }
  std::stringstream rest;
  rest << in.rdbuf();
  const std::string body = rest.str();
  long line_no = 1;
  std::istringstream lines(body);
  auto read_row = [&](auto&& dest, Eigen::Index n) {
    std::string line;
    ++line_no;
    if (!std::getline(lines, line)) throw ParseError("truncated model file", line_no);
    std::istringstream ls(line);
    for (Eigen::Index j = 0; j < n; ++j) {
      std::string tok;
      if (!(ls >> tok)) throw ParseError("too few values", line_no);
      try {
        std::size_t used = 0;
        dest(j) = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ParseError("bad value '" + tok + "'", line_no);
      }
      if (!std::isfinite(dest(j))) throw ParseError("non-finite parameter", line_no);
    }
    std::string extra;
    if (ls >> extra) throw ParseError("too many values", line_no);
  };
  for (int k = 0; k < m.layer_count(); ++k) {
    auto& w = m.weights[k];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      Eigen::RowVectorXd r(w.cols());
      read_row(r, w.cols());
      w.row(i) = r;
    }
    read_row(m.biases[k], m.biases[k].size());
  }
  std::string extra;
  if (std::getline(lines, extra) && !extra.empty()) throw ParseError("trailing data", line_no + 1);
  if (header.value("id", "") != hex(fnv1a(body))) throw ParseError("model id does not match the payload", 1);
  return m;
}

nlohmann::ordered_json load_model_metadata(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParameterError("cannot open " + path.string());
  return read_header(in, path).value("metadata", nlohmann::ordered_json::object());
}

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParameterError("cannot open " + path.string() + " for writing");
  out << "epoch,train_mse,val_mse,lr,best\n";
  char buf[128];
  for (int e = 0; e < h.epochs(); ++e) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%d\n", e, h.train_mse[e], h.val_mse[e], h.lr[e],
                  e == h.best_epoch ? 1 : 0);
    out << buf;
  }
}

}  // namespace avgpress
