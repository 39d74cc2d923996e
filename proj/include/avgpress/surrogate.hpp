#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "avgpress/dataset.hpp"

namespace avgpress {

// Dense ReLU network: weights[k] is (dims[k+1] x dims[k]), last layer affine.
struct MlpModel {
  std::vector<int> dims;
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  int layer_count() const { return static_cast<int>(weights.size()); }
  std::size_t parameter_count() const;
  bool operator==(const MlpModel& o) const;
};

inline const std::vector<int> kDefaultLayerDims = {5, 128, 128, 128, 1};

// Throws ParameterError unless dims has >= 2 positive entries.
MlpModel zero_model(std::span<const int> dims);
// Weights ~ Uniform(-L, L), L = sqrt(6 / (fan_in + fan_out)); biases zero.
MlpModel init_glorot(std::span<const int> dims, std::uint64_t seed);

double forward(const MlpModel& model, std::span<const double> x);
// Columns of x are inputs; returns one prediction per column.
Eigen::VectorXd forward_batch(const MlpModel& model, const Eigen::MatrixXd& x);

struct Gradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

struct LossAndGradients {
  double mse = 0.0;
  Gradients grad;
};

// Mean squared error over the columns of x and its exact gradient. The ReLU
// derivative at 0 is taken as 0. Throws ParameterError on an empty batch.
LossAndGradients loss_and_gradients(const MlpModel& model, const Eigen::MatrixXd& x,
                                    const Eigen::VectorXd& y);
double mse(const MlpModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct TrainConfig {
  std::vector<int> layer_dims = kDefaultLayerDims;
  double s0 = 1e-3;
  double s_end = 1e-4;
  long decay_steps = 10000;
  double decay_power = 0.5;
  int batch_size = 128;
  int max_epochs = 1000;
  int patience = 25;
  double min_delta = 1e-5;
  double val_fraction = 0.2;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// s_k = (s0 - s_end) (1 - min(k, K) / K)^p + s_end.
double lr_schedule(long step, const TrainConfig& config);

struct TrainHistory {
  std::vector<double> train_mse;  // mean minibatch loss over the epoch
  std::vector<double> val_mse;    // after the epoch
  std::vector<double> lr;         // learning rate at the epoch's last step
  int best_epoch = -1;            // argmin of val_mse, 0-based
  bool stopped_early = false;
  long steps = 0;

  int epochs() const { return static_cast<int>(val_mse.size()); }
};

struct TrainResult {
  MlpModel model;  // weights of best_epoch
  TrainHistory history;
};

// ADAM on minibatches with the polynomial-decay schedule. Stops after
// `patience` epochs without a val improvement larger than min_delta and
// restores the best weights. Throws NumericError on a non-finite loss.
TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& config);
// Splits off config.val_fraction (seeded by shuffle_seed) first. Needs >= 10 rows.
TrainResult train(const Dataset& data, const TrainConfig& config);

// Inputs as a 5 x n matrix and labels.
std::pair<Eigen::MatrixXd, Eigen::VectorXd> to_matrix(std::span<const Sample> samples);

// Radii of a 1, 2, 3, 5 or 19-point profile, reduced to the five network inputs.
double predict(const MlpModel& model, std::span<const double> radii);

// Hex FNV-1a 64 of the serialized parameters.
std::string model_id(const MlpModel& model);

// First line: JSON header (format, version, layer_dims, parameter_count, id,
// metadata). Then one line per weight row and per bias vector, row-major, %.17g.
void save_model(const MlpModel& model, const std::filesystem::path& path,
                const nlohmann::ordered_json& metadata = {});
// Throws ParseError on a corrupt file, wrong version or id mismatch.
MlpModel load_model(const std::filesystem::path& path);
nlohmann::ordered_json load_model_metadata(const std::filesystem::path& path);

void write_history_csv(const TrainHistory& h, const std::filesystem::path& path);

}  // namespace avgpress
