#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gridcast/dataset.hpp"

namespace gridcast {

enum class Activation { Linear, Relu, Tanh, Sigmoid };
enum class OptimizerKind { Sgd, Rmsprop, Adam };

const char* activation_name(Activation a);
const char* optimizer_name(OptimizerKind o);
std::optional<Activation> parse_activation(const std::string& s);
std::optional<OptimizerKind> parse_optimizer(const std::string& s);

struct MlpConfig {
    int hidden_neurons = 0;   // 0 = apply default_hidden_neurons()
    int hidden_layers = 1;    // 0..3; the cascade always uses 1
    Activation activation_hidden = Activation::Tanh;
    Activation activation_output = Activation::Linear;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    int batch_size = 128;
    int epochs = 200;
    std::uint64_t seed = 1;
};

/// ceil(2 (n_in + n_out) / 3) clamped to [8, 256].
int default_hidden_neurons(int n_in, int n_out);

// Raw network: affine layers plus activations, operating on normalized data.
// Public so the gradient checks can drive it directly.
struct MlpCore {
    std::vector<Eigen::MatrixXd> weights;  // layer l: (fan_in x fan_out)
    std::vector<Eigen::VectorXd> biases;
    std::vector<Activation> acts;          // one per layer

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
};

MlpCore init_core(int n_in, int n_out, const MlpConfig& cfg);

struct MlpGradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

/// Mean-squared-error loss over the batch: sum of squared errors divided by
/// (rows x output columns).
double mlp_loss(const MlpCore& core, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

/// Analytic MSE gradients via backpropagation.
MlpGradients mlp_gradients(const MlpCore& core, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y);

struct NormStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd scale;  // floored, never zero
    Eigen::VectorXd lo;     // training-range bounds, for extrapolation checks
    Eigen::VectorXd hi;
    std::vector<int> degenerate;  // zero-variance columns

    Eigen::MatrixXd normalize(const Eigen::MatrixXd& x) const;
    Eigen::MatrixXd denormalize(const Eigen::MatrixXd& x) const;
};

NormStats fit_norm(const Eigen::MatrixXd& data, const std::vector<int>& rows);

struct MlpModel {
    MlpConfig config;
    MlpCore core;
    NormStats in_norm;
    NormStats out_norm;

    int input_width() const { return static_cast<int>(core.weights.front().rows()); }
    int output_width() const { return static_cast<int>(core.weights.back().cols()); }

    /// Rows with any input outside the training range.
    int count_extrapolated(const Eigen::MatrixXd& inputs) const;
};

struct TrainReport {
    std::vector<double> epoch_loss;               // length = epochs
    double val_mae = 0.0;                         // over all outputs, denormalized
    std::map<std::string, double> val_mae_groups; // per output group
    double train_seconds = 0.0;
    std::vector<std::string> warnings;
    int extrapolated_rows = 0;                    // test rows outside train range
};

/// Trains on the dataset's train rows (normalization fitted there only) and
/// validates on its test rows. Deterministic under cfg.seed. Throws on
/// non-finite loss.
std::pair<MlpModel, TrainReport> train_mlp(const ClusterDataset& ds, const MlpConfig& cfg);

/// Denormalized predictions; pure function of (model, inputs).
Eigen::MatrixXd predict_mlp(const MlpModel& m, const Eigen::MatrixXd& inputs);

std::string serialize_mlp(const MlpModel& m);
MlpModel parse_mlp(const std::string& text);

}  // namespace gridcast
