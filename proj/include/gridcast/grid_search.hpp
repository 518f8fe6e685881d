#pragma once

#include <string>
#include <vector>

#include "gridcast/mlp.hpp"

namespace gridcast {

/// Exhaustive hyperparameter grid: every combination of the option lists is
/// trained and validated. Lists must be non-empty.
struct HyperGrid {
    std::vector<double> hidden_multipliers{1.0};  // relative to the default sizing rule
    std::vector<int> hidden_layers{1};
    std::vector<int> batch_sizes{128};
    std::vector<int> epochs{200};
    std::vector<OptimizerKind> optimizers{OptimizerKind::Adam};
    std::vector<Activation> hidden_activations{Activation::Tanh};
    std::vector<Activation> output_activations{Activation::Linear};
    double learning_rate = 1e-3;
    std::uint64_t seed = 1;
};

struct GridResult {
    int cell = 0;          // index in Cartesian-product order
    MlpConfig config;
    double val_mae = 0.0;
    double train_seconds = 0.0;
};

/// Evaluates the full Cartesian product (cells may train concurrently, each
/// under a seed derived from grid.seed and the cell index) and returns the
/// results ranked by validation MAE ascending, ties by cell index.
std::vector<GridResult> grid_search(const ClusterDataset& ds, const HyperGrid& grid,
                                    int workers = 1);

/// Ranking table: one row per cell, sorted as returned by grid_search.
std::string grid_results_csv(const std::vector<GridResult>& results);

}  // namespace gridcast
