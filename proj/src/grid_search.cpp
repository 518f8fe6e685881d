#include "gridcast/grid_search.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gridcast/errors.hpp"
#include "gridcast/parallel.hpp"
#include "gridcast/rng.hpp"
#include "gridcast/text.hpp"

namespace gridcast {

std::vector<GridResult> grid_search(const ClusterDataset& ds, const HyperGrid& grid, int workers) {
    if (grid.hidden_multipliers.empty() || grid.hidden_layers.empty() || grid.batch_sizes.empty() ||
        grid.epochs.empty() || grid.optimizers.empty() || grid.hidden_activations.empty() ||
        grid.output_activations.empty())
        throw Error("every hyperparameter option list must be non-empty");

    const int base_hidden =
        default_hidden_neurons(static_cast<int>(ds.inputs.cols()), static_cast<int>(ds.outputs.cols()));

    std::vector<MlpConfig> cells;
    for (double mult : grid.hidden_multipliers)
        for (int layers : grid.hidden_layers)
            for (int batch : grid.batch_sizes)
                for (int ep : grid.epochs)
                    for (OptimizerKind opt : grid.optimizers)
                        for (Activation hidden_act : grid.hidden_activations)
                            for (Activation out_act : grid.output_activations) {
                                MlpConfig cfg;
                                cfg.hidden_neurons = std::max(
                                    1, static_cast<int>(std::lround(mult * base_hidden)));
                                cfg.hidden_layers = layers;
                                cfg.batch_size = batch;
                                cfg.epochs = ep;
                                cfg.optimizer = opt;
                                cfg.activation_hidden = hidden_act;
                                cfg.activation_output = out_act;
                                cfg.learning_rate = grid.learning_rate;
                                cfg.seed = mix_seed(grid.seed, cells.size());
                                cells.push_back(cfg);
                            }

    std::vector<GridResult> results(cells.size());
    parallel_for(cells.size(), workers, [&](std::size_t i) {
        auto [model, report] = train_mlp(ds, cells[i]);
        results[i] = GridResult{static_cast<int>(i), cells[i], report.val_mae, report.train_seconds};
    });

    std::sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
        if (a.val_mae != b.val_mae) return a.val_mae < b.val_mae;
        return a.cell < b.cell;
    });
    return results;
}

std::string grid_results_csv(const std::vector<GridResult>& results) {
    std::ostringstream out;
    out << "rank,cell,val_mae,hidden_neurons,hidden_layers,batch_size,epochs,optimizer,"
           "activation_hidden,activation_output,learning_rate,train_seconds\n";
    int rank = 1;
    for (const auto& r : results) {
        out << rank++ << ',' << r.cell << ',' << fmt_sig9(r.val_mae) << ','
            << r.config.hidden_neurons << ',' << r.config.hidden_layers << ','
            << r.config.batch_size << ',' << r.config.epochs << ','
            << optimizer_name(r.config.optimizer) << ','
            << activation_name(r.config.activation_hidden) << ','
            << activation_name(r.config.activation_output) << ','
            << fmt_sig9(r.config.learning_rate) << ',' << fmt_sig9(r.train_seconds) << '\n';
    }
    return out.str();
}

}  // namespace gridcast
