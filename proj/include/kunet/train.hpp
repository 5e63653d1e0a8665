#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "kunet/dataset.hpp"
#include "kunet/kunet.hpp"
#include "kunet/loss.hpp"
#include "kunet/optim.hpp"

namespace kunet {

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t patience = 20;
    std::size_t batch_size = 64;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    std::size_t train_stride = 1;
    std::size_t eval_stride = 1;
    /// NLinear-style offset: subtract the last input value before the net,
    /// add it back to the prediction.
    bool normalize_last = false;
    /// Off by default so emitted records are byte-identical across reruns;
    /// the seconds column reads 0 unless enabled.
    bool record_timing = false;
};

struct EpochRow {
    std::size_t epoch = 0;  // 1-based
    double train_mse = 0.0;
    double val_mse = 0.0;
    double test_mse = 0.0;
    /// Effective-update magnitude per kernel (mean |grad| of the last batch
    /// of the epoch, times the EW level weight when the optimizer is
    /// EW-SGDM). Order matches RunRecord::grad_columns.
    std::vector<double> grad_stats;
    double seconds = 0.0;
};

struct RunRecord {
    std::string dataset_name;
    KUNetConfig net_config;
    TrainConfig train_config;
    std::vector<std::string> grad_columns;  // enc l1..lD, then dec l1..lD
    std::vector<EpochRow> rows;
    std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
    double best_val_mse = std::numeric_limits<double>::quiet_NaN();
    double test_mse_at_best = std::numeric_limits<double>::quiet_NaN();

    double final_train_mse() const {
        return rows.empty() ? std::numeric_limits<double>::quiet_NaN()
                            : rows.back().train_mse;
    }
};

/// Mean MSE over the windows, batched forwards only; parameters and
/// optimizer state are untouched.
double evaluate(KUNet& net, const WindowSet& windows, std::size_t batch_size,
                bool normalize_last = false);

/// The experiment loop: per epoch, a seeded shuffle of the training windows,
/// then zero_grads -> forward -> mse_grad -> backward -> optimizer step per
/// batch; val/test evaluation after the updates; early stop once validation
/// MSE has not improved for `patience` epochs (strict improvement, patience
/// clamped to `epochs`); best-validation parameters are restored at the end.
/// Throws on a non-finite training loss, naming epoch and batch.
RunRecord train(KUNet& net, const SeriesDataset& data, const TrainConfig& cfg);

std::string run_record_csv(const RunRecord& record);
std::string run_record_json(const RunRecord& record);
void write_run_record_csv(const RunRecord& record, const std::filesystem::path& path);
void write_run_record_json(const RunRecord& record, const std::filesystem::path& path);

}  // namespace kunet
