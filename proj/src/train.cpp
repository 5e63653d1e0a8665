#include "kunet/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "kunet/text.hpp"

namespace kunet {

namespace {

/// Subtracts each row's last input value from the whole row; returns the
/// offsets so predictions can be shifted back.
std::vector<double> apply_last_value_offset(Matrix& inputs) {
    std::vector<double> offsets(inputs.rows);
    for (std::size_t i = 0; i < inputs.rows; ++i) {
        double* row = inputs.row_ptr(i);
        const double off = row[inputs.cols - 1];
        offsets[i] = off;
        for (std::size_t j = 0; j < inputs.cols; ++j) row[j] -= off;
    }
    return offsets;
}

void add_offsets(Matrix& predictions, const std::vector<double>& offsets) {
    for (std::size_t i = 0; i < predictions.rows; ++i) {
        double* row = predictions.row_ptr(i);
        for (std::size_t j = 0; j < predictions.cols; ++j) row[j] += offsets[i];
    }
}

std::vector<std::string> grad_column_names(std::size_t depth) {
    std::vector<std::string> names;
    for (std::size_t l = 1; l <= depth; ++l)
        names.push_back("grad_" + kernel_id(KernelRole::encoder, l));
    for (std::size_t l = 1; l <= depth; ++l)
        names.push_back("grad_" + kernel_id(KernelRole::decoder, l));
    return names;
}

std::vector<double> effective_grad_stats(KUNet& net, const Optimizer& opt) {
    auto stats = net.grad_stats();
    std::vector<double> out;
    const std::size_t depth = net.depth();
    for (std::size_t l = 1; l <= depth; ++l)
        out.push_back(stats.at(kernel_id(KernelRole::encoder, l)) * opt.effective_weight(l));
    for (std::size_t l = 1; l <= depth; ++l)
        out.push_back(stats.at(kernel_id(KernelRole::decoder, l)) * opt.effective_weight(l));
    return out;
}

}  // namespace

double evaluate(KUNet& net, const WindowSet& windows, std::size_t batch_size,
                bool normalize_last) {
    if (windows.empty()) throw std::invalid_argument("evaluate: no windows");
    if (batch_size < 1) throw std::invalid_argument("evaluate: batch_size must be >= 1");
    double weighted_sum = 0.0;
    Matrix inputs, targets;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < windows.size(); start += batch_size) {
        const std::size_t end = std::min(windows.size(), start + batch_size);
        idx.resize(end - start);
        std::iota(idx.begin(), idx.end(), start);
        windows.gather(idx, inputs, targets);
        std::vector<double> offsets;
        if (normalize_last) offsets = apply_last_value_offset(inputs);
        Matrix pred = net.forward(inputs);
        if (normalize_last) add_offsets(pred, offsets);
        weighted_sum += mse(pred, targets) * static_cast<double>(end - start);
    }
    return weighted_sum / static_cast<double>(windows.size());
}

RunRecord train(KUNet& net, const SeriesDataset& data, const TrainConfig& cfg) {
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    const std::size_t L = net.config().lookback;
    const std::size_t T = net.config().horizon;

    WindowSet train_ws = windows(data, Part::train, L, T, cfg.train_stride);
    WindowSet val_ws = windows(data, Part::val, L, T, cfg.eval_stride);
    WindowSet test_ws = windows(data, Part::test, L, T, cfg.eval_stride);

    RunRecord record;
    record.dataset_name = data.name;
    record.net_config = net.config();
    record.train_config = cfg;
    record.grad_columns = grad_column_names(net.depth());

    Optimizer opt(cfg.optimizer, net);
    Rng shuffle_rng(cfg.seed, /*stream=*/1);

    const std::size_t patience = std::min(cfg.patience, cfg.epochs);
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Matrix> best_params;
    std::size_t epochs_since_best = 0;

    std::vector<std::size_t> order(train_ws.size());
    std::iota(order.begin(), order.end(), 0);

    Matrix inputs, targets;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffle_rng.shuffle(order);

        double train_weighted_sum = 0.0;
        std::vector<std::size_t> batch_idx;
        for (std::size_t start = 0, batch_no = 1; start < order.size();
             start += cfg.batch_size, ++batch_no) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            batch_idx.assign(order.begin() + start, order.begin() + end);
            train_ws.gather(batch_idx, inputs, targets);
            std::vector<double> offsets;
            if (cfg.normalize_last) offsets = apply_last_value_offset(inputs);

            net.zero_grads();
            Matrix pred = net.forward(inputs);
            if (cfg.normalize_last) add_offsets(pred, offsets);
            const double batch_loss = mse(pred, targets);
            if (!std::isfinite(batch_loss)) {
                std::ostringstream msg;
                msg << "non-finite training loss at epoch " << epoch << ", batch "
                    << batch_no;
                throw std::runtime_error(msg.str());
            }
            train_weighted_sum += batch_loss * static_cast<double>(end - start);

            net.backward(mse_grad(pred, targets));
            opt.step(net);
        }

        EpochRow row;
        row.epoch = epoch;
        row.train_mse = train_weighted_sum / static_cast<double>(train_ws.size());
        // grad stats come from the last batch of the epoch (cheap; enough
        // for level-wise comparisons).
        row.grad_stats = effective_grad_stats(net, opt);
        row.val_mse = evaluate(net, val_ws, cfg.batch_size, cfg.normalize_last);
        row.test_mse = evaluate(net, test_ws, cfg.batch_size, cfg.normalize_last);
        if (cfg.record_timing) {
            row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                              .count();
        }
        record.rows.push_back(std::move(row));

        if (record.rows.back().val_mse < best_val) {
            best_val = record.rows.back().val_mse;
            record.best_epoch = epoch;
            best_params = net.snapshot_params();
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= patience) break;
        }
    }

    if (record.best_epoch > 0) {
        net.restore_params(best_params);
        record.best_val_mse = best_val;
        record.test_mse_at_best = record.rows[record.best_epoch - 1].test_mse;
    }
    return record;
}

std::string run_record_csv(const RunRecord& record) {
    std::ostringstream out;
    out << "epoch,train_mse,val_mse,test_mse";
    for (const std::string& c : record.grad_columns) out << "," << c;
    out << ",seconds\n";
    for (const EpochRow& row : record.rows) {
        out << row.epoch << "," << format_double(row.train_mse) << ","
            << format_double(row.val_mse) << "," << format_double(row.test_mse);
        for (double g : row.grad_stats) out << "," << format_double(g);
        out << "," << format_double(row.seconds) << "\n";
    }
    return out.str();
}

std::string run_record_json(const RunRecord& record) {
    nlohmann::json j;
    j["dataset"] = record.dataset_name;
    j["net"] = {{"lookback", record.net_config.lookback},
                {"horizon", record.net_config.horizon},
                {"unit_len", record.net_config.unit_len},
                {"multiples", record.net_config.multiples},
                {"hidden_dim", record.net_config.hidden_dim},
                {"kernel", to_string(record.net_config.kernel)}};
    const TrainConfig& t = record.train_config;
    j["train"] = {{"epochs", t.epochs},
                  {"patience", t.patience},
                  {"batch_size", t.batch_size},
                  {"seed", t.seed},
                  {"train_stride", t.train_stride},
                  {"eval_stride", t.eval_stride},
                  {"normalize_last", t.normalize_last},
                  {"optimizer", to_string(t.optimizer.kind)},
                  {"lr", t.optimizer.lr},
                  {"momentum", t.optimizer.momentum},
                  {"adam_beta1", t.optimizer.adam_beta1},
                  {"adam_beta2", t.optimizer.adam_beta2},
                  {"adam_eps", t.optimizer.adam_eps},
                  {"ew_base", t.optimizer.ew_base}};
    j["grad_columns"] = record.grad_columns;
    j["best_epoch"] = record.best_epoch;
    j["best_val_mse"] = record.best_val_mse;
    j["test_mse_at_best"] = record.test_mse_at_best;
    nlohmann::json rows = nlohmann::json::array();
    for (const EpochRow& row : record.rows) {
        rows.push_back({{"epoch", row.epoch},
                        {"train_mse", row.train_mse},
                        {"val_mse", row.val_mse},
                        {"test_mse", row.test_mse},
                        {"grad_stats", row.grad_stats},
                        {"seconds", row.seconds}});
    }
    j["rows"] = rows;
    return j.dump(2);
}

void write_run_record_csv(const RunRecord& record, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << run_record_csv(record);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_run_record_json(const RunRecord& record, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << run_record_json(record) << "\n";
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace kunet
