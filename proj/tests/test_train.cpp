#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "kunet/dataset.hpp"
#include "kunet/kunet.hpp"
#include "kunet/loss.hpp"
#include "kunet/train.hpp"

using namespace kunet;

namespace {

KUNetConfig small_net_config(KernelKind kind = KernelKind::linear) {
    KUNetConfig cfg;
    cfg.lookback = 8;
    cfg.horizon = 8;
    cfg.unit_len = 4;
    cfg.multiples = {2};
    cfg.hidden_dim = 4;
    cfg.kernel = kind;
    return cfg;
}

SeriesDataset small_dataset(std::size_t n = 240) {
    Rng rng(1);
    return split(generate(DatasetKind::ds1, n, rng), {0.7, 0.1, 0.2});
}

TrainConfig quick_train(OptimKind kind, double lr, std::uint64_t seed = 0) {
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.patience = 3;
    cfg.batch_size = 16;
    cfg.seed = seed;
    cfg.optimizer.kind = kind;
    cfg.optimizer.lr = lr;
    return cfg;
}

}  // namespace

TEST_SUITE("train") {

TEST_CASE("mse basics") {
    CHECK(mse(std::vector<double>{1.0, 2.0, 3.0}, std::vector<double>{1.0, 2.0, 3.0}) ==
          0.0);
    CHECK(mse(std::vector<double>{1.0, 1.0}, std::vector<double>{0.0, 0.0}) == 1.0);
    CHECK_THROWS_AS(mse(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}),
                    std::invalid_argument);
    CHECK_THROWS_AS(mse(std::vector<double>{}, std::vector<double>{}),
                    std::invalid_argument);
}

TEST_CASE("mse matches a direct loop on random length-7 input") {
    Rng rng(9);
    std::vector<double> pred(7), target(7);
    for (auto& v : pred) v = rng.next_normal(0.0, 2.0);
    for (auto& v : target) v = rng.next_normal(0.0, 2.0);
    double want = 0.0;
    for (int i = 0; i < 7; ++i) want += (pred[i] - target[i]) * (pred[i] - target[i]);
    want /= 7.0;
    CHECK(std::fabs(mse(pred, target) - want) < 1e-15);
}

TEST_CASE("mse_grad closed form and finite differences") {
    CHECK(mse_grad(std::vector<double>{3.0}, std::vector<double>{1.0}) ==
          std::vector<double>{4.0});

    std::vector<double> same{0.5, -2.0};
    for (double g : mse_grad(same, same)) CHECK(g == 0.0);

    Rng rng(10);
    std::vector<double> pred(5), target(5);
    for (auto& v : pred) v = rng.next_normal(0.0, 1.0);
    for (auto& v : target) v = rng.next_normal(0.0, 1.0);
    std::vector<double> analytic = mse_grad(pred, target);
    const double eps = 1e-6;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        std::vector<double> up = pred, down = pred;
        up[i] += eps;
        down[i] -= eps;
        const double numeric = (mse(up, target) - mse(down, target)) / (2.0 * eps);
        CHECK(std::fabs(analytic[i] - numeric) < 1e-8);
    }
}

TEST_CASE("evaluate: exact-forecast net scores zero") {
    // Identity net: unit_len == hidden, encoder and decoder weights set to I.
    KUNetConfig cfg;
    cfg.lookback = 8;
    cfg.horizon = 8;
    cfg.unit_len = 8;
    cfg.multiples = {};
    cfg.hidden_dim = 8;
    cfg.kernel = KernelKind::linear;
    Rng rng(2);
    KUNet net = KUNet::build(cfg, rng);
    for (ParamBinding& b : net.parameters()) {
        if (b.tensor->name == "W")
            b.tensor->value = Matrix::identity(8);
        else
            b.tensor->value.fill(0.0);
    }

    SeriesDataset constant;
    constant.name = "const";
    constant.values.assign(80, 1.5);
    constant.train_end = 48;
    constant.val_end = 64;
    WindowSet ws = windows(constant, Part::val, 8, 8, 1);
    CHECK(evaluate(net, ws, 4) == 0.0);
}

TEST_CASE("evaluate: mean over windows, invariant to order and batching") {
    KUNetConfig cfg = small_net_config();
    Rng rng(3);
    KUNet net = KUNet::build(cfg, rng);
    SeriesDataset ds = small_dataset();
    WindowSet ws = windows(ds, Part::val, 8, 8, 1);
    REQUIRE(ws.size() >= 3);

    double manual = 0.0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        WindowPair w = ws[i];
        manual += mse(net.forward(w.input), w.target);
    }
    manual /= static_cast<double>(ws.size());
    const double batched = evaluate(net, ws, 4);
    CHECK(batched == doctest::Approx(manual).epsilon(1e-12));
    CHECK(evaluate(net, ws, 1) == doctest::Approx(batched).epsilon(1e-12));
    CHECK(evaluate(net, ws, 1000) == doctest::Approx(batched).epsilon(1e-12));

    // reversed window order
    std::vector<std::size_t> reversed(ws.origins().rbegin(), ws.origins().rend());
    WindowSet flipped(&ds, reversed, 8, 8);
    CHECK(evaluate(net, flipped, 4) == doctest::Approx(batched).epsilon(1e-12));
}

TEST_CASE("evaluate leaves parameters untouched") {
    KUNetConfig cfg = small_net_config(KernelKind::mlp);
    Rng rng(4);
    KUNet net = KUNet::build(cfg, rng);
    SeriesDataset ds = small_dataset();
    WindowSet ws = windows(ds, Part::test, 8, 8, 1);
    auto before = net.snapshot_params();
    evaluate(net, ws, 8);
    auto after = net.snapshot_params();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].data == after[i].data);
}

TEST_CASE("train: zero epochs records nothing and touches nothing") {
    Rng rng(5);
    KUNet net = KUNet::build(small_net_config(), rng);
    auto before = net.snapshot_params();
    TrainConfig cfg = quick_train(OptimKind::sgdm, 1e-3);
    cfg.epochs = 0;
    cfg.patience = 0;
    RunRecord record = train(net, small_dataset(), cfg);
    CHECK(record.rows.empty());
    CHECK(record.best_epoch == 0);
    CHECK(std::isnan(record.best_val_mse));
    auto after = net.snapshot_params();
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].data == after[i].data);
}

TEST_CASE("train: identical seed and config give byte-identical records") {
    SeriesDataset ds = small_dataset();
    auto run_once = [&] {
        Rng rng(6);
        KUNet net = KUNet::build(small_net_config(KernelKind::mlp), rng);
        TrainConfig cfg = quick_train(OptimKind::ew_sgdm, 1e-3, 42);
        cfg.optimizer.ew_base = 2.0;
        RunRecord r = train(net, ds, cfg);
        return run_record_csv(r) + run_record_json(r);
    };
    CHECK(run_once() == run_once());
}

TEST_CASE("train: lr = 0 freezes the loss") {
    Rng rng(7);
    KUNet net = KUNet::build(small_net_config(), rng);
    TrainConfig cfg = quick_train(OptimKind::sgd, 0.0);
    cfg.epochs = 4;
    cfg.patience = 4;
    RunRecord record = train(net, small_dataset(), cfg);
    REQUIRE(record.rows.size() == 4);
    for (const EpochRow& row : record.rows) {
        CHECK(std::fabs(row.train_mse - record.rows[0].train_mse) < 1e-12);
        CHECK(row.val_mse == record.rows[0].val_mse);
    }
}

TEST_CASE("train: early stopping row counts") {
    // lr 0: validation never improves after epoch 1 -> exactly 1 + patience rows
    Rng rng(8);
    KUNet net = KUNet::build(small_net_config(), rng);
    TrainConfig cfg = quick_train(OptimKind::sgd, 0.0);
    cfg.epochs = 50;
    cfg.patience = 3;
    RunRecord record = train(net, small_dataset(), cfg);
    CHECK(record.rows.size() == 1 + 3);
    CHECK(record.best_epoch == 1);

    // patience == epochs can never trigger before the natural end
    Rng rng2(8);
    KUNet net2 = KUNet::build(small_net_config(), rng2);
    TrainConfig cfg2 = quick_train(OptimKind::sgdm, 1e-4);
    cfg2.epochs = 5;
    cfg2.patience = 5;
    RunRecord r2 = train(net2, small_dataset(), cfg2);
    CHECK(r2.rows.size() == 5);

    // patience larger than epochs is clamped, not rejected
    Rng rng3(8);
    KUNet net3 = KUNet::build(small_net_config(), rng3);
    TrainConfig cfg3 = quick_train(OptimKind::sgdm, 1e-4);
    cfg3.epochs = 2;
    cfg3.patience = 20;
    CHECK(train(net3, small_dataset(), cfg3).rows.size() == 2);
}

TEST_CASE("train: best epoch minimizes validation MSE and is restored") {
    Rng rng(11);
    KUNet net = KUNet::build(small_net_config(KernelKind::mlp), rng);
    TrainConfig cfg = quick_train(OptimKind::sgdm, 5e-3, 3);
    cfg.epochs = 6;
    cfg.patience = 6;
    SeriesDataset ds = small_dataset();
    RunRecord record = train(net, ds, cfg);
    REQUIRE(!record.rows.empty());

    double min_val = record.rows[0].val_mse;
    std::size_t argmin = 1;
    for (const EpochRow& row : record.rows)
        if (row.val_mse < min_val) {
            min_val = row.val_mse;
            argmin = row.epoch;
        }
    CHECK(record.best_epoch == argmin);
    CHECK(record.best_val_mse == min_val);
    CHECK(record.test_mse_at_best == record.rows[record.best_epoch - 1].test_mse);

    // parameters were restored to the best epoch: re-evaluating reproduces it
    WindowSet val_ws = windows(ds, Part::val, 8, 8, 1);
    CHECK(evaluate(net, val_ws, cfg.batch_size) == record.best_val_mse);
}

TEST_CASE("train: exploding loss aborts with epoch and batch") {
    Rng rng(12);
    KUNet net = KUNet::build(small_net_config(), rng);
    TrainConfig cfg = quick_train(OptimKind::sgd, 1e14);
    cfg.epochs = 20;
    cfg.patience = 20;
    CHECK_THROWS_WITH_AS(train(net, small_dataset(), cfg),
                         doctest::Contains("non-finite training loss"), std::runtime_error);
}

TEST_CASE("train: EW and SGDM grad stats differ by exactly the level weights") {
    SeriesDataset ds = small_dataset(500);  // val/test partitions must fit L+T = 32
    auto one_epoch = [&](OptimKind kind) {
        Rng rng(13);
        KUNetConfig net_cfg;
        net_cfg.lookback = 16;
        net_cfg.horizon = 16;
        net_cfg.unit_len = 4;
        net_cfg.multiples = {2, 2};
        net_cfg.hidden_dim = 4;
        net_cfg.kernel = KernelKind::linear;
        KUNet net = KUNet::build(net_cfg, rng);
        TrainConfig cfg = quick_train(kind, 1e-3, 77);
        cfg.epochs = 1;
        cfg.patience = 1;
        cfg.batch_size = 100000;  // single batch per epoch
        cfg.optimizer.ew_base = 2.0;
        return train(net, ds, cfg);
    };
    RunRecord ew = one_epoch(OptimKind::ew_sgdm);
    RunRecord sgdm = one_epoch(OptimKind::sgdm);
    REQUIRE(ew.rows.size() == 1);
    REQUIRE(sgdm.rows.size() == 1);
    REQUIRE(ew.grad_columns == sgdm.grad_columns);
    // columns: enc l1..l3 then dec l1..l3; weights 1, 2, 4 per level
    const std::vector<double> weights{1.0, 2.0, 4.0, 1.0, 2.0, 4.0};
    for (std::size_t c = 0; c < weights.size(); ++c)
        CHECK(ew.rows[0].grad_stats[c] == weights[c] * sgdm.rows[0].grad_stats[c]);
}

TEST_CASE("run record CSV header and shape") {
    Rng rng(14);
    KUNet net = KUNet::build(small_net_config(), rng);
    TrainConfig cfg = quick_train(OptimKind::adam, 1e-4);
    RunRecord record = train(net, small_dataset(), cfg);
    const std::string csv = run_record_csv(record);
    CHECK(csv.rfind("epoch,train_mse,val_mse,test_mse,grad_enc_l1,grad_enc_l2,"
                    "grad_dec_l1,grad_dec_l2,seconds\n", 0) == 0);
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 1 + record.rows.size());
}

TEST_CASE("train: normalize-last mode learns the constant-offset task faster") {
    // sanity check that the flag wires through; exactness is not required
    Rng rng(15);
    KUNet net = KUNet::build(small_net_config(), rng);
    TrainConfig cfg = quick_train(OptimKind::sgdm, 1e-3, 5);
    cfg.normalize_last = true;
    RunRecord record = train(net, small_dataset(), cfg);
    CHECK(record.rows.size() == 3);
    for (const EpochRow& row : record.rows) CHECK(std::isfinite(row.train_mse));
}

}  // TEST_SUITE
