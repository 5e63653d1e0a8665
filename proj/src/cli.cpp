#include "kunet/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "kunet/dataset.hpp"
#include "kunet/kunet.hpp"
#include "kunet/optim.hpp"
#include "kunet/text.hpp"
#include "kunet/train.hpp"

namespace fs = std::filesystem;

namespace kunet {

namespace {

constexpr std::array<double, 3> kSplitRatios = {0.7, 0.1, 0.2};

struct NetFlags {
    std::size_t lookback = 512;
    std::size_t horizon = 512;
    std::size_t unit_len = 8;
    std::string multiples = "8,8";
    std::size_t hidden = 128;
    std::string kernel = "mlp";

    KUNetConfig to_config() const {
        KUNetConfig cfg;
        cfg.lookback = lookback;
        cfg.horizon = horizon;
        cfg.unit_len = unit_len;
        cfg.multiples = parse_size_list(multiples);
        cfg.hidden_dim = hidden;
        cfg.kernel = kernel_kind_from_string(kernel);
        cfg.validate();
        return cfg;
    }
};

void add_net_flags(CLI::App& cmd, NetFlags& f) {
    cmd.add_option("--lookback", f.lookback, "Look-back window L (paper: 512)")
        ->capture_default_str();
    cmd.add_option("--horizon", f.horizon, "Forecasting horizon T (paper: 512; must equal L)")
        ->capture_default_str();
    cmd.add_option("--unit-len", f.unit_len, "Segment-unit input length (paper: 8)")
        ->capture_default_str();
    cmd.add_option("--multiples", f.multiples,
                   "Per-level grouping factors, comma-separated (paper: 8,8)")
        ->capture_default_str();
    cmd.add_option("--hidden", f.hidden, "Hidden dimension of all layers (paper: 128)")
        ->capture_default_str();
    cmd.add_option("--kernel", f.kernel, "Kernel kind: linear|mlp")->capture_default_str();
}

void validate_series_length(std::size_t n, std::size_t lookback, std::size_t horizon) {
    const std::size_t minimum = 2 * (lookback + horizon);
    if (n < minimum) {
        std::ostringstream msg;
        msg << "series length " << n << " is below the minimum " << minimum
            << " (2*(L+T)) needed for at least one window per split";
        throw std::invalid_argument(msg.str());
    }
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::size_t start = 0;
    while (start <= text.size() && !text.empty()) {
        std::size_t comma = text.find(',', start);
        std::string tok = comma == std::string::npos ? text.substr(start)
                                                     : text.substr(start, comma - start);
        try {
            std::size_t used = 0;
            double v = std::stod(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            out.push_back(v);
        } catch (const std::exception&) {
            throw std::invalid_argument("bad numeric list entry '" + tok + "'");
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> out;
    for (std::size_t v : parse_size_list(text)) out.push_back(v);
    return out;
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
    std::string dataset = "ds1";
    std::size_t n = 20000;
    std::uint64_t seed = 0;
    std::string out;
    std::size_t lookback = 512;
    std::size_t horizon = 512;
};

int cmd_generate(const GenerateArgs& args) {
    validate_series_length(args.n, args.lookback, args.horizon);
    Rng rng(args.seed);
    SeriesDataset ds = generate(dataset_kind_from_string(args.dataset), args.n, rng);
    fs::path out(args.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    write_series_csv(ds, out);
    std::cout << "wrote " << ds.size() << " points to " << out.string() << "\n";
    return 0;
}

// --------------------------------------------------------------------- run

struct RunArgs {
    std::string dataset = "ds1";
    std::string data_csv;
    std::size_t n = 20000;
    NetFlags net;
    std::string optimizers = "sgdm,ew-sgdm,adam";
    std::string lrs;  // empty = per-family paper grids
    std::string ew_bases = "8";
    double momentum = 0.9;
    std::size_t epochs = 50;
    std::size_t patience = 20;
    std::size_t batch_size = 64;
    std::string seeds = "0";
    std::size_t stride = 1;
    std::size_t eval_stride = 1;
    bool normalize = false;
    bool timing = false;
    bool save_model = false;
    std::string out_dir = "runs";
    std::size_t jobs = 1;
};

struct RunSpecEntry {
    OptimKind optimizer;
    double lr = 0.0;
    double ew_base = 0.0;  // 0 for non-EW runs
    std::uint64_t seed = 0;
};

struct RunOutcome {
    RunSpecEntry spec;
    std::size_t best_epoch = 0;
    double best_val_mse = std::numeric_limits<double>::quiet_NaN();
    double test_mse = std::numeric_limits<double>::quiet_NaN();
    std::string csv_path;
};

std::vector<double> family_lr_grid(OptimKind kind) {
    if (kind == OptimKind::adam) return {1e-5, 5e-5, 1e-4};  // paper Adam grid
    return {1e-3, 5e-3, 1e-2};                               // paper SGD-family grid
}

std::string run_stem(const RunArgs& args, const RunSpecEntry& spec) {
    std::ostringstream stem;
    stem << "run_" << args.dataset << "_" << args.net.kernel << "_"
         << to_string(spec.optimizer) << "_lr" << format_double(spec.lr);
    if (spec.optimizer == OptimKind::ew_sgdm)
        stem << "_base" << format_double(spec.ew_base);
    stem << "_seed" << spec.seed;
    return stem.str();
}

std::string summary_cell(double v) { return std::isnan(v) ? "" : format_double(v); }

int cmd_run(const RunArgs& args) {
    const KUNetConfig net_cfg = args.net.to_config();

    SeriesDataset ds;
    if (!args.data_csv.empty()) {
        ds = read_series_csv(args.data_csv);
    } else {
        Rng rng(0);
        ds = generate(dataset_kind_from_string(args.dataset), args.n, rng);
    }
    validate_series_length(ds.size(), net_cfg.lookback, net_cfg.horizon);
    ds = split(std::move(ds), kSplitRatios);

    std::vector<RunSpecEntry> specs;
    const std::vector<double> explicit_lrs =
        args.lrs.empty() ? std::vector<double>{} : parse_double_list(args.lrs);
    const std::vector<double> bases = parse_double_list(args.ew_bases);
    const std::vector<std::uint64_t> seeds = parse_seed_list(args.seeds);
    std::size_t n_optimizers = 0;
    std::size_t start = 0;
    const std::string& opt_list = args.optimizers;
    while (start <= opt_list.size() && !opt_list.empty()) {
        std::size_t comma = opt_list.find(',', start);
        std::string name = comma == std::string::npos
                               ? opt_list.substr(start)
                               : opt_list.substr(start, comma - start);
        OptimKind kind = optim_kind_from_string(name);
        ++n_optimizers;
        const std::vector<double>& lrs =
            explicit_lrs.empty() ? family_lr_grid(kind) : explicit_lrs;
        for (double lr : lrs) {
            if (kind == OptimKind::ew_sgdm) {
                for (double base : bases)
                    for (std::uint64_t seed : seeds) specs.push_back({kind, lr, base, seed});
            } else {
                for (std::uint64_t seed : seeds) specs.push_back({kind, lr, 0.0, seed});
            }
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (n_optimizers == 0) throw std::invalid_argument("no optimizers given");

    fs::create_directories(args.out_dir);

    std::vector<RunOutcome> outcomes(specs.size());
    std::vector<std::string> errors(specs.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex io_mutex;

    auto execute = [&](std::size_t i) {
        const RunSpecEntry& spec = specs[i];
        Rng init_rng(spec.seed);
        KUNet net = KUNet::build(net_cfg, init_rng);

        TrainConfig cfg;
        cfg.epochs = args.epochs;
        cfg.patience = args.patience;
        cfg.batch_size = args.batch_size;
        cfg.seed = spec.seed;
        cfg.train_stride = args.stride;
        cfg.eval_stride = args.eval_stride;
        cfg.normalize_last = args.normalize;
        cfg.record_timing = args.timing;
        cfg.optimizer.kind = spec.optimizer;
        cfg.optimizer.lr = spec.lr;
        cfg.optimizer.momentum = args.momentum;
        cfg.optimizer.ew_base = spec.ew_base;

        RunRecord record = train(net, ds, cfg);

        const std::string stem = run_stem(args, spec);
        fs::path csv_path = fs::path(args.out_dir) / (stem + ".csv");
        write_run_record_csv(record, csv_path);
        write_run_record_json(record, fs::path(args.out_dir) / (stem + ".json"));
        if (args.save_model) net.save(fs::path(args.out_dir) / (stem + "_model.json"));

        outcomes[i] = {spec, record.best_epoch, record.best_val_mse, record.test_mse_at_best,
                       csv_path.string()};
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cout << stem << ": best epoch " << record.best_epoch << ", best val "
                  << summary_cell(record.best_val_mse) << ", test "
                  << summary_cell(record.test_mse_at_best) << "\n";
    };

    const std::size_t jobs = std::max<std::size_t>(1, args.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) {
            try {
                execute(i);
            } catch (const std::exception& e) {
                errors[i] = e.what();
            }
        }
    } else {
        std::vector<std::thread> workers;
        for (std::size_t w = 0; w < jobs; ++w) {
            workers.emplace_back([&] {
                for (std::size_t i = cursor.fetch_add(1); i < specs.size();
                     i = cursor.fetch_add(1)) {
                    try {
                        execute(i);
                    } catch (const std::exception& e) {
                        errors[i] = e.what();
                    }
                }
            });
        }
        for (std::thread& w : workers) w.join();
    }

    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (!errors[i].empty()) {
            std::cerr << "error: run " << run_stem(args, specs[i]) << " failed: " << errors[i]
                      << "\n";
            return 3;
        }
    }

    // Summary sorted by test MSE ascending (ties and NaNs ordered
    // deterministically by the run spec).
    std::vector<std::size_t> order(outcomes.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const RunOutcome& x = outcomes[a];
        const RunOutcome& y = outcomes[b];
        const bool xn = std::isnan(x.test_mse), yn = std::isnan(y.test_mse);
        if (xn != yn) return yn;
        if (!xn && x.test_mse != y.test_mse) return x.test_mse < y.test_mse;
        return a < b;
    });

    std::ostringstream table;
    table << "optimizer,lr,ew_base,seed,best_epoch,best_val_mse,test_mse\n";
    for (std::size_t i : order) {
        const RunOutcome& o = outcomes[i];
        table << to_string(o.spec.optimizer) << "," << format_double(o.spec.lr) << ","
              << (o.spec.optimizer == OptimKind::ew_sgdm ? format_double(o.spec.ew_base)
                                                         : std::string())
              << "," << o.spec.seed << "," << o.best_epoch << ","
              << summary_cell(o.best_val_mse) << "," << summary_cell(o.test_mse) << "\n";
    }
    const std::string summary = table.str();
    fs::path summary_path = fs::path(args.out_dir) / "summary.csv";
    std::ofstream out(summary_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + summary_path.string());
    out << summary;
    out.close();
    std::cout << "\nsummary (" << outcomes.size() << " runs, sorted by test MSE):\n"
              << summary;
    return 0;
}

// ----------------------------------------------------------------- analyze

struct AnalyzeArgs {
    NetFlags net;
    double ew_base = 8.0;
    std::uint64_t seed = 0;
    std::size_t batch = 4;
};

int cmd_analyze(const AnalyzeArgs& args) {
    const KUNetConfig net_cfg = args.net.to_config();
    const std::size_t depth = net_cfg.depth();

    std::cout << "redundancy(L=" << net_cfg.lookback << ", S=" << net_cfg.unit_len
              << ") = " << format_double(redundancy(net_cfg.lookback, net_cfg.unit_len))
              << "\n";

    Rng rng(args.seed);
    KUNet net = KUNet::build(net_cfg, rng);

    // Measured per-window application counts from one instrumented forward.
    net.reset_instrumentation();
    Matrix probe(1, net_cfg.lookback, 0.0);
    net.forward(probe);
    auto counts = net.measured_invocation_counts(1);
    std::cout << "encoder invocation counts per window:\n";
    for (const auto& [level, count] : counts)
        std::cout << "  level " << level << ": " << count << "\n";

    WeightSchedule schedule = WeightSchedule::uniform(args.ew_base, depth);
    std::cout << "EW weight schedule (base " << format_double(args.ew_base) << "):\n";
    for (std::size_t l = 1; l <= depth; ++l)
        std::cout << "  level " << l << ": " << format_double(schedule.weight(l)) << "\n";

    // Identity check on a small batch of real windows.
    const std::size_t n = 2 * (net_cfg.lookback + net_cfg.horizon) + args.batch;
    Rng data_rng(args.seed);
    SeriesDataset ds = split(generate(DatasetKind::ds1, n, data_rng), kSplitRatios);
    WindowSet train_ws = windows(ds, Part::train, net_cfg.lookback, net_cfg.horizon, 1);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < std::min<std::size_t>(args.batch, train_ws.size()); ++i)
        idx.push_back(i);
    Matrix inputs, targets;
    train_ws.gather(idx, inputs, targets);

    IdentityReport report = weighted_grad_identity_check(net, inputs, targets, args.ew_base);
    std::cout << "weighted-gradient identity check (scaling tol "
              << format_double(report.scaling_tolerance) << ", collapse tol "
              << format_double(report.collapse_tolerance) << "):\n";
    for (const IdentityRow& row : report.rows) {
        std::cout << "  " << row.kernel_id << ": scaling rel err "
                  << format_double(row.scaling_rel_err) << " ["
                  << (row.scaling_pass ? "PASS" : "FAIL") << "], collapse rel err "
                  << format_double(row.collapse_rel_err) << " over " << row.applications
                  << " applications [" << (row.collapse_pass ? "PASS" : "FAIL") << "]\n";
    }
    std::cout << "identity check: " << (report.all_pass ? "PASS" : "FAIL") << "\n";
    return report.all_pass ? 0 : 3;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Kernel U-Net forecasting engine: EW-SGDM and baseline optimizers on "
                 "synthetic sinusoid benchmarks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI config file");

    GenerateArgs gen;
    CLI::App* generate_cmd =
        app.add_subcommand("generate", "Generate a synthetic dataset CSV");
    generate_cmd->add_option("--dataset", gen.dataset, "Dataset kind: ds1|ds2|ds3")
        ->capture_default_str();
    generate_cmd->add_option("--n", gen.n, "Series length")->capture_default_str();
    generate_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    generate_cmd->add_option("--out", gen.out, "Output CSV path")->required();
    generate_cmd
        ->add_option("--lookback", gen.lookback, "L used for the minimum-length check")
        ->capture_default_str();
    generate_cmd->add_option("--horizon", gen.horizon, "T used for the minimum-length check")
        ->capture_default_str();

    RunArgs run;
    CLI::App* run_cmd = app.add_subcommand("run", "Train and compare optimizers");
    run_cmd->add_option("--dataset", run.dataset, "Dataset kind: ds1|ds2|ds3")
        ->capture_default_str();
    run_cmd->add_option("--data-csv", run.data_csv,
                        "Load the series from a CSV instead of generating it");
    run_cmd->add_option("--n", run.n, "Series length when generating")->capture_default_str();
    add_net_flags(*run_cmd, run.net);
    run_cmd->add_option("--optimizers", run.optimizers,
                        "Comma list of sgd|sgdm|adam|ew-sgdm")
        ->capture_default_str();
    run_cmd->add_option("--lrs", run.lrs,
                        "Comma list of learning rates; default is the paper grid per "
                        "family (SGD: 1e-3,5e-3,1e-2; Adam: 1e-5,5e-5,1e-4)");
    run_cmd->add_option("--ew-bases", run.ew_bases,
                        "Comma list of EW weight bases (paper sweep: 4,6,8)")
        ->capture_default_str();
    run_cmd->add_option("--momentum", run.momentum, "Momentum for SGDM/EW-SGDM (paper: 0.9)")
        ->capture_default_str();
    run_cmd->add_option("--epochs", run.epochs, "Training epochs (paper: 50)")
        ->capture_default_str();
    run_cmd->add_option("--patience", run.patience, "Early-stopping patience (paper: 20)")
        ->capture_default_str();
    run_cmd->add_option("--batch-size", run.batch_size, "Windows per batch")
        ->capture_default_str();
    run_cmd->add_option("--seeds", run.seeds, "Comma list of seeds, one run each")
        ->capture_default_str();
    run_cmd->add_option("--stride", run.stride, "Training window stride")
        ->capture_default_str();
    run_cmd->add_option("--eval-stride", run.eval_stride, "Val/test window stride")
        ->capture_default_str();
    run_cmd->add_flag("--normalize", run.normalize,
                      "Subtract each window's last input value, add back on output");
    run_cmd->add_flag("--timing", run.timing,
                      "Record wall-clock seconds per epoch (makes output files "
                      "non-reproducible)");
    run_cmd->add_flag("--save-model", run.save_model, "Save a model checkpoint per run");
    run_cmd->add_option("--out-dir", run.out_dir, "Output directory")->capture_default_str();
    run_cmd->add_option("--jobs", run.jobs, "Parallel runs")->capture_default_str();

    AnalyzeArgs analyze;
    CLI::App* analyze_cmd = app.add_subcommand(
        "analyze", "Redundancy, invocation counts, weight schedule, gradient identities");
    add_net_flags(*analyze_cmd, analyze.net);
    analyze_cmd->add_option("--ew-base", analyze.ew_base, "EW weight base (paper: 8)")
        ->capture_default_str();
    analyze_cmd->add_option("--seed", analyze.seed, "Net init seed")->capture_default_str();
    analyze_cmd->add_option("--batch", analyze.batch, "Windows in the identity-check batch")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (generate_cmd->parsed()) return cmd_generate(gen);
        if (run_cmd->parsed()) return cmd_run(run);
        return cmd_analyze(analyze);
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace kunet
