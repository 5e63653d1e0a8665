#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int code = -1;
    std::string output;
};

const char* cli_path() {
    const char* p = std::getenv("KUNET_CLI");
    return p ? p : "./tools/kunet";
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path log = fs::temp_directory_path() /
                   ("kunet_cli_out_" + std::to_string(::getpid()) + "_" +
                    std::to_string(counter++) + ".log");
    std::string cmd = std::string("\"") + cli_path() + "\" " + args + " > " +
                      log.string() + " 2>&1";
    int raw = std::system(cmd.c_str());
    CmdResult result;
    result.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.output = slurp(log);
    fs::remove(log);
    return result;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("kunet_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// tiny but real run configuration shared by the file-output tests
std::string tiny_run_flags(const fs::path& out_dir) {
    return "run --dataset ds1 --n 120 --lookback 16 --horizon 16 --unit-len 4 "
           "--multiples 4 --hidden 4 --kernel linear --optimizers sgdm,ew-sgdm "
           "--lrs 0.001 --ew-bases 4 --epochs 2 --patience 2 --batch-size 8 --seeds 0 "
           "--out-dir " +
           out_dir.string();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("generate writes the dataset CSV deterministically") {
    fs::path dir = fresh_dir("generate");
    fs::path csv = dir / "ds1.csv";
    CmdResult r = run_cli("generate --dataset ds1 --n 2048 --seed 7 --out " + csv.string());
    CHECK(r.code == 0);
    std::string first = slurp(csv);
    std::size_t lines = 0;
    for (char ch : first)
        if (ch == '\n') ++lines;
    CHECK(lines == 2049);  // header + one row per point
    CHECK(first.rfind("t,value\n", 0) == 0);

    CmdResult again =
        run_cli("generate --dataset ds1 --n 2048 --seed 7 --out " + csv.string());
    CHECK(again.code == 0);
    CHECK(slurp(csv) == first);
    fs::remove_all(dir);
}

TEST_CASE("generate rejects series below the minimum length") {
    fs::path dir = fresh_dir("generate_short");
    CmdResult r =
        run_cli("generate --dataset ds1 --n 100 --out " + (dir / "x.csv").string());
    CHECK(r.code == 2);
    CHECK(r.output.find("minimum") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("unknown optimizer is a usage error") {
    fs::path dir = fresh_dir("badopt");
    CmdResult r = run_cli("run --optimizers frobnicate --out-dir " + dir.string());
    CHECK(r.code == 2);
    fs::remove_all(dir);
}

TEST_CASE("unknown flag is a usage error, --help succeeds") {
    CHECK(run_cli("run --no-such-flag").code == 2);
    CmdResult help = run_cli("--help");
    CHECK(help.code == 0);
    CHECK(help.output.find("generate") != std::string::npos);
    CmdResult run_help = run_cli("run --help");
    CHECK(run_help.code == 0);
    CHECK(run_help.output.find("--lookback") != std::string::npos);
    CHECK(run_help.output.find("--ew-bases") != std::string::npos);
}

TEST_CASE("run emits per-run CSV/JSON plus a summary, byte-identical on rerun") {
    fs::path dir = fresh_dir("run_tiny");
    CmdResult r = run_cli(tiny_run_flags(dir));
    REQUIRE(r.code == 0);

    fs::path sgdm_csv = dir / "run_ds1_linear_sgdm_lr0.001_seed0.csv";
    fs::path ew_csv = dir / "run_ds1_linear_ew-sgdm_lr0.001_base4_seed0.csv";
    fs::path ew_json = dir / "run_ds1_linear_ew-sgdm_lr0.001_base4_seed0.json";
    fs::path summary = dir / "summary.csv";
    REQUIRE(fs::exists(sgdm_csv));
    REQUIRE(fs::exists(ew_csv));
    REQUIRE(fs::exists(ew_json));
    REQUIRE(fs::exists(summary));

    const std::string csv = slurp(ew_csv);
    CHECK(csv.rfind("epoch,train_mse,val_mse,test_mse,grad_enc_l1,grad_enc_l2,"
                    "grad_dec_l1,grad_dec_l2,seconds\n", 0) == 0);
    const std::string summary_text = slurp(summary);
    CHECK(summary_text.rfind("optimizer,lr,ew_base,seed,best_epoch,best_val_mse,test_mse\n",
                             0) == 0);

    // determinism: run again with identical flags, compare all bytes
    std::string before_sgdm = slurp(sgdm_csv), before_ew = slurp(ew_csv),
                before_json = slurp(ew_json), before_summary = summary_text;
    CmdResult r2 = run_cli(tiny_run_flags(dir));
    REQUIRE(r2.code == 0);
    CHECK(slurp(sgdm_csv) == before_sgdm);
    CHECK(slurp(ew_csv) == before_ew);
    CHECK(slurp(ew_json) == before_json);
    CHECK(slurp(summary) == before_summary);
    fs::remove_all(dir);
}

TEST_CASE("run with --jobs 2 produces the same files as serial") {
    fs::path serial = fresh_dir("run_serial");
    fs::path parallel = fresh_dir("run_parallel");
    REQUIRE(run_cli(tiny_run_flags(serial)).code == 0);
    REQUIRE(run_cli(tiny_run_flags(parallel) + " --jobs 2").code == 0);
    for (const auto& entry : fs::directory_iterator(serial)) {
        fs::path other = parallel / entry.path().filename();
        REQUIRE(fs::exists(other));
        CHECK(slurp(entry.path()) == slurp(other));
    }
    fs::remove_all(serial);
    fs::remove_all(parallel);
}

TEST_CASE("run with zero epochs exits cleanly with an empty-run summary") {
    fs::path dir = fresh_dir("run_zero");
    CmdResult r = run_cli(
        "run --dataset ds1 --n 120 --lookback 16 --horizon 16 --unit-len 4 --multiples 4 "
        "--hidden 4 --kernel linear --optimizers sgdm --lrs 0.001 --epochs 0 --patience 0 "
        "--seeds 0 --out-dir " +
        dir.string());
    CHECK(r.code == 0);
    const std::string summary = slurp(dir / "summary.csv");
    CHECK(summary.find("sgdm,0.001,,0,0,,") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("run can load a cached dataset CSV") {
    fs::path dir = fresh_dir("run_cached");
    fs::path csv = dir / "cache.csv";
    REQUIRE(run_cli("generate --dataset ds2 --n 2048 --out " + csv.string()).code == 0);
    CmdResult r = run_cli(
        "run --data-csv " + csv.string() +
        " --lookback 16 --horizon 16 --unit-len 4 --multiples 4 --hidden 4 "
        "--kernel linear --optimizers sgd --lrs 0.001 --epochs 1 --patience 1 --seeds 0 "
        "--out-dir " +
        dir.string());
    CHECK(r.code == 0);
    fs::remove_all(dir);
}

TEST_CASE("numerical blow-up exits with code 3") {
    fs::path dir = fresh_dir("run_blowup");
    CmdResult r = run_cli(
        "run --dataset ds1 --n 120 --lookback 16 --horizon 16 --unit-len 4 --multiples 4 "
        "--hidden 4 --kernel linear --optimizers sgd --lrs 1e14 --epochs 20 --patience 20 "
        "--seeds 0 --out-dir " +
        dir.string());
    CHECK(r.code == 3);
    CHECK(r.output.find("non-finite") != std::string::npos);
    fs::remove_all(dir);
}

TEST_CASE("analyze prints the redundancy constant, counts, weights, and identity PASS") {
    CmdResult r = run_cli("analyze");
    CHECK(r.code == 0);
    CHECK(r.output.find("= 0.984375") != std::string::npos);
    CHECK(r.output.find("level 1: 64") != std::string::npos);  // invocation counts
    CHECK(r.output.find("level 2: 8") != std::string::npos);
    CHECK(r.output.find("level 3: 1") != std::string::npos);
    CHECK(r.output.find("level 3: 64") != std::string::npos);  // weight schedule
    CHECK(r.output.find("identity check: PASS") != std::string::npos);
}

TEST_CASE("analyze on a depth-1 toy") {
    CmdResult r = run_cli("analyze --lookback 8 --horizon 8 --unit-len 8 --multiples= "
                          "--hidden 8 --kernel linear");
    CHECK(r.code == 0);
    CHECK(r.output.find("= 0\n") != std::string::npos);  // redundancy(8, 8)
    CHECK(r.output.find("level 1: 1") != std::string::npos);
    CHECK(r.output.find("identity check: PASS") != std::string::npos);
}

TEST_CASE("config file supplies defaults, flags override") {
    fs::path dir = fresh_dir("config_file");
    fs::path cfg = dir / "exp.ini";
    {
        std::ofstream out(cfg);
        out << "[run]\n"
            << "dataset=ds1\n"
            << "n=120\n"
            << "lookback=16\nhorizon=16\nunit-len=4\nmultiples=4\nhidden=4\n"
            << "kernel=linear\noptimizers=sgd\nlrs=0.001\nepochs=1\npatience=1\n"
            << "seeds=0\nout-dir=" << (dir / "out").string() << "\n";
    }
    CmdResult r = run_cli("run --config " + cfg.string() + " --epochs 2 --patience 2");
    CHECK(r.code == 0);
    const std::string csv = slurp(dir / "out" / "run_ds1_linear_sgd_lr0.001_seed0.csv");
    std::size_t lines = 0;
    for (char ch : csv)
        if (ch == '\n') ++lines;
    CHECK(lines == 3);  // header + 2 epochs: the flag overrode the file
    fs::remove_all(dir);
}

}  // TEST_SUITE
