#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#ifndef PANM_CLI_PATH
#error "PANM_CLI_PATH must point at the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "panm_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    static int counter = 0;
    const fs::path dir = fs::temp_directory_path() / "panm_cli_tests";
    fs::create_directories(dir);
    const fs::path out_path = dir / ("stdout_" + std::to_string(counter) + ".txt");
    const fs::path err_path = dir / ("stderr_" + std::to_string(counter) + ".txt");
    ++counter;

    const std::string cmd = env_prefix + " '" + PANM_CLI_PATH + "' " + args + " > '" +
                            out_path.string() + "' 2> '" + err_path.string() + "'";
    const int status = std::system(cmd.c_str());
    CliResult res;
    if (status != -1 && WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
    res.out = slurp(out_path);
    res.err = slurp(err_path);
    return res;
}

std::vector<std::string> lines_of(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) out.push_back(line);
    return out;
}

const std::string kTinyRun =
    "--n 8 --r 2 --l 3 --k 2 --T1 2 --T2 2 --d 12 --test_size 6 "
    "--feature_dim 4 --num_classes 2 --epochs 1";

}  // namespace

TEST_CASE("run writes metrics and summary files and reports one line") {
    const fs::path dir = fresh_dir("smoke");
    const auto res =
        run_cli("run --method local " + kTinyRun + " --out '" + dir.string() + "'");
    CHECK(res.exit_code == 0);
    CHECK(res.err.empty());
    CHECK(res.out.find("local seed=1") != std::string::npos);
    CHECK(fs::exists(dir / "metrics_local_seed1.csv"));
    CHECK(fs::exists(dir / "summary_local_seed1.json"));

    const auto metrics = lines_of(slurp(dir / "metrics_local_seed1.csv"));
    REQUIRE(metrics.size() == 5);  // header + 4 rounds
    CHECK(metrics[0].rfind("round,", 0) == 0);
}

TEST_CASE("identical invocations produce byte-identical outputs") {
    const fs::path a = fresh_dir("det_a");
    const fs::path b = fresh_dir("det_b");
    const std::string args = "run --method panm_loss --tau 2 " + kTinyRun;
    CHECK(run_cli(args + " --out '" + a.string() + "'").exit_code == 0);
    CHECK(run_cli(args + " --out '" + b.string() + "'").exit_code == 0);
    const std::string csv_a = slurp(a / "metrics_panm_loss_seed1.csv");
    CHECK(!csv_a.empty());
    CHECK(csv_a == slurp(b / "metrics_panm_loss_seed1.csv"));
    CHECK(slurp(a / "summary_panm_loss_seed1.json") ==
          slurp(b / "summary_panm_loss_seed1.json"));
}

TEST_CASE("invalid topology exits with the config code and names the field") {
    const auto res = run_cli("run --n 40 --k 12 --l 10");
    CHECK(res.exit_code == 2);
    CHECK(res.err.find("config error") != std::string::npos);
    CHECK(res.err.find("k") != std::string::npos);
}

TEST_CASE("unknown flags and missing subcommands are config errors") {
    CHECK(run_cli("run --bogus 3").exit_code == 2);
    CHECK(run_cli("").exit_code == 2);
    CHECK(run_cli("theory").exit_code == 2);
}

TEST_CASE("config files load, with flags taking precedence") {
    const fs::path dir = fresh_dir("cfgfile");
    const fs::path cfg = dir / "base.cfg";
    {
        std::ofstream out(cfg);
        out << "# base configuration\n"
               "n=8\nr=2\nl=3\nk=2\nT1=2\nT2=2\nd=12\ntest_size=6\n"
               "feature_dim=4\nnum_classes=2\nepochs=1\nmethod=local\n";
    }
    const auto res = run_cli("run --config '" + cfg.string() + "' --seed 5 --out '" +
                             dir.string() + "'");
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(dir / "metrics_local_seed5.json") == false);
    CHECK(fs::exists(dir / "metrics_local_seed5.csv"));
    CHECK(fs::exists(dir / "summary_local_seed5.json"));
}

TEST_CASE("unknown config-file keys are rejected with the key named") {
    const fs::path dir = fresh_dir("badcfg");
    const fs::path cfg = dir / "bad.cfg";
    {
        std::ofstream out(cfg);
        out << "n=8\nwidgets=3\n";
    }
    const auto res = run_cli("run --config '" + cfg.string() + "'");
    CHECK(res.exit_code == 2);
    CHECK(res.err.find("widgets") != std::string::npos);
}

TEST_CASE("theory table prints the reference grid") {
    const auto res = run_cli("theory table");
    CHECK(res.exit_code == 0);
    const auto rows = lines_of(res.out);
    REQUIRE(rows.size() == 13);  // header + 4 settings x 3 rounds
    CHECK(rows[0] == "n,a,l,k,t,pens_prob,nsmc_prob,mc_pens,mc_nsmc");
    CHECK(rows[1] == "200,50,10,5,3,7.29,90.75,,");
    CHECK(rows[2] == "200,50,10,5,5,7.29,99.82,,");
    CHECK(rows[10].rfind("100,50,10,5,3,62.97,", 0) == 0);
}

TEST_CASE("theory series covers t = 1..t_max and rejects bad settings") {
    const auto res = run_cli("theory series --n 200 --a 50 --l 10 --k 5 --t-max 5");
    CHECK(res.exit_code == 0);
    const auto rows = lines_of(res.out);
    REQUIRE(rows.size() == 6);
    CHECK(rows[5] == "200,50,10,5,5,7.29,99.82,,");

    CHECK(run_cli("theory series --a 0").exit_code == 2);
    CHECK(run_cli("theory series --t-max 0").exit_code == 2);
}

TEST_CASE("theory monte-carlo columns fill in and stay reproducible") {
    const std::string args =
        "theory series --n 40 --a 20 --l 5 --k 2 --t-max 3 --trials 400 --seed 9";
    const auto first = run_cli(args);
    CHECK(first.exit_code == 0);
    const auto rows = lines_of(first.out);
    REQUIRE(rows.size() == 4);
    // Both sampled columns must be present (no trailing empty fields).
    CHECK(rows[1].find(",,") == std::string::npos);
    CHECK(run_cli(args).out == first.out);
}

TEST_CASE("sweep writes per-run files plus a manifest") {
    const fs::path dir = fresh_dir("sweep");
    const auto res = run_cli("sweep --methods local,random --seeds 1,2 " + kTinyRun +
                             " --out '" + dir.string() + "'");
    CHECK(res.exit_code == 0);
    const auto manifest = lines_of(slurp(dir / "sweep_manifest.csv"));
    REQUIRE(manifest.size() == 5);
    CHECK(manifest[0] == "method,seed,metrics_csv,summary_json");
    for (const char* name :
         {"metrics_local_seed1.csv", "metrics_local_seed2.csv",
          "metrics_random_seed1.csv", "metrics_random_seed2.csv",
          "summary_local_seed1.json", "summary_random_seed2.json"})
        CHECK(fs::exists(dir / name));
}

TEST_CASE("the output directory environment variable is honored") {
    const fs::path dir = fresh_dir("envdir");
    const auto res = run_cli("run --method local " + kTinyRun,
                             "PANM_OUT_DIR='" + dir.string() + "'");
    CHECK(res.exit_code == 0);
    CHECK(fs::exists(dir / "metrics_local_seed1.csv"));
}
