#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "panm/config.hpp"
#include "panm/engine.hpp"
#include "panm/errors.hpp"
#include "panm/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

const char* const kOutDirEnvVar = "PANM_OUT_DIR";

// All RunConfig keys, in serialization order, each exposed as a CLI flag.
const std::vector<std::string> kConfigKeys = {
    "n", "r", "l", "k", "T1", "T2", "tau", "alpha", "method", "nu",
    "task_source", "heterogeneity", "d", "test_size", "num_classes",
    "feature_dim", "blob_sigma", "images_path", "labels_path", "model",
    "hidden_dims", "epochs", "batch_size", "lr", "momentum", "lr_decay",
    "seed", "loss_eval_subsample", "threads"};

std::string resolve_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(kOutDirEnvVar); env && *env) return env;
    return ".";
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw panm::ConfigError("output: cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw panm::Error("output: write failed for '" + path + "'");
}

// Round-half-even percent formatting at 2 decimals.
std::string format_percent(double probability) {
    const double scaled = probability * 10000.0;
    const double lower = std::floor(scaled);
    const double frac = scaled - lower;
    double units;
    if (std::fabs(frac - 0.5) < 1e-9)
        units = std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
    else
        units = frac < 0.5 ? lower : lower + 1.0;
    const long long cents = static_cast<long long>(units);
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%lld.%02lld", cents / 100, cents % 100);
    return buf;
}

struct TheoryRow {
    panm::theory::BallSelectionSetting setting;
    int t = 0;
    double pens = 0.0;
    double nsmc = 0.0;
    double mc_pens = -1.0;  // negative = not run
    double mc_nsmc = -1.0;
};

std::string theory_rows_to_csv(const std::vector<TheoryRow>& rows) {
    std::string out = "n,a,l,k,t,pens_prob,nsmc_prob,mc_pens,mc_nsmc\n";
    for (const auto& row : rows) {
        out += std::to_string(row.setting.n) + "," + std::to_string(row.setting.a) +
               "," + std::to_string(row.setting.l) + "," +
               std::to_string(row.setting.k) + "," + std::to_string(row.t) + "," +
               format_percent(row.pens) + "," + format_percent(row.nsmc) + ",";
        out += row.mc_pens < 0.0 ? "" : format_percent(row.mc_pens);
        out += ",";
        out += row.mc_nsmc < 0.0 ? "" : format_percent(row.mc_nsmc);
        out += "\n";
    }
    return out;
}

std::vector<TheoryRow> theory_rows(const panm::theory::BallSelectionSetting& s,
                                   const std::vector<int>& t_values,
                                   std::int64_t trials, std::uint64_t seed) {
    int t_max = 0;
    for (int t : t_values) t_max = std::max(t_max, t);
    const auto pens = panm::theory::pens_prob_series(t_max, s);
    const auto nsmc = panm::theory::nsmc_prob_series(t_max, s);
    std::vector<double> mc_pens, mc_nsmc;
    if (trials > 0) {
        mc_pens = panm::theory::monte_carlo_selection_oracle(
            s, t_max, trials, seed, panm::theory::SelectionStrategy::pens);
        mc_nsmc = panm::theory::monte_carlo_selection_oracle(
            s, t_max, trials, seed, panm::theory::SelectionStrategy::nsmc);
    }
    std::vector<TheoryRow> rows;
    for (int t : t_values) {
        TheoryRow row;
        row.setting = s;
        row.t = t;
        row.pens = pens[t - 1];
        row.nsmc = nsmc[t - 1];
        if (trials > 0) {
            row.mc_pens = mc_pens[t - 1];
            row.mc_nsmc = mc_nsmc[t - 1];
        }
        rows.push_back(row);
    }
    return rows;
}

struct RunPaths {
    std::string csv;
    std::string json;
};

RunPaths run_one(const panm::engine::RunConfig& cfg, const std::string& out_dir) {
    const auto result = panm::engine::run_simulation(cfg);
    std::filesystem::create_directories(out_dir);
    const std::string stem = std::string(panm::engine::method_name(cfg.method)) +
                             "_seed" + std::to_string(cfg.seed);
    RunPaths paths;
    paths.csv = out_dir + "/metrics_" + stem + ".csv";
    paths.json = out_dir + "/summary_" + stem + ".json";
    write_file(paths.csv, panm::engine::metrics_to_csv(result.metrics));
    write_file(paths.json, panm::engine::summary_to_json(cfg, result));

    const auto& last = result.metrics.back();
    std::printf("%s seed=%llu rounds=%d acc=%.4f loss=%.4f transfers=%lld\n",
                panm::engine::method_name(cfg.method),
                static_cast<unsigned long long>(cfg.seed), last.round,
                last.mean_test_accuracy, last.mean_test_loss,
                last.cumulative_model_transfers);
    return paths;
}

std::vector<std::string> split_csv_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct ConfigFlagSet {
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;

    void attach(CLI::App* app) {
        for (const auto& key : kConfigKeys)
            options[key] = app->add_option("--" + key, values[key]);
    }

    panm::engine::RunConfig build(const std::string& config_path) const {
        panm::engine::RunConfig cfg;
        if (!config_path.empty()) cfg = panm::engine::load_config_file(config_path);
        for (const auto& key : kConfigKeys)
            if (options.at(key)->count() > 0)
                panm::engine::apply_config_entry(cfg, key, values.at(key));
        return cfg;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Clustered peer-to-peer federated learning simulator"};
    app.require_subcommand(1);

    // run ------------------------------------------------------------------
    auto* run_cmd = app.add_subcommand(
        "run", "Run one simulation; writes a metrics CSV and a summary JSON");
    std::string run_config_path, run_out;
    run_cmd->add_option("--config", run_config_path, "Config file (key=value lines)");
    run_cmd->add_option("--out", run_out,
                        "Output directory (default: $" + std::string(kOutDirEnvVar) +
                            " or '.')");
    ConfigFlagSet run_flags;
    run_flags.attach(run_cmd);

    // theory ---------------------------------------------------------------
    auto* theory_cmd =
        app.add_subcommand("theory", "Analytic neighbor-selection probabilities");
    theory_cmd->require_subcommand(1);

    auto* table_cmd = theory_cmd->add_subcommand(
        "table", "Reference settings grid at t = 3, 5, 7");
    std::int64_t table_trials = 0;
    std::uint64_t table_seed = 1;
    std::string table_out;
    table_cmd->add_option("--trials", table_trials,
                          "Monte-Carlo trials per setting (0 = analytic only)");
    table_cmd->add_option("--seed", table_seed, "Monte-Carlo seed");
    table_cmd->add_option("--out", table_out, "Also write theory_table.csv here");

    auto* series_cmd = theory_cmd->add_subcommand(
        "series", "Per-round series for one setting, t = 1..t_max");
    panm::theory::BallSelectionSetting series_setting{200, 50, 10, 5};
    int series_t_max = 10;
    std::int64_t series_trials = 0;
    std::uint64_t series_seed = 1;
    std::string series_out;
    series_cmd->add_option("--n", series_setting.n, "Total clients");
    series_cmd->add_option("--a", series_setting.a, "Same-cluster clients (incl. self)");
    series_cmd->add_option("--l", series_setting.l, "Candidates per round");
    series_cmd->add_option("--k", series_setting.k, "Neighbors kept");
    series_cmd->add_option("--t-max", series_t_max, "Rounds");
    series_cmd->add_option("--trials", series_trials,
                           "Monte-Carlo trials (0 = analytic only)");
    series_cmd->add_option("--seed", series_seed, "Monte-Carlo seed");
    series_cmd->add_option("--out", series_out, "Also write theory_series.csv here");

    // sweep ------------------------------------------------------------------
    auto* sweep_cmd = app.add_subcommand(
        "sweep", "Run a methods x seeds grid over one base config");
    std::string sweep_config_path, sweep_out;
    std::string sweep_methods = "panm_loss,panm_grad,pens,random,fix_topology,oracle,local";
    std::string sweep_seeds = "1,2,3";
    sweep_cmd->add_option("--config", sweep_config_path, "Base config file");
    sweep_cmd->add_option("--methods", sweep_methods, "Comma-separated method list");
    sweep_cmd->add_option("--seeds", sweep_seeds, "Comma-separated seed list");
    sweep_cmd->add_option("--out", sweep_out, "Output directory");
    ConfigFlagSet sweep_flags;
    sweep_flags.attach(sweep_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run_cmd->parsed()) {
            auto cfg = run_flags.build(run_config_path);
            cfg.validate();
            run_one(cfg, resolve_out_dir(run_out));
            return kExitOk;
        }

        if (table_cmd->parsed()) {
            const std::vector<panm::theory::BallSelectionSetting> settings = {
                {200, 50, 10, 5}, {200, 50, 20, 10}, {200, 50, 20, 6}, {100, 50, 10, 5}};
            std::vector<TheoryRow> rows;
            for (const auto& s : settings) {
                s.validate();
                for (const auto& row : theory_rows(s, {3, 5, 7}, table_trials, table_seed))
                    rows.push_back(row);
            }
            const auto csv = theory_rows_to_csv(rows);
            std::fputs(csv.c_str(), stdout);
            if (!table_out.empty() || std::getenv(kOutDirEnvVar)) {
                const auto dir = resolve_out_dir(table_out);
                std::filesystem::create_directories(dir);
                write_file(dir + "/theory_table.csv", csv);
            }
            return kExitOk;
        }

        if (series_cmd->parsed()) {
            series_setting.validate();
            if (series_t_max < 1)
                throw panm::ConfigError("t-max: must be >= 1, got " +
                                        std::to_string(series_t_max));
            std::vector<int> ts(series_t_max);
            for (int t = 1; t <= series_t_max; ++t) ts[t - 1] = t;
            const auto csv = theory_rows_to_csv(
                theory_rows(series_setting, ts, series_trials, series_seed));
            std::fputs(csv.c_str(), stdout);
            if (!series_out.empty() || std::getenv(kOutDirEnvVar)) {
                const auto dir = resolve_out_dir(series_out);
                std::filesystem::create_directories(dir);
                write_file(dir + "/theory_series.csv", csv);
            }
            return kExitOk;
        }

        if (sweep_cmd->parsed()) {
            const auto base = sweep_flags.build(sweep_config_path);
            const auto methods = split_csv_list(sweep_methods);
            const auto seeds = split_csv_list(sweep_seeds);
            if (methods.empty()) throw panm::ConfigError("methods: list is empty");
            if (seeds.empty()) throw panm::ConfigError("seeds: list is empty");

            std::vector<panm::engine::RunConfig> grid;
            for (const auto& m : methods)
                for (const auto& s : seeds) {
                    auto cfg = base;
                    cfg.method = panm::engine::method_from_name(m);
                    panm::engine::apply_config_entry(cfg, "seed", s);
                    cfg.validate();
                    grid.push_back(cfg);
                }

            const auto dir = resolve_out_dir(sweep_out);
            std::filesystem::create_directories(dir);
            std::string manifest = "method,seed,metrics_csv,summary_json\n";
            for (const auto& cfg : grid) {
                const auto paths = run_one(cfg, dir);
                manifest += std::string(panm::engine::method_name(cfg.method)) + "," +
                            std::to_string(cfg.seed) + "," + paths.csv + "," +
                            paths.json + "\n";
            }
            write_file(dir + "/sweep_manifest.csv", manifest);
            return kExitOk;
        }
    } catch (const panm::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitOk;
}
