#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "panm/config.hpp"
#include "panm/errors.hpp"

namespace fs = std::filesystem;
using namespace panm::engine;

namespace {

bool same_config(const RunConfig& a, const RunConfig& b) {
    return serialize_config(a) == serialize_config(b);
}

}  // namespace

TEST_CASE("serialization round-trips a heavily customized config") {
    RunConfig c;
    c.n = 12;
    c.r = 3;
    c.l = 4;
    c.k = 2;
    c.T1 = 7;
    c.T2 = 9;
    c.tau = 3;
    c.alpha = 0.125;
    c.method = Method::panm_grad;
    c.nu = 0.0625;
    c.task_source = TaskSource::csv;
    c.heterogeneity = panm::learner::Heterogeneity::label_swap;
    c.d = 31;
    c.test_size = 13;
    c.num_classes = 6;
    c.feature_dim = 10;
    c.blob_sigma = 1.75;
    c.images_path = "data/things.csv";
    c.model = panm::learner::ModelKind::mlp;
    c.hidden_dims = {32, 16};
    c.epochs = 2;
    c.batch_size = 33;
    c.lr = 0.03;
    c.momentum = 0.85;
    c.lr_decay = 0.995;
    c.seed = 987654321;
    c.loss_eval_subsample = 17;
    c.threads = 2;

    const RunConfig back = parse_config_text(serialize_config(c));
    CHECK(same_config(back, c));
    CHECK(back.hidden_dims == c.hidden_dims);
    CHECK(back.method == c.method);
    CHECK(back.alpha == c.alpha);
    CHECK(back.seed == c.seed);
}

TEST_CASE("defaults survive an empty config") {
    const RunConfig parsed = parse_config_text("");
    CHECK(same_config(parsed, RunConfig{}));
}

TEST_CASE("parsing tolerates comments and whitespace") {
    const RunConfig c = parse_config_text(
        "# leading comment\n"
        "\n"
        "  n = 8   # trailing comment\n"
        "\tk\t=\t3\n"
        "hidden_dims =\n"
        "method=oracle\n");
    CHECK(c.n == 8);
    CHECK(c.k == 3);
    CHECK(c.hidden_dims.empty());
    CHECK(c.method == Method::oracle);
    CHECK(c.l == RunConfig{}.l);
}

TEST_CASE("hidden dimension lists") {
    RunConfig c;
    apply_config_entry(c, "hidden_dims", "64, 32 ,16");
    CHECK(c.hidden_dims == std::vector<int>{64, 32, 16});
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "hidden_dims", "64,x"),
                         doctest::Contains("hidden_dims"), panm::ConfigError);
}

TEST_CASE("errors name the key or line") {
    RunConfig c;
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "bogus", "1"),
                         doctest::Contains("bogus"), panm::ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "n", "five"),
                         doctest::Contains("n:"), panm::ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "n", "5.5"),
                         doctest::Contains("n:"), panm::ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "lr", "fast"),
                         doctest::Contains("lr"), panm::ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "method", "gossip"),
                         doctest::Contains("method"), panm::ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "task_source", "parquet"),
                         doctest::Contains("task_source"), panm::ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "heterogeneity", "shift"),
                         doctest::Contains("heterogeneity"), panm::ConfigError);
    CHECK_THROWS_WITH_AS(apply_config_entry(c, "model", "cnn"),
                         doctest::Contains("model"), panm::ConfigError);

    CHECK_THROWS_WITH_AS(parse_config_text("n=4\nnonsense line\n"),
                         doctest::Contains("line 2"), panm::ConfigError);
}

TEST_CASE("config files load and reject missing paths") {
    const fs::path dir = fs::temp_directory_path() / "panm_unit_config";
    fs::create_directories(dir);
    const fs::path path = dir / "run.cfg";
    {
        std::ofstream out(path);
        out << "n=10\nr=5\nmethod=pens\n";
    }
    const RunConfig c = load_config_file(path.string());
    CHECK(c.n == 10);
    CHECK(c.r == 5);
    CHECK(c.method == Method::pens);

    CHECK_THROWS_WITH_AS(load_config_file((dir / "absent.cfg").string()),
                         doctest::Contains("cannot open"), panm::ConfigError);
}
