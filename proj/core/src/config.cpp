#include "panm/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "panm/errors.hpp"

namespace panm::engine {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long out = 0;
    try {
        out = std::stoll(value, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double out = 0.0;
    try {
        out = std::stod(value, &used);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
    if (used != value.size())
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (trim(value).empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ','))
        out.push_back(static_cast<int>(parse_int(key, trim(item))));
    return out;
}

TaskSource task_source_from(const std::string& value) {
    if (value == "synthetic") return TaskSource::synthetic;
    if (value == "idx") return TaskSource::idx;
    if (value == "csv") return TaskSource::csv;
    throw ConfigError("task_source: unknown value '" + value + "'");
}

const char* task_source_name(TaskSource s) {
    switch (s) {
        case TaskSource::synthetic: return "synthetic";
        case TaskSource::idx: return "idx";
        case TaskSource::csv: return "csv";
    }
    return "unknown";
}

learner::Heterogeneity heterogeneity_from(const std::string& value) {
    if (value == "rotation") return learner::Heterogeneity::rotation;
    if (value == "label_swap") return learner::Heterogeneity::label_swap;
    throw ConfigError("heterogeneity: unknown value '" + value + "'");
}

const char* heterogeneity_name(learner::Heterogeneity h) {
    return h == learner::Heterogeneity::rotation ? "rotation" : "label_swap";
}

learner::ModelKind model_from(const std::string& value) {
    if (value == "linear") return learner::ModelKind::linear;
    if (value == "mlp") return learner::ModelKind::mlp;
    throw ConfigError("model: unknown value '" + value + "'");
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i > 0) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

}  // namespace

void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
    if (key == "n") c.n = static_cast<int>(parse_int(key, value));
    else if (key == "r") c.r = static_cast<int>(parse_int(key, value));
    else if (key == "l") c.l = static_cast<int>(parse_int(key, value));
    else if (key == "k") c.k = static_cast<int>(parse_int(key, value));
    else if (key == "T1") c.T1 = static_cast<int>(parse_int(key, value));
    else if (key == "T2") c.T2 = static_cast<int>(parse_int(key, value));
    else if (key == "tau") c.tau = static_cast<int>(parse_int(key, value));
    else if (key == "alpha") c.alpha = parse_double(key, value);
    else if (key == "method") c.method = method_from_name(value);
    else if (key == "nu") c.nu = parse_double(key, value);
    else if (key == "task_source") c.task_source = task_source_from(value);
    else if (key == "heterogeneity") c.heterogeneity = heterogeneity_from(value);
    else if (key == "d") c.d = static_cast<int>(parse_int(key, value));
    else if (key == "test_size") c.test_size = static_cast<int>(parse_int(key, value));
    else if (key == "num_classes") c.num_classes = static_cast<int>(parse_int(key, value));
    else if (key == "feature_dim") c.feature_dim = static_cast<int>(parse_int(key, value));
    else if (key == "blob_sigma") c.blob_sigma = parse_double(key, value);
    else if (key == "images_path") c.images_path = value;
    else if (key == "labels_path") c.labels_path = value;
    else if (key == "model") c.model = model_from(value);
    else if (key == "hidden_dims") c.hidden_dims = parse_int_list(key, value);
    else if (key == "epochs") c.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "batch_size") c.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "lr") c.lr = parse_double(key, value);
    else if (key == "momentum") c.momentum = parse_double(key, value);
    else if (key == "lr_decay") c.lr_decay = parse_double(key, value);
    else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "loss_eval_subsample")
        c.loss_eval_subsample = static_cast<int>(parse_int(key, value));
    else if (key == "threads") c.threads = static_cast<int>(parse_int(key, value));
    else throw ConfigError(key + ": unknown config key");
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig c;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              ": expected key=value, got '" + line + "'");
        apply_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config file: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

std::string serialize_config(const RunConfig& c) {
    std::string out;
    auto put = [&](const std::string& key, const std::string& value) {
        out += key + "=" + value + "\n";
    };
    put("n", std::to_string(c.n));
    put("r", std::to_string(c.r));
    put("l", std::to_string(c.l));
    put("k", std::to_string(c.k));
    put("T1", std::to_string(c.T1));
    put("T2", std::to_string(c.T2));
    put("tau", std::to_string(c.tau));
    put("alpha", fmt(c.alpha));
    put("method", method_name(c.method));
    put("nu", fmt(c.nu));
    put("task_source", task_source_name(c.task_source));
    put("heterogeneity", heterogeneity_name(c.heterogeneity));
    put("d", std::to_string(c.d));
    put("test_size", std::to_string(c.test_size));
    put("num_classes", std::to_string(c.num_classes));
    put("feature_dim", std::to_string(c.feature_dim));
    put("blob_sigma", fmt(c.blob_sigma));
    put("images_path", c.images_path);
    put("labels_path", c.labels_path);
    put("model", c.model == learner::ModelKind::linear ? "linear" : "mlp");
    put("hidden_dims", fmt(c.hidden_dims));
    put("epochs", std::to_string(c.epochs));
    put("batch_size", std::to_string(c.batch_size));
    put("lr", fmt(c.lr));
    put("momentum", fmt(c.momentum));
    put("lr_decay", fmt(c.lr_decay));
    put("seed", std::to_string(c.seed));
    put("loss_eval_subsample", std::to_string(c.loss_eval_subsample));
    put("threads", std::to_string(c.threads));
    return out;
}

}  // namespace panm::engine
