#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "panm/learner.hpp"
#include "panm/matching.hpp"
#include "panm/similarity.hpp"
#include "panm/vecmath.hpp"

namespace panm::engine {

enum class Method { panm_loss, panm_grad, pens, random, fix_topology, oracle, local };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

enum class TaskSource { synthetic, idx, csv };

struct RunConfig {
    // Topology and protocol.
    int n = 40;
    int r = 2;
    int l = 10;
    int k = 5;
    int T1 = 100;
    int T2 = 200;
    int tau = 10;
    double alpha = 0.5;
    Method method = Method::panm_loss;
    double nu = 0.01;

    // Task.
    TaskSource task_source = TaskSource::synthetic;
    learner::Heterogeneity heterogeneity = learner::Heterogeneity::rotation;
    int d = 200;
    int test_size = 100;
    int num_classes = 10;
    int feature_dim = 20;
    double blob_sigma = 2.0;
    std::string images_path;  // external ingestion only
    std::string labels_path;

    // Model and optimizer.
    learner::ModelKind model = learner::ModelKind::linear;
    std::vector<int> hidden_dims;
    int epochs = 3;
    int batch_size = 128;
    double lr = 0.08;
    double momentum = 0.9;
    double lr_decay = 0.99;

    // Execution.
    std::uint64_t seed = 1;
    int loss_eval_subsample = 0;  // 0 = score on the full local trainset
    int threads = 1;

    void validate() const;  // throws ConfigError naming the offending field
};

struct RoundMetrics {
    int round = 0;
    double mean_test_accuracy = 0.0;
    double mean_test_loss = 0.0;
    double neighbor_precision = 0.0;  // NaN = undefined (local method)
    double neighbor_recall = 0.0;     // NaN = undefined
    long long cumulative_model_transfers = 0;
    double joint_objective = 0.0;
    int em_nonconvergence_count = 0;
};

struct NeighborGraph {
    int n = 0;
    std::vector<std::uint8_t> adjacency;  // row-major n*n, unit diagonal

    bool at(int i, int j) const { return adjacency[static_cast<std::size_t>(i) * n + j] != 0; }
};

struct CommCost {
    long long total_transfers = 0;
    int max_bandwidth = 0;  // max per-round per-client model receives
};

// Closed-form transfer counts for the configured method (see RunConfig docs
// for the counting conventions).
CommCost comm_cost_analytic(const RunConfig& c);

// Number of neighbor-augmentation invocations implied by (T1, T2, tau).
int naem_invocations(const RunConfig& c);

struct SimHooks {
    // Test hook: replaces the similarity metric with a direct score between
    // owner and peer (e.g. the perfect-separation oracle).
    std::function<double(int owner, int peer)> score_override;
    // Observer called at each round barrier with the committed round lists.
    std::function<void(int round, const std::vector<std::vector<int>>& round_lists)>
        on_round_end;
};

struct SimResult {
    std::vector<RoundMetrics> metrics;
    NeighborGraph graph;                  // from final bags
    std::vector<ParamVector> models;      // final committed models
    std::vector<std::vector<int>> bags;   // final per-client neighbor sets
    std::vector<int> cluster_of;
    long long measured_transfers = 0;
    int degenerate_selection_rounds = 0;  // round lists shorter than k
    int empty_bag_rounds = 0;             // precision convention applied
    int pens_fallback_clients = 0;        // threshold filter came back empty
};

SimResult run_simulation(const RunConfig& config, const SimHooks& hooks = {});

// Uniform average of the self model and its neighbors' models.
ParamVector aggregate(const ParamVector& self_model,
                      const std::vector<ParamVector>& neighbor_models);

// Mean over clients of per-client precision (|bag n true| / |bag|, empty bag
// counts as 1.0) and recall (|bag n true| / |true|).
std::pair<double, double> neighbor_precision_recall(
    const std::vector<std::vector<int>>& bags, const std::vector<int>& clusters);

// Sum of local training losses plus (nu/2) * sum_ij G_ij ||w_i - w_j||^2.
double joint_objective(const std::vector<ParamVector>& models,
                       const std::vector<double>& train_losses,
                       const NeighborGraph& graph, double nu);

// Per-round metrics as CSV (header + one row per round; NaN fields empty).
std::string metrics_to_csv(const std::vector<RoundMetrics>& metrics);

// Final-state summary as a JSON document.
std::string summary_to_json(const RunConfig& config, const SimResult& result);

}  // namespace panm::engine
