#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "panm/vecmath.hpp"

namespace panm::learner {

// Row-major sample matrix plus integer class labels.
struct Dataset {
    std::vector<double> features;  // rows * cols
    std::vector<int> labels;       // rows
    int rows = 0;
    int cols = 0;
    int num_classes = 0;

    const double* row(int i) const { return features.data() + static_cast<std::size_t>(i) * cols; }
    void validate() const;
};

enum class ModelKind { linear, mlp };

struct ModelSpec {
    ModelKind kind = ModelKind::linear;
    int input_dim = 0;
    std::vector<int> hidden_dims;  // empty for linear
    int num_classes = 0;

    int param_count() const;
    void validate() const;
};

// Symmetric uniform init scaled by fan-in; biases zero.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

struct EvalResult {
    double mean_loss = 0.0;
    double accuracy = 0.0;
};

// Mean cross-entropy and top-1 accuracy (argmax ties go to the first class).
EvalResult evaluate(const ParamVector& model, const ModelSpec& spec,
                    const Dataset& data);

// Mean loss over a fixed subset of rows; used by the loss-similarity metric
// when evaluation subsampling is configured.
double mean_loss_on_rows(const ParamVector& model, const ModelSpec& spec,
                         const Dataset& data, const std::vector<int>& rows);

// Mean-loss gradient over the given rows. Exposed for gradient checking.
ParamVector loss_gradient(const ParamVector& model, const ModelSpec& spec,
                          const Dataset& data, const std::vector<int>& rows,
                          double* out_mean_loss = nullptr);

struct OptimizerState {
    double lr = 0.08;
    double momentum_coef = 0.9;
    double decay = 0.99;  // applied per round by the engine
    ParamVector velocity;
};

// E epochs of shuffled mini-batch SGD with momentum. Deterministic given
// seed; updates opt.velocity in place. Throws EvaluationError on non-finite
// loss (divergence).
ParamVector local_train(ParamVector model, const ModelSpec& spec,
                        const Dataset& train, int epochs, int batch_size,
                        OptimizerState& opt, std::uint64_t seed);

enum class Heterogeneity { rotation, label_swap };

struct ClientTask {
    Dataset train;
    Dataset test;
    int cluster_id = 0;
};

struct TaskSet {
    std::vector<ClientTask> clients;
    std::vector<int> cluster_of;
};

struct SyntheticTaskParams {
    int n = 40;             // clients
    int r = 2;              // clusters, n divisible by r
    int d = 200;            // train samples per client
    int test_size = 100;    // test samples per client
    Heterogeneity heterogeneity = Heterogeneity::rotation;
    int num_classes = 10;
    int feature_dim = 20;   // even in rotation mode
    double blob_sigma = 2.0;
    std::uint64_t seed = 1;

    void validate() const;
};

// Gaussian-blob classification base task with a cluster-specific transform:
// planar rotation of consecutive feature pairs (angles 2*pi*j/r), or a
// per-cluster swap of one disjoint label pair.
TaskSet make_synthetic_clustered_tasks(const SyntheticTaskParams& p);

enum class IngestFormat { idx, csv };

struct IngestParams {
    std::string images_path;            // csv: the single data file
    std::string labels_path;            // idx only
    IngestFormat format = IngestFormat::idx;
    int n = 40;
    int r = 2;
    int train_per_client = 200;
    int test_per_client = 100;
    std::vector<int> quarter_turns_per_cluster;  // size r; empty = j*(4/r) spacing
    std::uint64_t seed = 1;
};

// Loads square images (IDX pair or label,pixels CSV), scales to [0,1],
// rotates per assigned cluster by quarter turns, partitions IID.
TaskSet ingest_external_images(const IngestParams& p);

// One counterclockwise quarter turn of a square side*side image.
std::vector<double> rotate_quarter(const std::vector<double>& pixels, int side,
                                   int turns);

}  // namespace panm::learner
