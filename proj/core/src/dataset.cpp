#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "panm/errors.hpp"
#include "panm/learner.hpp"
#include "panm/rng.hpp"

namespace panm::learner {

namespace {

constexpr std::uint64_t kPurposeMeans = 101;
constexpr std::uint64_t kPurposeClient = 102;

void rotate_pairs_in_place(std::vector<double>& x, int dim, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    for (std::size_t off = 0; off < x.size(); off += dim)
        for (int m = 0; m + 1 < dim; m += 2) {
            const double u = x[off + m];
            const double v = x[off + m + 1];
            x[off + m] = c * u - s * v;
            x[off + m + 1] = s * u + c * v;
        }
}

Dataset draw_blob_dataset(int count, int num_classes, int feature_dim,
                          const std::vector<double>& means, double sigma,
                          std::mt19937_64& rng) {
    Dataset ds;
    ds.rows = count;
    ds.cols = feature_dim;
    ds.num_classes = num_classes;
    ds.features.resize(static_cast<std::size_t>(count) * feature_dim);
    ds.labels.resize(count);

    // Balanced labels: deal classes round-robin, then shuffle the order.
    for (int i = 0; i < count; ++i) ds.labels[i] = i % num_classes;
    std::shuffle(ds.labels.begin(), ds.labels.end(), rng);

    std::normal_distribution<double> noise(0.0, sigma);
    for (int i = 0; i < count; ++i) {
        const double* mu = means.data() + static_cast<std::size_t>(ds.labels[i]) * feature_dim;
        double* row = ds.features.data() + static_cast<std::size_t>(i) * feature_dim;
        for (int f = 0; f < feature_dim; ++f) row[f] = mu[f] + noise(rng);
    }
    return ds;
}

}  // namespace

void SyntheticTaskParams::validate() const {
    if (n < 1) throw ConfigError("synthetic task: n must be >= 1");
    if (r < 1) throw ConfigError("synthetic task: r must be >= 1");
    if (n % r != 0) throw ConfigError("synthetic task: n must be divisible by r");
    if (d < 1) throw ConfigError("synthetic task: d must be >= 1");
    if (test_size < 1) throw ConfigError("synthetic task: test_size must be >= 1");
    if (num_classes < 2) throw ConfigError("synthetic task: num_classes must be >= 2");
    if (feature_dim < 1) throw ConfigError("synthetic task: feature_dim must be >= 1");
    if (heterogeneity == Heterogeneity::rotation && feature_dim % 2 != 0)
        throw ConfigError("synthetic task: feature_dim must be even in rotation mode");
    if (heterogeneity == Heterogeneity::label_swap && r > num_classes / 2)
        throw ConfigError(
            "synthetic task: r exceeds num_classes/2, not enough disjoint label "
            "pairs for label_swap");
    if (!(blob_sigma > 0.0)) throw ConfigError("synthetic task: blob_sigma must be > 0");
}

TaskSet make_synthetic_clustered_tasks(const SyntheticTaskParams& p) {
    p.validate();

    // Shared base task: one Gaussian blob per class.
    std::mt19937_64 means_rng(derive_seed(p.seed, 0, 0, kPurposeMeans));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::vector<double> means(static_cast<std::size_t>(p.num_classes) * p.feature_dim);
    for (double& m : means) m = unit(means_rng);

    TaskSet out;
    out.clients.resize(p.n);
    out.cluster_of.resize(p.n);
    const int per_cluster = p.n / p.r;

    for (int i = 0; i < p.n; ++i) {
        const int cluster = i / per_cluster;
        out.cluster_of[i] = cluster;
        std::mt19937_64 rng(derive_seed(p.seed, static_cast<std::uint64_t>(i), 0,
                                        kPurposeClient));
        ClientTask& task = out.clients[i];
        task.cluster_id = cluster;
        task.train = draw_blob_dataset(p.d, p.num_classes, p.feature_dim, means,
                                       p.blob_sigma, rng);
        task.test = draw_blob_dataset(p.test_size, p.num_classes, p.feature_dim,
                                      means, p.blob_sigma, rng);

        if (p.heterogeneity == Heterogeneity::rotation) {
            const double angle = 2.0 * M_PI * cluster / p.r;
            rotate_pairs_in_place(task.train.features, p.feature_dim, angle);
            rotate_pairs_in_place(task.test.features, p.feature_dim, angle);
        } else {
            const int lo = 2 * cluster;
            const int hi = 2 * cluster + 1;
            for (int& y : task.train.labels)
                y = y == lo ? hi : (y == hi ? lo : y);
            for (int& y : task.test.labels)
                y = y == lo ? hi : (y == hi ? lo : y);
        }
    }
    return out;
}

}  // namespace panm::learner
