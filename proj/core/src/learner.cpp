#include "panm/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "panm/errors.hpp"

namespace panm::learner {

namespace {

// Layer sizes of the affine chain: input -> hidden... -> classes.
std::vector<int> layer_dims(const ModelSpec& spec) {
    std::vector<int> dims;
    dims.push_back(spec.input_dim);
    for (int h : spec.hidden_dims) dims.push_back(h);
    dims.push_back(spec.num_classes);
    return dims;
}

struct Workspace {
    std::vector<std::vector<double>> acts;  // per layer: post-activation values
    std::vector<std::vector<double>> grads; // per layer: dL/d(pre-activation)
};

Workspace make_workspace(const std::vector<int>& dims) {
    Workspace ws;
    ws.acts.resize(dims.size());
    ws.grads.resize(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
        ws.acts[i].resize(dims[i]);
        ws.grads[i].resize(dims[i]);
    }
    return ws;
}

// Forward through all layers; hidden layers get ReLU, the last layer stays
// linear (logits land in ws.acts.back()).
void forward(const ParamVector& w, const std::vector<int>& dims,
             const double* x, Workspace& ws) {
    std::copy(x, x + dims[0], ws.acts[0].begin());
    std::size_t off = 0;
    for (std::size_t layer = 1; layer < dims.size(); ++layer) {
        const int in = dims[layer - 1];
        const int out = dims[layer];
        const double* W = w.data() + off;
        const double* b = W + static_cast<std::size_t>(out) * in;
        const double* a = ws.acts[layer - 1].data();
        double* z = ws.acts[layer].data();
        for (int o = 0; o < out; ++o) {
            const double* row = W + static_cast<std::size_t>(o) * in;
            double acc = b[o];
            for (int i = 0; i < in; ++i) acc += row[i] * a[i];
            z[o] = acc;
        }
        if (layer + 1 < dims.size())
            for (int o = 0; o < out; ++o)
                if (z[o] < 0.0) z[o] = 0.0;
        off += static_cast<std::size_t>(out) * in + out;
    }
}

double log_sum_exp(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double acc = 0.0;
    for (double v : z) acc += std::exp(v - m);
    return m + std::log(acc);
}

// Cross-entropy of the logits in ws.acts.back() against label y; fills
// ws.grads.back() with dL/dlogits (softmax minus one-hot).
double loss_and_logit_grad(Workspace& ws, int y) {
    const auto& z = ws.acts.back();
    auto& g = ws.grads.back();
    const double lse = log_sum_exp(z);
    for (std::size_t c = 0; c < z.size(); ++c) g[c] = std::exp(z[c] - lse);
    g[y] -= 1.0;
    return lse - z[y];
}

// Backward pass accumulating parameter gradients (scaled later by 1/batch).
void backward(const ParamVector& w, const std::vector<int>& dims,
              Workspace& ws, ParamVector& grad) {
    std::size_t off_end = w.size();
    for (std::size_t layer = dims.size() - 1; layer >= 1; --layer) {
        const int in = dims[layer - 1];
        const int out = dims[layer];
        const std::size_t off = off_end - (static_cast<std::size_t>(out) * in + out);
        const double* W = w.data() + off;
        double* gW = grad.data() + off;
        double* gb = gW + static_cast<std::size_t>(out) * in;
        const double* a = ws.acts[layer - 1].data();
        const double* dz = ws.grads[layer].data();
        for (int o = 0; o < out; ++o) {
            const double d = dz[o];
            double* gRow = gW + static_cast<std::size_t>(o) * in;
            for (int i = 0; i < in; ++i) gRow[i] += d * a[i];
            gb[o] += d;
        }
        if (layer >= 2) {
            double* da = ws.grads[layer - 1].data();
            std::fill(da, da + in, 0.0);
            for (int o = 0; o < out; ++o) {
                const double d = dz[o];
                const double* row = W + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) da[i] += d * row[i];
            }
            // ReLU gate: positive post-activation means the unit was active.
            for (int i = 0; i < in; ++i)
                if (a[i] <= 0.0) da[i] = 0.0;
        }
        off_end = off;
    }
}

}  // namespace

void Dataset::validate() const {
    if (rows <= 0) throw ConfigError("dataset: rows must be > 0");
    if (cols <= 0) throw ConfigError("dataset: cols must be > 0");
    if (num_classes < 2) throw ConfigError("dataset: num_classes must be >= 2");
    if (features.size() != static_cast<std::size_t>(rows) * cols)
        throw ContractError("dataset: features size mismatch");
    if (labels.size() != static_cast<std::size_t>(rows))
        throw ContractError("dataset: labels size mismatch");
    for (int y : labels)
        if (y < 0 || y >= num_classes)
            throw ContractError("dataset: label out of range");
}

int ModelSpec::param_count() const {
    const auto dims = layer_dims(*this);
    int count = 0;
    for (std::size_t i = 1; i < dims.size(); ++i)
        count += dims[i - 1] * dims[i] + dims[i];
    return count;
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
    if (num_classes < 2) throw ConfigError("model: num_classes must be >= 2");
    if (kind == ModelKind::linear && !hidden_dims.empty())
        throw ConfigError("model: hidden_dims must be empty for kind=linear");
    if (kind == ModelKind::mlp && hidden_dims.empty())
        throw ConfigError("model: hidden_dims required for kind=mlp");
    for (int h : hidden_dims)
        if (h < 1) throw ConfigError("model: hidden_dims entries must be >= 1");
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto dims = layer_dims(spec);
    ParamVector w(spec.param_count(), 0.0);
    std::mt19937_64 rng(seed);
    std::size_t off = 0;
    for (std::size_t layer = 1; layer < dims.size(); ++layer) {
        const int in = dims[layer - 1];
        const int out = dims[layer];
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (int i = 0; i < out * in; ++i) w[off + i] = u(rng);
        off += static_cast<std::size_t>(out) * in + out;  // biases stay zero
    }
    return w;
}

EvalResult evaluate(const ParamVector& model, const ModelSpec& spec,
                    const Dataset& data) {
    spec.validate();
    data.validate();
    if (spec.input_dim != data.cols)
        throw ContractError("evaluate: model input_dim != dataset cols");
    const auto dims = layer_dims(spec);
    auto ws = make_workspace(dims);

    double loss = 0.0;
    int correct = 0;
    for (int i = 0; i < data.rows; ++i) {
        forward(model, dims, data.row(i), ws);
        const auto& z = ws.acts.back();
        loss += log_sum_exp(z) - z[data.labels[i]];
        int pred = 0;
        for (int c = 1; c < spec.num_classes; ++c)
            if (z[c] > z[pred]) pred = c;
        if (pred == data.labels[i]) ++correct;
    }
    return {loss / data.rows, static_cast<double>(correct) / data.rows};
}

double mean_loss_on_rows(const ParamVector& model, const ModelSpec& spec,
                         const Dataset& data, const std::vector<int>& rows) {
    if (rows.empty()) throw ContractError("mean_loss_on_rows: empty row set");
    const auto dims = layer_dims(spec);
    auto ws = make_workspace(dims);
    double loss = 0.0;
    for (int i : rows) {
        forward(model, dims, data.row(i), ws);
        const auto& z = ws.acts.back();
        loss += log_sum_exp(z) - z[data.labels[i]];
    }
    return loss / static_cast<double>(rows.size());
}

ParamVector loss_gradient(const ParamVector& model, const ModelSpec& spec,
                          const Dataset& data, const std::vector<int>& rows,
                          double* out_mean_loss) {
    if (rows.empty()) throw ContractError("loss_gradient: empty batch");
    const auto dims = layer_dims(spec);
    auto ws = make_workspace(dims);
    ParamVector grad(model.size(), 0.0);
    double loss = 0.0;
    for (int i : rows) {
        forward(model, dims, data.row(i), ws);
        loss += loss_and_logit_grad(ws, data.labels[i]);
        backward(model, dims, ws, grad);
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    for (double& g : grad) g *= inv;
    if (out_mean_loss) *out_mean_loss = loss * inv;
    return grad;
}

ParamVector local_train(ParamVector model, const ModelSpec& spec,
                        const Dataset& train, int epochs, int batch_size,
                        OptimizerState& opt, std::uint64_t seed) {
    if (epochs < 1) throw ConfigError("local_train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("local_train: batch_size must be >= 1");
    if (opt.velocity.empty()) opt.velocity.assign(model.size(), 0.0);
    if (opt.velocity.size() != model.size())
        throw ContractError("local_train: velocity dimension mismatch");
    batch_size = std::min(batch_size, train.rows);

    std::mt19937_64 rng(seed);
    std::vector<int> order(train.rows);
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> batch;
    batch.reserve(batch_size);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (int start = 0; start < train.rows; start += batch_size) {
            const int stop = std::min(start + batch_size, train.rows);
            batch.assign(order.begin() + start, order.begin() + stop);
            double batch_loss = 0.0;
            ParamVector grad = loss_gradient(model, spec, train, batch, &batch_loss);
            if (!std::isfinite(batch_loss))
                throw EvaluationError("local_train: non-finite loss (divergence)");
            for (std::size_t i = 0; i < model.size(); ++i) {
                opt.velocity[i] = opt.momentum_coef * opt.velocity[i] + grad[i];
                model[i] -= opt.lr * opt.velocity[i];
            }
        }
    }
    return model;
}

}  // namespace panm::learner
