#include "panm/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "panm/errors.hpp"
#include "panm/rng.hpp"

namespace panm::engine {

namespace {

// RNG stream purposes (see rng.hpp).
constexpr std::uint64_t kPurposeInit = 1;
constexpr std::uint64_t kPurposeTrain = 2;
constexpr std::uint64_t kPurposeCandidates = 3;
constexpr std::uint64_t kPurposeNeighbors = 4;
constexpr std::uint64_t kPurposeBagSample = 5;
constexpr std::uint64_t kPurposeEvalSubsample = 6;
constexpr std::uint64_t kPurposeFixedTopology = 7;

void parallel_for(int threads, int count, const std::function<void(int)>& fn) {
    if (threads <= 0) threads = static_cast<int>(std::thread::hardware_concurrency());
    if (threads <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    threads = std::min(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < count; i += threads) fn(i);
        });
    for (auto& th : pool) th.join();
}

struct CachedPeer {
    ParamVector w_cur;
    ParamVector w_prev;
};

struct ClientRuntime {
    learner::OptimizerState opt;
    std::vector<int> round_list;             // N, committed each round
    std::vector<int> bag;                    // sorted believed-true set
    std::vector<int> selection_counts;       // pens stage 1
    std::vector<int> fixed_topology;         // fix_topology method
    std::unordered_map<int, CachedPeer> cache;
    long long transfers = 0;
    int em_nonconverged = 0;
    int degenerate_selection = 0;
    bool pens_fell_back = false;
};

std::vector<int> others_excluding(int n, int self, const std::vector<int>& sorted_excluded) {
    std::vector<int> pool;
    pool.reserve(n - 1);
    for (int j = 0; j < n; ++j) {
        if (j == self) continue;
        if (std::binary_search(sorted_excluded.begin(), sorted_excluded.end(), j))
            continue;
        pool.push_back(j);
    }
    return pool;
}

std::string fmt_double(double v) {
    if (std::isnan(v)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

}  // namespace

const char* method_name(Method m) {
    switch (m) {
        case Method::panm_loss: return "panm_loss";
        case Method::panm_grad: return "panm_grad";
        case Method::pens: return "pens";
        case Method::random: return "random";
        case Method::fix_topology: return "fix_topology";
        case Method::oracle: return "oracle";
        case Method::local: return "local";
    }
    return "unknown";
}

Method method_from_name(const std::string& name) {
    if (name == "panm_loss") return Method::panm_loss;
    if (name == "panm_grad") return Method::panm_grad;
    if (name == "pens") return Method::pens;
    if (name == "random") return Method::random;
    if (name == "fix_topology") return Method::fix_topology;
    if (name == "oracle") return Method::oracle;
    if (name == "local") return Method::local;
    throw ConfigError("method: unknown value '" + name + "'");
}

void RunConfig::validate() const {
    if (n < 2) throw ConfigError("n: must be >= 2, got " + std::to_string(n));
    if (r < 1) throw ConfigError("r: must be >= 1, got " + std::to_string(r));
    if (n % r != 0)
        throw ConfigError("r: n must be divisible by r (n=" + std::to_string(n) +
                          ", r=" + std::to_string(r) + ")");
    if (k < 1) throw ConfigError("k: must be >= 1, got " + std::to_string(k));
    if (l < 1) throw ConfigError("l: must be >= 1, got " + std::to_string(l));
    // Topology constraints apply only where the fields are used: l for the
    // candidate-sampling methods, k for every aggregating method.
    const bool samples_candidates = method == Method::panm_loss ||
                                    method == Method::panm_grad ||
                                    method == Method::pens;
    if (samples_candidates) {
        if (l < k)
            throw ConfigError("k: must be <= l (k=" + std::to_string(k) +
                              ", l=" + std::to_string(l) + ")");
        if (l > n - 1)
            throw ConfigError("l: must be <= n-1 (l=" + std::to_string(l) +
                              ", n=" + std::to_string(n) + ")");
    }
    if (method != Method::local && k > n - 1)
        throw ConfigError("k: must be <= n-1 (k=" + std::to_string(k) +
                          ", n=" + std::to_string(n) + ")");
    if (T1 < 0) throw ConfigError("T1: must be >= 0");
    if (T2 < 0) throw ConfigError("T2: must be >= 0");
    if (T1 + T2 < 1) throw ConfigError("T1: T1 + T2 must be >= 1");
    if (tau < 1) throw ConfigError("tau: must be >= 1");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("alpha: must be in [0, 1]");
    if (nu < 0.0) throw ConfigError("nu: must be >= 0");
    const bool two_stage = method == Method::panm_loss ||
                           method == Method::panm_grad || method == Method::pens;
    if (two_stage && T1 < 1)
        throw ConfigError("T1: must be >= 1 for method " +
                          std::string(method_name(method)));
    if (d < 1) throw ConfigError("d: must be >= 1");
    if (test_size < 1) throw ConfigError("test_size: must be >= 1");
    if (epochs < 1) throw ConfigError("epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size: must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr: must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum: must be in [0, 1)");
    if (!(lr_decay > 0.0) || lr_decay > 1.0) throw ConfigError("lr_decay: must be in (0, 1]");
    if (loss_eval_subsample < 0) throw ConfigError("loss_eval_subsample: must be >= 0");
    if (threads < 0) throw ConfigError("threads: must be >= 0");

    if (model == learner::ModelKind::mlp && hidden_dims.empty())
        throw ConfigError("hidden_dims: required for model=mlp");
    if (model == learner::ModelKind::linear && !hidden_dims.empty())
        throw ConfigError("hidden_dims: must be empty for model=linear");

    if (task_source == TaskSource::synthetic) {
        learner::SyntheticTaskParams p;
        p.n = n;
        p.r = r;
        p.d = d;
        p.test_size = test_size;
        p.heterogeneity = heterogeneity;
        p.num_classes = num_classes;
        p.feature_dim = feature_dim;
        p.blob_sigma = blob_sigma;
        p.seed = seed;
        p.validate();
    } else {
        if (images_path.empty()) throw ConfigError("images_path: required for external data");
        if (task_source == TaskSource::idx && labels_path.empty())
            throw ConfigError("labels_path: required for idx data");
        if (heterogeneity != learner::Heterogeneity::rotation)
            throw ConfigError("heterogeneity: external data supports rotation only");
    }
}

int naem_invocations(const RunConfig& c) {
    return (c.T1 + c.T2) / c.tau - c.T1 / c.tau;
}

CommCost comm_cost_analytic(const RunConfig& c) {
    c.validate();
    CommCost out;
    const long long n = c.n;
    const long long rounds = c.T1 + c.T2;
    const int a = c.n / c.r;
    switch (c.method) {
        case Method::local:
            break;
        case Method::random:
        case Method::fix_topology:
            out.total_transfers = n * c.k * rounds;
            out.max_bandwidth = c.k;
            break;
        case Method::oracle: {
            const int per = std::min(c.k, a - 1);
            out.total_transfers = n * per * rounds;
            out.max_bandwidth = per;
            break;
        }
        case Method::pens: {
            // Stage-2 term assumes every permanent set reaches k members
            // (always true when the count filter falls back to top-k).
            const int per_round = std::min(c.l, c.n - 1);
            out.total_transfers = n * per_round * c.T1 + n * c.k * c.T2;
            out.max_bandwidth = c.T1 >= 1 ? per_round : c.k;
            break;
        }
        case Method::panm_loss:
        case Method::panm_grad: {
            // Round 1 fetches only candidates; later stage-1 rounds re-fetch
            // the k carried-over neighbors too. Candidate pools exclude the
            // carried list, hence the min terms.
            const int c1 = std::min(c.l, c.n - 1);
            const int ct = std::min(c.l, c.n - 1 - c.k) + c.k;
            const int tau_prime = naem_invocations(c);
            const long long stage1 = c1 + static_cast<long long>(c.T1 - 1) * ct;
            // Assumes the non-bag pool stays >= l at NAEM rounds.
            const long long stage2 =
                static_cast<long long>(c.k) * c.T2 +
                static_cast<long long>(c.l) * tau_prime;
            out.total_transfers = n * (stage1 + stage2);
            out.max_bandwidth = c1;
            if (c.T1 >= 2) out.max_bandwidth = std::max(out.max_bandwidth, ct);
            if (c.T2 >= 1)
                out.max_bandwidth = std::max(
                    out.max_bandwidth, tau_prime >= 1 ? c.k + c.l : c.k);
            break;
        }
    }
    return out;
}

ParamVector aggregate(const ParamVector& self_model,
                      const std::vector<ParamVector>& neighbor_models) {
    ParamVector out = self_model;
    for (const auto& m : neighbor_models) add_in_place(out, m);
    scale_in_place(out, 1.0 / (1.0 + static_cast<double>(neighbor_models.size())));
    return out;
}

std::pair<double, double> neighbor_precision_recall(
    const std::vector<std::vector<int>>& bags, const std::vector<int>& clusters) {
    const int n = static_cast<int>(clusters.size());
    if (static_cast<int>(bags.size()) != n)
        throw ContractError("neighbor_precision_recall: bags/clusters size mismatch");

    double precision = 0.0;
    double recall = 0.0;
    for (int i = 0; i < n; ++i) {
        int true_total = 0;
        for (int j = 0; j < n; ++j)
            if (j != i && clusters[j] == clusters[i]) ++true_total;
        int hits = 0;
        for (int j : bags[i])
            if (clusters[j] == clusters[i]) ++hits;
        precision += bags[i].empty()
                         ? 1.0
                         : static_cast<double>(hits) / static_cast<double>(bags[i].size());
        recall += true_total == 0
                      ? 1.0
                      : static_cast<double>(hits) / static_cast<double>(true_total);
    }
    return {precision / n, recall / n};
}

double joint_objective(const std::vector<ParamVector>& models,
                       const std::vector<double>& train_losses,
                       const NeighborGraph& graph, double nu) {
    const int n = graph.n;
    if (static_cast<int>(models.size()) != n ||
        static_cast<int>(train_losses.size()) != n)
        throw ContractError("joint_objective: size mismatch");

    double obj = 0.0;
    for (double f : train_losses) obj += f;
    if (nu > 0.0) {
        double quad = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (j != i && graph.at(i, j))
                    quad += squared_distance(models[i], models[j]);
        obj += 0.5 * nu * quad;
    }
    return obj;
}

std::string metrics_to_csv(const std::vector<RoundMetrics>& metrics) {
    std::string out =
        "round,mean_test_accuracy,mean_test_loss,neighbor_precision,"
        "neighbor_recall,cumulative_model_transfers,joint_objective,"
        "em_nonconvergence_count\n";
    char buf[64];
    for (const auto& m : metrics) {
        std::snprintf(buf, sizeof(buf), "%d,", m.round);
        out += buf;
        out += fmt_double(m.mean_test_accuracy) + ",";
        out += fmt_double(m.mean_test_loss) + ",";
        out += fmt_double(m.neighbor_precision) + ",";
        out += fmt_double(m.neighbor_recall) + ",";
        std::snprintf(buf, sizeof(buf), "%lld,", m.cumulative_model_transfers);
        out += buf;
        out += fmt_double(m.joint_objective) + ",";
        std::snprintf(buf, sizeof(buf), "%d\n", m.em_nonconvergence_count);
        out += buf;
    }
    return out;
}

namespace {

struct Simulation {
    const RunConfig& cfg;
    const SimHooks& hooks;
    learner::TaskSet tasks;
    learner::ModelSpec spec;
    ParamVector w0;
    std::vector<ParamVector> models;     // committed, round-start
    std::vector<ParamVector> post;       // post-local-training snapshots
    std::vector<ClientRuntime> clients;
    int pens_threshold = 0;

    explicit Simulation(const RunConfig& c, const SimHooks& h) : cfg(c), hooks(h) {
        cfg.validate();
        build_tasks();
        spec.kind = cfg.model;
        spec.input_dim = tasks.clients[0].train.cols;
        spec.hidden_dims = cfg.hidden_dims;
        spec.num_classes = tasks.clients[0].train.num_classes;
        spec.validate();
        w0 = learner::init_params(spec, derive_seed(cfg.seed, 0, 0, kPurposeInit));
        models.assign(cfg.n, w0);
        post.assign(cfg.n, ParamVector{});
        clients.resize(cfg.n);
        for (auto& cl : clients) {
            cl.opt.lr = cfg.lr;
            cl.opt.momentum_coef = cfg.momentum;
            cl.opt.decay = cfg.lr_decay;
            cl.selection_counts.assign(cfg.n, 0);
        }
        pens_threshold = static_cast<int>(
            std::ceil(static_cast<double>(cfg.T1) * (cfg.l + cfg.k) / cfg.n));
    }

    void build_tasks() {
        if (cfg.task_source == TaskSource::synthetic) {
            learner::SyntheticTaskParams p;
            p.n = cfg.n;
            p.r = cfg.r;
            p.d = cfg.d;
            p.test_size = cfg.test_size;
            p.heterogeneity = cfg.heterogeneity;
            p.num_classes = cfg.num_classes;
            p.feature_dim = cfg.feature_dim;
            p.blob_sigma = cfg.blob_sigma;
            p.seed = cfg.seed;
            tasks = learner::make_synthetic_clustered_tasks(p);
        } else {
            learner::IngestParams p;
            p.images_path = cfg.images_path;
            p.labels_path = cfg.labels_path;
            p.format = cfg.task_source == TaskSource::idx ? learner::IngestFormat::idx
                                                          : learner::IngestFormat::csv;
            p.n = cfg.n;
            p.r = cfg.r;
            p.train_per_client = cfg.d;
            p.test_per_client = cfg.test_size;
            p.seed = cfg.seed;
            tasks = learner::ingest_external_images(p);
        }
    }

    // Rows of i's trainset used for loss-metric scoring this round.
    std::vector<int> scoring_rows(int i, int round) const {
        const int rows = tasks.clients[i].train.rows;
        if (cfg.loss_eval_subsample <= 0 || cfg.loss_eval_subsample >= rows) {
            std::vector<int> all(rows);
            std::iota(all.begin(), all.end(), 0);
            return all;
        }
        std::mt19937_64 rng(derive_seed(cfg.seed, i, round, kPurposeEvalSubsample));
        std::vector<int> all(rows);
        std::iota(all.begin(), all.end(), 0);
        return sample_without_replacement(std::move(all), cfg.loss_eval_subsample, rng);
    }

    double score_peer(int i, int j, const std::vector<int>& rows,
                      const ParamVector& peer_cur, const ParamVector& peer_prev) {
        if (hooks.score_override) return hooks.score_override(i, j);
        if (cfg.method == Method::panm_grad) {
            similarity::TrajectorySnapshot mine{w0, models[i], post[i]};
            similarity::TrajectorySnapshot theirs{w0, peer_prev, peer_cur};
            return similarity::grad_similarity(mine, theirs, cfg.alpha);
        }
        return similarity::loss_similarity(peer_cur, [&](const ParamVector& w) {
            return learner::mean_loss_on_rows(w, spec, tasks.clients[i].train, rows);
        });
    }

    void cache_peer(int i, int j) {
        clients[i].cache[j] = CachedPeer{post[j], models[j]};
    }

    // Stage-1 matching for panm and pens. Returns the new round list.
    std::vector<int> stage1_match(int i, int round) {
        ClientRuntime& cl = clients[i];
        const bool carries = cfg.method != Method::pens;
        std::vector<int> carried = cl.round_list;  // sorted below for exclusion
        if (!carries) carried.clear();
        std::sort(carried.begin(), carried.end());

        auto pool = others_excluding(cfg.n, i, carried);
        std::mt19937_64 rng(derive_seed(cfg.seed, i, round, kPurposeCandidates));
        auto candidates = sample_without_replacement(std::move(pool), cfg.l, rng);

        const auto rows = needs_rows() ? scoring_rows(i, round) : std::vector<int>{};
        std::vector<matching::ScoredPeer> scored;
        scored.reserve(candidates.size() + carried.size());
        for (int j : candidates) {
            scored.push_back({j, score_peer(i, j, rows, post[j], models[j])});
            cache_peer(i, j);
        }
        for (int j : carried) {
            scored.push_back({j, score_peer(i, j, rows, post[j], models[j])});
            cache_peer(i, j);
        }
        cl.transfers += static_cast<long long>(candidates.size()) +
                        static_cast<long long>(carried.size());

        auto list = matching::nsmc_select(i, scored, cfg.k);
        if (static_cast<int>(list.size()) < cfg.k) ++cl.degenerate_selection;
        if (cfg.method == Method::pens)
            for (int j : list) ++cl.selection_counts[j];
        return list;
    }

    bool needs_rows() const {
        return !hooks.score_override && cfg.method != Method::panm_grad;
    }

    // Stage-2 NAEM step for panm methods; updates the bag in place.
    void naem_step(int i, int round) {
        ClientRuntime& cl = clients[i];
        std::mt19937_64 s_rng(derive_seed(cfg.seed, i, round, kPurposeBagSample));
        auto sampled_s = sample_without_replacement(
            cl.bag, std::min<std::size_t>(cfg.l, cl.bag.size()), s_rng);
        std::sort(sampled_s.begin(), sampled_s.end());

        auto pool = others_excluding(cfg.n, i, cl.bag);
        std::mt19937_64 c_rng(derive_seed(cfg.seed, i, round, kPurposeCandidates));
        auto sampled_c = sample_without_replacement(std::move(pool), cfg.l, c_rng);
        std::sort(sampled_c.begin(), sampled_c.end());

        if (sampled_s.size() + sampled_c.size() < 2) return;

        const auto rows = needs_rows() ? scoring_rows(i, round) : std::vector<int>{};
        std::vector<matching::ScoredPeer> scores;
        scores.reserve(sampled_s.size() + sampled_c.size());
        for (int j : sampled_c) {
            scores.push_back({j, score_peer(i, j, rows, post[j], models[j])});
            cache_peer(i, j);
        }
        cl.transfers += static_cast<long long>(sampled_c.size());
        for (int j : sampled_s) {
            const auto it = cl.cache.find(j);
            if (it == cl.cache.end())
                throw ContractError("engine: bag member missing from model cache");
            scores.push_back({j, score_peer(i, j, rows, it->second.w_cur,
                                            it->second.w_prev)});
        }

        auto result = matching::naem_update(i, cl.bag, sampled_s, sampled_c, scores);
        if (!result.em.converged) ++cl.em_nonconverged;
        cl.bag = std::move(result.bag);
    }

    // Stage-2 round-list sampling (and bag bookkeeping) for all methods.
    std::vector<int> stage2_match(int i, int round) {
        ClientRuntime& cl = clients[i];
        if ((cfg.method == Method::panm_loss || cfg.method == Method::panm_grad) &&
            round % cfg.tau == 0)
            naem_step(i, round);

        std::mt19937_64 rng(derive_seed(cfg.seed, i, round, kPurposeNeighbors));
        auto list = sample_without_replacement(
            cl.bag, std::min<std::size_t>(cfg.k, cl.bag.size()), rng);
        for (int j : list) cache_peer(i, j);
        cl.transfers += static_cast<long long>(list.size());
        return list;
    }

    // Baseline round lists (identical logic in both stages).
    std::vector<int> baseline_match(int i, int round) {
        ClientRuntime& cl = clients[i];
        switch (cfg.method) {
            case Method::local:
                return {};
            case Method::random: {
                std::mt19937_64 rng(derive_seed(cfg.seed, i, round, kPurposeNeighbors));
                auto list = sample_without_replacement(others_excluding(cfg.n, i, {}),
                                                       cfg.k, rng);
                cl.transfers += static_cast<long long>(list.size());
                return list;
            }
            case Method::fix_topology: {
                if (cl.fixed_topology.empty()) {
                    std::mt19937_64 rng(derive_seed(cfg.seed, i, 1, kPurposeFixedTopology));
                    cl.fixed_topology = sample_without_replacement(
                        others_excluding(cfg.n, i, {}), cfg.k, rng);
                }
                cl.transfers += static_cast<long long>(cl.fixed_topology.size());
                return cl.fixed_topology;
            }
            case Method::oracle: {
                std::vector<int> same;
                for (int j = 0; j < cfg.n; ++j)
                    if (j != i && tasks.cluster_of[j] == tasks.cluster_of[i])
                        same.push_back(j);
                std::mt19937_64 rng(derive_seed(cfg.seed, i, round, kPurposeNeighbors));
                const auto count = std::min<std::size_t>(cfg.k, same.size());
                auto list = sample_without_replacement(std::move(same), count, rng);
                cl.transfers += static_cast<long long>(list.size());
                return list;
            }
            default:
                throw ContractError("engine: baseline_match on a two-stage method");
        }
    }

    NeighborGraph graph_from(const std::vector<std::vector<int>>& sets) const {
        NeighborGraph g;
        g.n = cfg.n;
        g.adjacency.assign(static_cast<std::size_t>(cfg.n) * cfg.n, 0);
        for (int i = 0; i < cfg.n; ++i) {
            g.adjacency[static_cast<std::size_t>(i) * cfg.n + i] = 1;
            for (int j : sets[i]) g.adjacency[static_cast<std::size_t>(i) * cfg.n + j] = 1;
        }
        return g;
    }

    SimResult run() {
        SimResult result;
        result.cluster_of = tasks.cluster_of;
        const int total_rounds = cfg.T1 + cfg.T2;
        const bool two_stage = cfg.method == Method::panm_loss ||
                               cfg.method == Method::panm_grad ||
                               cfg.method == Method::pens;
        long long cumulative_transfers = 0;
        std::vector<std::vector<int>> round_lists(cfg.n);
        std::vector<std::vector<int>> believed(cfg.n);
        std::vector<learner::EvalResult> test_evals(cfg.n);
        std::vector<double> train_losses(cfg.n);

        for (int round = 1; round <= total_rounds; ++round) {
            const bool stage1 = round <= cfg.T1;

            parallel_for(cfg.threads, cfg.n, [&](int i) {
                post[i] = learner::local_train(
                    models[i], spec, tasks.clients[i].train, cfg.epochs,
                    cfg.batch_size, clients[i].opt,
                    derive_seed(cfg.seed, i, round, kPurposeTrain));
            });

            parallel_for(cfg.threads, cfg.n, [&](int i) {
                if (!two_stage)
                    round_lists[i] = baseline_match(i, round);
                else if (stage1)
                    round_lists[i] = stage1_match(i, round);
                else
                    round_lists[i] = stage2_match(i, round);

                // Stage-2 initialization at the end of stage 1.
                if (two_stage && round == cfg.T1) {
                    ClientRuntime& cl = clients[i];
                    if (cfg.method == Method::pens) {
                        std::vector<std::pair<int, int>> counts;
                        counts.reserve(cfg.n - 1);
                        for (int j = 0; j < cfg.n; ++j)
                            if (j != i) counts.push_back({j, cl.selection_counts[j]});
                        auto filtered = matching::pens_stage2_threshold(
                            counts, pens_threshold, cfg.k);
                        cl.pens_fell_back = filtered.fell_back;
                        cl.bag = std::move(filtered.permanent);
                    } else {
                        cl.bag = round_lists[i];
                        std::sort(cl.bag.begin(), cl.bag.end());
                    }
                }
            });

            parallel_for(cfg.threads, cfg.n, [&](int i) {
                std::vector<ParamVector> neighbor_models;
                neighbor_models.reserve(round_lists[i].size());
                for (int j : round_lists[i]) neighbor_models.push_back(post[j]);
                models[i] = aggregate(post[i], neighbor_models);
                clients[i].opt.lr *= clients[i].opt.decay;
                clients[i].round_list = round_lists[i];
            });

            // Believed-true sets for metrics: round lists during stage 1 and
            // for baselines, persistent bags during stage 2.
            for (int i = 0; i < cfg.n; ++i) {
                if (two_stage && !stage1) {
                    believed[i] = clients[i].bag;
                } else {
                    believed[i] = round_lists[i];
                    std::sort(believed[i].begin(), believed[i].end());
                }
            }

            parallel_for(cfg.threads, cfg.n, [&](int i) {
                test_evals[i] = learner::evaluate(models[i], spec, tasks.clients[i].test);
                train_losses[i] =
                    learner::evaluate(models[i], spec, tasks.clients[i].train).mean_loss;
            });

            RoundMetrics m;
            m.round = round;
            for (int i = 0; i < cfg.n; ++i) {
                m.mean_test_accuracy += test_evals[i].accuracy;
                m.mean_test_loss += test_evals[i].mean_loss;
            }
            m.mean_test_accuracy /= cfg.n;
            m.mean_test_loss /= cfg.n;

            if (cfg.method == Method::local) {
                m.neighbor_precision = std::nan("");
                m.neighbor_recall = std::nan("");
            } else {
                auto [prec, rec] = neighbor_precision_recall(believed, tasks.cluster_of);
                m.neighbor_precision = prec;
                m.neighbor_recall = rec;
                for (int i = 0; i < cfg.n; ++i)
                    if (believed[i].empty()) ++result.empty_bag_rounds;
            }

            long long round_transfers = 0;
            int em_flags = 0;
            for (int i = 0; i < cfg.n; ++i) {
                round_transfers += clients[i].transfers;
                clients[i].transfers = 0;
                em_flags += clients[i].em_nonconverged;
                clients[i].em_nonconverged = 0;
                result.degenerate_selection_rounds += clients[i].degenerate_selection;
                clients[i].degenerate_selection = 0;
            }
            cumulative_transfers += round_transfers;
            m.cumulative_model_transfers = cumulative_transfers;
            m.em_nonconvergence_count = em_flags;
            m.joint_objective =
                joint_objective(models, train_losses, graph_from(believed), cfg.nu);

            result.metrics.push_back(m);
            if (hooks.on_round_end) hooks.on_round_end(round, round_lists);
        }

        for (int i = 0; i < cfg.n; ++i)
            if (clients[i].pens_fell_back) ++result.pens_fallback_clients;
        result.bags = std::move(believed);
        result.graph = graph_from(result.bags);
        result.models = models;
        result.measured_transfers = cumulative_transfers;
        return result;
    }
};

}  // namespace

SimResult run_simulation(const RunConfig& config, const SimHooks& hooks) {
    Simulation sim(config, hooks);
    return sim.run();
}

std::string summary_to_json(const RunConfig& config, const SimResult& result) {
    nlohmann::json j;
    j["method"] = method_name(config.method);
    j["seed"] = config.seed;
    j["n"] = config.n;
    j["r"] = config.r;
    j["l"] = config.l;
    j["k"] = config.k;
    j["T1"] = config.T1;
    j["T2"] = config.T2;
    j["tau"] = config.tau;

    const auto& last = result.metrics.back();
    j["final"]["round"] = last.round;
    j["final"]["mean_test_accuracy"] = last.mean_test_accuracy;
    j["final"]["mean_test_loss"] = last.mean_test_loss;
    if (std::isnan(last.neighbor_precision)) {
        j["final"]["neighbor_precision"] = nullptr;
        j["final"]["neighbor_recall"] = nullptr;
    } else {
        j["final"]["neighbor_precision"] = last.neighbor_precision;
        j["final"]["neighbor_recall"] = last.neighbor_recall;
    }
    j["final"]["joint_objective"] = last.joint_objective;

    const auto analytic = comm_cost_analytic(config);
    j["comm"]["measured_transfers"] = result.measured_transfers;
    j["comm"]["analytic_transfers"] = analytic.total_transfers;
    j["comm"]["analytic_max_bandwidth"] = analytic.max_bandwidth;

    j["flags"]["degenerate_selection_rounds"] = result.degenerate_selection_rounds;
    j["flags"]["empty_bag_rounds"] = result.empty_bag_rounds;
    j["flags"]["pens_fallback_clients"] = result.pens_fallback_clients;

    nlohmann::json graph = nlohmann::json::array();
    for (const auto& bag : result.bags) graph.push_back(bag);
    j["graph"] = graph;
    return j.dump(2) + "\n";
}

}  // namespace panm::engine
