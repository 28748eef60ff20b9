#include "panm/matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "panm/errors.hpp"

namespace panm::matching {

namespace {

bool is_sorted_set(const std::vector<int>& v) {
    return std::is_sorted(v.begin(), v.end()) &&
           std::adjacent_find(v.begin(), v.end()) == v.end();
}

bool contains(const std::vector<int>& sorted, int id) {
    return std::binary_search(sorted.begin(), sorted.end(), id);
}

struct Component {
    double mu = 0.0;
    double sigma = kSigmaFloor;
    double beta = 0.0;
    int count = 0;
};

Component estimate_component(const std::vector<ScoredPeer>& values,
                             const std::vector<std::uint8_t>& assign,
                             std::uint8_t r) {
    Component c;
    for (std::size_t j = 0; j < values.size(); ++j)
        if (assign[j] == r) {
            c.mu += values[j].score;
            ++c.count;
        }
    if (c.count == 0) return c;
    c.mu /= c.count;
    double var = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j)
        if (assign[j] == r) {
            const double d = values[j].score - c.mu;
            var += d * d;
        }
    var /= c.count;
    c.sigma = std::max(std::sqrt(var), kSigmaFloor);
    c.beta = static_cast<double>(c.count) / static_cast<double>(values.size());
    return c;
}

double log_posterior(double y, const Component& c) {
    if (c.count == 0 || c.beta <= 0.0) return -std::numeric_limits<double>::infinity();
    const double z = (y - c.mu) / c.sigma;
    return std::log(c.beta) - std::log(c.sigma) - 0.5 * z * z;
}

}  // namespace

std::vector<int> nsmc_select(int owner, std::vector<ScoredPeer> scored, int k) {
    if (k < 1) throw ConfigError("nsmc_select: k must be >= 1");
    for (const auto& p : scored)
        if (p.peer_id == owner)
            throw ContractError("nsmc_select: owner appears among scored peers");

    // Keep one entry per peer id (a carried-over neighbor re-drawn as a
    // candidate must not count twice).
    std::sort(scored.begin(), scored.end(), [](const ScoredPeer& a, const ScoredPeer& b) {
        return a.peer_id < b.peer_id;
    });
    scored.erase(std::unique(scored.begin(), scored.end(),
                             [](const ScoredPeer& a, const ScoredPeer& b) {
                                 return a.peer_id == b.peer_id;
                             }),
                 scored.end());

    std::sort(scored.begin(), scored.end(), [](const ScoredPeer& a, const ScoredPeer& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.peer_id < b.peer_id;
    });
    if (static_cast<int>(scored.size()) > k) scored.resize(k);

    std::vector<int> out;
    out.reserve(scored.size());
    for (const auto& p : scored) out.push_back(p.peer_id);
    return out;
}

GmmEstimate em_fit(const std::vector<ScoredPeer>& values,
                   std::vector<std::uint8_t> init) {
    const std::size_t m = values.size();
    if (m < 2) throw ContractError("em_fit: needs at least 2 members");
    if (init.size() != m) throw ContractError("em_fit: init size mismatch");
    for (auto r : init)
        if (r > 1) throw ContractError("em_fit: init labels must be 0 or 1");

    GmmEstimate est;

    // All-identical scores carry no information; call everything one component.
    const auto [lo_it, hi_it] =
        std::minmax_element(values.begin(), values.end(),
                            [](const ScoredPeer& a, const ScoredPeer& b) {
                                return a.score < b.score;
                            });
    if (lo_it->score == hi_it->score) {
        est.assignments.assign(m, 0);
        est.mu0 = est.mu1 = lo_it->score;
        est.sigma0 = est.sigma1 = kSigmaFloor;
        est.beta0 = 1.0;
        est.beta1 = 0.0;
        est.iterations = 0;
        est.converged = true;
        return est;
    }

    // Degenerate init (a component empty): median-split instead.
    const int init_ones = static_cast<int>(std::count(init.begin(), init.end(), 1));
    if (init_ones == 0 || init_ones == static_cast<int>(m)) {
        std::vector<double> ys(m);
        for (std::size_t j = 0; j < m; ++j) ys[j] = values[j].score;
        std::nth_element(ys.begin(), ys.begin() + m / 2, ys.end());
        const double median = ys[m / 2];
        for (std::size_t j = 0; j < m; ++j)
            init[j] = values[j].score < median ? 1 : 0;
        // Everything may sit on one side of the median; force a split.
        if (std::count(init.begin(), init.end(), 1) == 0 ||
            std::count(init.begin(), init.end(), 1) == static_cast<int>(m)) {
            std::size_t lo_j = 0;
            for (std::size_t j = 1; j < m; ++j)
                if (values[j].score < values[lo_j].score) lo_j = j;
            for (std::size_t j = 0; j < m; ++j) init[j] = 0;
            init[lo_j] = 1;
        }
    }

    std::vector<std::uint8_t> assign = std::move(init);
    Component c0, c1;
    for (int iter = 1; iter <= kMaxEmIterations; ++iter) {
        c0 = estimate_component(values, assign, 0);
        c1 = estimate_component(values, assign, 1);

        // A component emptied in the previous M-step: re-seed it with the
        // member farthest from the other component's mean.
        if (c0.count == 0 || c1.count == 0) {
            const std::uint8_t empty = c0.count == 0 ? 0 : 1;
            const double other_mu = empty == 0 ? c1.mu : c0.mu;
            std::size_t far_j = 0;
            double far_d = -1.0;
            for (std::size_t j = 0; j < m; ++j) {
                const double d = std::abs(values[j].score - other_mu);
                if (d > far_d) {
                    far_d = d;
                    far_j = j;
                }
            }
            assign[far_j] = empty;
            c0 = estimate_component(values, assign, 0);
            c1 = estimate_component(values, assign, 1);
        }

        bool changed = false;
        for (std::size_t j = 0; j < m; ++j) {
            const double y = values[j].score;
            const std::uint8_t r = log_posterior(y, c0) >= log_posterior(y, c1) ? 0 : 1;
            if (r != assign[j]) {
                assign[j] = r;
                changed = true;
            }
        }
        est.iterations = iter;
        if (!changed) {
            est.converged = true;
            break;
        }
    }

    est.assignments = std::move(assign);
    est.mu0 = c0.mu;
    est.sigma0 = c0.sigma;
    est.beta0 = c0.beta;
    est.mu1 = c1.mu;
    est.sigma1 = c1.sigma;
    est.beta1 = c1.beta;
    return est;
}

NaemResult naem_update(int owner, const std::vector<int>& bag,
                       const std::vector<int>& sampled_s,
                       const std::vector<int>& sampled_c,
                       const std::vector<ScoredPeer>& scores) {
    if (!is_sorted_set(bag) || !is_sorted_set(sampled_s) || !is_sorted_set(sampled_c))
        throw ContractError("naem_update: id vectors must be sorted sets");
    if (contains(bag, owner)) throw ContractError("naem_update: owner inside bag");
    for (int id : sampled_s)
        if (!contains(bag, id))
            throw ContractError("naem_update: sampled S member " + std::to_string(id) +
                                " not in bag");
    for (int id : sampled_c) {
        if (id == owner) throw ContractError("naem_update: owner inside C");
        if (contains(bag, id))
            throw ContractError("naem_update: candidate " + std::to_string(id) +
                                " already in bag");
    }

    std::vector<int> members;
    members.reserve(sampled_s.size() + sampled_c.size());
    std::merge(sampled_s.begin(), sampled_s.end(), sampled_c.begin(),
               sampled_c.end(), std::back_inserter(members));

    std::unordered_map<int, double> by_id;
    by_id.reserve(scores.size());
    for (const auto& p : scores) by_id[p.peer_id] = p.score;

    std::vector<ScoredPeer> values;
    values.reserve(members.size());
    std::vector<std::uint8_t> init;
    init.reserve(members.size());
    for (int id : members) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw ContractError("naem_update: missing score for member " +
                                std::to_string(id));
        values.push_back({id, it->second});
        init.push_back(contains(sampled_s, id) ? 0 : 1);
    }

    NaemResult out;
    out.em = em_fit(values, std::move(init));

    // The true-neighbor component is the one with the higher mean; on a tie
    // the larger one wins (covers the single-component degenerate estimate).
    std::uint8_t true_comp;
    if (out.em.mu0 != out.em.mu1)
        true_comp = out.em.mu0 > out.em.mu1 ? 0 : 1;
    else
        true_comp = out.em.beta0 >= out.em.beta1 ? 0 : 1;

    std::vector<int> next = bag;
    next.erase(std::remove_if(next.begin(), next.end(),
                              [&](int id) { return contains(sampled_s, id); }),
               next.end());
    for (std::size_t j = 0; j < values.size(); ++j)
        if (out.em.assignments[j] == true_comp) next.push_back(values[j].peer_id);
    std::sort(next.begin(), next.end());
    next.erase(std::unique(next.begin(), next.end()), next.end());
    out.bag = std::move(next);
    return out;
}

PensFilterResult pens_stage2_threshold(
    const std::vector<std::pair<int, int>>& selection_counts, int threshold,
    int k) {
    for (const auto& [id, count] : selection_counts)
        if (count < 0)
            throw ContractError("pens_stage2_threshold: negative count for peer " +
                                std::to_string(id));

    PensFilterResult out;
    for (const auto& [id, count] : selection_counts)
        if (count > threshold) out.permanent.push_back(id);

    if (out.permanent.empty()) {
        out.fell_back = true;
        auto ranked = selection_counts;
        std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
            if (a.second != b.second) return a.second > b.second;
            return a.first < b.first;
        });
        if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
        for (const auto& [id, count] : ranked) out.permanent.push_back(id);
    }
    std::sort(out.permanent.begin(), out.permanent.end());
    return out;
}

}  // namespace panm::matching
