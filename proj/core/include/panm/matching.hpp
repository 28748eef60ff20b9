#pragma once

#include <cstdint>
#include <vector>

namespace panm::matching {

struct ScoredPeer {
    int peer_id = -1;
    double score = 0.0;
};

inline constexpr double kSigmaFloor = 1e-6;
inline constexpr int kMaxEmIterations = 100;

struct GmmEstimate {
    std::vector<std::uint8_t> assignments;  // component index per member, 0 or 1
    double mu0 = 0.0, sigma0 = 0.0, beta0 = 0.0;
    double mu1 = 0.0, sigma1 = 0.0, beta1 = 0.0;
    int iterations = 0;
    bool converged = false;
};

// Top-k peers by score, ties broken by lower peer id. Returns fewer than k
// when fewer distinct peers are available; the caller flags that case.
std::vector<int> nsmc_select(int owner, std::vector<ScoredPeer> scored, int k);

// Two-component 1-D Gaussian mixture fitted by hard EM from the given initial
// assignment. Stops on an assignment fixpoint or after kMaxEmIterations.
GmmEstimate em_fit(const std::vector<ScoredPeer>& values,
                   std::vector<std::uint8_t> init);

struct NaemResult {
    std::vector<int> bag;  // sorted, the updated neighbor bag
    GmmEstimate em;
};

// One neighbor-augmentation step: fit the mixture over M = C u S (S seeded in
// one component, C in the other), call the higher-mean component true, and
// replace S by the true members. All id vectors are sorted sets.
NaemResult naem_update(int owner, const std::vector<int>& bag,
                       const std::vector<int>& sampled_s,
                       const std::vector<int>& sampled_c,
                       const std::vector<ScoredPeer>& scores);

struct PensFilterResult {
    std::vector<int> permanent;  // sorted
    bool fell_back = false;
};

// Peers selected strictly more often than `threshold` across stage 1. If none
// qualify, falls back to the top-k by count.
PensFilterResult pens_stage2_threshold(
    const std::vector<std::pair<int, int>>& selection_counts, int threshold,
    int k);

}  // namespace panm::matching
