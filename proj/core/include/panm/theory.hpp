#pragma once

#include <cstdint>
#include <vector>

namespace panm::theory {

// One neighbor-selection instance: n clients total, a of them (including the
// client itself) in the same cluster, l fresh candidates sampled per round,
// k neighbors kept.
struct BallSelectionSetting {
    int n = 0;
    int a = 0;
    int l = 0;
    int k = 0;

    // Throws ConfigError naming the offending field.
    void validate() const;
};

// Probability that a single uniform draw of l peers contains exactly x
// same-cluster peers.
double prob_exact_white(int x, const BallSelectionSetting& s);

// Probability that a single draw of l contains at least x same-cluster peers.
double prob_at_least_white(int x, const BallSelectionSetting& s);

// P(all k kept neighbors are same-cluster by round t), t = 1..t_max, under
// top-k reselection over fresh candidates plus carried neighbors.
std::vector<double> nsmc_prob_series(int t_max, const BallSelectionSetting& s);

// Same event under independent per-round draws (no carrying): constant series.
std::vector<double> pens_prob_series(int t_max, const BallSelectionSetting& s);

enum class SelectionStrategy { nsmc, pens };

// Simulates the selection process directly and reports per-round empirical
// all-true frequencies. Independent check on the analytic series.
std::vector<double> monte_carlo_selection_oracle(const BallSelectionSetting& s,
                                                 int t_max, std::int64_t trials,
                                                 std::uint64_t seed,
                                                 SelectionStrategy strategy);

struct ErrorBoundParams {
    double mu = 0.0;      // strong convexity
    double L = 0.0;       // smoothness, L >= mu > 0
    double eta = 0.0;     // step size
    double epsilon = 0.0; // expected fraction of false neighbors, in [0, 1)
    double Delta = 0.0;   // cross-cluster optimum separation bound
    double v = 0.0;       // gradient variance bound
    double d = 0.0;       // local sample count
    double k = 0.0;       // neighbor count
    double r = 0.0;       // cluster count
    double delta0 = 0.0;  // initial distance bound (multi-round forms)

    void validate() const;
};

// Expected distance-to-optimum bound after one aggregation round, given the
// current expected gap.
double one_round_error_bound(const ErrorBoundParams& p, double current_gap);

// Distance bound after T rounds of candidate-pool selection, epsilon_0 taken
// as the single-draw failure probability of the setting. Specializes mu = L,
// eta = 1/L; only L is read from p (plus Delta, v, d, k, r, delta0).
double stage_one_error_bound(const ErrorBoundParams& p,
                             const BallSelectionSetting& s, int T);

}  // namespace panm::theory
