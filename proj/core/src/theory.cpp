#include "panm/theory.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <boost/multiprecision/cpp_int.hpp>

#include "panm/errors.hpp"

namespace panm::theory {

namespace {

using boost::multiprecision::cpp_int;

cpp_int binom(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    cpp_int r = 1;
    for (int i = 1; i <= k; ++i) {
        r *= n - k + i;
        r /= i;
    }
    return r;
}

double ratio(const cpp_int& num, const cpp_int& den) {
    return static_cast<double>(num.convert_to<long double>() /
                               den.convert_to<long double>());
}

}  // namespace

void BallSelectionSetting::validate() const {
    if (n < 2) throw ConfigError("ball selection: n must be at least 2, got " + std::to_string(n));
    if (a < 2 || a > n)
        throw ConfigError("ball selection: a must be in [2, n], got " + std::to_string(a));
    if (l < 1 || l > n - 1)
        throw ConfigError("ball selection: l must be in [1, n-1], got " + std::to_string(l));
    if (k < 1 || k > l)
        throw ConfigError("ball selection: k must be in [1, l], got " + std::to_string(k));
}

double prob_exact_white(int x, const BallSelectionSetting& s) {
    s.validate();
    if (x < 0 || x > s.l || x > s.a || s.l - x > s.n - s.a) return 0.0;
    return ratio(binom(s.a, x) * binom(s.n - s.a, s.l - x), binom(s.n, s.l));
}

double prob_at_least_white(int x, const BallSelectionSetting& s) {
    s.validate();
    if (x <= 0) return 1.0;
    double acc = 0.0;
    for (int j = x; j <= std::min(s.l, s.a); ++j) acc += prob_exact_white(j, s);
    return std::min(acc, 1.0);
}

std::vector<double> nsmc_prob_series(int t_max, const BallSelectionSetting& s) {
    s.validate();
    if (t_max < 1) throw ConfigError("nsmc_prob_series: t_max must be >= 1");

    std::vector<double> g(s.k);  // g[m] = P(draw has exactly m whites), m < k
    for (int m = 0; m < s.k; ++m) g[m] = prob_exact_white(m, s);
    std::vector<double> r(s.k + 1);  // r[j] = P(draw has >= j whites)
    for (int j = 1; j <= s.k; ++j) r[j] = prob_at_least_white(j, s);

    // p[j] = P(j more whites get collected within the remaining rounds).
    std::vector<double> p(s.k + 1), next(s.k + 1);
    for (int j = 1; j <= s.k; ++j) p[j] = r[j];

    std::vector<double> series;
    series.reserve(t_max);
    series.push_back(p[s.k]);
    for (int t = 2; t <= t_max; ++t) {
        for (int j = 1; j <= s.k; ++j) {
            double acc = r[j];
            for (int m = 0; m < j; ++m) acc += g[m] * p[j - m];
            double clamped = std::clamp(acc, 0.0, 1.0);
            assert(std::abs(clamped - acc) < 1e-9);
            next[j] = clamped;
        }
        p.swap(next);
        series.push_back(p[s.k]);
    }
    return series;
}

std::vector<double> pens_prob_series(int t_max, const BallSelectionSetting& s) {
    s.validate();
    if (t_max < 1) throw ConfigError("pens_prob_series: t_max must be >= 1");
    return std::vector<double>(t_max, prob_at_least_white(s.k, s));
}

std::vector<double> monte_carlo_selection_oracle(const BallSelectionSetting& s,
                                                 int t_max, std::int64_t trials,
                                                 std::uint64_t seed,
                                                 SelectionStrategy strategy) {
    s.validate();
    if (t_max < 1) throw ConfigError("monte_carlo_selection_oracle: t_max must be >= 1");
    if (trials < 1) throw ConfigError("monte_carlo_selection_oracle: trials must be >= 1");

    std::mt19937_64 rng(seed);
    std::vector<int> pool(s.n);
    std::iota(pool.begin(), pool.end(), 0);  // ids < a are white
    std::vector<std::int64_t> hits(t_max, 0);

    for (std::int64_t trial = 0; trial < trials; ++trial) {
        int collected = 0;
        for (int t = 0; t < t_max; ++t) {
            int whites = 0;
            for (int i = 0; i < s.l; ++i) {
                std::uniform_int_distribution<int> pick(i, s.n - 1);
                std::swap(pool[i], pool[pick(rng)]);
                if (pool[i] < s.a) ++whites;
            }
            if (strategy == SelectionStrategy::nsmc) {
                collected += whites;
                if (collected >= s.k) ++hits[t];
            } else {
                if (whites >= s.k) ++hits[t];
            }
        }
    }

    std::vector<double> freq(t_max);
    for (int t = 0; t < t_max; ++t)
        freq[t] = static_cast<double>(hits[t]) / static_cast<double>(trials);
    return freq;
}

void ErrorBoundParams::validate() const {
    if (!(mu > 0.0)) throw ConfigError("error bound: mu must be > 0");
    if (!(L >= mu)) throw ConfigError("error bound: L must be >= mu");
    if (!(eta > 0.0)) throw ConfigError("error bound: eta must be > 0");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw ConfigError("error bound: epsilon must be in [0, 1]");
    if (Delta < 0.0) throw ConfigError("error bound: Delta must be >= 0");
    if (v < 0.0) throw ConfigError("error bound: v must be >= 0");
    if (!(d > 0.0)) throw ConfigError("error bound: d must be > 0");
    if (!(k >= 1.0)) throw ConfigError("error bound: k must be >= 1");
    if (!(r >= 1.0)) throw ConfigError("error bound: r must be >= 1");
    if (delta0 < 0.0) throw ConfigError("error bound: delta0 must be >= 0");
}

double one_round_error_bound(const ErrorBoundParams& p, double current_gap) {
    p.validate();
    if (current_gap < 0.0) throw ConfigError("error bound: current_gap must be >= 0");
    if (p.epsilon >= 1.0)
        throw DomainError("one_round_error_bound: epsilon = 1 makes the bound diverge");
    const double eps = p.epsilon;
    const double contraction =
        1.0 - p.eta * p.mu * p.L * (1.0 - eps) / (p.mu + p.L) + p.eta * p.L * eps;
    return contraction * current_gap + p.eta * p.L * p.Delta * eps +
           (p.v / std::sqrt(p.d * p.k)) / std::sqrt(1.0 - eps) +
           p.eta * p.v * std::sqrt(p.r / (p.k * p.d)) * std::sqrt(eps);
}

double stage_one_error_bound(const ErrorBoundParams& p,
                             const BallSelectionSetting& s, int T) {
    ErrorBoundParams q = p;
    q.mu = p.L;        // this bound specializes mu = L
    q.eta = 1.0 / p.L; // and eta = 1/L
    q.epsilon = 0.0;
    q.validate();
    if (T < 1) throw ConfigError("stage_one_error_bound: T must be >= 1");

    const double eps0 = prob_at_least_white(s.k, s);
    if (eps0 >= 1.0)
        throw DomainError("stage_one_error_bound: epsilon_0 = 1 makes the bound diverge");

    const double first = (1.0 + 3.0 * eps0) / 2.0 * q.delta0 + eps0 * q.Delta +
                         q.v / std::sqrt(q.d * q.k * (1.0 - eps0)) +
                         (q.v / q.L) * std::sqrt(q.r * eps0 / (q.k * q.d));
    double bound = std::ldexp(first, -(T - 1));
    const double noise = q.v / std::sqrt(q.d * q.k);
    for (int t = 0; t <= T - 2; ++t) bound += std::ldexp(noise, -t);
    return bound;
}

}  // namespace panm::theory
