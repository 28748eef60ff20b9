#pragma once

#include <functional>

#include "panm/vecmath.hpp"

namespace panm::similarity {

// Model trajectory of one client: shared init, round-start, and post-training
// parameters.
struct TrajectorySnapshot {
    ParamVector w0;
    ParamVector w_prev;
    ParamVector w_cur;
};

inline constexpr double kLossFloor = 1e-8;

// Cosine of the angle between u and v; 0 when either norm is below 1e-12.
double cosine(const ParamVector& u, const ParamVector& v);

// Blend of last-round-update cosine and accumulated-update cosine:
// alpha * cos(w_cur - w_prev) + (1 - alpha) * cos(w_cur - w0).
double grad_similarity(const TrajectorySnapshot& a, const TrajectorySnapshot& b,
                       double alpha);

// Reciprocal of the evaluator's mean loss on the model, floored at 1e-8.
using LossEvaluator = std::function<double(const ParamVector&)>;
double loss_similarity(const ParamVector& model, const LossEvaluator& evaluator);

}  // namespace panm::similarity
