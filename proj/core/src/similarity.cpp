#include "panm/similarity.hpp"

#include <algorithm>
#include <cmath>

#include "panm/errors.hpp"

namespace panm::similarity {

double cosine(const ParamVector& u, const ParamVector& v) {
    require_same_dim(u, v, "cosine");
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu < 1e-12 || nv < 1e-12) return 0.0;
    return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double grad_similarity(const TrajectorySnapshot& a, const TrajectorySnapshot& b,
                       double alpha) {
    if (alpha < 0.0 || alpha > 1.0)
        throw ConfigError("grad_similarity: alpha must be in [0, 1]");
    const double cos_last = cosine(sub(a.w_cur, a.w_prev), sub(b.w_cur, b.w_prev));
    const double cos_accum = cosine(sub(a.w_cur, a.w0), sub(b.w_cur, b.w0));
    return alpha * cos_last + (1.0 - alpha) * cos_accum;
}

double loss_similarity(const ParamVector& model, const LossEvaluator& evaluator) {
    const double loss = evaluator(model);
    if (!std::isfinite(loss))
        throw EvaluationError("loss_similarity: evaluator returned non-finite loss");
    return 1.0 / std::max(loss, kLossFloor);
}

}  // namespace panm::similarity
