#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "panm/errors.hpp"

namespace panm {

// Flat model parameter vector; every client in a run shares the dimension.
using ParamVector = std::vector<double>;

inline void require_same_dim(const ParamVector& u, const ParamVector& v,
                             const char* what) {
    if (u.size() != v.size())
        throw ContractError(std::string(what) + ": dimension mismatch");
}

inline double dot(const ParamVector& u, const ParamVector& v) {
    require_same_dim(u, v, "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * v[i];
    return acc;
}

inline double norm(const ParamVector& u) { return std::sqrt(dot(u, u)); }

inline ParamVector sub(const ParamVector& u, const ParamVector& v) {
    require_same_dim(u, v, "sub");
    ParamVector out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = u[i] - v[i];
    return out;
}

inline void add_in_place(ParamVector& u, const ParamVector& v) {
    require_same_dim(u, v, "add_in_place");
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += v[i];
}

inline void scale_in_place(ParamVector& u, double c) {
    for (double& x : u) x *= c;
}

inline double squared_distance(const ParamVector& u, const ParamVector& v) {
    require_same_dim(u, v, "squared_distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double d = u[i] - v[i];
        acc += d * d;
    }
    return acc;
}

}  // namespace panm
