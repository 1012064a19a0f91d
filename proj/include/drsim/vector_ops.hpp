#pragma once

// Dense vector helpers. Every vector in the library is node-indexed (length N)
// or, for primal-dual stacks, length N + 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "drsim/errors.hpp"

namespace drsim {

using Vector = std::vector<double>;
using ConstSpan = std::span<const double>;

inline void require_same_length(std::size_t expected, std::size_t got, const char* what) {
    if (expected != got) {
        throw SchemaError(std::string(what) + ": expected length " + std::to_string(expected) +
                          ", got " + std::to_string(got));
    }
}

inline double dot(ConstSpan a, ConstSpan b) {
    require_same_length(a.size(), b.size(), "dot");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline double norm2(ConstSpan a) { return std::sqrt(dot(a, a)); }

inline double distance(ConstSpan a, ConstSpan b) {
    require_same_length(a.size(), b.size(), "distance");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

inline double sum(ConstSpan a) { return std::accumulate(a.begin(), a.end(), 0.0); }

inline double min_element(ConstSpan a) { return a.empty() ? 0.0 : *std::min_element(a.begin(), a.end()); }

inline double max_abs(ConstSpan a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

inline bool all_finite(ConstSpan a) {
    return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

inline Vector filled(std::size_t n, double value) { return Vector(n, value); }

inline Vector scaled(ConstSpan a, double k) {
    Vector out(a.begin(), a.end());
    for (double& v : out) v *= k;
    return out;
}

inline Vector difference(ConstSpan a, ConstSpan b) {
    require_same_length(a.size(), b.size(), "difference");
    Vector out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

}  // namespace drsim
