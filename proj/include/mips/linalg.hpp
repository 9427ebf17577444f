#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>

namespace mips {

using Vector = std::span<const double>;

inline double dot(Vector a, Vector b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double squared_distance(Vector a, Vector b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return s;
}

inline double norm(Vector a) noexcept { return std::sqrt(dot(a, a)); }

inline double clamp_unit(double c) noexcept { return std::clamp(c, -1.0, 1.0); }

}  // namespace mips
