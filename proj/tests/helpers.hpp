#ifndef METAREC_TEST_HELPERS_HPP
#define METAREC_TEST_HELPERS_HPP

#include <cmath>
#include <random>
#include <vector>

#include "metarec/types.hpp"

namespace metarec::test {

inline std::mt19937& rng() {
    static std::mt19937 g(20240817);
    return g;
}

inline double urand(double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(rng());
}

inline void fill_random(std::vector<double>& v, double scale = 1.0) {
    for (double& e : v) e = scale * urand();
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// extended-precision dot product, for adjoint identity measurements where the
// quantity of interest is the operator mismatch, not summation rounding
inline double dotl(const std::vector<double>& a, const std::vector<double>& b) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) s += (long double)a[i] * b[i];
    return (double)s;
}

inline double rel_err(double got, double want) {
    return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace metarec::test

#endif
