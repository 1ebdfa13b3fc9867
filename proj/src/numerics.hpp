#ifndef RICCI_SRC_NUMERICS_HPP
#define RICCI_SRC_NUMERICS_HPP

#include "ricci/stats.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace ricci::detail {

// Composite Simpson on uniform samples; an odd interval count closes with
// the 3/8 rule on the last three intervals.
inline double simpson(const std::vector<double>& f, double h) {
    const int n = static_cast<int>(f.size()) - 1;
    if (n < 1) return 0.0;
    if (n == 1) return 0.5 * h * (f[0] + f[1]);
    if (n == 2) return h / 3.0 * (f[0] + 4.0 * f[1] + f[2]);
    int m = n;
    double tail = 0.0;
    if (n % 2 == 1) {
        m = n - 3;
        tail = 3.0 * h / 8.0 * (f[m] + 3.0 * f[m + 1] + 3.0 * f[m + 2] + f[m + 3]);
    }
    double acc = f[0] + f[m];
    for (int k = 1; k < m; ++k) acc += (k % 2 == 1 ? 4.0 : 2.0) * f[k];
    return h / 3.0 * acc + tail;
}

template <class F>
double gauss_legendre(F&& f, double a, double b, int panels = 64) {
    static constexpr std::array<double, 4> x = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                                0.9602898564975363};
    static constexpr std::array<double, 4> w = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                                0.1012285362903763};
    const double h = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double c = a + (p + 0.5) * h;
        const double r = 0.5 * h;
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) acc += w[i] * (f(c - r * x[i]) + f(c + r * x[i]));
        total += r * acc;
    }
    return total;
}

using KahanSum = ricci::KahanSum;

}  // namespace ricci::detail

#endif
