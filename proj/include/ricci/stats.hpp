#ifndef RICCI_STATS_HPP
#define RICCI_STATS_HPP

#include <cmath>
#include <limits>
#include <vector>

namespace ricci {

// Neumaier-compensated running sum.
class KahanSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct MeanSe {
    double mean = 0.0;
    double se = std::numeric_limits<double>::infinity();
    long n = 0;
};

/// Sample mean and standard error; se is infinite below two samples.
inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe out;
    out.n = static_cast<long>(xs.size());
    if (xs.empty()) {
        out.mean = std::numeric_limits<double>::quiet_NaN();
        return out;
    }
    KahanSum s;
    for (double x : xs) s.add(x);
    out.mean = s.value() / out.n;
    if (out.n < 2) return out;
    KahanSum q;
    for (double x : xs) q.add((x - out.mean) * (x - out.mean));
    out.se = std::sqrt(q.value() / (out.n - 1) / out.n);
    return out;
}

}  // namespace ricci

#endif
