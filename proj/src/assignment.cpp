#include "ricci/harness.hpp"

#include <cmath>
#include <limits>

namespace ricci {

EmpiricalCoupling optimal_assignment(const Eigen::MatrixXd& costs) {
    const int n = static_cast<int>(costs.rows());
    if (costs.cols() != n) throw std::invalid_argument("optimal_assignment: cost matrix must be square");
    if (n > 1024) throw std::invalid_argument("optimal_assignment: at most 1024 points");
    if (!costs.allFinite()) throw std::invalid_argument("optimal_assignment: non-finite cost entry");
    EmpiricalCoupling out;
    out.n = n;
    if (n == 0) {
        out.certified = true;
        return out;
    }
    const double inf = std::numeric_limits<double>::infinity();
    // 1-based arrays; column 0 is the virtual root of each augmenting tree.
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> match(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        match[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = costs(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    out.permutation.assign(n, -1);
    for (int j = 1; j <= n; ++j) out.permutation[match[j] - 1] = j - 1;
    KahanSum total;
    for (int i = 0; i < n; ++i) total.add(costs(i, out.permutation[i]));
    out.cost = total.value() / n;
    out.u.assign(u.begin() + 1, u.end());
    out.v.assign(v.begin() + 1, v.end());
    out.certified = certify_assignment(costs, out);
    return out;
}

bool certify_assignment(const Eigen::MatrixXd& costs, const EmpiricalCoupling& c, double tol) {
    const int n = c.n;
    if (costs.rows() != n || costs.cols() != n) return false;
    if (static_cast<int>(c.permutation.size()) != n || static_cast<int>(c.u.size()) != n ||
        static_cast<int>(c.v.size()) != n)
        return false;
    std::vector<char> hit(n, 0);
    for (int p : c.permutation) {
        if (p < 0 || p >= n || hit[p]) return false;
        hit[p] = 1;
    }
    const double scale = 1.0 + (n > 0 ? costs.cwiseAbs().maxCoeff() : 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j)
            if (c.u[i] + c.v[j] > costs(i, j) + tol * scale) return false;
        if (std::abs(c.u[i] + c.v[c.permutation[i]] - costs(i, c.permutation[i])) > tol * scale) return false;
    }
    return true;
}

}  // namespace ricci
