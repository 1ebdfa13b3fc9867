#ifndef RICCI_SRC_LGEO_INTERNAL_HPP
#define RICCI_SRC_LGEO_INTERNAL_HPP

#include "ricci/lgeo.hpp"

namespace ricci::detail {

struct ShotEnd {
    ChartPoint end;
    Vec velocity;
    double action = 0.0;
    bool ok = false;
};

// RK4 on the s-form geodesic equation; fills `record` when given.
ShotEnd integrate_lgeodesic(const FlowManifold& flow, const ChartPoint& x, double tau1, double tau2,
                            const Vec& p0, int grid, LCurve* record);

}  // namespace ricci::detail

#endif
