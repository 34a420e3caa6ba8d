#pragma once
#include <vector>

#include "slg/growth.hpp"

namespace slg {

struct FjordReport {
    int driver = -1;
    double measured_width = 0.0;   // minimum wall-to-wall along the centerline
    double predicted_width = 0.0;  // median pi |c_{n,i}| over the same window
    double ratio = 0.0;
    double depth = 0.0;       // tip-to-mouth centerline length
    double alpha_tip = 0.0;   // harmonic-measure exponent at the fjord tip
};

struct AnalyzeReport {
    std::vector<FjordReport> fjords;
    double alpha_smooth = 0.0;  // exponent at a boundary point far from fjords
    double diameter = 0.0;      // cluster diameter L
};

// slope of log p(s,r) vs log r, p(s,r) = (measure of boundary samples within
// r); radii log-spaced in [r_lo, r_hi]. Samples carry harmonic-measure
// weights (angular half-gaps); the BoundaryGrid overload is uniform 1/m.
double harmonic_measure_exponent(const std::vector<cplx>& pts, const std::vector<double>& wts,
                                 cplx s, double r_lo, double r_hi);
double harmonic_measure_exponent(const BoundaryGrid& grid, cplx s, double r_lo, double r_hi);

// widths from the contour's nearest approach across the centerline (the
// recorded zeta trajectory); throws NoFjordDetected when no driver has
// developed parallel-wall geometry (depth > 5 widths)
AnalyzeReport analyze_fjords(const Trajectory& traj, int grid_m = 4096);

}  // namespace slg
