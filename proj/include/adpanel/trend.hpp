#pragma once

#include <vector>

namespace adpanel {

struct TrendPoint {
    double time = 0.0;
    double estimate = 0.0;
    double se = 0.0;
};

struct TrendFit {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_se = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;             // two-sided, Student t with K - 2 degrees of freedom
    double residual_variance = 0.0;   // first-pass OLS residual variance
    int dof = 0;
};

/// Linear trend of per-window estimates by weighted least squares. A first OLS pass
/// gives the residual variance s2; the second pass weights window k by 1/(se_k^2 + s2).
/// Needs at least two points; the p-value is NaN with fewer than three.
TrendFit fit_trend(const std::vector<TrendPoint>& points);

}  // namespace adpanel
