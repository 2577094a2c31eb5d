#include "adpanel/trend.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>

#include "adpanel/errors.hpp"

namespace adpanel {

namespace {

struct Line {
    double intercept = 0.0;
    double slope = 0.0;
    double slope_var_unscaled = 0.0;  // [(X'WX)^-1]_11
};

Line weighted_line(const std::vector<TrendPoint>& pts, const std::vector<double>& w) {
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        sw += w[k];
        sx += w[k] * pts[k].time;
        sy += w[k] * pts[k].estimate;
    }
    const double xbar = sx / sw;
    const double ybar = sy / sw;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        const double dx = pts[k].time - xbar;
        sxx += w[k] * dx * dx;
        sxy += w[k] * dx * (pts[k].estimate - ybar);
    }
    if (sxx <= 0.0) throw DataError("trend needs at least two distinct times");
    Line l;
    l.slope = sxy / sxx;
    l.intercept = ybar - l.slope * xbar;
    l.slope_var_unscaled = 1.0 / sxx;
    return l;
}

}  // namespace

TrendFit fit_trend(const std::vector<TrendPoint>& points) {
    if (points.size() < 2) throw DataError("trend needs at least two windows");
    const std::size_t k = points.size();
    TrendFit fit;
    fit.dof = static_cast<int>(k) - 2;

    const Line first = weighted_line(points, std::vector<double>(k, 1.0));
    if (fit.dof > 0) {
        double rss = 0.0;
        for (const auto& p : points) {
            const double r = p.estimate - first.intercept - first.slope * p.time;
            rss += r * r;
        }
        fit.residual_variance = rss / fit.dof;
    }

    std::vector<double> w(k);
    bool finite = true;
    for (std::size_t i = 0; i < k; ++i) {
        const double v = points[i].se * points[i].se + fit.residual_variance;
        finite = finite && v > 0.0;
        w[i] = v > 0.0 ? 1.0 / v : 0.0;
    }
    // Exact fit with zero standard errors: every weight would be infinite.
    if (!finite) std::fill(w.begin(), w.end(), 1.0);

    const Line second = weighted_line(points, w);
    fit.intercept = second.intercept;
    fit.slope = second.slope;
    fit.slope_se = finite ? std::sqrt(second.slope_var_unscaled) : 0.0;

    if (fit.dof < 1) {
        fit.t_stat = std::numeric_limits<double>::quiet_NaN();
        fit.p_value = std::numeric_limits<double>::quiet_NaN();
    } else if (fit.slope_se > 0.0) {
        fit.t_stat = fit.slope / fit.slope_se;
        const boost::math::students_t dist(fit.dof);
        fit.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(fit.t_stat)));
    } else {
        fit.t_stat = 0.0;
        fit.p_value = std::abs(fit.slope) < 1e-14 ? 1.0 : 0.0;
    }
    return fit;
}

}  // namespace adpanel
