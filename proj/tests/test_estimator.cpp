#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "adpanel/errors.hpp"
#include "adpanel/estimator.hpp"
#include "adpanel/simulation.hpp"
#include "support.hpp"

using namespace adpanel;
using testsupport::Gen;

namespace {

ScoreTable table(const std::vector<std::size_t>& unit, const std::vector<double>& score,
                 const std::vector<double>& weight = {}) {
    ScoreTable t;
    t.unit = unit;
    t.time.resize(unit.size());
    for (std::size_t k = 0; k < unit.size(); ++k) t.time[k] = static_cast<std::int64_t>(k);
    t.fold.assign(unit.size(), 0);
    t.score = Eigen::Map<const Eigen::VectorXd>(score.data(), static_cast<Eigen::Index>(score.size()));
    t.weight = weight.empty() ? Eigen::VectorXd::Ones(static_cast<Eigen::Index>(score.size()))
                              : Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(weight.data(), static_cast<Eigen::Index>(weight.size())));
    return t;
}

/// Straight transcription of the clustered variance with explicit pair loops.
double variance_by_pairs(const std::vector<std::size_t>& unit, const std::vector<double>& s, std::vector<double> w) {
    const std::size_t n = s.size();
    if (w.empty()) w.assign(n, 1.0);
    double wsum = 0;
    for (double v : w) wsum += v;
    for (double& v : w) v *= static_cast<double>(n) / wsum;
    double tau = 0;
    for (std::size_t k = 0; k < n; ++k) tau += w[k] * s[k];
    tau /= static_cast<double>(n);
    std::set<std::size_t> units(unit.begin(), unit.end());
    double total = 0;
    for (std::size_t u : units) {
        double num = 0, den = 0;
        for (std::size_t k = 0; k < n; ++k)
            if (unit[k] == u) num += w[k] * s[k], den += w[k];
        const double ubar = num / den;
        for (std::size_t k = 0; k < n; ++k) {
            if (unit[k] != u) continue;
            total += std::pow(w[k] * (s[k] - tau), 2);
            for (std::size_t l = k + 1; l < n; ++l) {
                if (unit[l] == u) total += 2.0 * w[k] * (s[k] - ubar) * w[l] * (s[l] - ubar);
            }
        }
    }
    return total / static_cast<double>(n);
}

/// (1/n) sum over units of the squared summed deviations.
double variance_by_unit_sums(const std::vector<std::size_t>& unit, const std::vector<double>& s) {
    const double tau = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    std::map<std::size_t, double> sums;
    for (std::size_t k = 0; k < s.size(); ++k) sums[unit[k]] += s[k] - tau;
    double total = 0;
    for (auto [u, v] : sums) total += v * v;
    return total / static_cast<double>(s.size());
}

EstimatorConfig fixed_config(double r_lasso, double r_riesz, int folds = 5) {
    EstimatorConfig c;
    c.lasso_grid = {r_lasso};
    c.riesz_grid = {r_riesz};
    c.n_folds = folds;
    c.seed = 17;
    return c;
}

}  // namespace

TEST_CASE("clustered variance special cases") {
    SUBCASE("one row per unit is the mean squared deviation under both formulas") {
        const std::vector<double> s{1.0, 4.0, 2.5, -1.0, 0.5};
        const auto t = table({0, 1, 2, 3, 4}, s);
        const double tau = t.weighted_mean();
        double msd = 0;
        for (double v : s) msd += (v - tau) * (v - tau);
        msd /= 5.0;
        CHECK(clustered_variance(t, tau).value == msd);
        CHECK(clustered_variance(t, tau, VarianceFormula::UnitMeanCross).value == msd);
    }
    SUBCASE("identical scores give zero") {
        const auto t = table({0, 0, 1, 1, 2, 2}, {3, 3, 3, 3, 3, 3});
        CHECK(clustered_variance(t, 3.0).value == 0.0);
        CHECK(clustered_variance(t, 3.0, VarianceFormula::UnitMeanCross).value == 0.0);
    }
    SUBCASE("three units with three differenced rows each, hand table") {
        const std::vector<std::size_t> u{0, 0, 0, 1, 1, 1, 2, 2, 2};
        const std::vector<double> s{1.0, 2.0, 4.0, -1.0, 0.0, 0.5, 3.0, 3.5, 1.0};
        const auto t = table(u, s);
        // tau = 14/9; unit sums 7, -1/2, 15/2; unit means 7/3, -1/6, 5/2
        const double tau = 14.0 / 9.0;
        CHECK(t.weighted_mean() == doctest::Approx(tau).epsilon(1e-14));
        double sq = 0;
        for (double v : s) sq += (v - tau) * (v - tau);
        auto cross = [](double a, double b, double c, double m) {
            return 2.0 * ((a - m) * (b - m) + (a - m) * (c - m) + (b - m) * (c - m));
        };
        const double unit_mean =
            (sq + cross(1, 2, 4, 7.0 / 3.0) + cross(-1, 0, 0.5, -1.0 / 6.0) + cross(3, 3.5, 1, 2.5)) / 9.0;
        const double cluster =
            (std::pow(7.0 - 3 * tau, 2) + std::pow(-0.5 - 3 * tau, 2) + std::pow(7.5 - 3 * tau, 2)) / 9.0;
        CHECK(clustered_variance(t, tau, VarianceFormula::UnitMeanCross).raw == doctest::Approx(unit_mean).epsilon(1e-13));
        CHECK(clustered_variance(t, tau, VarianceFormula::UnitMeanCross).raw ==
              doctest::Approx(variance_by_pairs(u, s, {})).epsilon(1e-13));
        CHECK(clustered_variance(t, tau).raw == doctest::Approx(cluster).epsilon(1e-13));
    }
    SUBCASE("weighted rows against direct transcriptions") {
        Gen g(12);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<std::size_t> u;
            std::vector<double> s, w;
            const int units = g.integer(2, 8);
            for (int i = 0; i < units; ++i) {
                const int rows = g.integer(1, 4);
                for (int r = 0; r < rows; ++r) {
                    u.push_back(static_cast<std::size_t>(i));
                    s.push_back(g.normal());
                    w.push_back(g.uniform(0.3, 3.0));
                }
            }
            const auto t = table(u, s, w);
            const double tau = t.weighted_mean();
            CHECK(clustered_variance(t, tau, VarianceFormula::UnitMeanCross).raw ==
                  doctest::Approx(variance_by_pairs(u, s, w)).epsilon(1e-12));
            double wsum = 0;
            for (double v : w) wsum += v;
            std::vector<double> unit_sum(static_cast<std::size_t>(units), 0.0);
            for (std::size_t k = 0; k < s.size(); ++k)
                unit_sum[u[k]] += w[k] * static_cast<double>(s.size()) / wsum * (s[k] - tau);
            double cl = 0;
            for (double v : unit_sum) cl += v * v;
            CHECK(clustered_variance(t, tau).raw == doctest::Approx(cl / static_cast<double>(s.size())).epsilon(1e-12));
        }
    }
    SUBCASE("unit-mean cross terms never add variance") {
        Gen g(13);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<std::size_t> u;
            std::vector<double> s;
            for (int i = 0; i < 6; ++i)
                for (int r = 0; r < 4; ++r) u.push_back(static_cast<std::size_t>(i)), s.push_back(g.normal());
            const auto t = table(u, s);
            const double tau = t.weighted_mean();
            double sq = 0;
            for (double v : s) sq += (v - tau) * (v - tau);
            CHECK(clustered_variance(t, tau, VarianceFormula::UnitMeanCross).raw <= sq / 24.0 + 1e-12);
        }
    }
    CHECK(parse_variance_formula("unit-mean") == VarianceFormula::UnitMeanCross);
    CHECK_THROWS_AS(parse_variance_formula("robust"), ConfigError);
}

TEST_CASE("two-unit example against a straight-line implementation") {
    // units A, B observed three times; dictionary {D, X}; no penalties
    Eigen::VectorXd y(6), d(6);
    Eigen::MatrixXd x(6, 1);
    y << 1.0, 2.5, 2.0, 0.0, 1.2, 3.1;
    d << 0.2, 0.9, 0.5, 1.0, 0.3, 1.4;
    x << 1.0, 0.4, 2.2, -0.5, 0.8, 0.1;
    const PanelDataset p = PanelDataset::from_columns({"A", "A", "A", "B", "B", "B"}, {1, 2, 3, 1, 2, 3}, y, d, x);
    const DictionarySpec spec{1, PairPolicy::None, false};
    EstimatorConfig cfg = fixed_config(0.0, 0.0, 2);
    cfg.solver.tol = 1e-13;

    const auto folds = assign_folds(p, 2, cfg.seed);
    double tau = 0.0;
    std::vector<double> scores;
    for (int held = 0; held < 2; ++held) {
        const std::size_t hu = folds.fold_of_unit[0] == held ? 0 : 1;
        const std::size_t tu = 1 - hu;
        auto idx = [&](std::size_t u, int t) { return static_cast<Eigen::Index>(3 * u + static_cast<std::size_t>(t)); };
        // training-unit mean and n-1 standard deviation of D and X levels
        double md = 0, mx = 0;
        for (int t = 0; t < 3; ++t) md += p.d()[idx(tu, t)] / 3, mx += p.x()(idx(tu, t), 0) / 3;
        double sd = 0, sx = 0;
        for (int t = 0; t < 3; ++t) {
            sd += std::pow(p.d()[idx(tu, t)] - md, 2) / 2;
            sx += std::pow(p.x()(idx(tu, t), 0) - mx, 2) / 2;
        }
        sd = std::sqrt(sd);
        sx = std::sqrt(sx);
        Eigen::Matrix2d xtx = Eigen::Matrix2d::Zero();
        Eigen::Vector2d xty = Eigen::Vector2d::Zero();
        for (int t = 1; t < 3; ++t) {
            const Eigen::Vector2d r((p.d()[idx(tu, t)] - p.d()[idx(tu, t - 1)]) / sd,
                                    (p.x()(idx(tu, t), 0) - p.x()(idx(tu, t - 1), 0)) / sx);
            xtx += r * r.transpose() / 2.0;
            xty += r * (p.y()[idx(tu, t)] - p.y()[idx(tu, t - 1)]) / 2.0;
        }
        const Eigen::Vector2d beta = xtx.inverse() * xty;
        const Eigen::Vector2d mvec(1.0 / sd, 0.0);  // mean standardized derivative
        const Eigen::Vector2d rho = xtx.inverse() * mvec;
        for (int t = 1; t < 3; ++t) {
            const Eigen::Vector2d r((p.d()[idx(hu, t)] - p.d()[idx(hu, t - 1)]) / sd,
                                    (p.x()(idx(hu, t), 0) - p.x()(idx(hu, t - 1), 0)) / sx);
            const double dy = p.y()[idx(hu, t)] - p.y()[idx(hu, t - 1)];
            const double s = beta[0] / sd + r.dot(rho) * (dy - r.dot(beta));
            scores.push_back(s);
            tau += s / 4.0;
        }
    }
    cfg.method = Method::DML;
    const auto rep = estimate(p, spec, cfg);
    CHECK(rep.n_obs == 4);
    CHECK(rep.p == 2);
    CHECK(rep.tau_hat == doctest::Approx(tau).epsilon(1e-8));
    std::vector<double> mine(rep.scores.score.data(), rep.scores.score.data() + 4);
    std::sort(mine.begin(), mine.end());
    std::sort(scores.begin(), scores.end());
    for (int k = 0; k < 4; ++k) CHECK(mine[static_cast<std::size_t>(k)] == doctest::Approx(scores[static_cast<std::size_t>(k)]).epsilon(1e-8));
    CHECK(rep.se == doctest::Approx(std::sqrt(rep.variance / 4.0)));
}

TEST_CASE("noiseless linear outcome is recovered by every method") {
    Gen g(13);
    PanelDataset p = testsupport::random_panel(g, 120, 2, 2, 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(p.n_obs()));
    for (std::size_t k = 0; k < p.n_obs(); ++k) {
        const auto kk = static_cast<Eigen::Index>(k);
        y[kk] = 2.0 * p.d()[kk] + 10.0 * static_cast<double>(p.unit_of()[k] % 7);
    }
    p = p.with_outcome(y);
    EstimatorConfig cfg = fixed_config(0.0, 0.1);
    cfg.solver.tol = 1e-12;
    const auto reps = estimate_methods(p, {3, PairPolicy::TreatmentPairsOnly, true}, cfg,
                                       {std::begin(kAllMethods), std::end(kAllMethods)});
    for (const auto& r : reps) {
        INFO(method_label(r.method));
        CHECK(std::abs(r.tau_hat - 2.0) < 1e-6);
    }
}

TEST_CASE("report invariants on random panels") {
    Gen g(14);
    for (int rep = 0; rep < 3; ++rep) {
        const PanelDataset p = testsupport::random_panel(g, 80, 2, 2, 4, true);
        const EstimatorConfig cfg = fixed_config(0.02, 0.5);
        const auto reps = estimate_methods(p, {}, cfg, {std::begin(kAllMethods), std::end(kAllMethods)});
        for (const auto& r : reps) {
            INFO(method_label(r.method));
            CHECK(r.tau_hat == doctest::Approx(r.scores.weighted_mean()).epsilon(1e-12));
            CHECK(std::abs(r.scores.weight.mean() - 1.0) < 1e-12);
            CHECK(r.ci_lower <= r.tau_hat);
            CHECK(r.ci_upper >= r.tau_hat);
            CHECK(r.se == doctest::Approx(std::sqrt(r.variance / static_cast<double>(r.n_obs))));
            CHECK(r.n_obs == p.n_differenced());
            CHECK(r.variance >= 0.0);
        }
    }
}

TEST_CASE("per-unit constants leave every report field unchanged") {
    Gen g(15);
    const PanelDataset p = testsupport::random_panel(g, 60, 2, 2, 4);
    Eigen::VectorXd shifted = p.y();
    for (std::size_t k = 0; k < p.n_obs(); ++k) {
        shifted[static_cast<Eigen::Index>(k)] += std::sin(static_cast<double>(p.unit_of()[k])) * 50.0;
    }
    const PanelDataset q = p.with_outcome(shifted);
    EstimatorConfig cfg;
    cfg.seed = 3;
    cfg.lasso_grid = {0.1, 0.03};
    cfg.riesz_grid = {1.0, 0.5};
    const std::vector<Method> all{std::begin(kAllMethods), std::end(kAllMethods)};
    const auto a = estimate_methods(p, {}, cfg, all);
    const auto b = estimate_methods(q, {}, cfg, all);
    for (std::size_t m = 0; m < a.size(); ++m) {
        CHECK(std::abs(a[m].tau_hat - b[m].tau_hat) < 1e-10);
        CHECK(std::abs(a[m].se - b[m].se) < 1e-10);
        CHECK(std::abs(a[m].mse_gamma_cross_folds - b[m].mse_gamma_cross_folds) < 1e-10);
        CHECK(std::abs(a[m].mse_gamma_in_sample - b[m].mse_gamma_in_sample) < 1e-10);
        CHECK(a[m].r_lasso == b[m].r_lasso);
        CHECK(a[m].r_riesz == b[m].r_riesz);
        CHECK(a[m].nonzero_beta == b[m].nonzero_beta);
        CHECK((a[m].scores.score - b[m].scores.score).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("cross-fitting uses only out-of-fold units") {
    Gen g(16);
    const PanelDataset p = testsupport::random_panel(g, 40, 2, 2, 3, true);
    const Dictionary dict = build_dictionary({}, 2);
    const auto folds = assign_folds(p, 4, 9);
    const CrossFitData cf = prepare_crossfit(p, dict, folds);
    const Eigen::MatrixXd levels = basis_matrix(p, dict);
    for (const auto& fd : cf.folds) {
        std::set<std::size_t> train(fd.training_units.begin(), fd.training_units.end());
        for (auto u : fd.heldout_units) {
            CHECK(train.count(u) == 0);
            CHECK(folds.fold_of_unit[u] == fd.fold);
        }
        CHECK(train.size() + fd.heldout_units.size() == p.n_units());
        for (auto r : fd.heldout_rows) CHECK(cf.row_fold[static_cast<std::size_t>(r)] == fd.fold);

        std::vector<Eigen::Index> obs;
        for (auto u : fd.training_units)
            for (auto k = p.unit_offsets()[u]; k < p.unit_offsets()[u + 1]; ++k) obs.push_back(static_cast<Eigen::Index>(k));
        const Eigen::VectorXd w = p.weights()(obs);
        const auto stats = fit_standardization(levels(obs, Eigen::all), w);
        CHECK((stats.means - fd.stats.means).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((stats.sds - fd.stats.sds).cwiseAbs().maxCoeff() < 1e-12);
    }

    // changing held-out outcomes of fold 0 leaves fold 0's training problem untouched
    Eigen::VectorXd y = p.y();
    for (std::size_t k = 0; k < p.n_obs(); ++k) {
        if (folds.fold_of_unit[p.unit_of()[k]] == 0) y[static_cast<Eigen::Index>(k)] += g.normal(0.0, 5.0);
    }
    const CrossFitData cf2 = prepare_crossfit(p.with_outcome(y), dict, folds);
    CHECK(cf2.folds[0].cross == cf.folds[0].cross);
    CHECK(cf2.folds[0].gram == cf.folds[0].gram);
    CHECK(cf2.folds[1].cross != cf.folds[1].cross);
}

TEST_CASE("tuning") {
    Gen g(18);
    const PanelDataset p = testsupport::random_panel(g, 100, 2, 2, 3);
    SUBCASE("singleton grids come back unchanged") {
        const auto t = tune(p, {}, fixed_config(0.123, 4.5));
        CHECK(t.r_lasso == 0.123);
        CHECK(t.r_riesz == 4.5);
    }
    SUBCASE("selected penalties minimize the recomputed cross-fold losses") {
        EstimatorConfig cfg = fixed_config(0, 0);
        cfg.lasso_grid = {0.001, 0.3, 0.01, 0.1, 0.03};
        cfg.riesz_grid = {2.0, 0.5, 0.1};
        cfg.solver.tol = 1e-11;
        const auto t = tune(p, {}, cfg);
        REQUIRE(t.lasso_grid.size() == 5);
        CHECK(t.lasso_grid.front().penalty == 0.3);  // evaluated in descending order

        const Dictionary dict = build_dictionary({}, 2);
        const CrossFitData cf = prepare_crossfit(p, dict, assign_folds(p, cfg.n_folds, cfg.seed));
        const auto n = static_cast<double>(cf.row_unit.size());
        // cold-start recomputation; unconverged candidates are excluded from selection
        std::map<double, double> lg, la;
        for (double r : cfg.lasso_grid) {
            double loss = 0;
            bool ok = true;
            for (const auto& fd : cf.folds) {
                const auto b = solve_quadratic_l1(fd.gram, fd.cross, r, cfg.solver);
                ok = ok && b.converged;
                const Eigen::VectorXd res = fd.test_y - fd.test_x * b.coefficients;
                loss += (cf.row_weight(fd.heldout_rows).array() * res.array().square()).sum();
            }
            if (ok) lg[r] = loss / n;
        }
        for (double r : cfg.riesz_grid) {
            double loss = 0;
            bool ok = true;
            for (const auto& fd : cf.folds) {
                const auto rho = solve_quadratic_l1(fd.gram, fd.m, r, cfg.solver);
                ok = ok && rho.converged;
                const Eigen::VectorXd a = fd.test_x * rho.coefficients;
                loss += (cf.row_weight(fd.heldout_rows).array() *
                         (-2.0 * (fd.test_deriv * rho.coefficients).array() + a.array().square())).sum();
            }
            if (ok) la[r] = loss / n;
        }
        REQUIRE(lg.size() >= 3);
        REQUIRE(la.size() >= 2);
        for (const auto& gp : t.lasso_grid) {
            if (gp.converged && lg.count(gp.penalty)) CHECK(gp.loss == doctest::Approx(lg[gp.penalty]).epsilon(1e-6));
        }
        for (const auto& gp : t.riesz_grid) {
            if (gp.converged && la.count(gp.penalty)) CHECK(gp.loss == doctest::Approx(la[gp.penalty]).epsilon(1e-6));
        }
        REQUIRE(lg.count(t.r_lasso) == 1);
        REQUIRE(la.count(t.r_riesz) == 1);
        for (auto [r, l] : lg) CHECK(lg[t.r_lasso] <= l + 1e-9);
        for (auto [r, l] : la) CHECK(la[t.r_riesz] <= l + 1e-9);
    }
    SUBCASE("ties go to the larger penalty") {
        EstimatorConfig cfg = fixed_config(0, 0);
        cfg.lasso_grid = {50.0, 80.0};   // both zero the coefficients
        cfg.riesz_grid = {900.0, 1000.0};
        const auto t = tune(p, {}, cfg);
        CHECK(t.lasso_grid[0].loss == t.lasso_grid[1].loss);
        CHECK(t.r_lasso == 80.0);
        CHECK(t.r_riesz == 1000.0);
    }
    SUBCASE("no convergent candidate is a solver error") {
        EstimatorConfig cfg = fixed_config(0, 0);
        cfg.lasso_grid = {0.001, 0.0001};
        cfg.solver.max_iter = 1;
        CHECK_THROWS_AS(tune(p, {}, cfg), SolverError);
    }
}

TEST_CASE("tuning on the synthetic design prefers a positive Lasso penalty") {
    DGPConfig dgp;
    dgp.seed = 99;
    const PanelDataset p = generate_dataset(dgp);
    EstimatorConfig cfg;
    cfg.seed = 5;
    cfg.lasso_grid = {0.5, 0.2, 0.05, 0.0};
    cfg.riesz_grid = {1.0};
    const auto t = tune(p, {}, cfg);
    CHECK(t.r_lasso > 0.0);
    double best = 1e300;
    for (const auto& gp : t.lasso_grid)
        if (gp.converged) best = std::min(best, gp.loss);
    // the unpenalized fit, computed exactly, overfits badly out of fold
    cfg.lasso_grid = {t.r_lasso};
    const auto ols = estimate_methods(p, {}, cfg, {Method::OLSPoly}).front();
    CHECK(ols.mse_gamma_cross_folds > 2.0 * best);
}

TEST_CASE("comparisons") {
    Gen g(19);
    const PanelDataset p = testsupport::random_panel(g, 80, 2, 2, 3);
    const auto reps = estimate_methods(p, {}, fixed_config(0.05, 0.5), {Method::DML, Method::LassoPlugIn, Method::OLSPoly});
    const auto same = compare_pair(reps[0], reps[0]);
    CHECK(same.difference == 0.0);
    CHECK(same.p_value == 1.0);

    const auto ab = compare_pair(reps[0], reps[1]);
    const auto ba = compare_pair(reps[1], reps[0]);
    CHECK(ab.z == doctest::Approx(-ba.z));
    CHECK(ab.p_value == doctest::Approx(ba.p_value));

    // direct computation from the score difference
    const Eigen::VectorXd diff = reps[0].scores.score - reps[1].scores.score;
    const double dbar = diff.mean();
    std::vector<double> dv(diff.data(), diff.data() + diff.size());
    const double v = variance_by_unit_sums(reps[0].scores.unit, dv);
    CHECK(ab.difference == doctest::Approx(dbar).epsilon(1e-12));
    CHECK(ab.se == doctest::Approx(std::sqrt(v / static_cast<double>(diff.size()))).epsilon(1e-10));
    CHECK(ab.p_value == doctest::Approx(std::erfc(std::abs(ab.z) / std::sqrt(2.0))).epsilon(1e-10));
    CHECK(compare(reps).size() == 3);

    EstimateReport other = reps[1];
    other.scores.unit.pop_back();
    CHECK_THROWS_AS(compare_pair(reps[0], other), DataError);
    CHECK_THROWS_AS(compare({reps[0]}), ConfigError);
}

TEST_CASE("configuration and solver failures") {
    Gen g(20);
    const PanelDataset p = testsupport::random_panel(g, 6, 1, 2, 2);
    CHECK_THROWS_AS(estimate(p, {}, fixed_config(0.1, 0.1, 7)), ConfigError);
    EstimatorConfig bad = fixed_config(0.1, 0.1);
    bad.level = 1.5;
    CHECK_THROWS_AS(estimate(p, {}, bad), ConfigError);
    bad = fixed_config(0.1, 0.1);
    bad.lasso_grid.clear();
    CHECK_THROWS_AS(estimate(p, {}, bad), ConfigError);

    const PanelDataset q = testsupport::random_panel(g, 60, 2, 2, 3);
    EstimatorConfig slow = fixed_config(0.0001, 0.01);
    slow.solver.max_iter = 2;
    const auto r = estimate(q, {}, slow);
    CHECK_FALSE(r.converged);
    CHECK_FALSE(r.warnings.empty());
    CHECK(std::isfinite(r.tau_hat));
}

TEST_CASE("json report") {
    Gen g(22);
    const PanelDataset p = testsupport::random_panel(g, 30, 1, 2, 3);
    const auto r = estimate(p, {}, fixed_config(0.05, 0.5));
    const auto j = report_to_json(r);
    CHECK(j["schema_version"] == kReportSchemaVersion);
    CHECK(j["method"] == "DML");
    CHECK(j["tau_hat"].get<double>() == r.tau_hat);
    CHECK(j["scores"].size() == r.n_obs);
    std::vector<std::string> keys;
    for (const auto& [k, v] : j.items()) keys.push_back(k);
    CHECK(keys.front() == "schema_version");
    CHECK(report_to_json(r, false).count("scores") == 0);
    CHECK(normal_critical_value(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));
}
