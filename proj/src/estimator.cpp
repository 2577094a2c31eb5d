#include "adpanel/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>

#include <boost/math/distributions/normal.hpp>

#include "adpanel/errors.hpp"

namespace adpanel {

std::string method_label(Method m) {
    switch (m) {
        case Method::DML: return "DML";
        case Method::DMLIterative: return "DML Iterative";
        case Method::LassoPlugIn: return "Lasso";
        case Method::OLSLinear: return "OLS Linear";
        case Method::OLSPoly: return "OLS Poly";
    }
    return "?";
}

std::string method_token(Method m) {
    switch (m) {
        case Method::DML: return "DML";
        case Method::DMLIterative: return "DMLIterative";
        case Method::LassoPlugIn: return "Lasso";
        case Method::OLSLinear: return "OLSLinear";
        case Method::OLSPoly: return "OLSPoly";
    }
    return "?";
}

Method parse_method(const std::string& s) {
    for (Method m : kAllMethods) {
        if (s == method_token(m) || s == method_label(m)) return m;
    }
    if (s == "LassoPlugIn") return Method::LassoPlugIn;
    throw ConfigError("unknown method '" + s + "' (expected DML, DMLIterative, Lasso, OLSLinear or OLSPoly)");
}

std::vector<double> default_lasso_grid() { return {1.0, 0.5, 0.2, 0.1, 0.05, 0.02, 0.01}; }
std::vector<double> default_riesz_grid() { return {2.0, 1.0, 0.5, 0.2, 0.1}; }

void EstimatorConfig::validate() const {
    if (n_folds < 2) throw ConfigError("folds must be >= 2");
    if (lasso_grid.empty() || riesz_grid.empty()) throw ConfigError("penalty grids must be non-empty");
    for (double v : lasso_grid) {
        if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("lasso penalties must be finite and >= 0");
    }
    for (double v : riesz_grid) {
        if (!(v >= 0) || !std::isfinite(v)) throw ConfigError("Riesz penalties must be finite and >= 0");
    }
    if (!(level > 0 && level < 1)) throw ConfigError("confidence level must lie in (0, 1)");
    if (riesz_budget < 1) throw ConfigError("Riesz iteration budget must be >= 1");
    if (!(solver.tol > 0)) throw ConfigError("solver tolerance must be positive");
    if (solver.max_iter < 1) throw ConfigError("solver max_iter must be >= 1");
}

double ScoreTable::weighted_mean() const {
    return weight.dot(score) / weight.sum();
}

std::vector<double> ScoreTable::unit_means(std::size_t n_units) const {
    std::vector<double> num(n_units, 0.0), den(n_units, 0.0);
    for (std::size_t r = 0; r < size(); ++r) {
        const auto rr = static_cast<Eigen::Index>(r);
        num[unit[r]] += weight[rr] * score[rr];
        den[unit[r]] += weight[rr];
    }
    for (std::size_t u = 0; u < n_units; ++u) num[u] = den[u] > 0 ? num[u] / den[u] : 0.0;
    return num;
}

std::string variance_formula_token(VarianceFormula f) {
    return f == VarianceFormula::ClusterSum ? "cluster" : "unit-mean";
}

VarianceFormula parse_variance_formula(const std::string& s) {
    if (s == "cluster") return VarianceFormula::ClusterSum;
    if (s == "unit-mean") return VarianceFormula::UnitMeanCross;
    throw ConfigError("unknown variance formula '" + s + "' (expected cluster or unit-mean)");
}

VarianceResult clustered_variance(const ScoreTable& scores, double tau_hat, VarianceFormula formula) {
    const std::size_t n = scores.size();
    if (n == 0) throw DataError("variance of an empty score table");
    const Eigen::VectorXd w = scores.weight * (static_cast<double>(n) / scores.weight.sum());

    std::map<std::size_t, std::vector<std::size_t>> by_unit;
    for (std::size_t r = 0; r < n; ++r) by_unit[scores.unit[r]].push_back(r);

    double total = 0.0;
    for (const auto& [unit, rows] : by_unit) {
        double wsum = 0.0, wsc = 0.0;
        for (std::size_t r : rows) {
            const auto rr = static_cast<Eigen::Index>(r);
            wsum += w[rr];
            wsc += w[rr] * scores.score[rr];
        }
        const double unit_mean = wsc / wsum;
        double sq = 0.0, dev_sum = 0.0;
        double cross_sum = 0.0, cross_sq = 0.0;
        for (std::size_t r : rows) {
            const auto rr = static_cast<Eigen::Index>(r);
            const double a = w[rr] * (scores.score[rr] - tau_hat);
            const double e = w[rr] * (scores.score[rr] - unit_mean);
            sq += a * a;
            dev_sum += a;
            cross_sum += e;
            cross_sq += e * e;
        }
        if (formula == VarianceFormula::ClusterSum) {
            total += rows.size() > 1 ? dev_sum * dev_sum : sq;
        } else {
            // 2 * sum_{t < t'} e_t e_t' = (sum e)^2 - sum e^2
            total += sq + (rows.size() > 1 ? cross_sum * cross_sum - cross_sq : 0.0);
        }
    }
    VarianceResult v;
    v.raw = total / static_cast<double>(n);
    v.clamped = v.raw < 0.0;
    v.value = std::max(v.raw, 0.0);
    return v;
}

double normal_critical_value(double level) {
    const boost::math::normal_distribution<double> z;
    return boost::math::quantile(z, 1.0 - (1.0 - level) / 2.0);
}

double normal_two_sided_p(double z) {
    const boost::math::normal_distribution<double> nd;
    return 2.0 * boost::math::cdf(boost::math::complement(nd, std::abs(z)));
}

namespace {

int count_nonzero(const Eigen::VectorXd& v) {
    return static_cast<int>((v.array() != 0.0).count());
}

double weighted_sq_error(const Eigen::VectorXd& w, const Eigen::VectorXd& y, const Eigen::VectorXd& pred) {
    return (w.array() * (y - pred).array().square()).sum();
}

Eigen::VectorXd weights_of(const CrossFitData& cf, const std::vector<Eigen::Index>& rows) {
    return cf.row_weight(rows);
}

std::vector<double> sorted_desc(std::vector<double> grid) {
    std::sort(grid.begin(), grid.end(), std::greater<>());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

ScoreTable empty_scores(const CrossFitData& cf) {
    ScoreTable t;
    t.unit = cf.row_unit;
    t.time = cf.row_time;
    t.fold = cf.row_fold;
    t.weight = cf.row_weight;
    t.score = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cf.row_unit.size()));
    return t;
}

void finalize(EstimateReport& rep, const CrossFitData& cf, double level, VarianceFormula formula) {
    rep.tau_hat = rep.scores.weighted_mean();
    rep.variance_formula = formula;
    const VarianceResult v = clustered_variance(rep.scores, rep.tau_hat, formula);
    rep.variance = v.value;
    rep.variance_clamped = v.clamped;
    if (v.clamped) rep.warnings.push_back("negative variance estimate clamped to 0");
    rep.n_units = cf.n_units;
    rep.n_obs = rep.scores.size();
    rep.p = cf.p;
    rep.se = std::sqrt(rep.variance / static_cast<double>(rep.n_obs));
    const double z = normal_critical_value(level);
    rep.level = level;
    rep.ci_lower = rep.tau_hat - z * rep.se;
    rep.ci_upper = rep.tau_hat + z * rep.se;
    if (!rep.converged) rep.warnings.push_back("a nuisance solver hit its iteration limit");
}

/// Per-fold Lasso fits at one penalty, shared by the DML-family methods.
struct LassoFits {
    std::vector<SolverResult> folds;
    SolverResult full;
};

LassoFits fit_lasso_all(const CrossFitData& cf, double penalty, const SolverOptions& opts) {
    LassoFits fits;
    for (const auto& fd : cf.folds) fits.folds.push_back(solve_quadratic_l1(fd.gram, fd.cross, penalty, opts));
    fits.full = solve_quadratic_l1(cf.full.gram, cf.full.cross, penalty, opts);
    return fits;
}

EstimateReport run_dml_family(const CrossFitData& cf, Method method, const LassoFits& lasso, double r_lasso,
                              double r_riesz, const EstimatorConfig& config) {
    EstimateReport rep;
    rep.method = method;
    rep.r_lasso = r_lasso;
    rep.r_riesz = method == Method::LassoPlugIn ? 0.0 : r_riesz;
    rep.scores = empty_scores(cf);
    double sse_out = 0.0;
    for (std::size_t f = 0; f < cf.folds.size(); ++f) {
        const FoldData& fd = cf.folds[f];
        const SolverResult& beta = lasso.folds[f];
        rep.converged = rep.converged && beta.converged;
        rep.nonzero_beta.push_back(count_nonzero(beta.coefficients));

        const Eigen::VectorXd pred = fd.test_x * beta.coefficients;
        Eigen::VectorXd s = fd.test_deriv * beta.coefficients;
        if (method != Method::LassoPlugIn) {
            SolverResult rho;
            if (method == Method::DML) {
                rho = solve_quadratic_l1(fd.gram, fd.m, r_riesz, config.solver);
                rep.converged = rep.converged && rho.converged;
            } else {
                rho = riesz_fit_iterative(RieszProblem{fd.m, fd.gram, r_riesz}, config.riesz_budget);
            }
            rep.nonzero_rho.push_back(count_nonzero(rho.coefficients));
            s.array() += (fd.test_x * rho.coefficients).array() * (fd.test_y - pred).array();
        }
        rep.scores.score(fd.heldout_rows) = s;
        sse_out += weighted_sq_error(weights_of(cf, fd.heldout_rows), fd.test_y, pred);
    }
    const auto n = static_cast<double>(rep.scores.size());
    rep.mse_gamma_cross_folds = sse_out / n;
    rep.mse_gamma_in_sample =
        weighted_sq_error(cf.full.train_w, cf.full.train_y, cf.full.train_x * lasso.full.coefficients) / n;
    finalize(rep, cf, config.level, config.variance);
    return rep;
}

/// OLS baseline: fitted on the full sample; the score adds the unpenalized Riesz
/// correction, which sums to zero in-sample (normal equations) but makes the
/// clustered variance the delta-method variance of the OLS average derivative.
EstimateReport run_ols(const CrossFitData& cf, Method method, const EstimatorConfig& config) {
    EstimateReport rep;
    rep.method = method;
    rep.scores = empty_scores(cf);
    const FoldData& full = cf.full;
    const OlsResult fit = ols_fit(full.train_x, full.train_y, full.train_w);
    for (const auto& w : fit.warnings) rep.warnings.push_back(w);

    std::vector<Eigen::Index> kept;
    for (Eigen::Index j = 0; j < full.train_x.cols(); ++j) {
        if (!std::binary_search(fit.dropped.begin(), fit.dropped.end(), j)) kept.push_back(j);
    }
    Eigen::VectorXd rho = Eigen::VectorXd::Zero(full.train_x.cols());
    if (!kept.empty()) {
        const Eigen::MatrixXd q = full.gram(kept, kept);
        const Eigen::VectorXd m = full.m(kept);
        const Eigen::VectorXd sol = q.ldlt().solve(m);
        rho(kept) = sol;
    }
    const Eigen::VectorXd pred = full.train_x * fit.coefficients;
    rep.scores.score = full.train_deriv * fit.coefficients;
    rep.scores.score.array() += (full.train_x * rho).array() * (full.train_y - pred).array();
    const auto n = static_cast<double>(rep.scores.size());
    rep.mse_gamma_in_sample = weighted_sq_error(full.train_w, full.train_y, pred) / n;

    double sse_out = 0.0;
    for (const auto& fd : cf.folds) {
        const OlsResult ff = ols_fit(fd.train_x, fd.train_y, fd.train_w);
        rep.nonzero_beta.push_back(count_nonzero(ff.coefficients));
        sse_out += weighted_sq_error(weights_of(cf, fd.heldout_rows), fd.test_y, fd.test_x * ff.coefficients);
    }
    rep.mse_gamma_cross_folds = sse_out / n;
    finalize(rep, cf, config.level, config.variance);
    return rep;
}

PanelDataset effective_panel(const PanelDataset& data, const EstimatorConfig& config) {
    if (config.use_weights || !data.has_weights()) return data;
    PanelDataset p = data.with_weights(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(data.n_obs())));
    return p;
}

bool needs_lasso(Method m) {
    return m == Method::DML || m == Method::DMLIterative || m == Method::LassoPlugIn;
}

}  // namespace

TuneResult tune_crossfit(const CrossFitData& cf, const EstimatorConfig& config) {
    config.validate();
    TuneResult out;
    const auto n = static_cast<double>(cf.row_unit.size());

    const auto lasso_grid = sorted_desc(config.lasso_grid);
    if (lasso_grid.size() == 1) {
        out.r_lasso = lasso_grid.front();
    } else {
        std::vector<std::optional<Eigen::VectorXd>> warm(cf.folds.size());
        double best = std::numeric_limits<double>::infinity();
        bool any = false;
        for (double r : lasso_grid) {
            GridPoint gp{r, 0.0, true};
            for (std::size_t f = 0; f < cf.folds.size(); ++f) {
                const FoldData& fd = cf.folds[f];
                const SolverResult b = solve_quadratic_l1(fd.gram, fd.cross, r, config.solver, warm[f]);
                warm[f] = b.coefficients;
                gp.converged = gp.converged && b.converged;
                gp.loss += weighted_sq_error(weights_of(cf, fd.heldout_rows), fd.test_y, fd.test_x * b.coefficients);
            }
            gp.loss /= n;
            out.lasso_grid.push_back(gp);
            if (gp.converged && gp.loss < best) {
                best = gp.loss;
                out.r_lasso = r;
                any = true;
            }
        }
        if (!any) throw SolverError("no Lasso penalty candidate converged");
    }

    const auto riesz_grid = sorted_desc(config.riesz_grid);
    if (riesz_grid.size() == 1) {
        out.r_riesz = riesz_grid.front();
    } else {
        std::vector<std::optional<Eigen::VectorXd>> warm(cf.folds.size());
        double best = std::numeric_limits<double>::infinity();
        bool any = false;
        for (double r : riesz_grid) {
            GridPoint gp{r, 0.0, true};
            for (std::size_t f = 0; f < cf.folds.size() && gp.converged; ++f) {
                const FoldData& fd = cf.folds[f];
                try {
                    const SolverResult rho = solve_quadratic_l1(fd.gram, fd.m, r, config.solver, warm[f]);
                    warm[f] = rho.coefficients;
                    gp.converged = gp.converged && rho.converged;
                    const Eigen::VectorXd alpha = fd.test_x * rho.coefficients;
                    const Eigen::VectorXd w = weights_of(cf, fd.heldout_rows);
                    gp.loss += (w.array() * (-2.0 * (fd.test_deriv * rho.coefficients).array() + alpha.array().square())).sum();
                } catch (const SolverError&) {
                    gp.converged = false;
                }
            }
            gp.loss = gp.converged ? gp.loss / n : std::numeric_limits<double>::quiet_NaN();
            out.riesz_grid.push_back(gp);
            if (gp.converged && gp.loss < best) {
                best = gp.loss;
                out.r_riesz = r;
                any = true;
            }
        }
        if (!any) throw SolverError("no Riesz penalty candidate converged");
    }
    return out;
}

TuneResult tune(const PanelDataset& data, const DictionarySpec& dict_spec, const EstimatorConfig& config) {
    config.validate();
    const PanelDataset panel = effective_panel(data, config);
    const Dictionary dict = build_dictionary(dict_spec, panel.n_covariates());
    const FoldAssignment folds = assign_folds(panel, config.n_folds, config.seed);
    return tune_crossfit(prepare_crossfit(panel, dict, folds), config);
}

std::vector<EstimateReport> estimate_methods(const PanelDataset& data, const DictionarySpec& dict_spec,
                                             const EstimatorConfig& config, const std::vector<Method>& methods) {
    config.validate();
    const PanelDataset panel = effective_panel(data, config);
    const FoldAssignment folds = assign_folds(panel, config.n_folds, config.seed);

    const bool any_flexible = std::any_of(methods.begin(), methods.end(),
                                          [](Method m) { return m != Method::OLSLinear; });
    const bool any_lasso = std::any_of(methods.begin(), methods.end(), needs_lasso);
    const bool any_linear = std::find(methods.begin(), methods.end(), Method::OLSLinear) != methods.end();

    std::optional<CrossFitData> cf;
    if (any_flexible) cf = prepare_crossfit(panel, build_dictionary(dict_spec, panel.n_covariates()), folds);
    std::optional<CrossFitData> cf_linear;
    if (any_linear) {
        const DictionarySpec linear{1, PairPolicy::None, true};
        cf_linear = prepare_crossfit(panel, build_dictionary(linear, panel.n_covariates()), folds);
    }

    std::optional<TuneResult> tuned;
    std::optional<LassoFits> lasso;
    if (any_lasso) {
        tuned = tune_crossfit(*cf, config);
        lasso = fit_lasso_all(*cf, tuned->r_lasso, config.solver);
    }

    std::vector<EstimateReport> out;
    for (Method m : methods) {
        switch (m) {
            case Method::DML:
            case Method::DMLIterative:
            case Method::LassoPlugIn:
                out.push_back(run_dml_family(*cf, m, *lasso, tuned->r_lasso, tuned->r_riesz, config));
                break;
            case Method::OLSLinear:
                out.push_back(run_ols(*cf_linear, m, config));
                break;
            case Method::OLSPoly:
                out.push_back(run_ols(*cf, m, config));
                break;
        }
    }
    return out;
}

EstimateReport estimate(const PanelDataset& data, const DictionarySpec& dict_spec, const EstimatorConfig& config) {
    return estimate_methods(data, dict_spec, config, {config.method}).front();
}

Comparison compare_pair(const EstimateReport& a, const EstimateReport& b) {
    const ScoreTable& sa = a.scores;
    const ScoreTable& sb = b.scores;
    if (sa.size() != sb.size() || sa.unit != sb.unit || sa.time != sb.time) {
        throw DataError("reports '" + method_label(a.method) + "' and '" + method_label(b.method) +
                        "' were computed on different observation sets");
    }
    ScoreTable diff = sa;
    diff.score = sa.score - sb.score;
    Comparison c;
    c.first = a.method;
    c.second = b.method;
    c.difference = diff.weighted_mean();
    const VarianceResult v = clustered_variance(diff, c.difference, a.variance_formula);
    c.se = std::sqrt(v.value / static_cast<double>(diff.size()));
    if (c.se > 0.0) {
        c.z = c.difference / c.se;
        c.p_value = normal_two_sided_p(c.z);
    } else {
        c.z = 0.0;
        c.p_value = c.difference == 0.0 ? 1.0 : 0.0;
    }
    return c;
}

std::vector<Comparison> compare(const std::vector<EstimateReport>& reports) {
    if (reports.size() < 2) throw ConfigError("comparison needs at least two reports");
    std::vector<Comparison> out;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        for (std::size_t j = i + 1; j < reports.size(); ++j) out.push_back(compare_pair(reports[i], reports[j]));
    }
    return out;
}

nlohmann::ordered_json report_to_json(const EstimateReport& r, bool include_scores) {
    nlohmann::ordered_json j;
    j["schema_version"] = kReportSchemaVersion;
    j["method"] = method_token(r.method);
    j["tau_hat"] = r.tau_hat;
    j["variance"] = r.variance;
    j["se"] = r.se;
    j["ci"] = {{"level", r.level}, {"lower", r.ci_lower}, {"upper", r.ci_upper}};
    j["mse_gamma_in_sample"] = r.mse_gamma_in_sample;
    j["mse_gamma_cross_folds"] = r.mse_gamma_cross_folds;
    j["r_lasso"] = r.r_lasso;
    j["r_riesz"] = r.r_riesz;
    j["nonzero_beta"] = r.nonzero_beta;
    j["nonzero_rho"] = r.nonzero_rho;
    j["n_units"] = r.n_units;
    j["n_obs"] = r.n_obs;
    j["p"] = r.p;
    j["converged"] = r.converged;
    j["variance_clamped"] = r.variance_clamped;
    j["variance_formula"] = variance_formula_token(r.variance_formula);
    j["warnings"] = r.warnings;
    if (include_scores) {
        auto rows = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < r.scores.size(); ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            rows.push_back({{"unit", r.scores.unit[k]},
                            {"time", r.scores.time[k]},
                            {"fold", r.scores.fold[k]},
                            {"weight", r.scores.weight[kk]},
                            {"score", r.scores.score[kk]}});
        }
        j["scores"] = std::move(rows);
    }
    return j;
}

nlohmann::ordered_json comparison_to_json(const Comparison& c) {
    nlohmann::ordered_json j;
    j["first"] = method_token(c.first);
    j["second"] = method_token(c.second);
    j["difference"] = c.difference;
    j["se"] = c.se;
    j["z"] = c.z;
    j["p_value"] = c.p_value;
    return j;
}

}  // namespace adpanel
