#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "adpanel/crossfit.hpp"
#include "adpanel/dictionary.hpp"
#include "adpanel/panel.hpp"
#include "adpanel/solvers.hpp"

namespace adpanel {

enum class Method { DML, DMLIterative, LassoPlugIn, OLSLinear, OLSPoly };

inline constexpr Method kAllMethods[] = {Method::DML, Method::DMLIterative, Method::LassoPlugIn,
                                         Method::OLSLinear, Method::OLSPoly};

/// Table heading, e.g. "DML Iterative".
std::string method_label(Method m);
/// Command-line token, e.g. "DMLIterative".
std::string method_token(Method m);
/// Accepts tokens, labels and "LassoPlugIn"; throws ConfigError otherwise.
Method parse_method(const std::string& s);

/// ClusterSum: (1/N) sum_i (sum_t w (s_it - tau))^2, the usual cluster-robust form.
/// UnitMeanCross: squared deviations from tau plus twice the within-unit cross products
/// of deviations from the unit mean. Its cross terms are never positive, so it
/// understates the variance when units contribute more than one differenced row.
/// Both agree when every unit has a single differenced row.
enum class VarianceFormula { ClusterSum, UnitMeanCross };

std::string variance_formula_token(VarianceFormula f);
/// "cluster" or "unit-mean"; throws ConfigError otherwise.
VarianceFormula parse_variance_formula(const std::string& s);

std::vector<double> default_lasso_grid();
std::vector<double> default_riesz_grid();

struct EstimatorConfig {
    Method method = Method::DML;
    int n_folds = 5;
    std::vector<double> lasso_grid = default_lasso_grid();
    std::vector<double> riesz_grid = default_riesz_grid();
    std::uint64_t seed = 0;
    bool use_weights = true;
    double level = 0.95;
    int riesz_budget = 400;
    VarianceFormula variance = VarianceFormula::ClusterSum;
    SolverOptions solver{};

    void validate() const;
};

/// Per differenced observation scores; weights are normalized to mean 1.
struct ScoreTable {
    std::vector<std::size_t> unit;
    std::vector<std::int64_t> time;
    std::vector<int> fold;
    Eigen::VectorXd weight;
    Eigen::VectorXd score;

    std::size_t size() const { return unit.size(); }
    double weighted_mean() const;
    /// Weighted mean score of each unit, indexed by unit.
    std::vector<double> unit_means(std::size_t n_units) const;
};

struct VarianceResult {
    double raw = 0.0;       // before clamping
    double value = 0.0;     // max(raw, 0)
    bool clamped = false;
};

/// Cluster-robust variance of the mean score, divided by the number of rows. With
/// weights (normalized to mean 1) each deviation is multiplied by its row weight.
VarianceResult clustered_variance(const ScoreTable& scores, double tau_hat,
                                  VarianceFormula formula = VarianceFormula::ClusterSum);

struct EstimateReport {
    Method method = Method::DML;
    double tau_hat = 0.0;
    double variance = 0.0;
    double se = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
    double level = 0.95;
    double mse_gamma_in_sample = 0.0;
    double mse_gamma_cross_folds = 0.0;
    double r_lasso = 0.0;
    double r_riesz = 0.0;
    std::vector<int> nonzero_beta;   // per fold
    std::vector<int> nonzero_rho;    // per fold (empty for methods without a correction)
    std::size_t n_units = 0;
    std::size_t n_obs = 0;           // differenced rows
    std::size_t p = 0;               // dictionary terms
    bool converged = true;
    bool variance_clamped = false;
    VarianceFormula variance_formula = VarianceFormula::ClusterSum;
    std::vector<std::string> warnings;
    ScoreTable scores;
};

struct GridPoint {
    double penalty = 0.0;
    double loss = 0.0;
    bool converged = true;
};

struct TuneResult {
    double r_lasso = 0.0;
    double r_riesz = 0.0;
    std::vector<GridPoint> lasso_grid;   // descending penalty
    std::vector<GridPoint> riesz_grid;
};

/// Cross-fold selection of the Lasso and Riesz penalties:
///   L_gamma = (1/N) sum_heldout w (delta_gamma_hat - delta_y)^2
///   L_alpha = (1/N) sum_heldout w (-2 b_D' rho + (delta_b' rho)^2)
/// Ties go to the larger penalty. Throws SolverError if no candidate converges.
TuneResult tune(const PanelDataset& data, const DictionarySpec& dict_spec, const EstimatorConfig& config);
TuneResult tune_crossfit(const CrossFitData& cf, const EstimatorConfig& config);

/// Cross-fitted estimate for config.method.
EstimateReport estimate(const PanelDataset& data, const DictionarySpec& dict_spec, const EstimatorConfig& config);

/// Several methods on one dataset with a shared fold assignment, dictionary
/// expansion and tuning run. config.method is ignored.
std::vector<EstimateReport> estimate_methods(const PanelDataset& data, const DictionarySpec& dict_spec,
                                             const EstimatorConfig& config, const std::vector<Method>& methods);

struct Comparison {
    Method first = Method::DML;
    Method second = Method::DML;
    double difference = 0.0;   // tau(first) - tau(second)
    double se = 0.0;
    double z = 0.0;
    double p_value = 1.0;
};

/// Pairwise z-tests on differences using the row-wise score differences.
std::vector<Comparison> compare(const std::vector<EstimateReport>& reports);
Comparison compare_pair(const EstimateReport& a, const EstimateReport& b);

/// Two-sided standard normal quantile for a confidence level (0.95 -> 1.95996...).
double normal_critical_value(double level);
double normal_two_sided_p(double z);

nlohmann::ordered_json report_to_json(const EstimateReport& report, bool include_scores = true);
nlohmann::ordered_json comparison_to_json(const Comparison& c);

inline constexpr int kReportSchemaVersion = 1;

}  // namespace adpanel
