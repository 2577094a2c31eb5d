#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace adpanel {

/// One monomial of the raw variable vector. Factors are (variable index, power)
/// pairs sorted by variable index; an empty list is the intercept.
class BasisTerm {
public:
    using Factor = std::pair<int, int>;

    BasisTerm() = default;
    explicit BasisTerm(std::vector<Factor> factors);

    const std::vector<Factor>& factors() const { return factors_; }
    bool is_intercept() const { return factors_.empty(); }
    int power_of(int variable) const;
    int max_variable() const;

    double eval(std::span<const double> row) const;
    /// Partial derivative with respect to `variable`.
    double derivative(std::span<const double> row, int variable) const;

    std::string label(std::span<const std::string> names) const;

    friend bool operator==(const BasisTerm&, const BasisTerm&) = default;
    /// Canonical order: variable indices lexicographically, then powers.
    friend bool operator<(const BasisTerm& a, const BasisTerm& b);

private:
    std::vector<Factor> factors_;
};

enum class PairPolicy { None, TreatmentPairsOnly, AllPairs };

struct DictionarySpec {
    int max_degree = 3;
    PairPolicy pair_policy = PairPolicy::TreatmentPairsOnly;
    bool include_intercept = true;
};

/// Ordered set of basis terms over the raw vector (D, X1, ..., Xh).
/// The treatment is variable 0 for every dictionary built by `build_dictionary`.
class Dictionary {
public:
    Dictionary(DictionarySpec spec, std::vector<BasisTerm> terms, int n_variables,
               int treatment_index = 0);

    const DictionarySpec& spec() const { return spec_; }
    const std::vector<BasisTerm>& terms() const { return terms_; }
    std::size_t size() const { return terms_.size(); }
    int n_variables() const { return n_variables_; }
    int treatment_index() const { return treatment_index_; }

    Eigen::VectorXd eval(std::span<const double> row) const;
    Eigen::VectorXd eval_derivative(std::span<const double> row) const;

    /// Writes eval/eval_derivative into preallocated outputs (no allocation).
    void eval_into(std::span<const double> row, Eigen::Ref<Eigen::VectorXd> out) const;
    void eval_derivative_into(std::span<const double> row,
                              Eigen::Ref<Eigen::VectorXd> out) const;

    std::vector<std::string> labels(std::span<const std::string> names) const;

private:
    void check_row(std::span<const double> row) const;

    DictionarySpec spec_;
    std::vector<BasisTerm> terms_;
    int n_variables_;
    int treatment_index_;
};

/// Powers 1..max_degree of every variable, plus v^a * w^b (a, b in 1..max_degree)
/// for each qualifying pair. With TreatmentPairsOnly only (D, Xj) pairs qualify.
Dictionary build_dictionary(const DictionarySpec& spec, int n_covariates);

/// Closed-form term count of `build_dictionary(spec, n_covariates)`.
std::size_t dictionary_size(const DictionarySpec& spec, int n_covariates);

inline constexpr double kInactiveSdTolerance = 1e-12;

struct StandardizationStats {
    Eigen::VectorXd means;
    Eigen::VectorXd sds;
    std::vector<bool> active;

    std::size_t size() const { return static_cast<std::size_t>(means.size()); }
    std::vector<int> active_indices() const;
};

/// Column means and sample SDs of `features` (rows = observations). With weights,
/// both are weighted by the normalized weights and the variance keeps the n/(n-1)
/// correction so unit weights reproduce the unweighted statistics.
StandardizationStats fit_standardization(const Eigen::MatrixXd& features,
                                         const std::optional<Eigen::VectorXd>& weights = {});

/// (b - mu) / sigma on active columns, 0 on inactive ones.
Eigen::VectorXd standardize(const StandardizationStats& stats, const Eigen::VectorXd& features);
/// Inverse of `standardize` on active columns; inactive columns come back as their mean.
Eigen::VectorXd destandardize(const StandardizationStats& stats, const Eigen::VectorXd& standardized);

enum class DerivativeMode { Simple, FullCorrection };

/// Derivative of the standardized basis in the treatment.
/// Simple: b_D / sigma. FullCorrection also differentiates the sample mean and SD
/// through the row itself, which multiplies by (n-1)/n - (b-mu)^2 / ((n-1) sigma^2).
Eigen::VectorXd standardized_derivative(const Dictionary& dict, const StandardizationStats& stats,
                                        std::span<const double> row,
                                        DerivativeMode mode = DerivativeMode::Simple,
                                        std::size_t n = 0);

}  // namespace adpanel
