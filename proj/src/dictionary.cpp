#include "adpanel/dictionary.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "adpanel/errors.hpp"

namespace adpanel {

namespace {

double ipow(double x, int a) {
    double r = 1.0;
    for (int k = 0; k < a; ++k) r *= x;
    return r;
}

}  // namespace

BasisTerm::BasisTerm(std::vector<Factor> factors) : factors_(std::move(factors)) {
    std::sort(factors_.begin(), factors_.end());
    for (std::size_t k = 0; k < factors_.size(); ++k) {
        if (factors_[k].first < 0 || factors_[k].second < 1) {
            throw ConfigError("basis term factors need a variable index >= 0 and power >= 1");
        }
        if (k > 0 && factors_[k].first == factors_[k - 1].first) {
            throw ConfigError("basis term repeats a variable");
        }
    }
}

int BasisTerm::power_of(int variable) const {
    for (const auto& [v, a] : factors_) {
        if (v == variable) return a;
    }
    return 0;
}

int BasisTerm::max_variable() const { return factors_.empty() ? -1 : factors_.back().first; }

double BasisTerm::eval(std::span<const double> row) const {
    double r = 1.0;
    for (const auto& [v, a] : factors_) r *= ipow(row[static_cast<std::size_t>(v)], a);
    return r;
}

double BasisTerm::derivative(std::span<const double> row, int variable) const {
    const int a = power_of(variable);
    if (a == 0) return 0.0;
    double r = a;
    for (const auto& [v, pw] : factors_) {
        const double x = row[static_cast<std::size_t>(v)];
        r *= (v == variable) ? ipow(x, pw - 1) : ipow(x, pw);
    }
    return r;
}

std::string BasisTerm::label(std::span<const std::string> names) const {
    if (factors_.empty()) return "1";
    std::ostringstream os;
    for (std::size_t k = 0; k < factors_.size(); ++k) {
        const auto [v, a] = factors_[k];
        if (k > 0) os << '*';
        if (static_cast<std::size_t>(v) < names.size()) {
            os << names[static_cast<std::size_t>(v)];
        } else {
            os << 'v' << v;
        }
        if (a > 1) os << '^' << a;
    }
    return os.str();
}

bool operator<(const BasisTerm& a, const BasisTerm& b) {
    const auto& fa = a.factors_;
    const auto& fb = b.factors_;
    const bool vars_less = std::lexicographical_compare(
        fa.begin(), fa.end(), fb.begin(), fb.end(),
        [](const auto& x, const auto& y) { return x.first < y.first; });
    if (vars_less) return true;
    const bool vars_greater = std::lexicographical_compare(
        fb.begin(), fb.end(), fa.begin(), fa.end(),
        [](const auto& x, const auto& y) { return x.first < y.first; });
    if (vars_greater) return false;
    return std::lexicographical_compare(
        fa.begin(), fa.end(), fb.begin(), fb.end(),
        [](const auto& x, const auto& y) { return x.second < y.second; });
}

Dictionary::Dictionary(DictionarySpec spec, std::vector<BasisTerm> terms, int n_variables,
                       int treatment_index)
    : spec_(spec), terms_(std::move(terms)), n_variables_(n_variables),
      treatment_index_(treatment_index) {
    if (treatment_index_ < 0 || treatment_index_ >= n_variables_) {
        throw ConfigError("treatment index outside the variable range");
    }
    for (const auto& t : terms_) {
        if (t.max_variable() >= n_variables_) {
            throw ConfigError("basis term references a variable beyond the row length");
        }
    }
}

void Dictionary::check_row(std::span<const double> row) const {
    if (row.size() < static_cast<std::size_t>(n_variables_)) {
        throw DataError("row has " + std::to_string(row.size()) + " values, dictionary needs " +
                        std::to_string(n_variables_));
    }
    for (std::size_t k = 0; k < static_cast<std::size_t>(n_variables_); ++k) {
        if (!std::isfinite(row[k])) {
            throw DataError("non-finite value in variable " + std::to_string(k));
        }
    }
}

void Dictionary::eval_into(std::span<const double> row, Eigen::Ref<Eigen::VectorXd> out) const {
    check_row(row);
    for (std::size_t j = 0; j < terms_.size(); ++j) out[static_cast<Eigen::Index>(j)] = terms_[j].eval(row);
}

void Dictionary::eval_derivative_into(std::span<const double> row,
                                      Eigen::Ref<Eigen::VectorXd> out) const {
    check_row(row);
    for (std::size_t j = 0; j < terms_.size(); ++j) {
        out[static_cast<Eigen::Index>(j)] = terms_[j].derivative(row, treatment_index_);
    }
}

Eigen::VectorXd Dictionary::eval(std::span<const double> row) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(terms_.size()));
    eval_into(row, out);
    return out;
}

Eigen::VectorXd Dictionary::eval_derivative(std::span<const double> row) const {
    Eigen::VectorXd out(static_cast<Eigen::Index>(terms_.size()));
    eval_derivative_into(row, out);
    return out;
}

std::vector<std::string> Dictionary::labels(std::span<const std::string> names) const {
    std::vector<std::string> out;
    out.reserve(terms_.size());
    for (const auto& t : terms_) out.push_back(t.label(names));
    return out;
}

Dictionary build_dictionary(const DictionarySpec& spec, int n_covariates) {
    if (spec.max_degree < 1) throw ConfigError("dictionary max_degree must be >= 1");
    if (n_covariates < 0) throw ConfigError("n_covariates must be >= 0");

    const int n_vars = n_covariates + 1;
    std::vector<BasisTerm> terms;
    if (spec.include_intercept) terms.emplace_back();
    for (int v = 0; v < n_vars; ++v) {
        for (int a = 1; a <= spec.max_degree; ++a) terms.emplace_back(std::vector<BasisTerm::Factor>{{v, a}});
    }
    auto add_pair = [&](int v, int w) {
        for (int a = 1; a <= spec.max_degree; ++a) {
            for (int b = 1; b <= spec.max_degree; ++b) {
                terms.emplace_back(std::vector<BasisTerm::Factor>{{v, a}, {w, b}});
            }
        }
    };
    switch (spec.pair_policy) {
        case PairPolicy::None:
            break;
        case PairPolicy::TreatmentPairsOnly:
            for (int w = 1; w < n_vars; ++w) add_pair(0, w);
            break;
        case PairPolicy::AllPairs:
            for (int v = 0; v < n_vars; ++v) {
                for (int w = v + 1; w < n_vars; ++w) add_pair(v, w);
            }
            break;
    }
    std::sort(terms.begin(), terms.end());
    return Dictionary(spec, std::move(terms), n_vars, 0);
}

std::size_t dictionary_size(const DictionarySpec& spec, int n_covariates) {
    const auto v = static_cast<std::size_t>(n_covariates + 1);
    const auto k = static_cast<std::size_t>(spec.max_degree);
    std::size_t pairs = 0;
    switch (spec.pair_policy) {
        case PairPolicy::None: pairs = 0; break;
        case PairPolicy::TreatmentPairsOnly: pairs = v - 1; break;
        case PairPolicy::AllPairs: pairs = v * (v - 1) / 2; break;
    }
    return (spec.include_intercept ? 1 : 0) + k * v + k * k * pairs;
}

std::vector<int> StandardizationStats::active_indices() const {
    std::vector<int> idx;
    for (std::size_t j = 0; j < active.size(); ++j) {
        if (active[j]) idx.push_back(static_cast<int>(j));
    }
    return idx;
}

StandardizationStats fit_standardization(const Eigen::MatrixXd& features,
                                         const std::optional<Eigen::VectorXd>& weights) {
    const Eigen::Index n = features.rows();
    if (n < 2) throw DataError("standardization needs at least 2 observations");
    Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
    if (weights) {
        if (weights->size() != n) throw DataError("weight vector length does not match features");
        if ((weights->array() <= 0).any() || !weights->allFinite()) {
            throw DataError("weights must be positive and finite");
        }
        w = *weights * (static_cast<double>(n) / weights->sum());
    }
    StandardizationStats stats;
    stats.means = (features.transpose() * w) / static_cast<double>(n);
    const Eigen::MatrixXd centered = features.rowwise() - stats.means.transpose();
    const Eigen::VectorXd ss = centered.array().square().matrix().transpose() * w;
    stats.sds = (ss / static_cast<double>(n - 1)).cwiseSqrt();
    stats.active.resize(static_cast<std::size_t>(features.cols()));
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
        stats.active[static_cast<std::size_t>(j)] = stats.sds[j] >= kInactiveSdTolerance;
    }
    return stats;
}

Eigen::VectorXd standardize(const StandardizationStats& stats, const Eigen::VectorXd& features) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(features.size());
    for (Eigen::Index j = 0; j < features.size(); ++j) {
        if (stats.active[static_cast<std::size_t>(j)]) {
            out[j] = (features[j] - stats.means[j]) / stats.sds[j];
        }
    }
    return out;
}

Eigen::VectorXd destandardize(const StandardizationStats& stats, const Eigen::VectorXd& standardized) {
    Eigen::VectorXd out = stats.means;
    for (Eigen::Index j = 0; j < standardized.size(); ++j) {
        if (stats.active[static_cast<std::size_t>(j)]) out[j] += standardized[j] * stats.sds[j];
    }
    return out;
}

Eigen::VectorXd standardized_derivative(const Dictionary& dict, const StandardizationStats& stats,
                                        std::span<const double> row, DerivativeMode mode,
                                        std::size_t n) {
    if (stats.size() != dict.size()) {
        throw ConfigError("standardization stats were fitted on a different dictionary");
    }
    if (mode == DerivativeMode::FullCorrection && n < 2) {
        throw ConfigError("full-correction derivative needs a sample size n >= 2");
    }
    const Eigen::VectorXd bd = dict.eval_derivative(row);
    Eigen::VectorXd b;
    if (mode == DerivativeMode::FullCorrection) b = dict.eval(row);
    const double nn = static_cast<double>(n);

    Eigen::VectorXd out = Eigen::VectorXd::Zero(bd.size());
    for (Eigen::Index j = 0; j < bd.size(); ++j) {
        if (!stats.active[static_cast<std::size_t>(j)]) continue;
        const double sd = stats.sds[j];
        out[j] = bd[j] / sd;
        if (mode == DerivativeMode::FullCorrection) {
            const double dev = b[j] - stats.means[j];
            out[j] *= (nn - 1.0) / nn - dev * dev / ((nn - 1.0) * sd * sd);
        }
    }
    return out;
}

}  // namespace adpanel
