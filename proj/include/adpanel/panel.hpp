#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adpanel/dictionary.hpp"

namespace adpanel {

/// Long-format panel, columnar. Observations are sorted by (unit, time) and the
/// rows of unit u occupy [unit_offsets[u], unit_offsets[u + 1]).
class PanelDataset {
public:
    PanelDataset() = default;

    /// Validates and sorts. `unit_labels[k]` names the unit of observation k.
    static PanelDataset from_columns(std::vector<std::string> unit_labels, std::vector<std::int64_t> times,
                                     Eigen::VectorXd y, Eigen::VectorXd d, Eigen::MatrixXd x,
                                     std::optional<Eigen::VectorXd> weights = {});

    std::size_t n_units() const { return unit_ids_.size(); }
    std::size_t n_obs() const { return times_.size(); }
    int n_covariates() const { return static_cast<int>(x_.cols()); }
    bool has_weights() const { return has_weights_; }

    const std::vector<std::string>& unit_ids() const { return unit_ids_; }
    const std::vector<std::size_t>& unit_offsets() const { return unit_offsets_; }
    const std::vector<std::size_t>& unit_of() const { return unit_of_; }
    const std::vector<std::int64_t>& times() const { return times_; }
    const Eigen::VectorXd& y() const { return y_; }
    const Eigen::VectorXd& d() const { return d_; }
    const Eigen::MatrixXd& x() const { return x_; }
    const Eigen::VectorXd& weights() const { return w_; }

    std::size_t unit_size(std::size_t u) const { return unit_offsets_[u + 1] - unit_offsets_[u]; }
    /// Raw variable vector (D, X1, ..., Xh) of observation k.
    std::vector<double> variables(std::size_t k) const;
    /// Number of differenced rows, sum over units of (T_i - 1).
    std::size_t n_differenced() const { return n_obs() - n_units(); }
    /// Sorted distinct observation times.
    std::vector<std::int64_t> distinct_times() const;

    /// Copy with y replaced (same ordering).
    PanelDataset with_outcome(Eigen::VectorXd y) const;
    PanelDataset with_weights(Eigen::VectorXd w) const;
    /// Sub-panel restricted to the given observation indices (must keep >= 2 rows per kept unit).
    PanelDataset subset(const std::vector<std::size_t>& obs) const;

private:
    std::vector<std::string> unit_ids_;
    std::vector<std::size_t> unit_offsets_;
    std::vector<std::size_t> unit_of_;
    std::vector<std::int64_t> times_;
    Eigen::VectorXd y_, d_, w_;
    Eigen::MatrixXd x_;
    bool has_weights_ = false;
};

/// Column names for CSV ingestion. Empty `x_cols` means every column named
/// x<k> (k = 1, 2, ...) in numeric order.
struct CsvSchema {
    std::string unit_col = "unit";
    std::string time_col = "time";
    std::string y_col = "y";
    std::string d_col = "d";
    std::vector<std::string> x_cols;
    std::optional<std::string> weight_col;
};

PanelDataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
/// Writes `unit,time,y,d,x1..xh[,weight]` with shortest round-trip formatting.
void write_csv(const PanelDataset& data, const std::filesystem::path& path);

struct FoldAssignment {
    int n_folds = 0;
    std::uint64_t seed = 0;
    std::vector<int> fold_of_unit;

    std::vector<std::size_t> fold_sizes() const;
    std::vector<std::size_t> units_in(int fold) const;
};

/// Seeded shuffle of the unit list, then round-robin dealing into `n_folds` groups.
FoldAssignment assign_folds(const PanelDataset& data, int n_folds, std::uint64_t seed);

/// First differences of the standardized dictionary. Row r corresponds to
/// (unit[r], time[r]) and the previous observed period of that unit.
struct DifferencedDesign {
    std::vector<int> active;           // dictionary columns kept (stats.active)
    Eigen::MatrixXd delta_b;           // rows x active: standardized b(t) - b(t-1)
    Eigen::MatrixXd deriv;             // rows x active: b_D(t) / sigma
    Eigen::VectorXd delta_y;
    Eigen::VectorXd weight;            // time-t observation weight (raw, not normalized)
    std::vector<std::size_t> unit;
    std::vector<std::int64_t> time;
    std::vector<int> fold;             // -1 when no fold assignment was supplied

    std::size_t rows() const { return static_cast<std::size_t>(delta_b.rows()); }
};

DifferencedDesign build_differenced_design(const PanelDataset& data, const Dictionary& dict,
                                           const StandardizationStats& stats,
                                           const FoldAssignment* folds = nullptr);

/// Dictionary evaluated at every observation (rows = observations).
Eigen::MatrixXd basis_matrix(const PanelDataset& data, const Dictionary& dict);

/// Sub-panels over `width` consecutive distinct times; units missing any period
/// of a window are dropped from it. Windows with fewer than one qualifying unit are skipped.
std::vector<PanelDataset> rolling_windows(const PanelDataset& data, int width = 2);

}  // namespace adpanel
