#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "adpanel/dictionary.hpp"
#include "adpanel/panel.hpp"

namespace adpanel {

/// Everything one nuisance fit needs, with the standardization fitted on the
/// training observations only. Held-out rows are expressed in the training scale.
struct FoldData {
    int fold = -1;                           // -1 for the full-sample fit
    std::vector<std::size_t> training_units;
    std::vector<std::size_t> heldout_units;
    StandardizationStats stats;
    std::vector<int> active;                 // dictionary columns with nonzero training SD

    // Training block; weights normalized to mean 1 over training rows.
    Eigen::MatrixXd train_x;                 // standardized delta b
    Eigen::VectorXd train_y;
    Eigen::VectorXd train_w;
    Eigen::MatrixXd train_deriv;             // standardized b_D at time t
    Eigen::MatrixXd gram;                    // train_x' W train_x / n_train  (also the Riesz Q)
    Eigen::VectorXd cross;                   // train_x' W train_y / n_train
    double yy = 0.0;
    Eigen::VectorXd m;                       // weighted mean of standardized derivative rows

    // Held-out block; `heldout_rows` index the global differenced rows.
    std::vector<Eigen::Index> heldout_rows;
    Eigen::MatrixXd test_x;
    Eigen::MatrixXd test_deriv;
    Eigen::VectorXd test_y;
};

/// Raw (unstandardized) differenced quantities for a panel and dictionary,
/// plus one FoldData per fold and one for the full sample.
struct CrossFitData {
    std::size_t p = 0;                       // dictionary size
    std::size_t n_units = 0;
    // Global differenced rows in panel order.
    std::vector<std::size_t> row_unit;
    std::vector<std::int64_t> row_time;
    std::vector<int> row_fold;
    Eigen::VectorXd row_weight;              // normalized to mean 1 over all rows
    Eigen::VectorXd delta_y;

    std::vector<FoldData> folds;
    FoldData full;
};

/// Builds per-fold training and held-out blocks. Standardization statistics are
/// fitted on the levels b(D_it, X_it) of every training observation.
CrossFitData prepare_crossfit(const PanelDataset& data, const Dictionary& dict, const FoldAssignment& folds);

}  // namespace adpanel
