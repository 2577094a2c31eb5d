#include "adpanel/crossfit.hpp"

#include "adpanel/errors.hpp"

namespace adpanel {

namespace {

struct RawDesign {
    Eigen::MatrixXd levels;      // observations x p
    Eigen::MatrixXd delta;       // rows x p
    Eigen::MatrixXd deriv;       // rows x p, raw b_D at time t
    std::vector<std::size_t> obs_of_row;
};

RawDesign raw_design(const PanelDataset& data, const Dictionary& dict) {
    RawDesign raw;
    raw.levels = basis_matrix(data, dict);
    const auto rows = static_cast<Eigen::Index>(data.n_differenced());
    const auto p = static_cast<Eigen::Index>(dict.size());
    raw.delta.resize(rows, p);
    raw.deriv.resize(rows, p);
    Eigen::VectorXd der(p);
    Eigen::Index r = 0;
    for (std::size_t u = 0; u < data.n_units(); ++u) {
        for (std::size_t k = data.unit_offsets()[u] + 1; k < data.unit_offsets()[u + 1]; ++k) {
            const auto kk = static_cast<Eigen::Index>(k);
            raw.delta.row(r) = raw.levels.row(kk) - raw.levels.row(kk - 1);
            dict.eval_derivative_into(data.variables(k), der);
            raw.deriv.row(r) = der.transpose();
            raw.obs_of_row.push_back(k);
            ++r;
        }
    }
    return raw;
}

}  // namespace

CrossFitData prepare_crossfit(const PanelDataset& data, const Dictionary& dict, const FoldAssignment& folds) {
    if (folds.fold_of_unit.size() != data.n_units()) throw ConfigError("fold assignment does not match the panel");
    const RawDesign raw = raw_design(data, dict);
    const auto rows = static_cast<Eigen::Index>(raw.obs_of_row.size());

    CrossFitData cf;
    cf.p = dict.size();
    cf.n_units = data.n_units();
    cf.delta_y.resize(rows);
    cf.row_weight.resize(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const auto k = static_cast<Eigen::Index>(raw.obs_of_row[static_cast<std::size_t>(r)]);
        cf.row_unit.push_back(data.unit_of()[static_cast<std::size_t>(k)]);
        cf.row_time.push_back(data.times()[static_cast<std::size_t>(k)]);
        cf.row_fold.push_back(folds.fold_of_unit[cf.row_unit.back()]);
        cf.delta_y[r] = data.y()[k] - data.y()[k - 1];
        cf.row_weight[r] = data.weights()[k];
    }
    cf.row_weight *= static_cast<double>(rows) / cf.row_weight.sum();

    auto build = [&](int fold) {
        FoldData fd;
        fd.fold = fold;
        for (std::size_t u = 0; u < data.n_units(); ++u) {
            (fold >= 0 && folds.fold_of_unit[u] == fold ? fd.heldout_units : fd.training_units).push_back(u);
        }
        if (fd.training_units.empty() || (fold >= 0 && fd.heldout_units.empty())) {
            throw ConfigError("fold " + std::to_string(fold) + " is degenerate (no rows)");
        }

        // Standardization on training observation levels.
        std::vector<Eigen::Index> train_obs;
        for (std::size_t u : fd.training_units) {
            for (std::size_t k = data.unit_offsets()[u]; k < data.unit_offsets()[u + 1]; ++k) {
                train_obs.push_back(static_cast<Eigen::Index>(k));
            }
        }
        const Eigen::MatrixXd levels = raw.levels(train_obs, Eigen::all);
        const Eigen::VectorXd obs_w = data.weights()(train_obs);
        fd.stats = fit_standardization(levels, obs_w);
        fd.active = fd.stats.active_indices();
        const auto pa = static_cast<Eigen::Index>(fd.active.size());
        Eigen::VectorXd inv_sd(pa);
        for (Eigen::Index c = 0; c < pa; ++c) inv_sd[c] = 1.0 / fd.stats.sds[fd.active[static_cast<std::size_t>(c)]];

        std::vector<Eigen::Index> train_rows;
        for (Eigen::Index r = 0; r < rows; ++r) {
            const bool held = fold >= 0 && cf.row_fold[static_cast<std::size_t>(r)] == fold;
            (held ? fd.heldout_rows : train_rows).push_back(r);
        }
        const auto nt = static_cast<Eigen::Index>(train_rows.size());
        fd.train_x = raw.delta(train_rows, fd.active) * inv_sd.asDiagonal();
        fd.train_y = cf.delta_y(train_rows);
        fd.train_w = cf.row_weight(train_rows);
        fd.train_w *= static_cast<double>(nt) / fd.train_w.sum();
        fd.train_deriv = raw.deriv(train_rows, fd.active) * inv_sd.asDiagonal();

        const double inv_n = 1.0 / static_cast<double>(nt);
        const Eigen::MatrixXd wx = fd.train_w.asDiagonal() * fd.train_x;
        fd.gram.noalias() = fd.train_x.transpose() * wx * inv_n;
        fd.gram = 0.5 * (fd.gram + fd.gram.transpose()).eval();
        fd.cross.noalias() = wx.transpose() * fd.train_y * inv_n;
        fd.yy = (fd.train_w.array() * fd.train_y.array().square()).sum() * inv_n;
        fd.m.noalias() = fd.train_deriv.transpose() * fd.train_w * inv_n;

        if (!fd.heldout_rows.empty()) {
            fd.test_x = raw.delta(fd.heldout_rows, fd.active) * inv_sd.asDiagonal();
            fd.test_deriv = raw.deriv(fd.heldout_rows, fd.active) * inv_sd.asDiagonal();
            fd.test_y = cf.delta_y(fd.heldout_rows);
        }
        return fd;
    };

    for (int f = 0; f < folds.n_folds; ++f) cf.folds.push_back(build(f));
    cf.full = build(-1);
    return cf;
}

}  // namespace adpanel
