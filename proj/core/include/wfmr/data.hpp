#pragma once

#include <vector>

#include <Eigen/Dense>

namespace wfmr {

/// Sampled predictor curves (one per row) with their scalar responses.
struct CurveData {
  Eigen::MatrixXd curves;
  Eigen::VectorXd y;

  Eigen::Index size() const noexcept { return y.size(); }
  Eigen::Index signal_length() const noexcept { return curves.cols(); }

  /// Rows listed in `rows`, in that order.
  CurveData subset(const std::vector<Eigen::Index>& rows) const {
    CurveData out{Eigen::MatrixXd(static_cast<Eigen::Index>(rows.size()), curves.cols()),
                  Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()))};
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      out.curves.row(i) = curves.row(rows[k]);
      out.y(i) = y(rows[k]);
    }
    return out;
  }
};

}  // namespace wfmr
