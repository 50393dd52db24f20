#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

namespace icsoh {

/// Principal components of standardized features (correlation-matrix PCA).
struct PcaModel {
  std::vector<std::string> feature_names;
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;          // per-feature sample standard deviation
  Eigen::MatrixXd components;     // k x p, orthonormal rows
  Eigen::VectorXd eigenvalues;    // p, descending
  Eigen::VectorXd contribution_rates;

  [[nodiscard]] Eigen::Index dims() const { return components.rows(); }
  [[nodiscard]] Eigen::Index feature_count() const { return mean.size(); }
};

/// Fits on n >= 10 rows. Throws DataError naming any zero-variance column.
PcaModel pca_fit(const Eigen::MatrixXd& features, int dims = 3,
                 const std::vector<std::string>& feature_names = {});

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& features);

/// Rows of `features` standardized with the model's mean and scale.
Eigen::MatrixXd pca_standardize(const PcaModel& model, const Eigen::MatrixXd& features);

nlohmann::json pca_to_json(const PcaModel& model);
PcaModel pca_from_json(const nlohmann::json& j);

}  // namespace icsoh
