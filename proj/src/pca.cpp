#include "icsoh/pca.hpp"

#include <json.hpp>

#include "icsoh/error.hpp"

namespace icsoh {

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

PcaModel pca_fit(const Eigen::MatrixXd& features, int dims,
                 const std::vector<std::string>& feature_names) {
  const Eigen::Index n = features.rows();
  const Eigen::Index p = features.cols();
  if (n < 10) throw DataError("PCA needs at least 10 rows");
  if (dims < 1 || dims > p) throw ConfigError("PCA dimension must lie in [1, feature count]");
  if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != p) {
    throw ConfigError("PCA feature name count does not match column count");
  }
  PcaModel model;
  model.feature_names = feature_names;
  if (model.feature_names.empty()) {
    for (Eigen::Index c = 0; c < p; ++c) model.feature_names.push_back("f" + std::to_string(c));
  }

  model.mean = features.colwise().mean().transpose();
  const Eigen::MatrixXd centered = features.rowwise() - model.mean.transpose();
  model.scale = (centered.colwise().squaredNorm() / static_cast<double>(n - 1)).cwiseSqrt().transpose();
  std::string constant;
  for (Eigen::Index c = 0; c < p; ++c) {
    if (!(model.scale(c) > 1e-12 * std::max(1.0, std::abs(model.mean(c))))) {
      constant += (constant.empty() ? "" : ", ") + model.feature_names[static_cast<std::size_t>(c)];
    }
  }
  if (!constant.empty()) throw DataError("zero-variance feature columns: " + constant);

  const Eigen::MatrixXd z = centered.array().rowwise() / model.scale.transpose().array();
  const Eigen::MatrixXd corr = (z.transpose() * z) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(corr);
  if (solver.info() != Eigen::Success) throw NumericalError("PCA eigendecomposition failed");

  // Eigen returns ascending order.
  model.eigenvalues = solver.eigenvalues().reverse().cwiseMax(0.0);
  const Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();
  model.components.resize(dims, p);
  for (int k = 0; k < dims; ++k) {
    Eigen::VectorXd v = vectors.col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.row(k) = v.transpose();
  }
  model.contribution_rates = model.eigenvalues / model.eigenvalues.sum();
  return model;
}

Eigen::MatrixXd pca_standardize(const PcaModel& model, const Eigen::MatrixXd& features) {
  if (features.cols() != model.feature_count()) {
    throw DataError("PCA transform: expected " + std::to_string(model.feature_count()) +
                    " columns, got " + std::to_string(features.cols()));
  }
  return (features.rowwise() - model.mean.transpose()).array().rowwise() /
         model.scale.transpose().array();
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& features) {
  return pca_standardize(model, features) * model.components.transpose();
}

nlohmann::json pca_to_json(const PcaModel& model) {
  nlohmann::json j;
  j["feature_names"] = model.feature_names;
  j["mean"] = to_vector(model.mean);
  j["scale"] = to_vector(model.scale);
  j["eigenvalues"] = to_vector(model.eigenvalues);
  j["contribution_rates"] = to_vector(model.contribution_rates);
  auto rows = nlohmann::json::array();
  for (Eigen::Index k = 0; k < model.components.rows(); ++k) {
    rows.push_back(to_vector(model.components.row(k).transpose()));
  }
  j["components"] = rows;
  return j;
}

PcaModel pca_from_json(const nlohmann::json& j) {
  PcaModel m;
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  m.mean = from_vector(j.at("mean").get<std::vector<double>>());
  m.scale = from_vector(j.at("scale").get<std::vector<double>>());
  m.eigenvalues = from_vector(j.at("eigenvalues").get<std::vector<double>>());
  m.contribution_rates = from_vector(j.at("contribution_rates").get<std::vector<double>>());
  const auto& rows = j.at("components");
  m.components.resize(static_cast<Eigen::Index>(rows.size()), m.mean.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    m.components.row(static_cast<Eigen::Index>(k)) =
        from_vector(rows[k].get<std::vector<double>>()).transpose();
  }
  return m;
}

}  // namespace icsoh
