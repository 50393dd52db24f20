#include <doctest.h>

#include <cmath>
#include <random>

#include "icsoh/error.hpp"
#include "icsoh/pca.hpp"
#include "oracles.hpp"

using namespace icsoh;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = g(rng) * (1.0 + c) + 0.3 * c;
  }
  // Some shared structure so the spectrum is not flat.
  m.col(1) += 0.8 * m.col(0);
  m.col(4) -= 0.5 * m.col(2);
  return m;
}

oracle::Matrix to_rows(const Eigen::MatrixXd& m) {
  oracle::Matrix rows(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) rows[r][c] = m(r, c);
  }
  return rows;
}

}  // namespace

TEST_CASE("pca: rank-1 data puts everything in the first component") {
  Eigen::VectorXd dir(9);
  dir << 1, -2, 0.5, 3, 1.5, -1, 2, 0.25, -0.75;
  Eigen::MatrixXd x(30, 9);
  for (int i = 0; i < 30; ++i) x.row(i) = (0.1 * i - 1.0) * dir.transpose() + Eigen::RowVectorXd::Constant(9, 4.0);
  const auto m = pca_fit(x);
  CHECK(std::abs(m.contribution_rates(0) - 1.0) < 1e-9);
}

TEST_CASE("pca: constant columns are named in the error") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(40, 9, 1.5);
  for (int i = 0; i < 40; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = g(rng);
  }
  const std::vector<std::string> names{"area", "a4", "mf", "wf", "dmv", "p", "ppv", "arc", "pcv"};
  CHECK_THROWS_WITH_AS(pca_fit(x, 2, names), doctest::Contains("mf, wf, dmv, p, ppv, arc, pcv"), DataError);
}

TEST_CASE("pca: too few rows and bad dims") {
  CHECK_THROWS_AS(pca_fit(random_matrix(9, 9, 1)), DataError);
  CHECK_THROWS_AS(pca_fit(random_matrix(20, 9, 1), 10), ConfigError);
  CHECK_THROWS_AS(pca_fit(random_matrix(20, 9, 1), 0), ConfigError);
}

TEST_CASE("pca: full reconstruction, oracle eigenvalues and model invariants") {
  const Eigen::MatrixXd x = random_matrix(50, 9, 77);
  const auto full = pca_fit(x, 9);
  const Eigen::MatrixXd scores = pca_transform(full, x);
  const Eigen::MatrixXd back = scores * full.components;
  CHECK((back - pca_standardize(full, x)).cwiseAbs().maxCoeff() < 1e-9);

  const auto ref = oracle::oracle_pca_eigs(to_rows(x));
  for (int k = 0; k < 9; ++k) CHECK(std::abs(full.eigenvalues(k) - ref[k]) < 1e-8);

  CHECK(std::abs(full.contribution_rates.sum() - 1.0) < 1e-12);
  for (int k = 1; k < 9; ++k) {
    CHECK(full.eigenvalues(k) <= full.eigenvalues(k - 1));
    CHECK(full.contribution_rates(k) <= full.contribution_rates(k - 1));
  }
  const Eigen::MatrixXd gram = full.components * full.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(9, 9)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("pca: transformed fit data has eigenvalue variances and no correlation") {
  const Eigen::MatrixXd x = random_matrix(60, 9, 5);
  const auto m = pca_fit(x, 3);
  CHECK(m.dims() == 3);
  const Eigen::MatrixXd s = pca_transform(m, x);
  const Eigen::MatrixXd c = s.rowwise() - s.colwise().mean();
  const Eigen::MatrixXd cov = (c.transpose() * c) / 59.0;
  for (int k = 0; k < 3; ++k) CHECK(std::abs(cov(k, k) - m.eigenvalues(k)) < 1e-9);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a != b) CHECK(std::abs(cov(a, b)) / std::sqrt(cov(a, a) * cov(b, b)) < 1e-8);
    }
  }
  const Eigen::MatrixXd at_mean = pca_transform(m, m.mean.transpose());
  CHECK(at_mean.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pca: held-out row by hand projection") {
  const Eigen::MatrixXd x = random_matrix(25, 9, 9);
  const auto m = pca_fit(x, 3);
  Eigen::RowVectorXd row(9);
  row << 0.3, -1.2, 2.0, 0.7, 1.1, -0.4, 5.0, 0.0, 2.2;
  const Eigen::MatrixXd s = pca_transform(m, row);
  for (int k = 0; k < 3; ++k) {
    double hand = 0.0;
    for (int c = 0; c < 9; ++c) hand += m.components(k, c) * (row(c) - m.mean(c)) / m.scale(c);
    CHECK(std::abs(s(0, k) - hand) < 1e-12);
  }
  CHECK_THROWS_AS(pca_transform(m, Eigen::MatrixXd::Zero(1, 8)), DataError);
}

TEST_CASE("pca: json round trip is exact") {
  const auto m = pca_fit(random_matrix(30, 9, 12), 3);
  const auto text = pca_to_json(m).dump();
  const auto back = pca_from_json(nlohmann::json::parse(text));
  CHECK(back.mean == m.mean);
  CHECK(back.scale == m.scale);
  CHECK(back.components == m.components);
  CHECK(back.eigenvalues == m.eigenvalues);
  CHECK(back.feature_names == m.feature_names);
}
