#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "rfidlab/autodiff/tensor.hpp"

namespace rfidlab {

// Gaussian fit (mu, Sigma) of an embedding sample, in double precision.
struct GaussianStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  std::size_t n = 0;

  GaussianStats() = default;
  GaussianStats(Eigen::VectorXd mean, Eigen::MatrixXd cov, std::size_t count)
      : mu(std::move(mean)), sigma(std::move(cov)), n(count) {
    require(sigma.rows() == mu.size() && sigma.cols() == mu.size(), ErrorKind::shape_mismatch,
            "GaussianStats: covariance is " + std::to_string(sigma.rows()) + "x" +
                std::to_string(sigma.cols()) + " for mean of dimension " + std::to_string(mu.size()));
    require(n >= 2, ErrorKind::invalid_argument, "GaussianStats: needs at least 2 samples");
    sigma = (0.5 * (sigma + sigma.transpose())).eval();
  }

  std::size_t dim() const { return static_cast<std::size_t>(mu.size()); }
};

// Column mean and unbiased (N-1) covariance of an (N, d) sample.
template <class T>
GaussianStats estimate_stats(const ad::Tensor<T>& embeddings) {
  require(embeddings.rank() == 2, ErrorKind::shape_mismatch,
          "estimate_stats: expected (N, d), got " + ad::shape_str(embeddings.shape()));
  const auto n = static_cast<Eigen::Index>(embeddings.dim(0));
  const auto d = static_cast<Eigen::Index>(embeddings.dim(1));
  require(n >= 2, ErrorKind::invalid_argument,
          "estimate_stats: covariance needs N >= 2, got " + std::to_string(n));
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      x(i, j) = static_cast<double>(embeddings.data()[static_cast<std::size_t>(i * d + j)]);
  Eigen::VectorXd mu = x.colwise().mean().transpose();
  x.rowwise() -= mu.transpose();
  Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  return {std::move(mu), std::move(cov), static_cast<std::size_t>(n)};
}

struct SqrtmOptions {
  double symmetry_tol = 1e-8;    // relative to max(1, max |A_ij|)
  double negative_tol = 1e-10;   // relative to the largest eigenvalue
};

// Principal square root of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues in [-negative_tol * lambda_max, 0] are clamped to zero; anything
// more negative means the input is not PSD and is reported as an error.
inline Eigen::MatrixXd sqrtm_psd(const Eigen::MatrixXd& a, const SqrtmOptions& opt = {}) {
  require(a.rows() == a.cols(), ErrorKind::shape_mismatch, "sqrtm_psd: matrix is not square");
  if (a.size() == 0) return a;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  require(asym <= opt.symmetry_tol * scale, ErrorKind::numeric,
          "sqrtm_psd: input is not symmetric (max |A - A^T| = " + std::to_string(asym) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  require(eig.info() == Eigen::Success, ErrorKind::numeric, "sqrtm_psd: eigendecomposition failed");
  Eigen::VectorXd lambda = eig.eigenvalues();
  const double lambda_max = std::max(lambda.maxCoeff(), 0.0);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < -opt.negative_tol * lambda_max)
      fail(ErrorKind::numeric, "sqrtm_psd: eigenvalue " + std::to_string(lambda(i)) +
                                   " is significantly negative (lambda_max " +
                                   std::to_string(lambda_max) + ")");
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  Eigen::MatrixXd s = v * lambda.asDiagonal() * v.transpose();
  return 0.5 * (s + s.transpose());
}

struct FrechetResult {
  double value = 0;
  bool clamped = false;  // a tiny negative from round-off was raised to 0
};

// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}). The cross term is
// Tr((S_a^{1/2} S_b S_a^{1/2})^{1/2}), which equals the sum of singular values
// of S_a^{1/2} S_b^{1/2}. Going through the singular values keeps round-off at
// machine precision; taking square roots of the inner product's eigenvalues
// would turn the null space of a rank-deficient covariance (fewer samples than
// dimensions) into a sqrt(eps)-sized bias.
inline FrechetResult frechet_distance(const GaussianStats& a, const GaussianStats& b) {
  require(a.dim() == b.dim(), ErrorKind::shape_mismatch,
          "frechet_distance: dimensions " + std::to_string(a.dim()) + " and " +
              std::to_string(b.dim()) + " differ");
  const Eigen::MatrixXd product = sqrtm_psd(a.sigma) * sqrtm_psd(b.sigma);
  Eigen::BDCSVD<Eigen::MatrixXd> svd(product);
  require(svd.info() == Eigen::Success, ErrorKind::numeric, "frechet_distance: SVD failed");
  const double cross = svd.singularValues().sum();
  const double mean_term = (a.mu - b.mu).squaredNorm();
  FrechetResult r;
  r.value = mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * cross;
  if (r.value < 0) {
    require(r.value >= -1e-6, ErrorKind::numeric,
            "frechet_distance: result " + std::to_string(r.value) + " is negative beyond round-off");
    r.value = 0;
    r.clamped = true;
  }
  return r;
}

}  // namespace rfidlab
