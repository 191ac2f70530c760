#pragma once

#include "bosmos/common.hpp"
#include "bosmos/gp/kernel.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <utility>

namespace bosmos::gp {

template <typename Scalar>
struct Prediction {
  Scalar mean;
  Scalar variance;  // latent variance, excludes the noise term
};

/// Exact zero-mean GP regression with fixed hyperparameters.
/// Training inputs are stored one point per column.
template <typename Scalar>
class GaussianProcess {
 public:
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  static constexpr double kMaxJitter = 1e-4;

  static GaussianProcess fit(MatrixType inputs, VectorType targets, Kernel<Scalar> kernel, Scalar noise_variance) {
    if (inputs.cols() != targets.size()) throw std::invalid_argument("inputs and targets differ in length");
    if (inputs.cols() < 1) throw std::invalid_argument("GP fit needs at least one point");
    if (kernel.lengthscales.size() != inputs.rows()) throw std::invalid_argument("kernel dimension mismatch");
    kernel.validate();
    if (!(noise_variance >= Scalar(0))) throw std::invalid_argument("noise variance must be >= 0");

    GaussianProcess gp;
    gp.inputs_ = std::move(inputs);
    gp.targets_ = std::move(targets);
    gp.kernel_ = std::move(kernel);
    gp.noise_variance_ = noise_variance;

    const MatrixType gram = cross_covariance(gp.kernel_, gp.inputs_, gp.inputs_);
    Scalar jitter(0);
    for (;;) {
      MatrixType a = gram;
      a.diagonal().array() += noise_variance + jitter;
      gp.llt_.compute(a);
      if (gp.llt_.info() == Eigen::Success && (gp.llt_.matrixLLT().diagonal().array() > Scalar(0)).all()) break;
      jitter = jitter == Scalar(0) ? Scalar(1e-10) : jitter * Scalar(10);
      if (jitter > Scalar(kMaxJitter)) throw NumericalError("GP Cholesky failed after maximum jitter");
    }
    gp.jitter_ = jitter;
    gp.alpha_ = gp.llt_.solve(gp.targets_);
    return gp;
  }

  int dim() const { return static_cast<int>(inputs_.rows()); }
  int size() const { return static_cast<int>(inputs_.cols()); }
  const MatrixType& inputs() const { return inputs_; }
  const VectorType& targets() const { return targets_; }
  const Kernel<Scalar>& kernel() const { return kernel_; }
  Scalar noise_variance() const { return noise_variance_; }
  Scalar jitter() const { return jitter_; }

  Scalar log_marginal_likelihood() const {
    using std::log;
    const Scalar log_det = Scalar(2) * llt_.matrixLLT().diagonal().array().log().sum();
    return Scalar(-0.5) * (targets_.dot(alpha_) + log_det + Scalar(size()) * Scalar(log(2.0 * M_PI)));
  }

  template <typename Q>
  Scalar predict_mean(const Eigen::MatrixBase<Q>& query) const {
    Scalar m(0);
    for (Eigen::Index i = 0; i < inputs_.cols(); ++i) m += alpha_[i] * kernel_(inputs_.col(i), query);
    return m;
  }

  template <typename Q>
  Prediction<Scalar> predict(const Eigen::MatrixBase<Q>& query) const {
    if (query.size() != inputs_.rows()) throw std::invalid_argument("query dimension mismatch");
    VectorType k(inputs_.cols());
    for (Eigen::Index i = 0; i < inputs_.cols(); ++i) k[i] = kernel_(inputs_.col(i), query);
    const Scalar mean = k.dot(alpha_);
    const VectorType v = llt_.matrixL().solve(k);
    const Scalar var = std::max(Scalar(0), kernel_.signal_variance - v.squaredNorm());
    return {mean, var};
  }

  /// Means and latent variances at every column of queries.
  std::pair<VectorType, VectorType> predict_many(const MatrixType& queries) const {
    const MatrixType ks = cross_covariance(kernel_, inputs_, queries);
    VectorType mean = ks.transpose() * alpha_;
    const MatrixType v = llt_.matrixL().solve(ks);
    VectorType var = (kernel_.signal_variance - v.colwise().squaredNorm().array()).max(Scalar(0)).matrix().transpose();
    return {std::move(mean), std::move(var)};
  }

  /// Joint latent posterior (mean, covariance) at the columns of queries.
  std::pair<VectorType, MatrixType> joint_posterior(const MatrixType& queries) const {
    const MatrixType ks = cross_covariance(kernel_, inputs_, queries);
    const MatrixType kss = cross_covariance(kernel_, queries, queries);
    VectorType mean = ks.transpose() * alpha_;
    const MatrixType v = llt_.matrixL().solve(ks);
    MatrixType cov = kss - v.transpose() * v;
    return {std::move(mean), std::move(cov)};
  }

 private:
  MatrixType inputs_;
  VectorType targets_;
  Kernel<Scalar> kernel_;
  Scalar noise_variance_ = Scalar(0);
  Scalar jitter_ = Scalar(0);
  Eigen::LLT<MatrixType> llt_;
  VectorType alpha_;
};

using GpModel = GaussianProcess<double>;

}  // namespace bosmos::gp
