#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace bosmos::gp {

enum class KernelFamily { RBF, Matern52 };

/// Stationary covariance with per-dimension lengthscales.
template <typename Scalar>
struct Kernel {
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  KernelFamily family = KernelFamily::RBF;
  VectorType lengthscales;
  Scalar signal_variance = Scalar(1);

  static Kernel isotropic(KernelFamily family, int dim, Scalar lengthscale, Scalar signal_variance = Scalar(1)) {
    return {family, VectorType::Constant(dim, lengthscale), signal_variance};
  }

  void validate() const {
    if (!(lengthscales.array() > Scalar(0)).all()) throw std::invalid_argument("kernel lengthscales must be > 0");
    if (!(signal_variance > Scalar(0))) throw std::invalid_argument("kernel signal variance must be > 0");
  }

  template <typename A, typename B>
  Scalar operator()(const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& y) const {
    return of_scaled_distance(((x - y).array() / lengthscales.array()).matrix().norm());
  }

  Scalar of_scaled_distance(Scalar r) const {
    using std::exp;
    using std::sqrt;
    switch (family) {
      case KernelFamily::Matern52: {
        const Scalar s = sqrt(Scalar(5)) * r;
        return signal_variance * (Scalar(1) + s + s * s / Scalar(3)) * exp(-s);
      }
      case KernelFamily::RBF:
        break;
    }
    return signal_variance * exp(Scalar(-0.5) * r * r);
  }
};

/// Cross-covariance between the columns of a and the columns of b.
template <typename Scalar, typename A, typename B>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cross_covariance(const Kernel<Scalar>& k,
                                                                       const Eigen::MatrixBase<A>& a,
                                                                       const Eigen::MatrixBase<B>& b) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j)
    for (Eigen::Index i = 0; i < a.cols(); ++i) out(i, j) = k(a.col(i), b.col(j));
  return out;
}

}  // namespace bosmos::gp
