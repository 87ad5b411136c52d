#pragma once

// Spectral building blocks: Gauss-Legendre rules, Legendre series algebra on an
// interval, and a real Fourier basis on a periodic interval.

#include <Eigen/Dense>

#include <complex>
#include <vector>

namespace onofri::spectral {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct GaussRule {
  Eigen::VectorXd nodes;    // ascending in (-1, 1)
  Eigen::VectorXd weights;  // sum to 2
};

GaussRule gauss_legendre(int n);

/// Coefficients of d/dxi of a Legendre series (same length, last entry 0).
template <typename Derived>
Vec<typename Derived::Scalar> legendre_derivative(const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index p = c.size();
  Vec<Scalar> d = Vec<Scalar>::Zero(p);
  if (p < 2) return d;
  // d_k = (2k+1) * sum_{j > k, j - k odd} c_j
  d(p - 2) = Scalar(2 * (p - 2) + 1) * c(p - 1);
  for (Eigen::Index k = p - 3; k >= 0; --k) {
    d(k) = Scalar(2 * k + 1) * (c(k + 1) + d(k + 2) / Scalar(2 * k + 5));
  }
  return d;
}

/// Antiderivative of a Legendre series, one degree higher, vanishing at xi = -1.
template <typename Derived>
Vec<typename Derived::Scalar> legendre_antiderivative(const Eigen::MatrixBase<Derived>& c) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index p = c.size();
  Vec<Scalar> a = Vec<Scalar>::Zero(p + 1);
  // int P_0 = P_1 + const, int P_k = (P_{k+1} - P_{k-1}) / (2k+1)
  if (p > 0) a(1) += c(0);
  for (Eigen::Index k = 1; k < p; ++k) {
    const Scalar s = c(k) / Scalar(2 * k + 1);
    a(k + 1) += s;
    a(k - 1) -= s;
  }
  // P_k(-1) = (-1)^k
  Scalar at_minus_one = 0;
  for (Eigen::Index k = 0; k <= p; ++k) at_minus_one += (k % 2 == 0) ? a(k) : -a(k);
  a(0) -= at_minus_one;
  return a;
}

/// Evaluates sum_k c_k P_k(xi) by the three-term recurrence.
template <typename Derived, typename Scalar = typename Derived::Scalar>
Scalar legendre_eval(const Eigen::MatrixBase<Derived>& c, Scalar xi) {
  const Eigen::Index p = c.size();
  if (p == 0) return Scalar(0);
  Scalar pkm1 = 1, pk = xi;
  Scalar sum = c(0);
  if (p > 1) sum += c(1) * xi;
  for (Eigen::Index k = 1; k + 1 < p; ++k) {
    const Scalar pkp1 = (Scalar(2 * k + 1) * xi * pk - Scalar(k) * pkm1) / Scalar(k + 1);
    sum += c(k + 1) * pkp1;
    pkm1 = pk;
    pk = pkp1;
  }
  return sum;
}

/// V(j, k) = P_k(xi_j) for k < modes.
Eigen::MatrixXd legendre_vandermonde(const Eigen::VectorXd& xi, int modes);

/// Legendre collocation on [lo, hi] with n Gauss nodes and `modes` <= n
/// retained coefficients. With modes == n the transform pair is exact.
class LegendreBasis {
 public:
  LegendreBasis() = default;
  LegendreBasis(double lo, double hi, int n, int modes);

  int size() const { return static_cast<int>(xi_.size()); }
  int modes() const { return static_cast<int>(V_.cols()); }
  double lo() const { return lo_; }
  double hi() const { return hi_; }

  const Eigen::VectorXd& xi() const { return xi_; }
  /// Nodes mapped to [lo, hi].
  const Eigen::VectorXd& points() const { return x_; }
  /// Gauss weights for integrals in the mapped variable.
  const Eigen::VectorXd& weights() const { return w_; }

  Eigen::VectorXd to_coeffs(const Eigen::VectorXd& values) const { return A_ * values; }
  Eigen::VectorXd to_values(const Eigen::VectorXd& coeffs) const;

  /// Coefficients of d/dx in the mapped variable.
  Eigen::VectorXd derivative(const Eigen::VectorXd& coeffs) const;
  /// Coefficients (length + 1) of the antiderivative vanishing at x = lo.
  Eigen::VectorXd antiderivative(const Eigen::VectorXd& coeffs) const;
  /// Values of an arbitrary-length coefficient vector at the nodes.
  Eigen::VectorXd evaluate_at_nodes(const Eigen::VectorXd& coeffs) const;
  double evaluate(const Eigen::VectorXd& coeffs, double x) const;

  /// Dense d/dx on nodal values.
  Eigen::MatrixXd derivative_matrix() const;

  /// Fraction of coefficient energy in the top eighth of the retained modes.
  double tail_fraction(const Eigen::VectorXd& coeffs) const;

 private:
  double lo_ = -1, hi_ = 1;
  Eigen::VectorXd xi_, x_, w_;
  Eigen::MatrixXd V_, A_;
};

/// Real trigonometric collocation on [0, L) with n (even) equispaced nodes.
/// Coefficients are stored as [a_0, a_1, b_1, ..., a_{n/2-1}, b_{n/2-1}, a_{n/2}].
class FourierBasis {
 public:
  FourierBasis() = default;
  FourierBasis(double period, int n);

  int size() const { return n_; }
  double period() const { return period_; }
  const Eigen::VectorXd& points() const { return x_; }

  Eigen::VectorXd to_coeffs(const Eigen::VectorXd& values) const;
  Eigen::VectorXd to_values(const Eigen::VectorXd& coeffs) const;

  /// order-th derivative of nodal values. The Nyquist mode is dropped for odd orders.
  Eigen::VectorXd derivative(const Eigen::VectorXd& values, int order) const;
  Eigen::MatrixXd derivative_matrix(int order) const;

  double tail_fraction(const Eigen::VectorXd& coeffs) const;

 private:
  std::vector<std::complex<double>> spectrum(const Eigen::VectorXd& values) const;
  Eigen::VectorXd synthesize(std::vector<std::complex<double>> spec) const;

  double period_ = 1;
  int n_ = 0;
  Eigen::VectorXd x_;
};

}  // namespace onofri::spectral
