#include "onofri/spectral.hpp"

#include "onofri/error.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>

namespace onofri::spectral {

GaussRule gauss_legendre(int n) {
  if (n < 1) throw Error(ErrorCode::InvalidParameter, "gauss_legendre needs n >= 1");
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1, p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
        p0 = p1;
        p1 = p2;
      }
      // p1 = P_n, p0 = P_{n-1}
      dp = n * (x * p1 - p0) / (x * x - 1);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1, p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2 * k + 1) * x * p1 - k * p0) / (k + 1);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1);
    }
    const double w = 2.0 / ((1 - x * x) * dp * dp);
    // descending x from the cosine guess; store ascending
    rule.nodes(n - 1 - i) = x;
    rule.nodes(i) = -x;
    rule.weights(n - 1 - i) = w;
    rule.weights(i) = w;
  }
  if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
  return rule;
}

Eigen::MatrixXd legendre_vandermonde(const Eigen::VectorXd& xi, int modes) {
  const Eigen::Index n = xi.size();
  Eigen::MatrixXd V(n, modes);
  if (modes == 0) return V;
  V.col(0).setOnes();
  if (modes > 1) V.col(1) = xi;
  for (int k = 1; k + 1 < modes; ++k) {
    V.col(k + 1) = ((2.0 * k + 1) * xi.cwiseProduct(V.col(k)) - k * V.col(k - 1)) / (k + 1.0);
  }
  return V;
}

LegendreBasis::LegendreBasis(double lo, double hi, int n, int modes) : lo_(lo), hi_(hi) {
  if (modes > n || modes < 1) throw Error(ErrorCode::InvalidParameter, "LegendreBasis modes out of range");
  const GaussRule rule = gauss_legendre(n);
  xi_ = rule.nodes;
  const double half = 0.5 * (hi - lo);
  x_ = (lo + half * (xi_.array() + 1.0)).matrix();
  w_ = half * rule.weights;
  V_ = legendre_vandermonde(xi_, modes);
  Eigen::VectorXd norm(modes);
  for (int k = 0; k < modes; ++k) norm(k) = 0.5 * (2 * k + 1);
  A_ = norm.asDiagonal() * V_.transpose() * rule.weights.asDiagonal();
}

Eigen::VectorXd LegendreBasis::to_values(const Eigen::VectorXd& coeffs) const {
  if (coeffs.size() == V_.cols()) return V_ * coeffs;
  return evaluate_at_nodes(coeffs);
}

Eigen::VectorXd LegendreBasis::derivative(const Eigen::VectorXd& coeffs) const {
  return legendre_derivative(coeffs) * (2.0 / (hi_ - lo_));
}

Eigen::VectorXd LegendreBasis::antiderivative(const Eigen::VectorXd& coeffs) const {
  return legendre_antiderivative(coeffs) * (0.5 * (hi_ - lo_));
}

Eigen::VectorXd LegendreBasis::evaluate_at_nodes(const Eigen::VectorXd& coeffs) const {
  const Eigen::Index p = coeffs.size();
  if (p <= V_.cols()) return V_.leftCols(p) * coeffs;
  Eigen::VectorXd out = V_ * coeffs.head(V_.cols());
  // Continue the recurrence for the extra high modes.
  Eigen::VectorXd pkm1 = V_.col(V_.cols() - 2 >= 0 ? V_.cols() - 2 : 0);
  Eigen::VectorXd pk = V_.col(V_.cols() - 1);
  for (Eigen::Index k = V_.cols() - 1; k + 1 < p; ++k) {
    Eigen::VectorXd next = ((2.0 * k + 1) * xi_.cwiseProduct(pk) - double(k) * pkm1) / double(k + 1);
    out += coeffs(k + 1) * next;
    pkm1 = std::move(pk);
    pk = std::move(next);
  }
  return out;
}

double LegendreBasis::evaluate(const Eigen::VectorXd& coeffs, double x) const {
  const double xi = 2.0 * (x - lo_) / (hi_ - lo_) - 1.0;
  return legendre_eval(coeffs, xi);
}

Eigen::MatrixXd LegendreBasis::derivative_matrix() const {
  const int p = modes();
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(p);
  for (int j = 0; j < p; ++j) {
    e.setZero();
    e(j) = 1;
    D.col(j) = derivative(e);
  }
  return V_ * D * A_;
}

double LegendreBasis::tail_fraction(const Eigen::VectorXd& coeffs) const {
  const Eigen::Index p = coeffs.size();
  const Eigen::Index tail = std::max<Eigen::Index>(1, p / 8);
  double total = 0, top = 0;
  for (Eigen::Index k = 0; k < p; ++k) {
    const double e = coeffs(k) * coeffs(k) * 2.0 / (2 * k + 1);
    total += e;
    if (k >= p - tail) top += e;
  }
  return total > 0 ? top / total : 0.0;
}

FourierBasis::FourierBasis(double period, int n) : period_(period), n_(n) {
  if (n % 2 != 0) throw Error(ErrorCode::InvalidParameter, "Fourier resolution must be even");
  x_.resize(n);
  for (int j = 0; j < n; ++j) x_(j) = period * j / n;
}

std::vector<std::complex<double>> FourierBasis::spectrum(const Eigen::VectorXd& values) const {
  Eigen::FFT<double> fft;
  std::vector<double> in(values.data(), values.data() + values.size());
  std::vector<std::complex<double>> out;
  fft.fwd(out, in);
  return out;
}

Eigen::VectorXd FourierBasis::synthesize(std::vector<std::complex<double>> spec) const {
  Eigen::FFT<double> fft;
  // The real inverse transform of Eigen::FFT expects the full spectrum.
  std::vector<std::complex<double>> full(spec.begin(), spec.end());
  std::vector<double> out;
  fft.inv(out, full);
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

Eigen::VectorXd FourierBasis::to_coeffs(const Eigen::VectorXd& values) const {
  const auto X = spectrum(values);
  Eigen::VectorXd c(n_);
  c(0) = X[0].real() / n_;
  for (int k = 1; k < n_ / 2; ++k) {
    c(2 * k - 1) = 2.0 * X[k].real() / n_;
    c(2 * k) = -2.0 * X[k].imag() / n_;
  }
  c(n_ - 1) = X[n_ / 2].real() / n_;
  return c;
}

Eigen::VectorXd FourierBasis::to_values(const Eigen::VectorXd& coeffs) const {
  std::vector<std::complex<double>> X(n_);
  X[0] = coeffs(0) * n_;
  for (int k = 1; k < n_ / 2; ++k) {
    X[k] = std::complex<double>(coeffs(2 * k - 1), -coeffs(2 * k)) * (0.5 * n_);
    X[n_ - k] = std::conj(X[k]);
  }
  X[n_ / 2] = coeffs(n_ - 1) * n_;
  return synthesize(std::move(X));
}

Eigen::VectorXd FourierBasis::derivative(const Eigen::VectorXd& values, int order) const {
  auto X = spectrum(values);
  const double base = 2.0 * std::numbers::pi / period_;
  for (int k = 0; k < n_; ++k) {
    const int wave = (k <= n_ / 2) ? k : k - n_;
    std::complex<double> factor = std::pow(std::complex<double>(0.0, base * wave), order);
    if (k == n_ / 2 && order % 2 == 1) factor = 0.0;
    X[k] *= factor;
  }
  return synthesize(std::move(X));
}

Eigen::MatrixXd FourierBasis::derivative_matrix(int order) const {
  Eigen::MatrixXd D(n_, n_);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(n_);
  for (int j = 0; j < n_; ++j) {
    e.setZero();
    e(j) = 1;
    D.col(j) = derivative(e, order);
  }
  return D;
}

double FourierBasis::tail_fraction(const Eigen::VectorXd& coeffs) const {
  const int kmax = n_ / 2;
  const int tail = std::max(1, kmax / 8);
  double total = coeffs(0) * coeffs(0), top = 0;
  for (int k = 1; k <= kmax; ++k) {
    double e = (k < kmax) ? 0.5 * (coeffs(2 * k - 1) * coeffs(2 * k - 1) + coeffs(2 * k) * coeffs(2 * k))
                          : coeffs(n_ - 1) * coeffs(n_ - 1);
    total += e;
    if (k > kmax - tail) top += e;
  }
  return total > 0 ? top / total : 0.0;
}

}  // namespace onofri::spectral
