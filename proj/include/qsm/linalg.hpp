#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace qsm {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr Complex kI{0.0, 1.0};

inline double max_abs(const CMat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }
inline double max_abs(const CVec& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Unitary DFT matrix with kernel w^{jk}/sqrt(N), w = exp(+2*pi*i/N).
inline CMat dense_dft(int n_qubits) {
  const int n = 1 << n_qubits;
  CMat f(n, n);
  for (int j = 0; j < n; ++j)
    for (int k = 0; k < n; ++k)
      f(j, k) = std::polar(1.0 / std::sqrt(double(n)), 2.0 * kPi * double((long long)j * k % n) / n);
  return f;
}

// Radix-2 transform of power-of-two length with precomputed twiddles.
// transform(v, +1) applies the dense_dft kernel; sign -1 its inverse.
class DftPlan {
 public:
  explicit DftPlan(int n_qubits) : nq_(n_qubits), size_(1 << n_qubits) {
    if (n_qubits < 0 || n_qubits > 24) throw std::invalid_argument("DftPlan: bad qubit count");
    bitrev_.resize(size_);
    for (int i = 0; i < size_; ++i) {
      int r = 0;
      for (int b = 0; b < nq_; ++b) r |= ((i >> b) & 1) << (nq_ - 1 - b);
      bitrev_[i] = r;
    }
    tw_.reserve(size_);
    for (int len = 2; len <= size_; len <<= 1)
      for (int j = 0; j < len / 2; ++j) tw_.push_back(std::polar(1.0, 2.0 * kPi * j / len));
  }

  int size() const { return size_; }

  void transform(Complex* v, int sign) const {
    for (int i = 0; i < size_; ++i)
      if (bitrev_[i] > i) std::swap(v[i], v[bitrev_[i]]);
    std::size_t base = 0;
    for (int len = 2; len <= size_; len <<= 1) {
      const int half = len / 2;
      for (int start = 0; start < size_; start += len) {
        for (int j = 0; j < half; ++j) {
          Complex w = tw_[base + j];
          if (sign < 0) w = std::conj(w);
          const Complex a = v[start + j];
          const Complex b = v[start + j + half] * w;
          v[start + j] = a + b;
          v[start + j + half] = a - b;
        }
      }
      base += half;
    }
    const double norm = 1.0 / std::sqrt(double(size_));
    for (int i = 0; i < size_; ++i) v[i] *= norm;
  }

  void transform(CVec& v, int sign) const {
    if (v.size() != size_) throw std::invalid_argument("DftPlan: size mismatch");
    transform(v.data(), sign);
  }

  // sigma <- F^s sigma (F^s)^dagger, using column transforms on both factors.
  void conjugate_dm(CMat& sigma, int sign) const {
    if (sigma.rows() != size_ || sigma.cols() != size_)
      throw std::invalid_argument("DftPlan: dm size mismatch");
    for (int c = 0; c < size_; ++c) transform(sigma.col(c).data(), sign);
    sigma.adjointInPlace();
    for (int c = 0; c < size_; ++c) transform(sigma.col(c).data(), sign);
    sigma.adjointInPlace();
  }

 private:
  int nq_;
  int size_;
  std::vector<int> bitrev_;
  std::vector<Complex> tw_;
};

// sqrt of a Hermitian PSD matrix via eigendecomposition, eigenvalues clamped
// at zero. Eigenvalues below a relative threshold are rounding artifacts of
// singular inputs and would surface as sqrt(eps)-sized noise, so they clamp
// too.
inline CMat hermitian_sqrt(const CMat& m) {
  Eigen::SelfAdjointEigenSolver<CMat> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("hermitian_sqrt: eigensolver failed");
  const double cutoff = 1e-13 * std::max(0.0, es.eigenvalues().maxCoeff());
  Eigen::VectorXd ev(es.eigenvalues().size());
  for (int i = 0; i < ev.size(); ++i)
    ev[i] = es.eigenvalues()[i] > cutoff ? std::sqrt(es.eigenvalues()[i]) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

// Raised by integrators/fitters when a numerical contract cannot be met.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace qsm
