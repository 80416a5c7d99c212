#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

#include "ucn/errors.hpp"

namespace ucn {

using Cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using IVec = Eigen::VectorXi;

/// Records the largest matrix dimension handed to any factorization in
/// this library (Cholesky, Hermitian eigensolver, SVD). The solver's
/// per-iteration work is required to stay at max(M_r, d_i); tests reset
/// the probe, run a solve, and assert on max_dim().
class FactorProbe {
 public:
  static void reset() { slot().store(0, std::memory_order_relaxed); }

  static long max_dim() { return slot().load(std::memory_order_relaxed); }

  static void record(long n) {
    auto& s = slot();
    long cur = s.load(std::memory_order_relaxed);
    while (cur < n && !s.compare_exchange_weak(cur, n)) {
    }
  }

 private:
  static std::atomic<long>& slot() {
    static std::atomic<long> dim{0};
    return dim;
  }
};

/// Cholesky of a Hermitian positive-definite matrix.
inline Eigen::LLT<CMat> hpd_factor(const CMat& a) {
  FactorProbe::record(a.rows());
  Eigen::LLT<CMat> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("Cholesky failed: matrix of dimension " +
                         std::to_string(a.rows()) +
                         " is not positive definite");
  }
  return llt;
}

inline double hpd_logdet(const Eigen::LLT<CMat>& llt) {
  double acc = 0.0;
  const auto& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) acc += std::log(l(i, i).real());
  const double v = 2.0 * acc;
  if (!std::isfinite(v)) throw NumericalError("non-finite logdet");
  return v;
}

inline double hpd_logdet(const CMat& a) { return hpd_logdet(hpd_factor(a)); }

/// Inverse of a small Hermitian positive-definite matrix (d_i x d_i).
inline CMat hpd_inverse(const CMat& a) {
  return hpd_factor(a).solve(CMat::Identity(a.rows(), a.cols()));
}

/// Eigen-decomposition of a Hermitian matrix, recorded by the probe.
inline Eigen::SelfAdjointEigenSolver<CMat> hermitian_eig(const CMat& a) {
  FactorProbe::record(a.rows());
  Eigen::SelfAdjointEigenSolver<CMat> es(a);
  if (es.info() != Eigen::Success)
    throw NumericalError("Hermitian eigendecomposition failed");
  return es;
}

/// SVD used by the closed-form baselines (never by the solver hot path).
inline Eigen::JacobiSVD<CMat> svd_full_v(const CMat& a) {
  FactorProbe::record(std::max(a.rows(), a.cols()));
  return Eigen::JacobiSVD<CMat>(a, Eigen::ComputeFullV);
}

/// Re tr(A^H B), the workhorse of the product metric.
inline double re_inner(const CMat& a, const CMat& b) {
  return (a.conjugate().cwiseProduct(b)).sum().real();
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives a stream-independent child seed (used for per-trial jobs).
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

/// Deterministic Gaussian source. Box-Muller over mt19937_64 draws, so a
/// given seed reproduces the same stream bit-for-bit on every platform,
/// which std::normal_distribution does not guarantee.
class Crng {
 public:
  explicit Crng(std::uint64_t seed) : eng_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Circularly-symmetric complex Gaussian with E|z|^2 = var.
  Cplx cgaussian(double var) {
    const double s = std::sqrt(var / 2.0);
    const double re = s * gaussian();
    const double im = s * gaussian();
    return {re, im};
  }

  CMat cgaussian_matrix(Eigen::Index rows, Eigen::Index cols, double var) {
    CMat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = cgaussian(var);
    return m;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace ucn
