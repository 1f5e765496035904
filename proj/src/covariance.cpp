#include "mdelab/covariance.hpp"

#include <cmath>

#include "mdelab/selfenergy.hpp"
#include "mdelab/spectral.hpp"

namespace mdelab {

namespace {

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// Noise part of a filter draw when the iid field is a single delta at (s, t):
// V_ab = phi(s - a, t - b) on the index torus, W = g (V + V^adj) / sqrt(2).
// Columns of the resulting coordinate map L give Cov = L L^T exactly
// (second moments only depend on the unit variance of the base law).
RMatrix filter_covariance(const Model& m) {
  const auto& f = std::get<FilterKernel>(m.s);
  const int n = m.n, r = f.radius;
  if (n > 48)
    throw SchemaError("covariance: dense filter second moments need n <= 48");
  HermBasis basis{n, m.cls};
  const int dim = basis.dim();
  const double g = filter_gain(f, n);
  const bool real = m.cls == SymmetryClass::RealSymmetric;
  const int parts = real ? 1 : 2;  // real and imaginary iid fields
  RMatrix l(dim, n * n * parts);
  Matrix v = Matrix::Zero(n, n);
  Matrix w(n, n);
  for (int s = 0; s < n; ++s)
    for (int t = 0; t < n; ++t)
      for (int part = 0; part < parts; ++part) {
        // complex class: X = (xi + i zeta) / sqrt(2)
        const cd unit = part == 0 ? cd(real ? 1.0 : M_SQRT1_2, 0.0)
                                  : cd(0.0, M_SQRT1_2);
        for (int a = -r; a <= r; ++a)
          for (int b = -r; b <= r; ++b)
            v(wrap(s - a, n), wrap(t - b, n)) = f.taps(a + r, b + r) * unit;
        if (real)
          w = g * M_SQRT1_2 * (v + v.transpose());
        else
          w = g * M_SQRT1_2 * (v + v.adjoint());
        l.col(s * n * parts + t * parts + part) = basis.coords(w);
        for (int a = -r; a <= r; ++a)
          for (int b = -r; b <= r; ++b) v(wrap(s - a, n), wrap(t - b, n)) = 0.0;
      }
  return l * l.transpose();
}

RMatrix profile_covariance(const Model& m) {
  const auto& vp = std::get<VarianceProfile>(m.s);
  HermBasis basis{m.n, m.cls};
  const int n = m.n;
  const bool real = m.cls == SymmetryClass::RealSymmetric;
  RVector d(basis.dim());
  for (int k = 0; k < n; ++k) d[k] = (real ? 2.0 : 1.0) * vp.profile(k, k) / n;
  int idx = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      if (real) {
        d[idx++] = 2.0 * vp.profile(i, j) / n;
      } else {
        d[idx++] = vp.profile(i, j) / n;
        d[idx++] = vp.profile(i, j) / n;
      }
    }
  return d.asDiagonal();
}

}  // namespace

CovarianceTensor::CovarianceTensor(HermBasis basis, RMatrix cov)
    : basis_(basis), cov_(std::move(cov)) {
  if (cov_.rows() != basis_.dim() || cov_.cols() != basis_.dim())
    throw SchemaError("covariance: dimension mismatch with the basis");
  cov_ = 0.5 * (cov_ + cov_.transpose()).eval();
}

CovarianceTensor CovarianceTensor::of_model(const Model& m) {
  HermBasis basis{m.n, m.cls};
  if (std::holds_alternative<WignerScalar>(m.s))
    return gauss_reference(m.n, m.cls);
  if (std::holds_alternative<VarianceProfile>(m.s))
    return CovarianceTensor(basis, profile_covariance(m));
  if (std::holds_alternative<FilterKernel>(m.s))
    return CovarianceTensor(basis, filter_covariance(m));
  const auto& t = std::get<DenseFourTensor>(m.s);
  return CovarianceTensor(basis, *t.cov);
}

CovarianceTensor CovarianceTensor::gauss_reference(int n, SymmetryClass cls) {
  HermBasis basis{n, cls};
  const double v = (cls == SymmetryClass::RealSymmetric ? 2.0 : 1.0) / n;
  RMatrix cov = v * RMatrix::Identity(basis.dim(), basis.dim());
  return CovarianceTensor(basis, std::move(cov));
}

void CovarianceTensor::ensure_eig() const {
  if (eig_done_) return;
  Spectrum s = eig_full(cov_);
  lam_ = s.values;
  vec_ = s.rvectors;
  eig_done_ = true;
}

Matrix CovarianceTensor::sample(std::mt19937_64& rng) const {
  ensure_eig();
  std::normal_distribution<double> gauss(0.0, 1.0);
  RVector z(dim());
  for (int k = 0; k < dim(); ++k)
    z[k] = gauss(rng) * std::sqrt(std::max(0.0, lam_[k]));
  return basis_.assemble(vec_ * z);
}

Matrix CovarianceTensor::apply(const Matrix& x) const {
  ensure_eig();
  Matrix y = Matrix::Zero(n(), n());
  for (int k = 0; k < dim(); ++k) {
    if (lam_[k] <= 0.0) continue;
    const Matrix c = basis_.assemble(vec_.col(k));
    y += lam_[k] * (c * x * c);
  }
  return y;
}

double CovarianceTensor::fullness() const {
  ensure_eig();
  return n() * lam_.minCoeff();
}

double CovarianceTensor::quad_form(const Matrix& x) const {
  const RVector c = basis_.coords(x);
  return c.dot(cov_ * c);
}

CovarianceTensor CovarianceTensor::blend(const CovarianceTensor& other,
                                         double w) const {
  if (other.n() != n() || other.basis_.cls != basis_.cls)
    throw SchemaError("covariance: blend requires matching bases");
  return CovarianceTensor(basis_, cov_ + w * (other.cov_ - cov_));
}

bool CovarianceTensor::psd(double tol) const {
  ensure_eig();
  return lam_.minCoeff() >= tol;
}

}  // namespace mdelab
