#include "mdelab/model.hpp"

#include <cmath>

namespace mdelab {

// ---- Baseline ---------------------------------------------------------------

Baseline Baseline::dense_hermitian(Matrix m) {
  if (m.rows() != m.cols()) throw SchemaError("baseline: square matrix required");
  if ((m - m.adjoint()).norm() > 1e-12 * (1.0 + m.norm()))
    throw SchemaError("baseline: matrix must be Hermitian");
  Baseline b;
  b.kind = Kind::Dense;
  b.dense = std::move(m);
  return b;
}

RVector Baseline::diagonal_values(int n) const {
  RVector v = RVector::Zero(n);
  switch (kind) {
    case Kind::Zero:
      break;
    case Kind::TwoLevel:
      v.head(n / 2).setConstant(level);
      v.tail(n - n / 2).setConstant(-level);
      break;
    case Kind::Diagonal:
      if (diag.size() != n) throw SchemaError("baseline: diagonal length != n");
      v = diag;
      break;
    case Kind::Dense:
      throw SchemaError("baseline: dense kind has no diagonal reduction");
  }
  return v;
}

Matrix Baseline::materialize(int n) const {
  if (kind == Kind::Dense) {
    if (dense.rows() != n) throw SchemaError("baseline: dense size != n");
    return dense;
  }
  return diagonal_values(n).cast<cd>().asDiagonal();
}

double Baseline::op_norm_bound(int) const {
  switch (kind) {
    case Kind::Zero:
      return 0.0;
    case Kind::TwoLevel:
      return std::abs(level);
    case Kind::Diagonal:
      return diag.size() ? diag.cwiseAbs().maxCoeff() : 0.0;
    case Kind::Dense:
      return dense.cwiseAbs().rowwise().sum().maxCoeff();  // row-sum bound
  }
  return 0.0;
}

// ---- factories --------------------------------------------------------------

Model wigner_model(SymmetryClass cls, int n) {
  Model m;
  m.cls = cls;
  m.n = n;
  return m;
}

Model two_level_model(SymmetryClass cls, int n, double d) {
  Model m = wigner_model(cls, n);
  m.a = Baseline::two_level(d);
  return m;
}

Model variance_profile_model(SymmetryClass cls, int n, double amp) {
  if (std::abs(amp) >= 1.0)
    throw SchemaError("variance profile: |amp| < 1 required for positivity");
  RMatrix p(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double xi = (i + 0.5) / n, xj = (j + 0.5) / n;
      p(i, j) = 1.0 + amp * std::cos(M_PI * (xi + xj));
    }
  Model m = wigner_model(cls, n);
  m.s = VarianceProfile{std::move(p)};
  return m;
}

int default_filter_radius(int n) {
  return std::max(1, static_cast<int>(std::llround(std::pow(n, 0.125))));
}

FilterKernel make_filter_kernel(int n, NoiseLaw noise) {
  const int r = default_filter_radius(n);
  const int w = 2 * r + 1;
  RMatrix taps = RMatrix::Zero(w, w);
  for (int i = -r; i <= r; ++i)
    for (int j = -r; j <= r; ++j) {
      if (std::abs(i) + std::abs(j) > r) continue;  // L1 diamond support
      const double tent = 1.0 - double(std::abs(i) + std::abs(j)) / (r + 1.0);
      const double tilt = 1.0 + 0.3 * i / (r + 1.0) + 0.15 * j / (r + 1.0);
      taps(i + r, j + r) = tent * tilt;
    }
  taps /= taps.norm();  // sum of squares = 1
  FilterKernel f;
  f.radius = r;
  f.taps = std::move(taps);
  f.noise = noise;
  return f;
}

Model filter_model(SymmetryClass cls, int n, NoiseLaw noise) {
  Model m = wigner_model(cls, n);
  m.s = make_filter_kernel(n, noise);
  return m;
}

Model dense_tensor_model(SymmetryClass cls, int n,
                         std::shared_ptr<const RMatrix> cov) {
  Model m = wigner_model(cls, n);
  const HermBasis basis{n, cls};
  if (!cov || cov->rows() != basis.dim() || cov->cols() != basis.dim())
    throw SchemaError("dense tensor: covariance must be dim x dim");
  m.s = DenseFourTensor{std::move(cov)};
  return m;
}

Model metric_decay_model(SymmetryClass cls, int n, double s_exp) {
  if (n > 96) throw SchemaError("metric decay: dense tensor capped at n = 96");
  if (s_exp <= 2.0)
    throw SchemaError("metric decay: decay exponent > 2 required");
  const HermBasis basis{n, cls};
  const int dim = basis.dim();
  // pair label of each basis element
  std::vector<int> bi(dim), bj(dim);
  {
    int m1 = 0;
    for (int k = 0; k < n; ++k, ++m1) bi[m1] = bj[m1] = k;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) {
        bi[m1] = i, bj[m1] = j, ++m1;  // symmetric element
        if (cls == SymmetryClass::ComplexHermitian) {
          bi[m1] = i, bj[m1] = j, ++m1;  // antisymmetric element
        }
      }
  }
  RMatrix root(dim, dim);
  for (int p = 0; p < dim; ++p)
    for (int q = 0; q <= p; ++q) {
      const int d = label_distance(n, bi[p], bj[p], bi[q], bj[q]);
      root(p, q) = root(q, p) = 1.0 / (1.0 + std::pow(double(d), s_exp));
    }
  auto cov = std::make_shared<RMatrix>(root * root.transpose());
  const double tr = cov->trace();
  *cov *= double(n) / tr;  // normalize E tr W^2 = n (matches the wigner scale)
  Model m = wigner_model(cls, n);
  m.s = DenseFourTensor{std::move(cov)};
  return m;
}

// ---- Hermitian basis --------------------------------------------------------

Matrix HermBasis::element(int m) const {
  Matrix b = Matrix::Zero(n, n);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  if (m < n) {
    b(m, m) = 1.0;
    return b;
  }
  int idx = m - n;
  const int per_pair = cls == SymmetryClass::ComplexHermitian ? 2 : 1;
  int pair = idx / per_pair, which = idx % per_pair;
  // decode pair index -> (i, j), i < j, row-major over the strict upper part
  int i = 0, remaining = pair;
  while (remaining >= n - 1 - i) remaining -= n - 1 - i, ++i;
  const int j = i + 1 + remaining;
  if (which == 0) {
    b(i, j) = b(j, i) = inv_sqrt2;
  } else {
    b(i, j) = cd(0.0, inv_sqrt2);
    b(j, i) = cd(0.0, -inv_sqrt2);
  }
  return b;
}

RVector HermBasis::coords(const Matrix& x) const {
  RVector c(dim());
  const double sqrt2 = std::sqrt(2.0);
  for (int k = 0; k < n; ++k) c[k] = x(k, k).real();
  int m = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      c[m++] = sqrt2 * x(i, j).real();
      if (cls == SymmetryClass::ComplexHermitian) c[m++] = sqrt2 * x(i, j).imag();
    }
  return c;
}

Matrix HermBasis::assemble(const RVector& c) const {
  if (c.size() != dim()) throw SchemaError("basis: coordinate length mismatch");
  Matrix x = Matrix::Zero(n, n);
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < n; ++k) x(k, k) = c[k];
  int m = n;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double re = c[m++] * inv_sqrt2;
      double im = 0.0;
      if (cls == SymmetryClass::ComplexHermitian) im = c[m++] * inv_sqrt2;
      x(i, j) = cd(re, im);
      x(j, i) = cd(re, -im);
    }
  return x;
}

int label_distance(int n, int a1, int b1, int a2, int b2) {
  auto td = [n](int a, int b) {
    int d = std::abs(a - b) % n;
    return std::min(d, n - d);
  };
  const int direct = td(a1, a2) + td(b1, b2);
  const int swapped = td(a1, b2) + td(b1, a2);
  return std::min(direct, swapped);
}

}  // namespace mdelab
