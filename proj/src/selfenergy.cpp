#include "mdelab/selfenergy.hpp"

#include <Eigen/Eigenvalues>
#include <cstdint>
#include <map>
#include <mutex>

namespace mdelab {

namespace {

// torus offset reduced to (-n/2, n/2]
inline int tred(int d, int n) {
  d %= n;
  if (d < 0) d += n;
  return d > n / 2 ? d - n : d;
}

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

void check_filter_fits(const FilterKernel& f, int n) {
  if (n <= 4 * f.radius)
    throw SchemaError("filter: torus too small for the kernel footprint");
}

// symmetrized autocorrelation on offsets [-2r, 2r]^2
RMatrix autocorr_sym(const FilterKernel& f) {
  const RMatrix c1 = filter_autocorr(f);
  const int w = static_cast<int>(c1.rows());
  RMatrix cs(w, w);
  for (int u = 0; u < w; ++u)
    for (int v = 0; v < w; ++v) cs(u, v) = 0.5 * (c1(u, v) + c1(v, u));
  return cs;
}

}  // namespace

double filter_gain(const FilterKernel& f, int n) {
  return 1.0 / std::sqrt(double(n) * f.taps.squaredNorm());
}

RMatrix filter_autocorr(const FilterKernel& f) {
  const int r = f.radius, w = 2 * r + 1, ww = 4 * r + 1;
  RMatrix c1 = RMatrix::Zero(ww, ww);
  for (int u = -2 * r; u <= 2 * r; ++u)
    for (int v = -2 * r; v <= 2 * r; ++v) {
      double acc = 0.0;
      for (int i = 0; i < w; ++i)
        for (int j = 0; j < w; ++j) {
          const int iu = i + u, jv = j + v;
          if (iu < 0 || iu >= w || jv < 0 || jv >= w) continue;
          acc += f.taps(i, j) * f.taps(iu, jv);
        }
      c1(u + 2 * r, v + 2 * r) = acc;
    }
  return c1;
}

double filter_pair_moment(const FilterKernel& f, SymmetryClass cls, int n,
                          int i, int k, int l, int j) {
  check_filter_fits(f, n);
  const RMatrix cs = autocorr_sym(f);
  const int r2 = 2 * f.radius;
  const double g2 = 1.0 / (double(n) * f.taps.squaredNorm());
  auto cs_at = [&](int u, int v) -> double {
    u = tred(u, n), v = tred(v, n);
    if (std::abs(u) > r2 || std::abs(v) > r2) return 0.0;
    return cs(u + r2, v + r2);
  };
  double m = cs_at(i - j, k - l);
  if (cls == SymmetryClass::RealSymmetric) m += cs_at(i - l, k - j);
  return double(n) * g2 * m;
}

// ---- dense actions ----------------------------------------------------------

Matrix apply_gauss_reference(SymmetryClass cls, const Matrix& x) {
  const auto n = x.rows();
  Matrix out = ntrace(x) * Matrix::Identity(n, n);
  if (cls == SymmetryClass::RealSymmetric) out += x.transpose() / double(n);
  return out;
}

namespace {

Matrix apply_profile(const VarianceProfile& vp, SymmetryClass cls,
                     const Matrix& x) {
  const auto n = x.rows();
  if (vp.profile.rows() != n) throw SchemaError("profile: size mismatch");
  const Vector d = x.diagonal();
  Vector out_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cd acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) acc += vp.profile(i, k) * d[k];
    out_diag[i] = acc / double(n);
  }
  Matrix out = out_diag.asDiagonal();
  if (cls == SymmetryClass::RealSymmetric)
    out += (vp.profile.cast<cd>().cwiseProduct(x.transpose())) / double(n);
  return out;
}

Matrix apply_filter(const FilterKernel& f, SymmetryClass cls, const Matrix& x) {
  const int n = static_cast<int>(x.rows());
  check_filter_fits(f, n);
  const RMatrix cs = autocorr_sym(f);
  const int r2 = 2 * f.radius;
  const double g2 = 1.0 / (double(n) * f.taps.squaredNorm());

  // diagonal sums s(u) = sum_k X_{k, k-u}
  Vector s(2 * r2 + 1);
  for (int u = -r2; u <= r2; ++u) {
    cd acc = 0.0;
    for (int k = 0; k < n; ++k) acc += x(k, wrap(k - u, n));
    s[u + r2] = acc;
  }
  // translation-invariant part t1(d) = g^2 sum_u cs(d, u) s(u)
  Vector t1(2 * r2 + 1);
  for (int d = -r2; d <= r2; ++d) {
    cd acc = 0.0;
    for (int u = -r2; u <= r2; ++u) acc += cs(d + r2, u + r2) * s[u + r2];
    t1[d + r2] = g2 * acc;
  }
  Matrix out = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int d = tred(i - j, n);
      if (std::abs(d) <= r2) out(i, j) = t1[d + r2];
    }
  if (cls == SymmetryClass::RealSymmetric) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        cd acc = 0.0;
        for (int p = -r2; p <= r2; ++p)
          for (int q = -r2; q <= r2; ++q) {
            const double c = cs(p + r2, q + r2);
            if (c == 0.0) continue;
            acc += c * x(wrap(j + q, n), wrap(i - p, n));
          }
        out(i, j) += g2 * acc;
      }
  }
  return out;
}

}  // namespace

Matrix TensorEnergy::apply(const Matrix& x) const {
  const auto n = x.rows();
  if (smat.size() > 0) {
    const Eigen::Map<const Vector> xv(x.data(), n * n);
    Vector yv = smat * xv;
    return Eigen::Map<const Matrix>(yv.data(), n, n);
  }
  Matrix out = Matrix::Zero(n, n);
  for (size_t k = 0; k < factors.size(); ++k)
    out += lam[static_cast<Eigen::Index>(k)] * (factors[k] * x * factors[k]);
  return out;
}

TensorEnergy tensor_energy(const Model& m) {
  const auto* dt = std::get_if<DenseFourTensor>(&m.s);
  if (!dt) throw SchemaError("tensor_energy: model has no dense tensor");

  static std::mutex mu;
  static std::map<const RMatrix*, std::shared_ptr<const TensorEnergy>> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(dt->cov.get());
    if (it != cache.end()) return *it->second;
  }

  TensorEnergy te;
  te.basis = HermBasis{m.n, m.cls};
  Eigen::SelfAdjointEigenSolver<RMatrix> eig(*dt->cov);
  const RVector& lam = eig.eigenvalues();
  const double lmax = std::max(lam.cwiseAbs().maxCoeff(), 1e-300);
  if (lam.minCoeff() < -1e-9 * lmax)
    throw PositivityLoss("tensor_energy: covariance not PSD");
  std::vector<int> keep;
  for (int k = 0; k < lam.size(); ++k)
    if (lam[k] > 1e-13 * lmax) keep.push_back(k);
  te.lam.resize(static_cast<Eigen::Index>(keep.size()));
  te.factors.reserve(keep.size());
  for (size_t t = 0; t < keep.size(); ++t) {
    te.lam[static_cast<Eigen::Index>(t)] = lam[keep[t]];
    te.factors.push_back(te.basis.assemble(eig.eigenvectors().col(keep[t])));
  }
  if (m.n <= 40) {
    // assemble the vec-space action through one big GEMM:
    // smat[(i + j n), (k + l n)] = sum_t lam_t C_t(i,k) C_t(l,j)
    const int n = m.n, kk = static_cast<int>(keep.size());
    Matrix v(n * n, kk);
    for (int t = 0; t < kk; ++t) {
      const double sq = std::sqrt(te.lam[t]);
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i) v(i + k * n, t) = sq * te.factors[t](i, k);
    }
    Matrix g = v * v.transpose();  // g[(i + k n), (l + j n)]
    te.smat.resize(n * n, n * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l)
          for (int k = 0; k < n; ++k)
            te.smat(i + j * n, k + l * n) = g(i + k * n, l + j * n);
  }

  auto shared = std::make_shared<const TensorEnergy>(std::move(te));
  std::lock_guard<std::mutex> lock(mu);
  cache[dt->cov.get()] = shared;
  return *shared;
}

Matrix apply_self_energy(const Model& m, const Matrix& x, double mix) {
  Matrix own;
  if (std::holds_alternative<WignerScalar>(m.s)) {
    own = apply_gauss_reference(m.cls, x);
  } else if (const auto* vp = std::get_if<VarianceProfile>(&m.s)) {
    own = apply_profile(*vp, m.cls, x);
  } else if (const auto* f = std::get_if<FilterKernel>(&m.s)) {
    own = apply_filter(*f, m.cls, x);
  } else {
    own = tensor_energy(m).apply(x);
  }
  if (mix == 1.0) return own;
  return mix * own + (1.0 - mix) * apply_gauss_reference(m.cls, x);
}

// ---- structured closures -----------------------------------------------------

bool diagonal_closed(const Model& m) {
  if (!m.a.is_diagonal()) return false;
  return std::holds_alternative<WignerScalar>(m.s) ||
         std::holds_alternative<VarianceProfile>(m.s);
}

Vector apply_self_energy_diag(const Model& m, const Vector& mdiag, double mix) {
  const int n = m.n;
  const cd mean = mdiag.mean();
  Vector gauss = Vector::Constant(n, mean);
  if (m.real()) gauss += mdiag / double(n);

  Vector own;
  if (std::holds_alternative<WignerScalar>(m.s)) {
    own = gauss;
  } else if (const auto* vp = std::get_if<VarianceProfile>(&m.s)) {
    own.resize(n);
    for (int i = 0; i < n; ++i) {
      cd acc = 0.0;
      for (int k = 0; k < n; ++k) acc += vp->profile(i, k) * mdiag[k];
      own[i] = acc / double(n);
      if (m.real()) own[i] += vp->profile(i, i) * mdiag[i] / double(n);
    }
  } else {
    throw SchemaError("diagonal action: model is not diagonal-closed");
  }
  if (mix == 1.0) return own;
  return mix * own + (1.0 - mix) * gauss;
}

bool circulant_closed(const Model& m) {
  if (m.a.kind != Baseline::Kind::Zero) return false;
  return std::holds_alternative<FilterKernel>(m.s) ||
         std::holds_alternative<WignerScalar>(m.s);
}

Vector CirculantEnergy::apply(const Vector& symbol, double mix) const {
  const cd mean = symbol.mean();
  Vector gauss = Vector::Constant(n, mean);
  if (cls == SymmetryClass::RealSymmetric) gauss += symbol / double(n);
  Vector own;
  if (wigner) {
    own = gauss;
  } else {
    const RVector xr = symbol.real(), xi = symbol.imag();
    const RVector yr = k * xr, yi = k * xi;
    own.resize(n);
    for (int p = 0; p < n; ++p) own[p] = cd(yr[p], yi[p]);
    if (d.size() > 0) own += d.cwiseProduct(symbol.real()).cast<cd>() +
                             cd(0, 1) * d.cwiseProduct(symbol.imag()).cast<cd>();
  }
  if (mix == 1.0) return own;
  return mix * own + (1.0 - mix) * gauss;
}

namespace {

// content key for the circulant kernel cache (FNV-1a over the taps bytes)
std::uint64_t circulant_key(int n, SymmetryClass cls, const FilterKernel& f) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  mix(&n, sizeof n);
  mix(&cls, sizeof cls);
  mix(&f.radius, sizeof f.radius);
  mix(f.taps.data(), sizeof(double) * f.taps.size());
  return h;
}

}  // namespace

CirculantEnergy circulant_energy(const Model& m) {
  if (!circulant_closed(m))
    throw SchemaError("circulant action: model is not translation invariant");
  CirculantEnergy ce;
  ce.n = m.n;
  ce.cls = m.cls;
  if (std::holds_alternative<WignerScalar>(m.s)) {
    ce.wigner = true;
    return ce;
  }
  const auto& f = std::get<FilterKernel>(m.s);
  static std::mutex cache_mutex;
  static std::map<std::uint64_t, CirculantEnergy> cache;
  const std::uint64_t key = circulant_key(m.n, m.cls, f);
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  check_filter_fits(f, m.n);
  const int n = m.n, r = f.radius, w = 2 * r + 1;
  const double g2 = 1.0 / (double(n) * f.taps.squaredNorm());

  // |phi_hat|^2 on the full frequency grid
  RMatrix f2(n, n);
  {
    std::vector<cd> om(n);
    for (int t = 0; t < n; ++t)
      om[t] = std::exp(cd(0.0, -2.0 * M_PI * t / n));
    for (int p = 0; p < n; ++p)
      for (int s = 0; s < n; ++s) {
        cd acc = 0.0;
        for (int a = -r; a <= r; ++a)
          for (int b = -r; b <= r; ++b) {
            const double tap = f.taps(a + r, b + r);
            if (tap == 0.0) continue;
            acc += tap * om[wrap(p * a + s * b, n)];
          }
        f2(p, s) = std::norm(acc);
      }
  }
  ce.k.resize(n, n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      const int nq = wrap(-q, n);
      ce.k(p, q) = g2 * 0.5 * (f2(p, nq) + f2(nq, p));
    }
  if (m.cls == SymmetryClass::RealSymmetric) {
    // transpose part: diagonal multiplier D(s) = g^2 sum_{p,q} cs(p,q) w^{s(p+q)}
    const RMatrix cs = autocorr_sym(f);
    const int r2 = 2 * r;
    ce.d.resize(n);
    for (int s = 0; s < n; ++s) {
      cd acc = 0.0;
      for (int p = -r2; p <= r2; ++p)
        for (int q = -r2; q <= r2; ++q)
          acc += cs(p + r2, q + r2) *
                 std::exp(cd(0.0, 2.0 * M_PI * double(s) * (p + q) / n));
      ce.d[s] = g2 * acc.real();
    }
  }
  (void)w;
  {
    std::lock_guard<std::mutex> lock(cache_mutex);
    cache.emplace(key, ce);
  }
  return ce;
}

}  // namespace mdelab
