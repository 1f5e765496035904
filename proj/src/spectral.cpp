#include "mdelab/spectral.hpp"

#include <algorithm>
#include <random>
#include <vector>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace mdelab {

namespace {

void check_info(int info, const char* what) {
  if (info != 0)
    throw NonConvergence(std::string(what) + ": LAPACK info=" +
                         std::to_string(info));
}

}  // namespace

cd Spectrum::resolvent_trace(cd z) const {
  cd acc = 0.0;
  for (int k = 0; k < n(); ++k) acc += 1.0 / (values[k] - z);
  return acc / double(n());
}

int Spectrum::count_below(double e) const {
  const double* b = values.data();
  return static_cast<int>(std::upper_bound(b, b + values.size(), e) - b);
}

Spectrum eig_values(const Matrix& h) {
  Spectrum s;
  const int n = static_cast<int>(h.rows());
  Matrix a = h;
  s.values.resize(n);
  check_info(LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n, a.data(), n,
                            s.values.data()),
             "zheevd");
  return s;
}

Spectrum eig_full(const Matrix& h) {
  Spectrum s;
  const int n = static_cast<int>(h.rows());
  s.vectors = h;
  s.values.resize(n);
  check_info(LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n, s.vectors.data(), n,
                            s.values.data()),
             "zheevd");
  return s;
}

Spectrum eig_values(const RMatrix& h) {
  Spectrum s;
  s.real = true;
  const int n = static_cast<int>(h.rows());
  RMatrix a = h;
  s.values.resize(n);
  check_info(LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'N', 'L', n, a.data(), n,
                            s.values.data()),
             "dsyevd");
  return s;
}

Spectrum eig_full(const RMatrix& h) {
  Spectrum s;
  s.real = true;
  const int n = static_cast<int>(h.rows());
  s.rvectors = h;
  s.values.resize(n);
  check_info(LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, s.rvectors.data(),
                            n, s.values.data()),
             "dsyevd");
  return s;
}

ResolventProbe make_probe(const Spectrum& s, const Matrix& probes) {
  if (!s.has_vectors()) throw SchemaError("probe: spectrum lacks vectors");
  ResolventProbe p;
  p.values = s.values;
  if (s.vectors.size() > 0)
    p.proj = s.vectors.adjoint() * probes;
  else
    p.proj = s.rvectors.transpose() * probes.real() +
             cd(0.0, 1.0) * (s.rvectors.transpose() * probes.imag());
  return p;
}

cd ResolventProbe::bilinear(int i, int j, cd z) const {
  cd acc = 0.0;
  const int n = static_cast<int>(values.size());
  for (int k = 0; k < n; ++k)
    acc += std::conj(proj(k, i)) * proj(k, j) / (values[k] - z);
  return acc;
}

namespace {

// Ritz data of the k-step Lanczos tridiagonal: values ascending plus the
// residual factors beta_k |last row of the eigenvector matrix|
struct RitzSet {
  RVector theta;
  RVector resid;
};

RitzSet ritz_of(const std::vector<double>& alpha, const std::vector<double>& betao) {
  const int k = static_cast<int>(alpha.size());
  RitzSet r;
  std::vector<double> d(alpha);
  std::vector<double> e(std::max<std::size_t>(1, k - 1), 0.0);
  for (int j = 0; j + 1 < k; ++j) e[j] = betao[j];
  RMatrix z(k, k);
  check_info(LAPACKE_dstevd(LAPACK_COL_MAJOR, 'V', k, d.data(), e.data(),
                            z.data(), k),
             "dstevd");
  r.theta = Eigen::Map<const RVector>(d.data(), k);
  r.resid.resize(k);
  const double bk = betao[k - 1];
  for (int i = 0; i < k; ++i) r.resid[i] = bk * std::abs(z(k - 1, i));
  return r;
}

RVector window_of(const RitzSet& r, double sigma, double lo, double hi,
                  double conv_floor, double tol) {
  std::vector<double> in;
  for (int i = 0; i < r.theta.size(); ++i) {
    const double th = r.theta[i];
    if (r.resid[i] > tol * std::max(std::abs(th), conv_floor)) continue;
    if (th == 0.0) continue;
    const double lam = sigma + 1.0 / th;
    if (lam >= lo && lam <= hi) in.push_back(lam);
  }
  std::sort(in.begin(), in.end());
  return Eigen::Map<const RVector>(in.data(), in.size());
}

}  // namespace

RVector eig_window(const Matrix& h, double lo, double hi, double tol,
                   int max_vecs) {
  const int n = static_cast<int>(h.rows());
  if (h.cols() != n) throw SchemaError("eig_window: square matrix required");
  if (!(lo < hi)) throw SchemaError("eig_window: empty window");
  if (!(tol > 0)) throw SchemaError("eig_window: tolerance must be positive");

  if (n <= 256) {  // dense route is cheap and exact
    const Spectrum s = eig_values(h);
    std::vector<double> in;
    for (int i = 0; i < n; ++i)
      if (s.values[i] >= lo && s.values[i] <= hi) in.push_back(s.values[i]);
    return Eigen::Map<const RVector>(in.data(), in.size());
  }

  const double radius = 0.5 * (hi - lo);
  double sigma = 0.5 * (lo + hi);
  std::vector<lapack_int> ipiv(n);
  Matrix f;
  for (int attempt = 0;; ++attempt) {
    f = h;
    f.diagonal().array() -= sigma;
    const int info = LAPACKE_zhetrf(LAPACK_COL_MAJOR, 'L', n, f.data(), n,
                                    ipiv.data());
    if (info == 0) break;
    if (info < 0 || attempt >= 1)
      throw NonConvergence("eig_window: zhetrf info=" + std::to_string(info));
    sigma += 1e-11 * (1.0 + std::abs(sigma));  // exact hit on an eigenvalue
  }
  const auto apply_inv = [&](Vector v) {
    check_info(LAPACKE_zhetrs(LAPACK_COL_MAJOR, 'L', n, 1, f.data(), n,
                              ipiv.data(), v.data(), n),
               "zhetrs");
    return v;
  };

  max_vecs = std::min(max_vecs, n);
  Matrix q(n, max_vecs);
  {
    std::mt19937_64 rng(0x51ac00e1u);  // fixed start: deterministic output
    std::normal_distribution<double> nd;
    Vector v0(n);
    for (int i = 0; i < n; ++i) v0(i) = cd(nd(rng), nd(rng));
    q.col(0) = v0 / v0.norm();
  }

  std::vector<double> alpha, betao;
  const double theta_stop = 1.0 / (1.5 * radius);  // window edge with slack
  const double conv_floor = 0.1 * theta_stop;
  RVector settled;
  int settle_age = -1;  // iterations since the window set last changed
  bool invariant = false;

  for (int k = 1; k <= max_vecs; ++k) {
    Vector v = apply_inv(q.col(k - 1));
    if (k >= 2) v -= betao[k - 2] * q.col(k - 2);
    const double a = q.col(k - 1).dot(v).real();
    v -= a * q.col(k - 1);
    v -= q.leftCols(k) * (q.leftCols(k).adjoint() * v).eval();
    v -= q.leftCols(k) * (q.leftCols(k).adjoint() * v).eval();
    alpha.push_back(a);
    const double b = v.norm();
    betao.push_back(b);

    double tnorm = 0.0;
    for (double x : alpha) tnorm = std::max(tnorm, std::abs(x));
    for (double x : betao) tnorm = std::max(tnorm, x);
    invariant = b <= 1e-14 * tnorm || k == n;
    if (!invariant && k < max_vecs) q.col(k) = v / b;

    if (invariant || k == max_vecs || k % 5 == 0) {
      const RitzSet r = ritz_of(alpha, betao);
      if (invariant)  // Krylov space exhausted: every Ritz value is exact
        return window_of(r, sigma, lo, hi, conv_floor, 1e10);

      // Empty-window fast path: the extreme Ritz value is the first to
      // converge, and it bounds the distance from sigma to the nearest
      // eigenvalue. Once it has converged short of the slack radius no
      // eigenvalue can reach [lo, hi].
      int imax = 0;
      for (int i = 1; i < r.theta.size(); ++i)
        if (std::abs(r.theta[i]) > std::abs(r.theta[imax])) imax = i;
      const double amax = std::abs(r.theta[imax]);
      if (k >= 15 && amax < theta_stop &&
          r.resid[imax] <= tol * std::max(amax, conv_floor))
        return RVector(0);

      bool covered = true;  // every Ritz value reaching the window converged
      bool right = false, left = false;  // converged beyond each window side
      for (int i = 0; i < r.theta.size(); ++i) {
        const double th = r.theta[i];
        const bool conv = r.resid[i] <= tol * std::max(std::abs(th), conv_floor);
        if (std::abs(th) >= theta_stop && !conv) covered = false;
        if (conv && th > 0 && th < theta_stop) right = true;
        if (conv && th < 0 && -th < theta_stop) left = true;
      }
      if (covered && right && left) {
        RVector now = window_of(r, sigma, lo, hi, conv_floor, tol);
        const bool same =
            settle_age >= 0 && now.size() == settled.size() &&
            (now.size() == 0 ||
             (now - settled).cwiseAbs().maxCoeff() <= 1e-9 * (1.0 + radius));
        if (same) {
          if (++settle_age >= 2) return now;  // stable across ~10 iterations
        } else {
          settled = now;
          settle_age = 0;
        }
      } else {
        settle_age = -1;
      }
    }
  }
  throw NonConvergence("eig_window: Lanczos did not settle within max_vecs");
}

double window_overlap_max(const Spectrum& s, const Vector& x, double lo,
                          double hi) {
  if (!s.has_vectors()) throw SchemaError("overlap: spectrum lacks vectors");
  double best = 0.0;
  for (int k = 0; k < s.n(); ++k) {
    if (s.values[k] < lo || s.values[k] > hi) continue;
    cd ov = 0.0;
    if (s.vectors.size() > 0)
      ov = s.vectors.col(k).dot(x);
    else
      ov = s.rvectors.col(k).cast<cd>().dot(x);
    best = std::max(best, std::norm(ov));
  }
  return best;
}

}  // namespace mdelab
