#include "mdelab/cumulants.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/SVD>

#include "mdelab/sampler.hpp"
#include "mdelab/selfenergy.hpp"

namespace mdelab {
namespace {

inline int wrap_idx(int i, int n) {
  int d = i % n;
  return d < 0 ? d + n : d;
}

// canonical representative of diff mod n inside [-band, band]; false if the
// offset falls outside the band (assumes n > 2 * band)
inline bool torus_offset(int diff, int n, int band, int& out) {
  int d = diff % n;
  if (d < 0) d += n;
  if (d <= band) {
    out = d;
    return true;
  }
  if (d >= n - band) {
    out = d - n;
    return true;
  }
  return false;
}

// coefficient of the driving cell (u, v) in the real-class entry w_{ab},
// including the g/sqrt(2) prefactor: w_ab = pref * sum_uv [T(u-a, v-b) +
// T(u-b, v-a)] x_uv with T the taps on the L1 diamond
double cell_coef(const FilterKernel& f, double pref, int n, int a, int b,
                 int u, int v) {
  const int r = f.radius;
  int p, q;
  double c = 0.0;
  if (torus_offset(u - a, n, r, p) && torus_offset(v - b, n, r, q))
    c += f.taps(p + r, q + r);
  if (torus_offset(u - b, n, r, p) && torus_offset(v - a, n, r, q))
    c += f.taps(p + r, q + r);
  return pref * c;
}

// sorted unique cell ids (u * n + v) carrying a nonzero coefficient of w_{ab}
void support_cells(const FilterKernel& f, int n, int a, int b,
                   std::vector<int>& cells) {
  cells.clear();
  const int r = f.radius;
  for (int pass = 0; pass < 2; ++pass) {
    const int ca = pass == 0 ? a : b, cb = pass == 0 ? b : a;
    for (int j = -r; j <= r; ++j)
      for (int k = -r; k <= r; ++k) {
        if (f.taps(j + r, k + r) == 0.0) continue;
        cells.push_back(wrap_idx(ca + j, n) * n + wrap_idx(cb + k, n));
      }
    if (a == b) break;
  }
  std::sort(cells.begin(), cells.end());
  cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
}

// tap autocorrelation lookup R(p, q) = sum_{jk} T(j, k) T(j + p, k + q) with
// torus-canonical offsets; zero outside the [-2r, 2r] band
struct Autocorr {
  explicit Autocorr(const FilterKernel& f)
      : r2(2 * f.radius), table(filter_autocorr(f)) {}
  double at(int dp, int dq, int n) const {
    int p, q;
    if (!torus_offset(dp, n, r2, p) || !torus_offset(dq, n, r2, q)) return 0.0;
    return table(p + r2, q + r2);
  }
  int r2;
  RMatrix table;
};

// second cumulant of rescaled entries sqrt(n) w for a filter model:
//   real:    [R(a-c,b-d) + R(a-d,b-c) + R(b-c,a-d) + R(b-d,a-c)] / 2
//   complex: [R(a-d,b-c) + R(b-c,a-d)] / 2
// (tap square sum is 1, so n g^2 = 1)
double kappa2_filter_entry(const Autocorr& ac, bool real, int n, int a, int b,
                           int c, int d) {
  if (real)
    return 0.5 * (ac.at(a - c, b - d, n) + ac.at(a - d, b - c, n) +
                  ac.at(b - c, a - d, n) + ac.at(b - d, a - c, n));
  return 0.5 * (ac.at(a - d, b - c, n) + ac.at(b - c, a - d, n));
}

// rescaled second cumulant of the independent gaussian reference
inline double kappa2_gauss(bool real, int a, int b, int c, int d) {
  double v = (c == b && d == a) ? 1.0 : 0.0;
  if (real && c == a && d == b) v += 1.0;
  return v;
}

// Perron value of a symmetric nonnegative matrix (= its operator norm),
// approached from below by the Rayleigh quotient of the positive iterate
double power_iteration_norm(const std::function<void(const RVector&, RVector&)>& mul,
                            int dim, int iters) {
  RVector x = RVector::Ones(dim) / std::sqrt(double(dim));
  RVector y(dim);
  double rq = 0.0;
  for (int it = 0; it < iters; ++it) {
    mul(x, y);
    rq = x.dot(y);
    const double norm = y.norm();
    if (norm == 0.0) return 0.0;
    x = y / norm;
  }
  return rq;
}

// |kappa_2| as an explicit nonnegative matrix on the n^2 label space,
// honoring the gaussian interpolation weight s_mix
RMatrix dense_abs_kappa2(const Model& m) {
  const int n = m.n, nn = n * n;
  const bool real = m.real();
  const HermBasis basis{n, m.cls};
  const int dim = basis.dim();
  const auto& t = std::get<DenseFourTensor>(m.s);

  // columns of u are the vectorized basis matrices
  Matrix u(nn, dim);
  for (int k = 0; k < dim; ++k) {
    RVector e = RVector::Zero(dim);
    e(k) = 1.0;
    Matrix bk = basis.assemble(e);
    u.col(k) = Eigen::Map<const Vector>(bk.data(), nn);
  }
  // E w_alpha w_beta = sum_kl Cov_kl B_k(alpha) B_l(beta); rescale by n
  Matrix second = u * (t.cov->cast<cd>() * u.transpose());
  RMatrix abs_k(nn, nn);
  for (int col = 0; col < nn; ++col)
    for (int row = 0; row < nn; ++row) {
      // Eigen maps are column-major: row = a + n * b for entry (a, b)
      const int a = row % n, b = row / n, c = col % n, d = col / n;
      const cd mixed = m.s_mix * double(n) * second(row, col) +
                       (1.0 - m.s_mix) * kappa2_gauss(real, a, b, c, d);
      abs_k(row, col) = std::abs(mixed);
    }
  return abs_k;
}

}  // namespace

double kappa2_norm(const Model& m, int iters) {
  if (m.n <= 0) throw SchemaError("kappa2_norm: empty model");
  const int n = m.n, nn = n * n;
  const bool real = m.real();
  const double mix = m.s_mix, gw = 1.0 - m.s_mix;
  const auto idx = [n](int a, int b) { return a * n + b; };

  if (std::holds_alternative<WignerScalar>(m.s)) {
    // kappa2(ab, cd) = [cd = ba] (+ [cd = ab] in the real class) at any mix
    auto mul = [&](const RVector& x, RVector& y) {
      y.resize(nn);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          y(idx(a, b)) = x(idx(b, a)) + (real ? x(idx(a, b)) : 0.0);
    };
    return power_iteration_norm(mul, nn, iters);
  }

  if (const auto* vp = std::get_if<VarianceProfile>(&m.s)) {
    const RMatrix& p = vp->profile;
    auto mul = [&](const RVector& x, RVector& y) {
      y.resize(nn);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          const double w = std::abs(mix * p(a, b) + gw);
          y(idx(a, b)) = w * (x(idx(b, a)) + (real ? x(idx(a, b)) : 0.0));
        }
    };
    return power_iteration_norm(mul, nn, iters);
  }

  if (const auto* f = std::get_if<FilterKernel>(&m.s)) {
    if (n <= 4 * f->radius + 1)
      throw SchemaError("kappa2_norm: filter wraps onto itself");
    const Autocorr ac(*f);
    const int band = 2 * f->radius;
    // sparse rows: labels within the autocorrelation band in either pairing
    std::vector<std::vector<std::pair<int, double>>> rows(nn);
    std::vector<int> stamp(nn, -1);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const int row = idx(a, b);
        auto& out = rows[row];
        for (int p = -band; p <= band; ++p)
          for (int q = -band; q <= band; ++q) {
            for (int fam = 0; fam < 2; ++fam) {
              const int c = fam == 0 ? wrap_idx(a - p, n) : wrap_idx(b - q, n);
              const int d = fam == 0 ? wrap_idx(b - q, n) : wrap_idx(a - p, n);
              const int col = idx(c, d);
              if (stamp[col] == row) continue;
              stamp[col] = row;
              double v = mix * kappa2_filter_entry(ac, real, n, a, b, c, d) +
                         gw * kappa2_gauss(real, a, b, c, d);
              if (v != 0.0) out.emplace_back(col, std::abs(v));
            }
          }
      }
    auto mul = [&](const RVector& x, RVector& y) {
      y.resize(nn);
      for (int row = 0; row < nn; ++row) {
        double acc = 0.0;
        for (const auto& [col, v] : rows[row]) acc += v * x(col);
        y(row) = acc;
      }
    };
    return power_iteration_norm(mul, nn, iters);
  }

  // dense four-tensor: materialize |kappa_2| (small n only)
  if (n > 32)
    throw SchemaError("kappa2_norm: dense four-tensor norm capped at n = 32");
  RMatrix abs_k = dense_abs_kappa2(m);
  auto mul = [&](const RVector& x, RVector& y) { y = abs_k * x; };
  return power_iteration_norm(mul, nn, iters);
}

double kappa3_filter(const FilterKernel& f, int n, int a1, int b1, int a2,
                     int b2, int a3, int b3) {
  for (int i : {a1, b1, a2, b2, a3, b3})
    if (i < 0 || i >= n) throw SchemaError("kappa3_filter: label out of range");
  const double k3 = law_third_moment(f.noise);
  if (k3 == 0.0) return 0.0;
  const double pref = filter_gain(f, n) * M_SQRT1_2;
  std::vector<int> cells;
  support_cells(f, n, a1, b1, cells);
  double acc = 0.0;
  for (int c : cells) {
    const int u = c / n, v = c % n;
    const double c1 = cell_coef(f, pref, n, a1, b1, u, v);
    if (c1 == 0.0) continue;
    const double c2 = cell_coef(f, pref, n, a2, b2, u, v);
    if (c2 == 0.0) continue;
    acc += c1 * c2 * cell_coef(f, pref, n, a3, b3, u, v);
  }
  return std::pow(double(n), 1.5) * k3 * acc;
}

double tree_sum(const Model& m, const Matrix& x, const Matrix& y,
                const Matrix& z) {
  const int n = m.n;
  if (x.rows() != n || x.cols() != n || y.rows() != n || y.cols() != n ||
      z.rows() != n || z.cols() != n)
    throw SchemaError("tree_sum: test matrices must be n x n");
  const auto* f = std::get_if<FilterKernel>(&m.s);
  if (!f) return 0.0;  // gaussian-driven representations have no kappa_3
  const double k3 = law_third_moment(f->noise);
  if (k3 == 0.0) return 0.0;
  if (m.cls != SymmetryClass::RealSymmetric)
    throw SchemaError("tree_sum: third cumulants implemented for the real class");
  if (n <= 4 * f->radius + 1)
    throw SchemaError("tree_sum: filter wraps onto itself");

  const int nn = n * n;
  const double pref = filter_gain(*f, n) * M_SQRT1_2;
  // gaussian interpolation scales every third cumulant by s_mix^{3/2}
  const double k3_eff = k3 * std::pow(m.s_mix, 1.5);

  // supports and reverse supports on the driving-cell grid
  std::vector<std::vector<int>> supp(nn), rev(nn);
  {
    std::vector<int> cells;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        support_cells(*f, n, a, b, cells);
        supp[a * n + b] = cells;
        for (int c : cells) rev[c].push_back(a * n + b);
      }
  }

  std::vector<int> stamp2(nn, 0), stamp3(nn, 0);
  int gen2 = 0, gen3 = 0;
  std::vector<int> cand2, cand3, shared;
  std::vector<double> coef1, prod12;
  double total = 0.0;

  for (int a1 = 0; a1 < n; ++a1)
    for (int b1 = 0; b1 < n; ++b1) {
      const int l1 = a1 * n + b1;
      const auto& cells1 = supp[l1];
      coef1.resize(cells1.size());
      for (size_t i = 0; i < cells1.size(); ++i)
        coef1[i] = cell_coef(*f, pref, n, a1, b1, cells1[i] / n, cells1[i] % n);

      cand2.clear();
      ++gen2;
      for (int c : cells1)
        for (int l : rev[c])
          if (stamp2[l] != gen2) {
            stamp2[l] = gen2;
            cand2.push_back(l);
          }

      for (int l2 : cand2) {
        const int a2 = l2 / n, b2 = l2 % n;
        const double wx = std::abs(x(b1, a2));
        if (wx == 0.0) continue;

        shared.clear();
        prod12.clear();
        for (size_t i = 0; i < cells1.size(); ++i) {
          if (coef1[i] == 0.0) continue;
          const double c2 =
              cell_coef(*f, pref, n, a2, b2, cells1[i] / n, cells1[i] % n);
          if (c2 == 0.0) continue;
          shared.push_back(cells1[i]);
          prod12.push_back(coef1[i] * c2);
        }
        if (shared.empty()) continue;

        cand3.clear();
        ++gen3;
        for (int c : shared)
          for (int l : rev[c])
            if (stamp3[l] != gen3) {
              stamp3[l] = gen3;
              cand3.push_back(l);
            }

        for (int l3 : cand3) {
          const int a3 = l3 / n, b3 = l3 % n;
          double acc = 0.0;
          for (size_t i = 0; i < shared.size(); ++i)
            acc += prod12[i] *
                   cell_coef(*f, pref, n, a3, b3, shared[i] / n, shared[i] % n);
          if (acc == 0.0) continue;
          total += std::abs(k3_eff * acc) * wx * std::abs(y(b2, a3)) *
                   std::abs(z(b3, a1));
        }
      }
    }
  // kappa of rescaled entries carries n^{3/2}; the target divides it back out
  return total;
}

double tree_sum_bruteforce(const Model& m, const Matrix& x, const Matrix& y,
                           const Matrix& z) {
  const int n = m.n;
  if (n > 24) throw SchemaError("tree_sum_bruteforce: capped at n = 24");
  if (x.rows() != n || x.cols() != n || y.rows() != n || y.cols() != n ||
      z.rows() != n || z.cols() != n)
    throw SchemaError("tree_sum_bruteforce: test matrices must be n x n");
  const auto* f = std::get_if<FilterKernel>(&m.s);
  if (!f) return 0.0;
  const double k3 = law_third_moment(f->noise);
  if (k3 == 0.0) return 0.0;
  if (m.cls != SymmetryClass::RealSymmetric)
    throw SchemaError("tree_sum_bruteforce: real class only");

  const double pref = filter_gain(*f, n) * M_SQRT1_2;
  const double k3_eff = k3 * std::pow(m.s_mix, 1.5);
  std::vector<int> cells1;
  std::vector<double> coef1;
  double total = 0.0;
  for (int a1 = 0; a1 < n; ++a1)
    for (int b1 = 0; b1 < n; ++b1) {
      support_cells(*f, n, a1, b1, cells1);
      coef1.resize(cells1.size());
      for (size_t i = 0; i < cells1.size(); ++i)
        coef1[i] = cell_coef(*f, pref, n, a1, b1, cells1[i] / n, cells1[i] % n);
      for (int a2 = 0; a2 < n; ++a2)
        for (int b2 = 0; b2 < n; ++b2) {
          const double wx = std::abs(x(b1, a2));
          for (int a3 = 0; a3 < n; ++a3)
            for (int b3 = 0; b3 < n; ++b3) {
              double acc = 0.0;
              for (size_t i = 0; i < cells1.size(); ++i) {
                if (coef1[i] == 0.0) continue;
                const int u = cells1[i] / n, v = cells1[i] % n;
                const double c2 = cell_coef(*f, pref, n, a2, b2, u, v);
                if (c2 == 0.0) continue;
                acc += coef1[i] * c2 * cell_coef(*f, pref, n, a3, b3, u, v);
              }
              if (acc == 0.0) continue;
              total += std::abs(k3_eff * acc) * wx * std::abs(y(b2, a3)) *
                       std::abs(z(b3, a1));
            }
        }
    }
  return total;
}

TreeBoundReport tree_bound_report(const Model& m, int probes,
                                  std::mt19937_64& rng) {
  if (probes < 0) throw SchemaError("tree_bound_report: negative probe count");
  TreeBoundReport rep;
  rep.kappa2 = kappa2_norm(m);
  const int n = m.n;
  std::normal_distribution<double> gauss;

  auto op_normalized = [&](Matrix a) {
    Eigen::JacobiSVD<Matrix> svd(a);
    const double s0 = svd.singularValues()(0);
    return s0 > 0 ? Matrix(a / s0) : a;
  };
  auto run = [&](const Matrix& x, const Matrix& y, const Matrix& z) {
    Matrix zn = z;
    const double h = hsnorm(zn);
    if (h > 0) zn /= h;
    rep.worst_ratio = std::max(rep.worst_ratio, tree_sum(m, x, y, zn));
    ++rep.probes;
  };

  // structured probes aligned with the all-positive kernel
  const Matrix ones = Matrix::Ones(n, n);
  run(ones / double(n), ones / double(n), ones);
  run(Matrix::Identity(n, n), Matrix::Identity(n, n), ones);
  run(ones / double(n), Matrix::Identity(n, n), Matrix::Identity(n, n));

  for (int p = 0; p < probes; ++p) {
    Matrix x(n, n), y(n, n), z(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        x(i, j) = cd(gauss(rng), gauss(rng));
        y(i, j) = cd(gauss(rng), gauss(rng));
        z(i, j) = cd(gauss(rng), gauss(rng));
      }
    run(op_normalized(x), op_normalized(y), z);
  }
  return rep;
}

}  // namespace mdelab
