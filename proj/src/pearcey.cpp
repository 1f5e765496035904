#include "mdelab/pearcey.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace mdelab {

namespace {

constexpr double kPi = std::numbers::pi;

// Gauss-Legendre nodes and weights on [-1, 1]: Newton iteration on the
// three-term recurrence from Chebyshev starting guesses. Deterministic and
// accurate to machine precision for the node counts used here.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double p1 = 0.0, dp = 1.0;
    const auto eval = [&](double tt) {
      double p0 = 1.0;
      p1 = tt;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * tt * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (tt * p1 - p0) / (tt * tt - 1.0);
    };
    for (int iter = 0; iter < 64; ++iter) {
      eval(t);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) <= 1e-15 * std::max(1.0, std::abs(t))) break;
    }
    eval(t);  // clean derivative at the converged node for the weight
    x[i] = -t;
    x[n - 1 - i] = t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace

PearceyKernel::PearceyKernel(PearceyOptions opt) : opt_(opt) {
  if (opt_.nodes < 32)
    throw SchemaError("pearcey: need at least 32 nodes per segment");
  if (!(opt_.offset > 0.0 && opt_.offset <= 0.5))
    throw SchemaError("pearcey: offset must lie in (0, 0.5]");
  if (!(opt_.ray >= 4.0))  // exp(-ray^4/4) must swamp exp(|x| ray)
    throw SchemaError("pearcey: ray must be at least 4");
  if (!std::isfinite(opt_.alpha)) throw SchemaError("pearcey: alpha not finite");
  build(opt_.nodes);
}

void PearceyKernel::build(int nodes) {
  const double d = opt_.offset;
  const double len = opt_.ray;
  const cd ur = std::polar(1.0, kPi / 4.0);  // ray directions
  const cd lr = std::conj(ur);
  const cd ul = -lr;
  const cd ll = -ur;

  const auto seg = [](std::vector<Node>& out, cd a, cd b, int n) {
    std::vector<double> x, w;
    gauss_legendre(n, x, w);
    const cd mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int i = 0; i < n; ++i)
      out.push_back(Node{mid + x[i] * half, w[i] * half});
  };
  const auto make_z = [&](std::vector<Node>& out, int n) {
    out.clear();
    const cd pr(2.0 * d, 0.0), pl(-2.0 * d, 0.0);
    seg(out, pr + len * ur, pr, n);  // in from upper right
    seg(out, pr, pr + len * lr, n);  // out to lower right
    seg(out, pl + len * ll, pl, n);  // in from lower left
    seg(out, pl, pl + len * ul, n);  // out to upper left
  };
  const auto make_w = [&](std::vector<Node>& out, int n) {
    out.clear();
    seg(out, cd(d, -len), cd(d, 0.0), n);  // upward
    seg(out, cd(d, 0.0), cd(d, len), n);
  };
  make_z(zn_, nodes);
  make_w(wn_, nodes);
  make_z(zn2_, 2 * nodes);
  make_w(wn2_, 2 * nodes);
}

cd PearceyKernel::eval_with(const std::vector<Node>& zn,
                            const std::vector<Node>& wn, double x,
                            double y) const {
  const double a = opt_.alpha;
  std::vector<cd> zf(zn.size()), wf(wn.size());
  for (std::size_t i = 0; i < zn.size(); ++i) {
    const cd z = zn[i].pos, z2 = z * z;
    zf[i] = zn[i].w * std::exp(0.25 * z2 * z2 - 0.5 * a * z2 + x * z);
  }
  for (std::size_t j = 0; j < wn.size(); ++j) {
    const cd w = wn[j].pos, w2 = w * w;
    wf[j] = wn[j].w * std::exp(-0.25 * w2 * w2 + 0.5 * a * w2 - y * w);
  }
  cd acc = 0.0;
  for (std::size_t j = 0; j < wn.size(); ++j) {
    const cd w = wn[j].pos;
    const cd vw = wf[j];
    for (std::size_t i = 0; i < zn.size(); ++i)
      acc += zf[i] * vw / (w - zn[i].pos);
  }
  return acc * (-1.0 / (4.0 * kPi * kPi));  // (2 pi i)^{-2}
}

cd PearceyKernel::eval(double x, double y) const {
  return eval_with(zn_, wn_, x, y);
}

double PearceyKernel::diagonal(double x) const { return eval(x, x).real(); }

double PearceyKernel::refine_error(double x, double y) const {
  return std::abs(eval_with(zn2_, wn2_, x, y) - eval_with(zn_, wn_, x, y));
}

RMatrix PearceyKernel::matrix(const RVector& xs) const {
  const int k = static_cast<int>(xs.size());
  if (k < 1) throw SchemaError("pearcey matrix: need at least one point");
  RMatrix m(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) m(i, j) = eval(xs[i], xs[j]).real();
  return m;
}

double PearceyKernel::kpoint(const RVector& xs) const {
  return matrix(xs).determinant();
}

PearceyMoments pearcey_moments(double alpha, double x, double y,
                               PearceyOptions opt) {
  opt.alpha = alpha;
  const PearceyKernel ker(opt);
  PearceyMoments m;
  for (int k = 0; k < 4; ++k) m.a[k] = m.b[k] = 0.0;
  for (const auto& nd : ker.zn_) {
    const cd z = nd.pos, z2 = z * z;
    const cd e = nd.w * std::exp(0.25 * z2 * z2 - 0.5 * alpha * z2 + x * z);
    cd p = 1.0;
    for (int k = 0; k < 4; ++k) {
      m.a[k] += p * e;
      p *= z;
    }
  }
  for (const auto& nd : ker.wn_) {
    const cd w = nd.pos, w2 = w * w;
    const cd e = nd.w * std::exp(-0.25 * w2 * w2 + 0.5 * alpha * w2 - y * w);
    cd p = 1.0;
    for (int k = 0; k < 4; ++k) {
      m.b[k] += p * e;
      p *= w;
    }
  }
  const cd pref = cd(0.0, -1.0) / (2.0 * kPi);  // (2 pi i)^{-1}
  for (int k = 0; k < 4; ++k) {
    m.a[k] *= pref;
    m.b[k] *= pref;
  }
  return m;
}

cd pearcey_offdiag_reduction(double alpha, double x, double y,
                             PearceyOptions opt) {
  if (std::abs(x - y) < 1e-9)
    throw SchemaError("pearcey offdiag reduction: x and y must differ");
  const PearceyMoments m = pearcey_moments(alpha, x, y, opt);
  return (m.a[2] * m.b[0] + m.a[1] * m.b[1] + m.a[0] * m.b[2] -
          alpha * m.a[0] * m.b[0]) /
         (x - y);
}

double pearcey_diag_reduction(double alpha, double x, PearceyOptions opt) {
  const PearceyMoments m = pearcey_moments(alpha, x, x, opt);
  return (m.a[2] * m.b[1] + m.a[1] * m.b[2] - x * m.a[0] * m.b[0]).real();
}

double pearcey_diag_asymptote(double x) {
  return std::sqrt(3.0) / (2.0 * kPi) * std::cbrt(std::abs(x));
}

}  // namespace mdelab
