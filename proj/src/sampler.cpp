#include "mdelab/sampler.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <mutex>

#include "mdelab/selfenergy.hpp"

namespace mdelab {

namespace {

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

// shared decomposed covariances for dense-tensor models, keyed by the
// underlying matrix (models share it through the shared_ptr)
const CovarianceTensor& cached_tensor(const Model& m) {
  static std::mutex mu;
  static std::map<std::pair<const RMatrix*, SymmetryClass>,
                  std::unique_ptr<CovarianceTensor>>
      cache;
  const auto& t = std::get<DenseFourTensor>(m.s);
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(t.cov.get(), m.cls);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, std::make_unique<CovarianceTensor>(
                                CovarianceTensor::of_model(m)))
             .first;
  return *it->second;
}

Matrix wigner_noise(int n, SymmetryClass cls, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix w(n, n);
  const double off = 1.0 / std::sqrt(2.0 * n);
  if (cls == SymmetryClass::ComplexHermitian) {
    for (int i = 0; i < n; ++i) {
      w(i, i) = gauss(rng) / std::sqrt(double(n));
      for (int j = i + 1; j < n; ++j) {
        w(i, j) = cd(gauss(rng), gauss(rng)) * off;
        w(j, i) = std::conj(w(i, j));
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      w(i, i) = gauss(rng) * std::sqrt(2.0 / n);
      for (int j = i + 1; j < n; ++j) {
        w(i, j) = gauss(rng) / std::sqrt(double(n));
        w(j, i) = w(i, j);
      }
    }
  }
  return w;
}

Matrix profile_noise(const Model& m, std::mt19937_64& rng) {
  const auto& vp = std::get<VarianceProfile>(m.s);
  const int n = m.n;
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix w(n, n);
  if (m.cls == SymmetryClass::ComplexHermitian) {
    for (int i = 0; i < n; ++i) {
      w(i, i) = gauss(rng) * std::sqrt(vp.profile(i, i) / n);
      for (int j = i + 1; j < n; ++j) {
        const double s = std::sqrt(vp.profile(i, j) / (2.0 * n));
        w(i, j) = cd(gauss(rng), gauss(rng)) * s;
        w(j, i) = std::conj(w(i, j));
      }
    }
  } else {
    for (int i = 0; i < n; ++i) {
      w(i, i) = gauss(rng) * std::sqrt(2.0 * vp.profile(i, i) / n);
      for (int j = i + 1; j < n; ++j) {
        w(i, j) = gauss(rng) * std::sqrt(vp.profile(i, j) / n);
        w(j, i) = w(i, j);
      }
    }
  }
  return w;
}

Matrix filter_noise(const Model& m, std::mt19937_64& rng) {
  const auto& f = std::get<FilterKernel>(m.s);
  const int n = m.n, r = f.radius;
  const double g = filter_gain(f, n);
  const bool real = m.cls == SymmetryClass::RealSymmetric;
  Matrix x(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (real)
        x(i, j) = draw_law(f.noise, rng);
      else
        x(i, j) =
            cd(draw_law(f.noise, rng), draw_law(f.noise, rng)) * M_SQRT1_2;
    }
  Matrix v(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      cd acc = 0.0;
      for (int j = -r; j <= r; ++j)
        for (int k = -r; k <= r; ++k) {
          const double tap = f.taps(j + r, k + r);
          if (tap == 0.0) continue;
          acc += tap * x(wrap(a + j, n), wrap(b + k, n));
        }
      v(a, b) = acc;
    }
  if (real) return g * M_SQRT1_2 * (v + v.transpose());
  return g * M_SQRT1_2 * (v + v.adjoint());
}

}  // namespace

double draw_law(NoiseLaw law, std::mt19937_64& rng) {
  switch (law) {
    case NoiseLaw::Gaussian: {
      std::normal_distribution<double> gauss(0.0, 1.0);
      return gauss(rng);
    }
    case NoiseLaw::Rademacher: {
      return (rng() >> 63) ? 1.0 : -1.0;
    }
    case NoiseLaw::ShiftedMixture: {
      // values {2, -1/2} with weights {1/5, 4/5}: mean 0, variance 1,
      // third moment 3/2
      std::uniform_real_distribution<double> u(0.0, 1.0);
      return u(rng) < 0.2 ? 2.0 : -0.5;
    }
  }
  throw SchemaError("unknown noise law");
}

double law_third_moment(NoiseLaw law) {
  switch (law) {
    case NoiseLaw::Gaussian:
      return 0.0;
    case NoiseLaw::Rademacher:
      return 0.0;
    case NoiseLaw::ShiftedMixture:
      return 1.5;
  }
  throw SchemaError("unknown noise law");
}

Matrix sample_noise(const Model& m, std::mt19937_64& rng) {
  if (std::holds_alternative<WignerScalar>(m.s))
    return wigner_noise(m.n, m.cls, rng);
  if (std::holds_alternative<VarianceProfile>(m.s))
    return profile_noise(m, rng);
  if (std::holds_alternative<FilterKernel>(m.s)) return filter_noise(m, rng);
  return cached_tensor(m).sample(rng);
}

Matrix sample_matrix(const Model& m, std::mt19937_64& rng) {
  Matrix h = m.a.materialize(m.n);
  h += sample_noise(m, rng);
  return h;
}

Matrix mc_self_energy(const Model& m, const Matrix& x, int trials,
                      std::mt19937_64& rng) {
  Matrix acc = Matrix::Zero(m.n, m.n);
  for (int t = 0; t < trials; ++t) {
    const Matrix w = sample_noise(m, rng);
    acc += w * x * w;
  }
  return acc / double(trials);
}

double fullness_of(const Model& m) {
  const bool real = m.cls == SymmetryClass::RealSymmetric;
  if (std::holds_alternative<WignerScalar>(m.s)) return real ? 2.0 : 1.0;
  if (std::holds_alternative<VarianceProfile>(m.s)) {
    const auto& vp = std::get<VarianceProfile>(m.s);
    return (real ? 2.0 : 1.0) * vp.profile.minCoeff();
  }
  if (std::holds_alternative<FilterKernel>(m.s)) {
    if (!real) {
      // the matrix Fourier modes diagonalize the covariance; the minimal
      // eigenvalue is the smallest entry of the circulant coupling kernel
      Model stripped = m;
      stripped.a = Baseline{};
      stripped.s_mix = 1.0;
      const CirculantEnergy ce = circulant_energy(stripped);
      return m.n * ce.k.minCoeff();
    }
    if (m.n <= 48) return CovarianceTensor::of_model(m).fullness();
    throw SchemaError(
        "fullness: real-class filter uses the dense covariance (n <= 48)");
  }
  return cached_tensor(m).fullness();
}

}  // namespace mdelab
