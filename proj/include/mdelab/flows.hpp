#pragma once

#include "mdelab/covariance.hpp"

namespace mdelab {

// Ornstein-Uhlenbeck matrix flows used by the zig/zag decomposition. All
// target the distributional identities (no pathwise coupling is needed):
//
//   zig:  H_t  = e^{-t/2} h0 + sqrt(1 - e^{-t}) W_gauss,
//         Cov(H_t) = Cov_G + e^{-t} (Cov_0 - Cov_G)           (mean decays)
//   zag:  H^s  = E H + e^{-s/2} (h - E H) + sqrt(1 - e^{-s}) W_model,
//         Cov(H^s) = Cov_H                                     (cov preserved)
//
// and the surjectivity pairing: for a class-relative fullness constant c in
// (0, 1] and t < -log(1 - c) (any t if c >= 1), with
// s_c(t) = log c - log(c - 1 + e^{-t}),
//   fat(h) = e^{t/2} [ E H + e^{-s/2} (h - E H) + sqrt(1 - e^{-s}) W_thin ],
// where W_thin is Gaussian with covariance Cov_H - c Cov_G, satisfies
// zig_t(fat(h)) =d zag_{s_c(t)}(h). The plain zig supplies the missing
// c Cov_G share of the noise because c (1 - e^{-s}) = 1 - e^{-t}.

Matrix zig_step(const Matrix& h0, const CovarianceTensor& gauss_ref, double t,
                std::mt19937_64& rng);

Matrix zag_step(const Matrix& h, const Matrix& mean,
                const CovarianceTensor& model_cov, double s,
                std::mt19937_64& rng);

double ou_time(double c, double t);  // s_c(t); throws UnstableFlow if invalid

struct SurjectivityDraw {
  Matrix fat;   // preimage ensemble draw
  double s;     // matched zag time s_c(t)
};
// preimage draw with a precomputed W_thin covariance (hoist the tensor out of
// sampling loops; surjectivity_draw rebuilds it on every call)
Matrix fat_step(const Matrix& h, const Matrix& mean,
                const CovarianceTensor& thin_cov, double s, double t,
                std::mt19937_64& rng);
SurjectivityDraw surjectivity_draw(const Matrix& h, const Matrix& mean,
                                   const CovarianceTensor& model_cov,
                                   const CovarianceTensor& gauss_ref, double c,
                                   double t, std::mt19937_64& rng);

// covariance of the time-t zig ensemble (for direct verification)
CovarianceTensor zig_covariance(const CovarianceTensor& start,
                                const CovarianceTensor& gauss_ref, double t);

}  // namespace mdelab
