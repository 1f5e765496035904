#pragma once

#include "mdelab/covariance.hpp"
#include "mdelab/model.hpp"

namespace mdelab {

// one draw of H = A + W for any model; dispatches on the self-energy family
Matrix sample_matrix(const Model& m, std::mt19937_64& rng);
Matrix sample_noise(const Model& m, std::mt19937_64& rng);

// scalar base laws, normalized to mean 0 variance 1
double draw_law(NoiseLaw law, std::mt19937_64& rng);
double law_third_moment(NoiseLaw law);

// Monte-Carlo estimate of E[W X W], for validating the analytic self-energy
Matrix mc_self_energy(const Model& m, const Matrix& x, int trials,
                      std::mt19937_64& rng);

// smallest noise variance over normalized directions: exact via the dense
// covariance for small n; Fourier route for filter models (symbol kernel);
// closed form for the wigner classes
double fullness_of(const Model& m);

}  // namespace mdelab
