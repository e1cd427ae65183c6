#pragma once

#include "ar/relaxation.hpp"

namespace ar {

// Exact reverse-mode gradients, written out by hand so the relaxation
// dynamics are validated against an independent implementation.
struct OracleGradients {
    std::vector<Vector> activation_grads;  // dL/dx^1..dL/dx^L (index l-1)
    std::vector<Matrix> weight_grads;      // dL/dW^0..dL/dW^{L-1}
};

struct GradientReport {
    std::vector<double> per_layer_mse;
    std::vector<double> per_layer_cosine;
    double max_abs_diff = 0.0;  // over all weight-gradient entries
};

OracleGradients backprop(const ForwardTrace& trace, const NetworkParams& params,
                         const Vector& target);

// Central differences of the MSE loss over every weight entry.
std::vector<Matrix> finite_diff_weight_grads(const NetworkParams& params, const Vector& input,
                                             const Vector& target, double step);

GradientReport compare(const GradientEstimate& ar, const OracleGradients& oracle);

double mse_between(const Vector& a, const Vector& b);
double cosine_between(const Vector& a, const Vector& b);

}  // namespace ar
