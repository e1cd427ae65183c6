#include "ar/oracle.hpp"

#include <cmath>
#include <string>

namespace ar {

OracleGradients backprop(const ForwardTrace& trace, const NetworkParams& params,
                         const Vector& target) {
    const std::size_t L = params.num_layers();
    if (trace.num_weight_layers() != L)
        throw ShapeError("backprop: trace does not match network depth");

    OracleGradients out;
    out.activation_grads.resize(L);
    out.weight_grads.resize(L);

    Vector delta = mse_grad(trace.output(), target);  // dL/dx^L
    out.activation_grads[L - 1] = delta;
    for (std::size_t l = L; l-- > 0;) {
        const Vector gated = hadamard(
            delta, activation_prime(params.layers[l].activation, trace.preactivations[l]));
        out.weight_grads[l] = outer(gated, trace.activations[l]);
        delta = matvec_transposed(params.weights[l], gated);
        if (l >= 1) out.activation_grads[l - 1] = delta;
    }
    return out;
}

std::vector<Matrix> finite_diff_weight_grads(const NetworkParams& params, const Vector& input,
                                             const Vector& target, double step) {
    if (step <= 0.0) throw ConfigError("finite difference step must be positive");
    NetworkParams probe = params;
    std::vector<Matrix> grads;
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        Matrix g(params.weights[l].rows, params.weights[l].cols);
        for (std::size_t k = 0; k < g.data.size(); ++k) {
            const double saved = probe.weights[l].data[k];
            probe.weights[l].data[k] = saved + step;
            const double up = mse_loss(forward(probe, input).output(), target);
            probe.weights[l].data[k] = saved - step;
            const double down = mse_loss(forward(probe, input).output(), target);
            probe.weights[l].data[k] = saved;
            g.data[k] = (up - down) / (2.0 * step);
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

double mse_between(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw ShapeError("mse_between: dim " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    if (a.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc / double(a.size());
}

double cosine_between(const Vector& a, const Vector& b) {
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
    return dot(a, b) / (na * nb);
}

GradientReport compare(const GradientEstimate& ar, const OracleGradients& oracle) {
    if (ar.activation_grads.size() != oracle.activation_grads.size() ||
        ar.weight_grads.size() != oracle.weight_grads.size())
        throw ShapeError("compare: layer count mismatch");

    GradientReport report;
    for (std::size_t l = 0; l < ar.activation_grads.size(); ++l) {
        report.per_layer_mse.push_back(
            mse_between(ar.activation_grads[l], oracle.activation_grads[l]));
        report.per_layer_cosine.push_back(
            cosine_between(ar.activation_grads[l], oracle.activation_grads[l]));
    }
    for (std::size_t l = 0; l < ar.weight_grads.size(); ++l) {
        const Matrix& a = ar.weight_grads[l];
        const Matrix& b = oracle.weight_grads[l];
        if (!a.same_shape(b))
            throw ShapeError("compare: weight gradient shape mismatch at layer " +
                             std::to_string(l));
        for (std::size_t k = 0; k < a.data.size(); ++k) {
            const double d = std::fabs(a.data[k] - b.data[k]);
            if (d > report.max_abs_diff) report.max_abs_diff = d;
        }
    }
    return report;
}

}  // namespace ar
