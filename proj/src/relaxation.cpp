#include "ar/relaxation.hpp"

#include <cmath>
#include <string>
#include <utility>

namespace ar {

namespace {

void require_feedback(const NetworkParams& params) {
    if (!params.has_feedback())
        throw ConfigError("variant requires feedback weights but params carry none");
}

// Backwards signal into layer l from the carrier of layer l+1.
Vector backward_signal(std::size_t l, const Vector& g_up, const ForwardTrace& trace,
                       const NetworkParams& params, const VariantConfig& cfg) {
    const Vector* source = &g_up;
    Vector gated;
    if (cfg.uses_derivative()) {
        gated = hadamard(g_up, activation_prime(params.layers[l].activation,
                                                trace.preactivations[l]));
        source = &gated;
    }
    if (cfg.uses_feedback()) return matvec(params.feedback[l], *source);
    return matvec_transposed(params.weights[l], *source);
}

}  // namespace

RelaxationState init_relaxation(const ForwardTrace& trace, const Vector& target) {
    if (target.size() != trace.output().size()) {
        throw ShapeError("init_relaxation: target dim " + std::to_string(target.size()) +
                         " vs output dim " + std::to_string(trace.output().size()));
    }
    RelaxationState state;
    state.g = trace.activations;
    state.g.back() = mse_grad(trace.output(), target);
    return state;
}

double relax_step(RelaxationState& state, const ForwardTrace& trace,
                  const NetworkParams& params, const VariantConfig& cfg) {
    const std::size_t L = params.num_layers();
    if (state.g.size() != L + 1)
        throw ShapeError("relax_step: state has " + std::to_string(state.g.size()) +
                         " carriers for a " + std::to_string(L) + "-layer network");
    if (cfg.uses_feedback()) require_feedback(params);

    double max_delta = 0.0;
    // Jacobi: all layers read pre-step carriers. Gauss-Seidel: top-down
    // sweep reads the already-updated layer above.
    std::vector<Vector> next;
    if (cfg.schedule == Schedule::Jacobi) next = state.g;
    for (std::size_t l = L - 1; l >= 1; --l) {
        const Vector& g_up = state.g[l + 1];
        Vector fb = backward_signal(l, g_up, trace, params, cfg);
        Vector& dst = cfg.schedule == Schedule::Jacobi ? next[l] : state.g[l];
        const Vector& cur = state.g[l];
        for (std::size_t i = 0; i < dst.size(); ++i) {
            const double dg = cfg.eta_x * (-cur[i] + fb[i]);
            const double a = std::fabs(dg);
            if (a > max_delta) max_delta = a;
            dst[i] = cur[i] + dg;
        }
        if (!all_finite(dst)) {
            throw DivergenceError("relaxation diverged at layer " + std::to_string(l) +
                                  ", iteration " + std::to_string(state.iteration));
        }
    }
    if (cfg.schedule == Schedule::Jacobi) state.g = std::move(next);
    ++state.iteration;
    return max_delta;
}

GradientEstimate relax(const ForwardTrace& trace, const NetworkParams& params,
                       const Vector& target, const VariantConfig& cfg,
                       const RelaxObserver& observer) {
    RelaxationState state = init_relaxation(trace, target);
    for (std::size_t it = 0; it < cfg.iters; ++it) {
        const double delta = relax_step(state, trace, params, cfg);
        if (observer) observer(state);
        if (cfg.tol > 0.0 && delta < cfg.tol) break;
    }

    const std::size_t L = params.num_layers();
    GradientEstimate est;
    est.activation_grads.assign(state.g.begin() + 1, state.g.end());
    for (std::size_t l = 0; l < L; ++l) {
        const Vector* up = &state.g[l + 1];
        Vector gated;
        if (cfg.uses_derivative()) {
            gated = hadamard(*up, activation_prime(params.layers[l].activation,
                                                   trace.preactivations[l]));
            up = &gated;
        }
        est.weight_grads.push_back(outer(*up, trace.activations[l]));
    }
    return est;
}

void update_weights(NetworkParams& params, const GradientEstimate& estimate,
                    const VariantConfig& cfg) {
    if (estimate.weight_grads.size() != params.num_layers())
        throw ShapeError("update_weights: gradient count mismatch");
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        Matrix& w = params.weights[l];
        const Matrix& g = estimate.weight_grads[l];
        if (!w.same_shape(g))
            throw ShapeError("update_weights: shape mismatch at layer " + std::to_string(l));
        for (std::size_t i = 0; i < w.data.size(); ++i)
            w.data[i] -= cfg.eta_theta * g.data[i];
    }
}

void update_feedback_weights(NetworkParams& params, const ForwardTrace& trace,
                             const VariantConfig& cfg) {
    require_feedback(params);
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        const Vector upper = hadamard(
            trace.activations[l + 1],
            activation_prime(params.layers[l].activation, trace.preactivations[l]));
        Matrix& psi = params.feedback[l];
        const Vector& lower = trace.activations[l];
        for (std::size_t i = 0; i < lower.size(); ++i) {
            double* row = psi.data.data() + i * psi.cols;
            for (std::size_t j = 0; j < upper.size(); ++j)
                row[j] += cfg.eta_psi * lower[i] * upper[j];
        }
    }
}

}  // namespace ar
