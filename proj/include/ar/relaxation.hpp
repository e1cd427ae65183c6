#pragma once

#include <functional>

#include "ar/network.hpp"

namespace ar {

// Relaxation-phase dynamics. Exact uses the weight transpose and the
// activation-function derivative; the remaining modes progressively drop
// those requirements (feedback weights psi instead of W^T, no derivative,
// or both).
enum class Variant { Exact, FixedFeedback, LearnedFeedback, NoDerivative, Combined };

// Jacobi applies all layer updates simultaneously from pre-step values;
// GaussSeidel sweeps top-down using already-updated upper layers.
enum class Schedule { Jacobi, GaussSeidel };

struct VariantConfig {
    Variant mode = Variant::Exact;
    double eta_x = 0.1;        // relaxation step size, in (0, 1]
    double eta_theta = 0.001;  // weight step size
    double eta_psi = 0.0001;   // feedback-weight step size
    std::size_t iters = 100;
    double tol = 0.0;  // early stop when max-layer ||dg||_inf < tol; 0 = run all iters
    Schedule schedule = Schedule::Jacobi;

    bool uses_feedback() const {
        return mode == Variant::FixedFeedback || mode == Variant::LearnedFeedback ||
               mode == Variant::Combined;
    }
    bool uses_derivative() const {
        return mode == Variant::Exact || mode == Variant::FixedFeedback ||
               mode == Variant::LearnedFeedback;
    }
};

// Gradient carriers g^0..g^L. g^L is clamped to x^L - T throughout; the
// hidden carriers start at the forward activations and relax toward the
// backprop gradients. g^0 is never updated.
struct RelaxationState {
    std::vector<Vector> g;
    std::size_t iteration = 0;
};

struct GradientEstimate {
    std::vector<Vector> activation_grads;  // g^1..g^L (index l-1)
    std::vector<Matrix> weight_grads;      // dL/dW^0..dL/dW^{L-1}
};

RelaxationState init_relaxation(const ForwardTrace& trace, const Vector& target);

// One Euler step of the relaxation dynamics over the hidden layers.
// Returns the max over layers of ||dg||_inf for this step.
double relax_step(RelaxationState& state, const ForwardTrace& trace,
                  const NetworkParams& params, const VariantConfig& cfg);

using RelaxObserver = std::function<void(const RelaxationState&)>;

// Runs cfg.iters steps (early-stopping at cfg.tol when positive), then forms
// the weight gradients from the equilibrated carriers. The observer, when
// set, fires after every step.
GradientEstimate relax(const ForwardTrace& trace, const NetworkParams& params,
                       const Vector& target, const VariantConfig& cfg,
                       const RelaxObserver& observer = nullptr);

// W^l -= eta_theta * weight_grads[l]; feedback weights untouched.
void update_weights(NetworkParams& params, const GradientEstimate& estimate,
                    const VariantConfig& cfg);

// Hebbian feedback update psi^l += eta_psi * outer(x^l, x^{l+1} (.) f'(pre^l)),
// applied once per minibatch after the forward sweep.
void update_feedback_weights(NetworkParams& params, const ForwardTrace& trace,
                             const VariantConfig& cfg);

}  // namespace ar
