#pragma once

#include <cstdint>
#include <vector>

#include "ar/linalg.hpp"

namespace ar {

enum class Activation { ReLU, Linear };

struct LayerSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    Activation activation = Activation::ReLU;
};

enum class FeedbackMode { None, Random };

// Forward weights W^l (out_dim x in_dim) and optional feedback weights
// psi^l (in_dim x out_dim, the shape of W^l transposed).
struct NetworkParams {
    std::vector<LayerSpec> layers;
    std::vector<Matrix> weights;
    std::vector<Matrix> feedback;

    std::size_t num_layers() const { return layers.size(); }
    std::size_t input_dim() const { return layers.front().in_dim; }
    std::size_t output_dim() const { return layers.back().out_dim; }
    bool has_feedback() const { return !feedback.empty(); }
};

// Frozen forward-pass values: activations[0..L], preactivations[0..L-1]
// with activations[l+1] == f(preactivations[l]) and preactivations[l] == W^l activations[l].
struct ForwardTrace {
    std::vector<Vector> activations;
    std::vector<Vector> preactivations;

    std::size_t num_weight_layers() const { return preactivations.size(); }
    const Vector& output() const { return activations.back(); }
};

// Gaussian init, std 1/sqrt(in_dim) per layer (feedback: 1/sqrt(out_dim)).
// Deterministic given seed.
NetworkParams init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed,
                          FeedbackMode feedback_mode = FeedbackMode::None);

// Convenience: widths {784,300,300,100,10} -> ReLU hidden layers, Linear output.
std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& widths);

ForwardTrace forward(const NetworkParams& params, const Vector& input);

Vector apply_activation(Activation act, const Vector& pre);
Vector activation_prime(Activation act, const Vector& pre);

// Argmax of the network output; ties broken by lowest index.
std::size_t predict_class(const NetworkParams& params, const Vector& input);
std::size_t argmax(const Vector& v);

}  // namespace ar
