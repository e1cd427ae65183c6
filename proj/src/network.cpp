#include "ar/network.hpp"

#include <cmath>
#include <random>
#include <string>

namespace ar {

namespace {

void check_chain(const std::vector<LayerSpec>& specs) {
    if (specs.empty()) throw ConfigError("network needs at least one layer");
    for (const auto& s : specs) {
        if (s.in_dim == 0 || s.out_dim == 0)
            throw ConfigError("layer dimensions must be positive");
    }
    for (std::size_t l = 0; l + 1 < specs.size(); ++l) {
        if (specs[l].out_dim != specs[l + 1].in_dim) {
            throw ConfigError("layer dimension chain broken at layer " + std::to_string(l) +
                              ": out_dim " + std::to_string(specs[l].out_dim) +
                              " vs next in_dim " + std::to_string(specs[l + 1].in_dim));
        }
    }
}

Matrix gaussian_matrix(std::size_t rows, std::size_t cols, double stddev,
                       std::mt19937_64& rng) {
    Matrix m(rows, cols);
    std::normal_distribution<double> dist(0.0, stddev);
    for (auto& x : m.data) x = dist(rng);
    return m;
}

}  // namespace

NetworkParams init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed,
                          FeedbackMode feedback_mode) {
    check_chain(specs);
    NetworkParams p;
    p.layers = specs;
    std::mt19937_64 rng(seed);
    for (const auto& s : specs) {
        p.weights.push_back(
            gaussian_matrix(s.out_dim, s.in_dim, 1.0 / std::sqrt(double(s.in_dim)), rng));
    }
    if (feedback_mode == FeedbackMode::Random) {
        for (const auto& s : specs) {
            p.feedback.push_back(
                gaussian_matrix(s.in_dim, s.out_dim, 1.0 / std::sqrt(double(s.out_dim)), rng));
        }
    }
    return p;
}

std::vector<LayerSpec> mlp_specs(const std::vector<std::size_t>& widths) {
    if (widths.size() < 2) throw ConfigError("need at least input and output widths");
    std::vector<LayerSpec> specs;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const bool last = (l + 2 == widths.size());
        specs.push_back({widths[l], widths[l + 1], last ? Activation::Linear : Activation::ReLU});
    }
    return specs;
}

Vector apply_activation(Activation act, const Vector& pre) {
    return act == Activation::ReLU ? relu(pre) : pre;
}

Vector activation_prime(Activation act, const Vector& pre) {
    return act == Activation::ReLU ? relu_prime(pre) : Vector(pre.size(), 1.0);
}

ForwardTrace forward(const NetworkParams& params, const Vector& input) {
    if (input.size() != params.input_dim()) {
        throw ShapeError("forward: input dim " + std::to_string(input.size()) +
                         " does not match network input dim " +
                         std::to_string(params.input_dim()));
    }
    ForwardTrace trace;
    trace.activations.push_back(input);
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        Vector pre = matvec(params.weights[l], trace.activations.back());
        trace.activations.push_back(apply_activation(params.layers[l].activation, pre));
        trace.preactivations.push_back(std::move(pre));
    }
    return trace;
}

std::size_t argmax(const Vector& v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

std::size_t predict_class(const NetworkParams& params, const Vector& input) {
    return argmax(forward(params, input).output());
}

}  // namespace ar
