#pragma once

#include <functional>
#include <ostream>
#include <string>

#include "ar/data.hpp"
#include "ar/oracle.hpp"
#include "ar/relaxation.hpp"

namespace ar {

// Weight-update rule for a training run: one of the relaxation variants, or
// the backprop oracle applied directly (the paired baseline).
enum class TrainRule {
    Exact,
    FixedFeedback,
    LearnedFeedback,
    NoDerivative,
    Combined,
    BackpropOracle
};

bool rule_uses_feedback(TrainRule rule);
Variant rule_variant(TrainRule rule);  // throws for BackpropOracle
std::string rule_name(TrainRule rule);

struct MetricsRow {
    std::size_t epoch = 0;
    std::size_t minibatch_index = 0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = -1.0;           // >= 0 only on per-epoch rows
    double mean_grad_mse_to_oracle = -1.0;  // >= 0 only when gradcheck sampling fired
    double wall_time_ms = 0.0;
};

struct TrainConfig {
    std::vector<std::size_t> arch;  // layer widths incl. input, e.g. {784,300,300,100,10}
    TrainRule rule = TrainRule::Exact;
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    VariantConfig relax;  // eta_x, iters, schedule, eta_theta, eta_psi
    std::uint64_t seed = 0;
    bool average_batch = true;  // average (vs sum) weight gradients over the minibatch
    // Run the minibatch as matrix-matrix products (columns = items). Falls
    // back to the per-item path when early stopping (tol > 0) is requested,
    // since items then need individual iteration counts.
    bool batched = true;
    // When set, every gradcheck_every-th minibatch also runs the oracle and
    // records the mean per-layer MSE between relaxed carriers and oracle.
    std::size_t gradcheck_every = 0;
    // Fires after each minibatch; rows reach the sink before a divergence
    // abort can unwind, so partial runs keep their metrics.
    std::function<void(const MetricsRow&)> on_row;
};

struct TrainResult {
    NetworkParams params;
    std::vector<MetricsRow> metrics;
    std::vector<double> epoch_test_accuracy;
    // Mean feedback-alignment angle (degrees) between psi^l and W^l^T per
    // layer, sampled at init and after training. Empty without feedback.
    std::vector<double> initial_alignment_deg;
    std::vector<double> final_alignment_deg;
};

double evaluate_accuracy(const NetworkParams& params, const Dataset& ds);

// Angle in degrees between psi^l and W^l^T, flattened.
double alignment_angle_deg(const Matrix& psi, const Matrix& w);

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& test_set);

// CSV with header: epoch,minibatch_index,train_loss,train_accuracy,
// test_accuracy,mean_grad_mse_to_oracle,wall_time_ms
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const MetricsRow& row);

}  // namespace ar
