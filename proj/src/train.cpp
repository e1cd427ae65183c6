#include "ar/train.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace ar {

bool rule_uses_feedback(TrainRule rule) {
    return rule == TrainRule::FixedFeedback || rule == TrainRule::LearnedFeedback ||
           rule == TrainRule::Combined;
}

Variant rule_variant(TrainRule rule) {
    switch (rule) {
        case TrainRule::Exact: return Variant::Exact;
        case TrainRule::FixedFeedback: return Variant::FixedFeedback;
        case TrainRule::LearnedFeedback: return Variant::LearnedFeedback;
        case TrainRule::NoDerivative: return Variant::NoDerivative;
        case TrainRule::Combined: return Variant::Combined;
        case TrainRule::BackpropOracle: break;
    }
    throw ConfigError("backprop-oracle rule has no relaxation variant");
}

std::string rule_name(TrainRule rule) {
    switch (rule) {
        case TrainRule::Exact: return "exact";
        case TrainRule::FixedFeedback: return "fixed-feedback";
        case TrainRule::LearnedFeedback: return "learned-feedback";
        case TrainRule::NoDerivative: return "no-derivative";
        case TrainRule::Combined: return "combined";
        case TrainRule::BackpropOracle: return "backprop-oracle";
    }
    return "?";
}

double evaluate_accuracy(const NetworkParams& params, const Dataset& ds) {
    if (ds.count() == 0) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.count(); ++i)
        if (predict_class(params, ds.inputs[i]) == ds.label_of(i)) ++correct;
    return double(correct) / double(ds.count());
}

double alignment_angle_deg(const Matrix& psi, const Matrix& w) {
    if (psi.rows != w.cols || psi.cols != w.rows)
        throw ShapeError("alignment_angle_deg: psi is not shaped like W^T");
    double num = 0.0, npsi = 0.0, nw = 0.0;
    for (std::size_t i = 0; i < psi.rows; ++i) {
        for (std::size_t j = 0; j < psi.cols; ++j) {
            const double a = psi(i, j);
            const double b = w(j, i);
            num += a * b;
            npsi += a * a;
            nw += b * b;
        }
    }
    const double denom = std::sqrt(npsi) * std::sqrt(nw);
    const double c = denom > 0.0 ? std::max(-1.0, std::min(1.0, num / denom)) : 0.0;
    return std::acos(c) * 180.0 / 3.14159265358979323846;
}

namespace {

std::vector<double> alignment_angles(const NetworkParams& p) {
    std::vector<double> out;
    for (std::size_t l = 0; l < p.num_layers(); ++l)
        out.push_back(alignment_angle_deg(p.feedback[l], p.weights[l]));
    return out;
}

void accumulate(std::vector<Matrix>& acc, const std::vector<Matrix>& grads) {
    if (acc.empty()) {
        acc = grads;
        return;
    }
    for (std::size_t l = 0; l < acc.size(); ++l)
        for (std::size_t k = 0; k < acc[l].data.size(); ++k)
            acc[l].data[k] += grads[l].data[k];
}

Matrix gather_columns(const std::vector<Vector>& items, const std::vector<std::size_t>& idx) {
    const std::size_t dim = items[idx[0]].size();
    Matrix out(dim, idx.size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
        const Vector& v = items[idx[j]];
        for (std::size_t d = 0; d < dim; ++d) out(d, j) = v[d];
    }
    return out;
}

Matrix act_apply(Activation a, const Matrix& m) {
    if (a == Activation::Linear) return m;
    Matrix out(m.rows, m.cols);
    for (std::size_t k = 0; k < m.data.size(); ++k)
        out.data[k] = m.data[k] > 0.0 ? m.data[k] : 0.0;
    return out;
}

// Elementwise b (.) act'(pre), act' evaluated at the frozen preactivations.
Matrix gate_by_prime(Activation a, const Matrix& b, const Matrix& pre) {
    if (a == Activation::Linear) return b;
    Matrix out(b.rows, b.cols);
    for (std::size_t k = 0; k < b.data.size(); ++k)
        out.data[k] = pre.data[k] > 0.0 ? b.data[k] : 0.0;
    return out;
}

Vector column_of(const Matrix& m, std::size_t j) {
    Vector v(m.rows);
    for (std::size_t i = 0; i < m.rows; ++i) v[i] = m(i, j);
    return v;
}

struct BatchStats {
    std::vector<Matrix> grad_sum;  // summed over items, unscaled
    double loss_sum = 0.0;
    std::size_t correct = 0;
    double grad_mse = -1.0;  // mean carrier MSE vs oracle, first item, when sampled
};

// Whole-minibatch pass as matrix products, one column per item. Matches the
// per-item path: columns evolve independently under both schedules.
BatchStats run_batch_batched(const NetworkParams& params, const Dataset& ds,
                             const std::vector<std::size_t>& batch, TrainRule rule,
                             const VariantConfig& cfg, bool sample_gradcheck,
                             std::vector<Matrix>* feedback_delta) {
    const std::size_t L = params.num_layers();
    const std::size_t n = batch.size();

    std::vector<Matrix> X;  // activations, X[0]..X[L]
    std::vector<Matrix> Pre;
    X.push_back(gather_columns(ds.inputs, batch));
    for (std::size_t l = 0; l < L; ++l) {
        Pre.push_back(matmul(params.weights[l], X[l]));
        X.push_back(act_apply(params.layers[l].activation, Pre[l]));
    }
    const Matrix T = gather_columns(ds.targets, batch);

    BatchStats stats;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t best = 0;
        double diff_sq = 0.0;
        for (std::size_t i = 0; i < X[L].rows; ++i) {
            const double d = X[L](i, j) - T(i, j);
            diff_sq += d * d;
            if (X[L](i, j) > X[L](best, j)) best = i;
        }
        stats.loss_sum += 0.5 * diff_sq;
        if (best == ds.label_of(batch[j])) ++stats.correct;
    }

    Matrix err(X[L].rows, n);
    for (std::size_t k = 0; k < err.data.size(); ++k)
        err.data[k] = X[L].data[k] - T.data[k];

    std::vector<Matrix> gated(L);  // carriers above each weight layer, gated
    std::vector<Matrix> G;
    if (rule == TrainRule::BackpropOracle) {
        Matrix delta = err;
        for (std::size_t l = L; l-- > 0;) {
            gated[l] = gate_by_prime(params.layers[l].activation, delta, Pre[l]);
            if (l > 0) delta = matmul_at_b(params.weights[l], gated[l]);
        }
    } else {
        G.assign(X.begin(), X.end());
        G[L] = err;
        for (std::size_t it = 0; it < cfg.iters; ++it) {
            std::vector<Matrix> next;
            if (cfg.schedule == Schedule::Jacobi) next = G;
            for (std::size_t l = L - 1; l >= 1; --l) {
                Matrix src = cfg.uses_derivative()
                                 ? gate_by_prime(params.layers[l].activation, G[l + 1], Pre[l])
                                 : G[l + 1];
                Matrix fb = cfg.uses_feedback() ? matmul(params.feedback[l], src)
                                                : matmul_at_b(params.weights[l], src);
                Matrix& dst = cfg.schedule == Schedule::Jacobi ? next[l] : G[l];
                for (std::size_t k = 0; k < dst.data.size(); ++k)
                    dst.data[k] = G[l].data[k] + cfg.eta_x * (-G[l].data[k] + fb.data[k]);
                if (!all_finite(dst)) {
                    throw DivergenceError("relaxation diverged at layer " + std::to_string(l) +
                                          ", iteration " + std::to_string(it));
                }
            }
            if (cfg.schedule == Schedule::Jacobi) G = std::move(next);
        }
        for (std::size_t l = 0; l < L; ++l)
            gated[l] = cfg.uses_derivative()
                           ? gate_by_prime(params.layers[l].activation, G[l + 1], Pre[l])
                           : G[l + 1];
        if (sample_gradcheck) {
            ForwardTrace trace;
            trace.activations.reserve(L + 1);
            trace.preactivations.reserve(L);
            for (const auto& x : X) trace.activations.push_back(column_of(x, 0));
            for (const auto& p : Pre) trace.preactivations.push_back(column_of(p, 0));
            const OracleGradients oracle =
                backprop(trace, params, column_of(T, 0));
            double acc = 0.0;
            for (std::size_t l = 1; l <= L; ++l)
                acc += mse_between(column_of(G[l], 0), oracle.activation_grads[l - 1]);
            stats.grad_mse = acc / double(L);
        }
    }

    for (std::size_t l = 0; l < L; ++l)
        stats.grad_sum.push_back(matmul_a_bt(gated[l], X[l]));

    if (feedback_delta) {
        feedback_delta->clear();
        for (std::size_t l = 0; l < L; ++l) {
            const Matrix upper = gate_by_prime(params.layers[l].activation, X[l + 1], Pre[l]);
            feedback_delta->push_back(matmul_a_bt(X[l], upper));
        }
    }
    return stats;
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Dataset& train_set, const Dataset& test_set) {
    if (cfg.arch.size() < 2) throw ConfigError("arch needs at least two widths");
    if (train_set.count() > 0 && train_set.inputs[0].size() != cfg.arch.front())
        throw ConfigError("arch input width " + std::to_string(cfg.arch.front()) +
                          " does not match dataset dim " +
                          std::to_string(train_set.inputs[0].size()));

    TrainResult result;
    result.params = init_params(mlp_specs(cfg.arch), cfg.seed,
                                rule_uses_feedback(cfg.rule) ? FeedbackMode::Random
                                                             : FeedbackMode::None);
    if (result.params.has_feedback())
        result.initial_alignment_deg = alignment_angles(result.params);

    VariantConfig relax_cfg = cfg.relax;
    if (cfg.rule != TrainRule::BackpropOracle) relax_cfg.mode = rule_variant(cfg.rule);

    const bool learn_feedback =
        cfg.rule == TrainRule::LearnedFeedback || cfg.rule == TrainRule::Combined;
    const bool use_batched = cfg.batched && cfg.relax.tol == 0.0;

    std::size_t minibatch_index = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const BatchPlan plan =
            make_batch_plan(train_set.count(), cfg.batch_size, cfg.seed, epoch);
        const auto epoch_batches = batches(plan);
        for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto& batch = epoch_batches[b];

            const bool sample_gradcheck =
                cfg.gradcheck_every > 0 && minibatch_index % cfg.gradcheck_every == 0;

            BatchStats stats;
            std::vector<Matrix> fb_delta;
            std::vector<ForwardTrace> traces;
            if (use_batched) {
                stats = run_batch_batched(result.params, train_set, batch, cfg.rule,
                                          relax_cfg, sample_gradcheck,
                                          learn_feedback ? &fb_delta : nullptr);
            } else {
                for (std::size_t item : batch) {
                    const Vector& x = train_set.inputs[item];
                    const Vector& t = train_set.targets[item];
                    ForwardTrace trace = forward(result.params, x);
                    stats.loss_sum += mse_loss(trace.output(), t);
                    if (argmax(trace.output()) == train_set.label_of(item)) ++stats.correct;

                    if (cfg.rule == TrainRule::BackpropOracle) {
                        accumulate(stats.grad_sum,
                                   backprop(trace, result.params, t).weight_grads);
                    } else {
                        GradientEstimate est = relax(trace, result.params, t, relax_cfg);
                        if (sample_gradcheck && stats.grad_mse < 0.0) {
                            const OracleGradients oracle = backprop(trace, result.params, t);
                            double acc = 0.0;
                            for (std::size_t l = 0; l < est.activation_grads.size(); ++l)
                                acc += mse_between(est.activation_grads[l],
                                                   oracle.activation_grads[l]);
                            stats.grad_mse = acc / double(est.activation_grads.size());
                        }
                        accumulate(stats.grad_sum, est.weight_grads);
                    }
                    if (learn_feedback) traces.push_back(std::move(trace));
                }
            }

            const double scale = cfg.average_batch ? 1.0 / double(batch.size()) : 1.0;
            GradientEstimate batch_grads;
            batch_grads.weight_grads = std::move(stats.grad_sum);
            for (auto& g : batch_grads.weight_grads)
                for (auto& v : g.data) v *= scale;
            update_weights(result.params, batch_grads, relax_cfg);

            if (learn_feedback) {
                if (use_batched) {
                    for (std::size_t l = 0; l < result.params.num_layers(); ++l) {
                        Matrix& psi = result.params.feedback[l];
                        for (std::size_t k = 0; k < psi.data.size(); ++k)
                            psi.data[k] += relax_cfg.eta_psi * scale * fb_delta[l].data[k];
                    }
                } else {
                    VariantConfig psi_cfg = relax_cfg;
                    psi_cfg.eta_psi = relax_cfg.eta_psi * scale;
                    for (const auto& trace : traces)
                        update_feedback_weights(result.params, trace, psi_cfg);
                }
            }

            MetricsRow row;
            row.epoch = epoch;
            row.minibatch_index = minibatch_index;
            row.train_loss = stats.loss_sum / double(batch.size());
            row.train_accuracy = double(stats.correct) / double(batch.size());
            row.mean_grad_mse_to_oracle = stats.grad_mse;
            if (b + 1 == epoch_batches.size()) {
                row.test_accuracy = evaluate_accuracy(result.params, test_set);
                result.epoch_test_accuracy.push_back(row.test_accuracy);
            }
            row.wall_time_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            if (cfg.on_row) cfg.on_row(row);
            result.metrics.push_back(row);
            ++minibatch_index;
        }
    }

    if (result.params.has_feedback())
        result.final_alignment_deg = alignment_angles(result.params);
    return result;
}

void write_metrics_header(std::ostream& os) {
    os << "epoch,minibatch_index,train_loss,train_accuracy,test_accuracy,"
          "mean_grad_mse_to_oracle,wall_time_ms\n";
}

void write_metrics_row(std::ostream& os, const MetricsRow& row) {
    char buf[64];
    os << row.epoch << ',' << row.minibatch_index << ',';
    std::snprintf(buf, sizeof buf, "%.12g", row.train_loss);
    os << buf << ',';
    std::snprintf(buf, sizeof buf, "%.12g", row.train_accuracy);
    os << buf << ',';
    if (row.test_accuracy >= 0.0) {
        std::snprintf(buf, sizeof buf, "%.12g", row.test_accuracy);
        os << buf;
    }
    os << ',';
    if (row.mean_grad_mse_to_oracle >= 0.0) {
        std::snprintf(buf, sizeof buf, "%.12g", row.mean_grad_mse_to_oracle);
        os << buf;
    }
    os << ',';
    std::snprintf(buf, sizeof buf, "%.3f", row.wall_time_ms);
    os << buf << '\n';
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
    write_metrics_header(os);
    for (const auto& row : rows) write_metrics_row(os, row);
}

}  // namespace ar
