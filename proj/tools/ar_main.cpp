#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "ar/checkpoint.hpp"
#include "ar/dag.hpp"
#include "ar/train.hpp"

namespace {

using namespace ar;

struct CliOptions {
    std::string dataset = "mnist";  // mnist | fashion | synthetic
    std::string data_dir = "data";
    std::vector<std::size_t> arch = {784, 300, 300, 100, 10};
    std::size_t epochs = 10;
    std::size_t batch_size = 64;
    std::size_t relax_iters = 100;
    double eta_x = 0.1;
    double eta_theta = 0.001;
    double eta_psi = 0.0001;
    std::string variant = "exact";
    std::string schedule = "jacobi";
    std::uint64_t seed = 0;
    std::size_t subset = 0;  // 0 = full set; N = first N train items, N/5 test items
    std::string metrics_out = "metrics.csv";
    std::string checkpoint_out;
    std::string checkpoint_in;
    std::string graph_file;
    std::vector<double> eta_x_grid;
    double tol = 0.0;
};

TrainRule parse_rule(const std::string& name) {
    if (name == "exact") return TrainRule::Exact;
    if (name == "fixed-feedback") return TrainRule::FixedFeedback;
    if (name == "learned-feedback") return TrainRule::LearnedFeedback;
    if (name == "no-derivative") return TrainRule::NoDerivative;
    if (name == "combined") return TrainRule::Combined;
    if (name == "backprop-oracle") return TrainRule::BackpropOracle;
    throw ConfigError("unknown variant '" + name + "'");
}

Schedule parse_schedule(const std::string& name) {
    if (name == "jacobi") return Schedule::Jacobi;
    if (name == "gauss_seidel") return Schedule::GaussSeidel;
    throw ConfigError("unknown schedule '" + name + "'");
}

std::pair<Dataset, Dataset> load_datasets(const CliOptions& opt) {
    Dataset train_set, test_set;
    if (opt.dataset == "synthetic") {
        const std::size_t n = opt.subset > 0 ? opt.subset : 2000;
        train_set = synthetic_dataset(opt.seed, n, opt.arch.front(), opt.arch.back());
        test_set = synthetic_dataset(opt.seed + 1, std::max<std::size_t>(n / 5, opt.arch.back()),
                                     opt.arch.front(), opt.arch.back());
        return {std::move(train_set), std::move(test_set)};
    }
    if (opt.dataset != "mnist" && opt.dataset != "fashion")
        throw ConfigError("unknown dataset '" + opt.dataset + "'");
    const std::string dir = opt.data_dir + "/" + opt.dataset;
    train_set = load_idx_dataset(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    test_set = load_idx_dataset(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    if (opt.subset > 0) {
        train_set = train_set.head(opt.subset);
        test_set = test_set.head(std::max<std::size_t>(opt.subset / 5, 1));
    }
    return {std::move(train_set), std::move(test_set)};
}

TrainConfig make_train_config(const CliOptions& opt) {
    TrainConfig cfg;
    cfg.arch = opt.arch;
    cfg.rule = parse_rule(opt.variant);
    cfg.epochs = opt.epochs;
    cfg.batch_size = opt.batch_size;
    cfg.seed = opt.seed;
    cfg.relax.eta_x = opt.eta_x;
    cfg.relax.eta_theta = opt.eta_theta;
    cfg.relax.eta_psi = opt.eta_psi;
    cfg.relax.iters = opt.relax_iters;
    cfg.relax.tol = opt.tol;
    cfg.relax.schedule = parse_schedule(opt.schedule);
    return cfg;
}

int run_train(const CliOptions& opt) {
    const auto [train_set, test_set] = load_datasets(opt);
    TrainConfig cfg = make_train_config(opt);

    std::ofstream metrics(opt.metrics_out);
    if (!metrics) throw DataError("cannot open metrics file: " + opt.metrics_out);
    write_metrics_header(metrics);
    cfg.on_row = [&metrics](const MetricsRow& row) {
        write_metrics_row(metrics, row);
        metrics.flush();
    };

    try {
        TrainResult result = train(cfg, train_set, test_set);
        for (std::size_t e = 0; e < result.epoch_test_accuracy.size(); ++e)
            std::cout << "epoch " << e << " test_accuracy "
                      << result.epoch_test_accuracy[e] << "\n";
        if (!opt.checkpoint_out.empty()) save_checkpoint(opt.checkpoint_out, result.params);
    } catch (const DivergenceError& e) {
        metrics << "# divergence: " << e.what() << "\n";
        metrics.flush();
        std::cerr << "divergence: " << e.what() << "\n";
        // Approximate variants are allowed to diverge; only the exact
        // dynamics failing is an error.
        return cfg.rule == TrainRule::Exact ? 3 : 0;
    }
    return 0;
}

int run_eval(const CliOptions& opt) {
    if (opt.checkpoint_in.empty()) throw ConfigError("eval requires --checkpoint");
    const NetworkParams params = load_checkpoint(opt.checkpoint_in);
    const auto [train_set, test_set] = load_datasets(opt);
    if (test_set.count() > 0 && test_set.inputs[0].size() != params.input_dim())
        throw CheckpointError("checkpoint input dim " + std::to_string(params.input_dim()) +
                              " does not match dataset");
    std::cout << "test_accuracy " << evaluate_accuracy(params, test_set) << "\n";
    return 0;
}

int run_gradcheck(const CliOptions& opt) {
    const NetworkParams params = init_params(mlp_specs(opt.arch), opt.seed,
                                             parse_rule(opt.variant) == TrainRule::Exact ||
                                                     parse_rule(opt.variant) ==
                                                         TrainRule::NoDerivative
                                                 ? FeedbackMode::None
                                                 : FeedbackMode::Random);

    // Probe input: first dataset item when available, else seeded uniform noise.
    Vector input, target;
    try {
        const auto [train_set, test_set] = load_datasets(opt);
        input = train_set.inputs[0];
        target = train_set.targets[0];
    } catch (const std::runtime_error&) {
        std::mt19937_64 rng(opt.seed + 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        input.resize(opt.arch.front());
        for (auto& x : input) x = unit(rng);
        target = one_hot(opt.seed % opt.arch.back(), opt.arch.back());
    }

    const ForwardTrace trace = forward(params, input);
    const OracleGradients oracle = backprop(trace, params, target);

    std::vector<double> grid = opt.eta_x_grid;
    if (grid.empty()) grid = {opt.eta_x};

    int status = 0;
    for (double eta : grid) {
        VariantConfig cfg;
        cfg.mode = rule_variant(parse_rule(opt.variant));
        cfg.eta_x = eta;
        cfg.iters = opt.relax_iters;
        cfg.tol = opt.tol;
        cfg.schedule = parse_schedule(opt.schedule);

        std::string path = opt.metrics_out;
        if (grid.size() > 1) {
            char suffix[32];
            std::snprintf(suffix, sizeof suffix, "_eta%g", eta);
            const auto dotpos = path.rfind('.');
            path = dotpos == std::string::npos ? path + suffix
                                               : path.substr(0, dotpos) + suffix +
                                                     path.substr(dotpos);
        }
        std::ofstream csv(path);
        if (!csv) throw DataError("cannot open diagnostics file: " + opt.metrics_out);
        csv << "iteration,layer,mse_to_oracle,max_abs_diff\n";

        std::vector<double> final_mse;
        try {
            relax(trace, params, target, cfg, [&](const RelaxationState& state) {
                final_mse.clear();
                for (std::size_t l = 1; l < state.g.size(); ++l) {
                    double max_diff = 0.0;
                    const Vector& o = oracle.activation_grads[l - 1];
                    for (std::size_t k = 0; k < o.size(); ++k)
                        max_diff = std::max(max_diff, std::fabs(state.g[l][k] - o[k]));
                    const double mse = mse_between(state.g[l], o);
                    final_mse.push_back(mse);
                    char buf[160];
                    std::snprintf(buf, sizeof buf, "%zu,%zu,%.12g,%.12g\n", state.iteration, l,
                                  mse, max_diff);
                    csv << buf;
                }
            });
        } catch (const DivergenceError& e) {
            csv << "# divergence: " << e.what() << "\n";
            std::cerr << "eta_x " << eta << " diverged: " << e.what() << "\n";
            if (cfg.mode == Variant::Exact) status = 3;
            continue;
        }
        std::cout << "eta_x " << eta << " final per-layer mse:";
        for (double m : final_mse) std::cout << ' ' << m;
        std::cout << "\n";
    }
    return status;
}

int run_convexity(const CliOptions& opt) {
    if (opt.graph_file.empty()) throw ConfigError("convexity requires --graph-file");
    CompGraph graph = parse_graph_file(opt.graph_file, opt.seed);
    if (!opt.checkpoint_in.empty())
        assign_weights_from_checkpoint(graph, load_checkpoint(opt.checkpoint_in));

    // Seeded inputs; the structural report does not depend on their values.
    std::mt19937_64 rng(opt.seed + 2);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<Vector> inputs;
    for (const auto& node : graph.nodes) {
        if (node.op != NodeOp::Input) continue;
        Vector v(node.dim);
        for (auto& x : v) x = dist(rng);
        inputs.push_back(std::move(v));
    }
    const NodeState state = dag_forward(graph, inputs);
    const ConvexityReport report = check_convexity(graph, state);

    std::cout << "upper_triangular_under_topo_order: "
              << (report.is_upper_triangular_under_topo_order ? "yes" : "no") << "\n"
              << "diagonal_all_ones: " << (report.diagonal_all_ones ? "yes" : "no") << "\n";
    std::cout << "eigenvalues:";
    for (double e : report.eigenvalues) std::cout << ' ' << e;
    std::cout << "\nsymmetric_part_eigenvalues:";
    for (double e : report.symmetric_part_eigenvalues) std::cout << ' ' << e;
    std::cout << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Activation-relaxation training, gradient checking, and graph diagnostics"};
    app.require_subcommand(1);
    CliOptions opt;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--dataset", opt.dataset, "mnist | fashion | synthetic");
        sub->add_option("--data-dir", opt.data_dir, "directory holding mnist/ and fashion/");
        sub->add_option("--arch", opt.arch, "layer widths, input first")->delimiter(',');
        sub->add_option("--seed", opt.seed);
        sub->add_option("--subset", opt.subset, "use first N train items, N/5 test items");
        sub->add_option("--variant", opt.variant,
                        "exact | fixed-feedback | learned-feedback | no-derivative | "
                        "combined | backprop-oracle");
        sub->add_option("--schedule", opt.schedule, "jacobi | gauss_seidel");
        sub->add_option("--relax-iters", opt.relax_iters);
        sub->add_option("--eta-x", opt.eta_x);
        sub->add_option("--eta-theta", opt.eta_theta);
        sub->add_option("--eta-psi", opt.eta_psi);
        sub->add_option("--tol", opt.tol, "relaxation early-stop tolerance (0 = off)");
        sub->add_option("--metrics-out", opt.metrics_out);
    };

    auto* train_cmd = app.add_subcommand("train", "train an MLP");
    add_common(train_cmd);
    train_cmd->add_option("--epochs", opt.epochs);
    train_cmd->add_option("--batch-size", opt.batch_size);
    train_cmd->add_option("--checkpoint-out", opt.checkpoint_out);

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", opt.checkpoint_in)->required();

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "relaxation vs oracle diagnostics");
    add_common(gradcheck_cmd);
    gradcheck_cmd->add_option("--eta-x-grid", opt.eta_x_grid, "step sizes to sweep")
        ->delimiter(',');

    auto* convexity_cmd = app.add_subcommand("convexity", "Hessian structure report");
    add_common(convexity_cmd);
    convexity_cmd->add_option("--graph-file", opt.graph_file)->required();
    convexity_cmd->add_option("--checkpoint", opt.checkpoint_in);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Normalize CLI11's exit codes: help/version are success, any usage
        // problem is 1.
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(train_cmd)) return run_train(opt);
        if (app.got_subcommand(eval_cmd)) return run_eval(opt);
        if (app.got_subcommand(gradcheck_cmd)) return run_gradcheck(opt);
        if (app.got_subcommand(convexity_cmd)) return run_convexity(opt);
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
