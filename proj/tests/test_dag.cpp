#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "ar/dag.hpp"
#include "ar/oracle.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ar;

namespace {

Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

// Explicit J^T for the edge parent -> child, frozen at the forward values.
Matrix edge_jacobian_t(const CompGraph& g, const NodeState& s, std::size_t p, std::size_t c) {
    switch (g.nodes[c].op) {
        case NodeOp::LinearMap: return explicit_transpose(g.nodes[c].weight);
        case NodeOp::ReLU: {
            Matrix m(g.nodes[p].dim, g.nodes[p].dim);
            const Vector mask = relu_prime(s.forward[p]);
            for (std::size_t i = 0; i < mask.size(); ++i) m(i, i) = mask[i];
            return m;
        }
        default: return identity(g.nodes[p].dim);
    }
}

// Literal sum over directed paths node -> output of the chained pulled-back
// output gradient. Deliberately memo-free so it shares nothing with the
// fixed-point recursion it checks.
Vector path_gradient(const CompGraph& g, const NodeState& s, std::size_t node,
                     const Vector& out_grad) {
    if (node == g.output_index) return out_grad;
    Vector acc(g.nodes[node].dim, 0.0);
    for (std::size_t c : g.children[node]) {
        const Vector down = path_gradient(g, s, c, out_grad);
        axpy(1.0, matvec(edge_jacobian_t(g, s, node, c), down), acc);
    }
    return acc;
}

CompGraph diamond(const Matrix& b, const Matrix& c) {
    const std::size_t d = b.rows;
    std::vector<GraphNode> nodes = {
        {0, b.cols, NodeOp::Input, {}},   {1, d, NodeOp::LinearMap, b},
        {2, d, NodeOp::LinearMap, c},     {3, d, NodeOp::Sum, {}},
        {4, d, NodeOp::Output, {}},
    };
    std::vector<std::pair<int, int>> edges = {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}};
    return build_graph(std::move(nodes), std::move(edges));
}

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("build_graph validation") {
    std::vector<GraphNode> nodes = {{0, 2, NodeOp::Input, {}}, {1, 2, NodeOp::Output, {}}};
    SUBCASE("minimal valid graph") {
        const auto g = build_graph(nodes, {{0, 1}});
        CHECK(g.output_index == 1);
        CHECK(g.topo_order == std::vector<std::size_t>{0, 1});
        CHECK(g.adjacency[0][1] == 1);
        CHECK(g.adjacency[1][0] == 0);
    }
    SUBCASE("cycle") {
        nodes[0].op = NodeOp::Sum;
        CHECK_THROWS_AS(build_graph(nodes, {{0, 1}, {1, 0}}), GraphError);
    }
    SUBCASE("duplicate edge") {
        CHECK_THROWS_AS(build_graph(nodes, {{0, 1}, {0, 1}}), GraphError);
    }
    SUBCASE("duplicate id") {
        nodes[1].id = 0;
        CHECK_THROWS_AS(build_graph(nodes, {{0, 1}}), GraphError);
    }
    SUBCASE("input with a parent") {
        CHECK_THROWS_AS(build_graph(nodes, {{1, 0}}), GraphError);
    }
    SUBCASE("no output node") {
        nodes[1].op = NodeOp::Sum;
        CHECK_THROWS_AS(build_graph(nodes, {{0, 1}}), GraphError);
    }
    SUBCASE("output dim mismatch with parent") {
        nodes[1].dim = 3;
        CHECK_THROWS_AS(build_graph(nodes, {{0, 1}}), ShapeError);
    }
    SUBCASE("linear weight shape mismatch") {
        nodes[1] = {1, 3, NodeOp::LinearMap, Matrix(3, 5)};
        CHECK_THROWS_AS(build_graph(nodes, {{0, 1}}), ShapeError);
    }
    SUBCASE("designated output must be a sink") {
        nodes.push_back({2, 2, NodeOp::Output, {}});
        CHECK_THROWS_AS(build_graph(nodes, {{0, 1}, {1, 2}}, 1), GraphError);
    }
}

TEST_CASE("dag_forward on the diamond computes Bx + Cx") {
    const auto g = diamond(identity(2), identity(2));
    const auto s = dag_forward(g, {{1.5, -2.0}});
    CHECK(s.forward[g.output_index] == Vector{3.0, -4.0});
    CHECK(s.relaxed == s.forward);
    CHECK_THROWS_AS(dag_forward(g, {}), ShapeError);
    CHECK_THROWS_AS(dag_forward(g, {{1.0}}), ShapeError);
    CHECK_THROWS_AS(dag_forward(g, {{1.0, 2.0}, {3.0, 4.0}}), ShapeError);
}

TEST_CASE("diamond gradient at the input is (B + C)^T g") {
    const Matrix b(2, 2, {1, 2, 0, 1});
    const Matrix c(2, 2, {0, 1, 1, 0});
    const auto g = diamond(b, c);
    const Vector out_grad = {1.0, -0.5};
    const auto relaxed = dag_relax(g, {{0.3, 0.7}}, out_grad, 400, 0.1);
    // (B + C)^T out_grad
    Vector expected = matvec_transposed(b, out_grad);
    axpy(1.0, matvec_transposed(c, out_grad), expected);
    for (std::size_t k = 0; k < 2; ++k)
        CHECK(relaxed[0][k] == doctest::Approx(expected[k]).epsilon(1e-10));
    // With B = C = I the input gradient is simply 2g.
    const auto twice = dag_relax(diamond(identity(2), identity(2)), {{0.0, 0.0}},
                                 out_grad, 400, 0.1);
    CHECK(twice[0][0] == doctest::Approx(2.0 * out_grad[0]).epsilon(1e-10));
    CHECK(twice[0][1] == doctest::Approx(2.0 * out_grad[1]).epsilon(1e-10));
}

TEST_CASE("relaxed carriers match the path-enumeration oracle on random dags") {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> dim_dist(1, 4);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    int built = 0;
    for (int trial = 0; trial < 40; ++trial) {
        std::uniform_int_distribution<std::size_t> count_dist(3, 8);
        const std::size_t n = count_dist(rng);
        std::vector<GraphNode> nodes;
        std::vector<std::pair<int, int>> edges;
        nodes.push_back({0, dim_dist(rng), NodeOp::Input, {}});
        for (std::size_t i = 1; i + 1 < n; ++i) {
            std::uniform_int_distribution<std::size_t> parent_dist(0, i - 1);
            const std::size_t p = parent_dist(rng);
            const double pick = unit(rng);
            GraphNode node;
            node.id = int(i);
            if (pick < 0.45) {
                node.op = NodeOp::LinearMap;
                node.dim = dim_dist(rng);
                node.weight = test::random_matrix(node.dim, nodes[p].dim, rng, 0.7);
            } else if (pick < 0.7) {
                node.op = NodeOp::ReLU;
                node.dim = nodes[p].dim;
            } else {
                node.op = NodeOp::Sum;
                node.dim = nodes[p].dim;
                for (std::size_t q = 0; q < i; ++q)
                    if (q != p && nodes[q].dim == node.dim && unit(rng) < 0.4)
                        edges.emplace_back(int(q), int(i));
            }
            edges.emplace_back(int(p), int(i));
            nodes.push_back(std::move(node));
        }
        nodes.push_back({int(n - 1), nodes[n - 2].dim, NodeOp::Output, {}});
        edges.emplace_back(int(n - 2), int(n - 1));

        const auto g = build_graph(std::move(nodes), std::move(edges));
        ++built;
        auto state = dag_forward(g, {test::random_vector(g.nodes[0].dim, rng)});
        const Vector out_grad =
            test::random_vector(g.nodes[g.output_index].dim, rng);
        const auto relaxed =
            dag_relax(g, {state.forward[0]}, out_grad, 600, 0.1);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (i == g.output_index) continue;
            const Vector expected = path_gradient(g, state, i, out_grad);
            for (std::size_t k = 0; k < expected.size(); ++k)
                CHECK(std::fabs(relaxed[i][k] - expected[k]) <=
                      1e-8 * std::max(1.0, std::fabs(expected[k])));
        }
    }
    CHECK(built == 40);
}

TEST_CASE("chain graph relaxation equals the layered module bitwise on linear nets") {
    NetworkParams p;
    p.layers = {{3, 4, Activation::Linear}, {4, 3, Activation::Linear},
                {3, 2, Activation::Linear}};
    std::mt19937_64 rng(13);
    p.weights = {test::random_matrix(4, 3, rng), test::random_matrix(3, 4, rng),
                 test::random_matrix(2, 3, rng)};
    const auto x = test::random_vector(3, rng);
    const auto t = test::random_vector(2, rng);

    const auto g = chain_graph(p);
    REQUIRE(g.size() == 4);  // input + one linear node per layer
    const auto trace = forward(p, x);
    auto mlp_state = init_relaxation(trace, t);
    auto dag_state = dag_forward(g, {x});
    set_output_gradient(dag_state, g, mse_grad(trace.output(), t));

    VariantConfig cfg;
    for (int it = 0; it < 50; ++it) {
        relax_step(mlp_state, trace, p, cfg);
        dag_relax_step(dag_state, g, cfg.eta_x);
        // Graph node l+1 carries g^{l+1}; the input node additionally relaxes
        // toward dL/dx^0, which the layered module never updates.
        for (std::size_t l = 1; l <= p.num_layers(); ++l)
            CHECK(dag_state.relaxed[l] == mlp_state.g[l]);
    }
}

TEST_CASE("chain graph equilibrium matches backprop on ReLU nets") {
    const auto p = init_params(mlp_specs({5, 6, 4, 3}), 21);
    std::mt19937_64 rng(22);
    const auto x = test::random_vector(5, rng);
    const auto t = test::random_vector(3, rng);
    const auto trace = forward(p, x);
    const auto oracle = backprop(trace, p, t);

    const auto g = chain_graph(p);
    const auto relaxed = dag_relax(g, {x}, mse_grad(trace.output(), t), 600, 0.1);
    // ReLU node carriers sit at dL/dx^l for the hidden layers; the final
    // linear node is the clamped output.
    std::vector<std::size_t> relu_nodes;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (g.nodes[i].op == NodeOp::ReLU) relu_nodes.push_back(i);
    REQUIRE(relu_nodes.size() == 2);
    for (std::size_t l = 0; l < relu_nodes.size(); ++l)
        CHECK(mse_between(relaxed[relu_nodes[l]], oracle.activation_grads[l]) < 1e-16);
    CHECK(relaxed[g.output_index] == oracle.activation_grads.back());
}

TEST_CASE("node-list order does not change carriers keyed by id") {
    const Matrix b(2, 2, {1, 2, 0, 1});
    const Matrix c(2, 2, {0, 1, 1, 0});
    const auto g1 = diamond(b, c);
    // Same graph, nodes listed in a different order.
    std::vector<GraphNode> shuffled = {
        {3, 2, NodeOp::Sum, {}},        {0, 2, NodeOp::Input, {}},
        {4, 2, NodeOp::Output, {}},     {2, 2, NodeOp::LinearMap, c},
        {1, 2, NodeOp::LinearMap, b},
    };
    const auto g2 = build_graph(std::move(shuffled), {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}});
    const Vector x = {0.4, -1.1};
    const Vector out_grad = {1.0, 2.0};
    const auto r1 = dag_relax(g1, {x}, out_grad, 200, 0.1);
    const auto r2 = dag_relax(g2, {x}, out_grad, 200, 0.1);
    for (int id = 0; id <= 4; ++id)
        CHECK(r1[g1.index_of(id)] == r2[g2.index_of(id)]);
}

TEST_CASE("scalar chain hessian is upper triangular with unit diagonal") {
    std::vector<GraphNode> nodes = {
        {0, 1, NodeOp::Input, {}},
        {1, 1, NodeOp::LinearMap, Matrix(1, 1, {2})},
        {2, 1, NodeOp::LinearMap, Matrix(1, 1, {3})},
    };
    const auto g = build_graph(std::move(nodes), {{0, 1}, {1, 2}}, 2);
    const auto s = dag_forward(g, {{1.0}});
    const auto h = hessian(g, s);
    REQUIRE(h.rows == 3);
    // [[1, -w1, 0], [0, 1, -w2], [0, 0, 1]]
    CHECK(h.data == std::vector<double>{1, -2, 0, 0, 1, -3, 0, 0, 1});

    const auto report = check_convexity(g, s);
    CHECK(report.is_upper_triangular_under_topo_order);
    CHECK(report.diagonal_all_ones);
    for (double e : report.eigenvalues) CHECK(e == 1.0);
}

TEST_CASE("hessian of the diamond keeps unit diagonal under permuted node order") {
    const Matrix b(2, 2, {1, 2, 0, 1});
    const Matrix c(2, 2, {0, 1, 1, 0});
    std::vector<GraphNode> shuffled = {
        {3, 2, NodeOp::Sum, {}},        {0, 2, NodeOp::Input, {}},
        {4, 2, NodeOp::Output, {}},     {2, 2, NodeOp::LinearMap, c},
        {1, 2, NodeOp::LinearMap, b},
    };
    const auto g = build_graph(std::move(shuffled), {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}});
    const auto s = dag_forward(g, {{1.0, 1.0}});
    const auto report = check_convexity(g, s);
    CHECK(report.is_upper_triangular_under_topo_order);
    CHECK(report.diagonal_all_ones);
    REQUIRE(report.eigenvalues.size() == 10);
    for (double e : report.eigenvalues) CHECK(e == 1.0);
    REQUIRE(report.symmetric_part_eigenvalues.size() == 10);
}

TEST_CASE("negative energy gradient equals the relaxation velocity") {
    std::mt19937_64 rng(55);
    const Matrix b = test::random_matrix(3, 2, rng);
    const Matrix c = test::random_matrix(3, 2, rng);
    std::vector<GraphNode> nodes = {
        {0, 2, NodeOp::Input, {}},   {1, 3, NodeOp::LinearMap, b},
        {2, 3, NodeOp::LinearMap, c}, {3, 3, NodeOp::Sum, {}},
        {4, 3, NodeOp::ReLU, {}},     {5, 3, NodeOp::Output, {}},
    };
    const auto g = build_graph(std::move(nodes),
                               {{0, 1}, {0, 2}, {1, 3}, {2, 3}, {3, 4}, {4, 5}});
    auto state = dag_forward(g, {test::random_vector(2, rng)});
    set_output_gradient(state, g, test::random_vector(3, rng));
    for (int it = 0; it < 3; ++it) dag_relax_step(state, g, 0.1);

    const auto velocity = relaxation_velocity(state, g);
    const double h = 1e-4;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i == g.output_index) continue;  // clamped coordinate
        for (std::size_t k = 0; k < g.nodes[i].dim; ++k) {
            auto probe = state.relaxed;
            probe[i][k] += h;
            const double up = energy_linearized(probe, state, g);
            probe[i][k] -= 2 * h;
            const double down = energy_linearized(probe, state, g);
            const double grad = (up - down) / (2 * h);
            CHECK(std::fabs(-grad - velocity[i][k]) < 1e-6);
        }
    }
    CHECK(velocity[g.output_index] == Vector(3, 0.0));
}

TEST_CASE("energy at the forward state reduces to the input terms") {
    const Matrix b(2, 2, {1, 2, 0, 1});
    const auto g = diamond(b, identity(2));
    const Vector x = {0.6, -0.9};
    const auto s = dag_forward(g, {x});  // relaxed == forward, output unclamped
    const double expected = 0.5 * dot(x, x);
    CHECK(energy(s, g) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("graph file parsing") {
    const auto path = temp_path("ar_graph_test.graph");
    SUBCASE("diamond description roundtrips") {
        std::ofstream(path) << "# a diamond\n"
                               "node 0 2 input\n"
                               "node 1 2 linear 2 2\n"
                               "node 2 2 linear 2 2\n"
                               "node 3 2 sum\n"
                               "node 4 2 output\n"
                               "\n"
                               "edge 0 1\nedge 0 2\nedge 1 3\nedge 2 3\nedge 3 4\n";
        const auto g = parse_graph_file(path, 3);
        CHECK(g.size() == 5);
        CHECK(g.nodes[g.output_index].id == 4);
        // Seeded weights are deterministic.
        const auto h = parse_graph_file(path, 3);
        CHECK(g.nodes[1].weight.data == h.nodes[1].weight.data);
        const auto other = parse_graph_file(path, 4);
        CHECK(g.nodes[1].weight.data != other.nodes[1].weight.data);
    }
    SUBCASE("unknown op") {
        std::ofstream(path) << "node 0 2 softmax\n";
        CHECK_THROWS_AS(parse_graph_file(path), FormatError);
    }
    SUBCASE("bad linear shape") {
        std::ofstream(path) << "node 0 2 linear 3 2\n";
        CHECK_THROWS_AS(parse_graph_file(path), FormatError);
    }
    SUBCASE("unknown directive") {
        std::ofstream(path) << "vertex 0 2 input\n";
        CHECK_THROWS_AS(parse_graph_file(path), FormatError);
    }
    SUBCASE("structural errors surface as FormatError") {
        std::ofstream(path) << "node 0 2 input\nnode 1 2 output\nedge 1 0\n";
        CHECK_THROWS_AS(parse_graph_file(path), FormatError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(parse_graph_file(temp_path("ar_graph_missing.graph")), FormatError);
    }
    std::remove(path.c_str());
}

TEST_CASE("checkpoint weights can be assigned to linear nodes") {
    NetworkParams p;
    p.layers = {{3, 4, Activation::Linear}, {4, 2, Activation::Linear}};
    std::mt19937_64 rng(9);
    p.weights = {test::random_matrix(4, 3, rng), test::random_matrix(2, 4, rng)};

    auto g = chain_graph(p);
    NetworkParams q = p;
    q.weights[0].data[0] += 1.0;
    assign_weights_from_checkpoint(g, q);
    CHECK(g.nodes[1].weight.data == q.weights[0].data);

    NetworkParams extra = p;
    extra.weights.push_back(Matrix(2, 2));
    extra.layers.push_back({2, 2, Activation::Linear});
    CHECK_THROWS_AS(assign_weights_from_checkpoint(g, extra), CheckpointError);

    NetworkParams wrong = p;
    wrong.weights[1] = Matrix(3, 4);
    CHECK_THROWS_AS(assign_weights_from_checkpoint(g, wrong), CheckpointError);
}
