#include "ar/dag.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <random>
#include <sstream>

namespace ar {

namespace {

const char* op_name(NodeOp op) {
    switch (op) {
        case NodeOp::Input: return "input";
        case NodeOp::LinearMap: return "linear";
        case NodeOp::ReLU: return "relu";
        case NodeOp::Sum: return "sum";
        case NodeOp::Output: return "output";
    }
    return "?";
}

// J_{ij}^T g_j for the edge parent -> child, frozen at forward values.
Vector pull_back(const CompGraph& graph, const NodeState& state, std::size_t parent,
                 std::size_t child, const Vector& g_child) {
    const GraphNode& c = graph.nodes[child];
    switch (c.op) {
        case NodeOp::LinearMap: return matvec_transposed(c.weight, g_child);
        case NodeOp::ReLU: return hadamard(g_child, relu_prime(state.forward[parent]));
        case NodeOp::Sum:
        case NodeOp::Output: return g_child;
        case NodeOp::Input: break;
    }
    throw GraphError("input node cannot be a child");
}

// J_{ij} d_i for the edge parent -> child.
Vector push_forward(const CompGraph& graph, const NodeState& state, std::size_t parent,
                    std::size_t child, const Vector& d_parent) {
    const GraphNode& c = graph.nodes[child];
    switch (c.op) {
        case NodeOp::LinearMap: return matvec(c.weight, d_parent);
        case NodeOp::ReLU: return hadamard(d_parent, relu_prime(state.forward[parent]));
        case NodeOp::Sum:
        case NodeOp::Output: return d_parent;
        case NodeOp::Input: break;
    }
    throw GraphError("input node cannot be a child");
}

// Materialized -J_{ij}^T block (dim_i x dim_j).
Matrix neg_jacobian_transpose(const CompGraph& graph, const NodeState& state,
                              std::size_t parent, std::size_t child) {
    const GraphNode& c = graph.nodes[child];
    const std::size_t di = graph.nodes[parent].dim;
    const std::size_t dj = c.dim;
    Matrix block(di, dj);
    switch (c.op) {
        case NodeOp::LinearMap:
            for (std::size_t a = 0; a < di; ++a)
                for (std::size_t b = 0; b < dj; ++b) block(a, b) = -c.weight(b, a);
            break;
        case NodeOp::ReLU: {
            const Vector fp = relu_prime(state.forward[parent]);
            for (std::size_t a = 0; a < di; ++a) block(a, a) = -fp[a];
            break;
        }
        case NodeOp::Sum:
        case NodeOp::Output:
            for (std::size_t a = 0; a < di; ++a) block(a, a) = -1.0;
            break;
        case NodeOp::Input: throw GraphError("input node cannot be a child");
    }
    return block;
}

// Cyclic Jacobi eigenvalues of a symmetric matrix.
std::vector<double> symmetric_eigenvalues(Matrix m) {
    const std::size_t n = m.rows;
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::fabs(m(p, q)) < 1e-18) continue;
                const double theta = (m(q, q) - m(p, p)) / (2.0 * m(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m(k, p), mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m(p, k), mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = m(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace

std::size_t CompGraph::index_of(int id) const {
    auto it = id_to_index_.find(id);
    if (it == id_to_index_.end())
        throw GraphError("unknown node id " + std::to_string(id));
    return it->second;
}

CompGraph build_graph(std::vector<GraphNode> nodes, std::vector<std::pair<int, int>> edges,
                      int output_id) {
    CompGraph g;
    g.nodes = std::move(nodes);
    g.edges = std::move(edges);
    const std::size_t n = g.nodes.size();
    if (n == 0) throw GraphError("empty graph");

    for (std::size_t i = 0; i < n; ++i) {
        if (g.nodes[i].dim == 0) throw GraphError("node dim must be positive");
        if (!g.id_to_index_.emplace(g.nodes[i].id, i).second)
            throw GraphError("duplicate node id " + std::to_string(g.nodes[i].id));
    }

    g.adjacency.assign(n, std::vector<std::uint8_t>(n, 0));
    g.parents.assign(n, {});
    g.children.assign(n, {});
    for (const auto& [pid, cid] : g.edges) {
        const std::size_t p = g.index_of(pid), c = g.index_of(cid);
        if (g.adjacency[p][c]) throw GraphError("duplicate edge " + std::to_string(pid) +
                                                " -> " + std::to_string(cid));
        g.adjacency[p][c] = 1;
        g.parents[c].push_back(p);
        g.children[p].push_back(c);
    }

    // Kahn topological sort; leftover nodes mean a cycle.
    std::vector<std::size_t> indeg(n);
    for (std::size_t i = 0; i < n; ++i) indeg[i] = g.parents[i].size();
    std::deque<std::size_t> ready;
    for (std::size_t i = 0; i < n; ++i)
        if (indeg[i] == 0) ready.push_back(i);
    while (!ready.empty()) {
        const std::size_t i = ready.front();
        ready.pop_front();
        g.topo_order.push_back(i);
        for (std::size_t c : g.children[i])
            if (--indeg[c] == 0) ready.push_back(c);
    }
    if (g.topo_order.size() != n) throw GraphError("graph contains a cycle");

    // Per-op arity and shape checks.
    for (std::size_t i = 0; i < n; ++i) {
        const GraphNode& node = g.nodes[i];
        const auto& par = g.parents[i];
        switch (node.op) {
            case NodeOp::Input:
                if (!par.empty()) throw GraphError("input node " + std::to_string(node.id) +
                                                   " has parents");
                break;
            case NodeOp::LinearMap:
                if (par.size() != 1)
                    throw GraphError("linear node " + std::to_string(node.id) +
                                     " needs exactly one parent");
                if (node.weight.rows != node.dim ||
                    node.weight.cols != g.nodes[par[0]].dim)
                    throw ShapeError("linear node " + std::to_string(node.id) +
                                     " weight shape mismatch");
                break;
            case NodeOp::ReLU:
            case NodeOp::Output:
                if (par.size() != 1)
                    throw GraphError(std::string(op_name(node.op)) + " node " +
                                     std::to_string(node.id) + " needs exactly one parent");
                if (g.nodes[par[0]].dim != node.dim)
                    throw ShapeError(std::string(op_name(node.op)) + " node " +
                                     std::to_string(node.id) + " dim mismatch with parent");
                break;
            case NodeOp::Sum:
                if (par.empty())
                    throw GraphError("sum node " + std::to_string(node.id) + " has no parents");
                for (std::size_t p : par)
                    if (g.nodes[p].dim != node.dim)
                        throw ShapeError("sum node " + std::to_string(node.id) +
                                         " dim mismatch with parent " +
                                         std::to_string(g.nodes[p].id));
                break;
        }
    }

    if (output_id >= 0) {
        g.output_index = g.index_of(output_id);
        if (!g.children[g.output_index].empty())
            throw GraphError("designated output node must be a sink");
    } else {
        std::size_t count = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (g.nodes[i].op == NodeOp::Output) {
                g.output_index = i;
                ++count;
            }
        }
        if (count != 1)
            throw GraphError("graph must have exactly one output node, found " +
                             std::to_string(count));
        if (!g.children[g.output_index].empty())
            throw GraphError("output node must be a sink");
    }
    return g;
}

NodeState dag_forward(const CompGraph& graph, const std::vector<Vector>& inputs) {
    NodeState state;
    state.forward.assign(graph.size(), {});

    std::size_t next_input = 0;
    for (std::size_t idx : graph.topo_order) {
        const GraphNode& node = graph.nodes[idx];
        switch (node.op) {
            case NodeOp::Input: {
                if (next_input >= inputs.size())
                    throw ShapeError("dag_forward: not enough input vectors");
                const Vector& in = inputs[next_input++];
                if (in.size() != node.dim)
                    throw ShapeError("dag_forward: input dim " + std::to_string(in.size()) +
                                     " vs node dim " + std::to_string(node.dim));
                state.forward[idx] = in;
                break;
            }
            case NodeOp::LinearMap:
                state.forward[idx] = matvec(node.weight, state.forward[graph.parents[idx][0]]);
                break;
            case NodeOp::ReLU:
                state.forward[idx] = relu(state.forward[graph.parents[idx][0]]);
                break;
            case NodeOp::Sum: {
                Vector acc(node.dim, 0.0);
                for (std::size_t p : graph.parents[idx]) axpy(1.0, state.forward[p], acc);
                state.forward[idx] = std::move(acc);
                break;
            }
            case NodeOp::Output:
                state.forward[idx] = state.forward[graph.parents[idx][0]];
                break;
        }
    }
    if (next_input != inputs.size())
        throw ShapeError("dag_forward: " + std::to_string(inputs.size()) +
                         " inputs for " + std::to_string(next_input) + " input nodes");
    state.relaxed = state.forward;
    return state;
}

void set_output_gradient(NodeState& state, const CompGraph& graph, const Vector& grad) {
    if (grad.size() != graph.nodes[graph.output_index].dim)
        throw ShapeError("output gradient dim mismatch");
    state.relaxed[graph.output_index] = grad;
}

double dag_relax_step(NodeState& state, const CompGraph& graph, double eta_x) {
    std::vector<Vector> next = state.relaxed;
    double max_delta = 0.0;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        if (i == graph.output_index) continue;
        Vector fb(graph.nodes[i].dim, 0.0);
        for (std::size_t c : graph.children[i])
            axpy(1.0, pull_back(graph, state, i, c, state.relaxed[c]), fb);
        for (std::size_t k = 0; k < fb.size(); ++k) {
            const double dg = eta_x * (-state.relaxed[i][k] + fb[k]);
            const double a = std::fabs(dg);
            if (a > max_delta) max_delta = a;
            next[i][k] = state.relaxed[i][k] + dg;
        }
        if (!all_finite(next[i]))
            throw DivergenceError("dag relaxation diverged at node " +
                                  std::to_string(graph.nodes[i].id));
    }
    state.relaxed = std::move(next);
    return max_delta;
}

std::vector<Vector> dag_relax(const CompGraph& graph, const std::vector<Vector>& inputs,
                              const Vector& output_grad, std::size_t iters, double eta_x) {
    NodeState state = dag_forward(graph, inputs);
    set_output_gradient(state, graph, output_grad);
    for (std::size_t it = 0; it < iters; ++it) dag_relax_step(state, graph, eta_x);
    return state.relaxed;
}

std::vector<Vector> relaxation_velocity(const NodeState& state, const CompGraph& graph) {
    std::vector<Vector> v(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i) {
        v[i].assign(graph.nodes[i].dim, 0.0);
        if (i == graph.output_index) continue;
        for (std::size_t c : graph.children[i])
            axpy(1.0, pull_back(graph, state, i, c, state.relaxed[c]), v[i]);
        axpy(-1.0, state.relaxed[i], v[i]);
    }
    return v;
}

double energy_linearized(const std::vector<Vector>& relaxed, const NodeState& at,
                         const CompGraph& graph) {
    if (relaxed.size() != graph.size())
        throw ShapeError("energy: carrier count mismatch");
    double e = 0.0;
    for (std::size_t i = 0; i < graph.size(); ++i) e += 0.5 * dot(relaxed[i], relaxed[i]);
    for (std::size_t j = 0; j < graph.size(); ++j) {
        if (graph.nodes[j].op == NodeOp::Input) continue;
        // Frozen-Jacobian linearization of the parent function around the
        // forward values, paired against the held child carrier.
        Vector f_tilde = at.forward[j];
        for (std::size_t p : graph.parents[j]) {
            Vector d = relaxed[p];
            axpy(-1.0, at.forward[p], d);
            axpy(1.0, push_forward(graph, at, p, j, d), f_tilde);
        }
        const Vector& held = at.relaxed[j];
        e -= dot(held, f_tilde) - 0.5 * dot(held, held);
    }
    return e;
}

double energy(const NodeState& state, const CompGraph& graph) {
    return energy_linearized(state.relaxed, state, graph);
}

Matrix hessian(const CompGraph& graph, const NodeState& state) {
    std::vector<std::size_t> offset(graph.size() + 1, 0);
    for (std::size_t i = 0; i < graph.size(); ++i)
        offset[i + 1] = offset[i] + graph.nodes[i].dim;
    Matrix h(offset.back(), offset.back());
    for (std::size_t i = 0; i < graph.size(); ++i)
        for (std::size_t k = 0; k < graph.nodes[i].dim; ++k)
            h(offset[i] + k, offset[i] + k) = 1.0;
    for (std::size_t i = 0; i < graph.size(); ++i) {
        for (std::size_t j : graph.children[i]) {
            const Matrix block = neg_jacobian_transpose(graph, state, i, j);
            for (std::size_t a = 0; a < block.rows; ++a)
                for (std::size_t b = 0; b < block.cols; ++b)
                    h(offset[i] + a, offset[j] + b) = block(a, b);
        }
    }
    return h;
}

ConvexityReport check_convexity(const CompGraph& graph, const NodeState& state) {
    // Permute node blocks into topological order, then read the structure.
    std::vector<std::size_t> dim_in_topo;
    std::vector<std::size_t> coord;  // original coordinate for each permuted one
    {
        std::vector<std::size_t> offset(graph.size() + 1, 0);
        for (std::size_t i = 0; i < graph.size(); ++i)
            offset[i + 1] = offset[i] + graph.nodes[i].dim;
        for (std::size_t idx : graph.topo_order)
            for (std::size_t k = 0; k < graph.nodes[idx].dim; ++k)
                coord.push_back(offset[idx] + k);
    }
    const Matrix h = hessian(graph, state);
    const std::size_t n = coord.size();
    Matrix permuted(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) permuted(a, b) = h(coord[a], coord[b]);

    ConvexityReport report;
    report.is_upper_triangular_under_topo_order = true;
    report.diagonal_all_ones = true;
    for (std::size_t a = 0; a < n; ++a) {
        if (permuted(a, a) != 1.0) report.diagonal_all_ones = false;
        for (std::size_t b = 0; b < a; ++b)
            if (permuted(a, b) != 0.0) report.is_upper_triangular_under_topo_order = false;
    }
    for (std::size_t a = 0; a < n; ++a) report.eigenvalues.push_back(permuted(a, a));

    Matrix sym(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
            sym(a, b) = 0.5 * (permuted(a, b) + permuted(b, a));
    report.symmetric_part_eigenvalues = symmetric_eigenvalues(std::move(sym));
    return report;
}

CompGraph parse_graph_file(const std::string& path, std::uint64_t seed) {
    std::ifstream is(path);
    if (!is) throw FormatError("cannot open graph file: " + path);
    std::vector<GraphNode> nodes;
    std::vector<std::pair<int, int>> edges;
    std::mt19937_64 rng(seed);

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto fail = [&](const std::string& msg) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " + msg);
        };
        std::istringstream ss(line);
        std::string kind;
        if (!(ss >> kind) || kind[0] == '#') continue;
        if (kind == "node") {
            GraphNode node;
            std::string op;
            long long dim = 0;
            if (!(ss >> node.id >> dim >> op)) fail("expected: node <id> <dim> <op>");
            if (dim <= 0) fail("node dim must be positive");
            node.dim = static_cast<std::size_t>(dim);
            if (op == "input") node.op = NodeOp::Input;
            else if (op == "linear") node.op = NodeOp::LinearMap;
            else if (op == "relu") node.op = NodeOp::ReLU;
            else if (op == "sum") node.op = NodeOp::Sum;
            else if (op == "output") node.op = NodeOp::Output;
            else fail("unknown op '" + op + "'");
            if (node.op == NodeOp::LinearMap) {
                long long rows = 0, cols = 0;
                if (!(ss >> rows >> cols)) fail("linear node needs: rows cols");
                if (rows <= 0 || cols <= 0) fail("linear shape must be positive");
                if (static_cast<std::size_t>(rows) != node.dim)
                    fail("linear rows must equal node dim");
                node.weight = Matrix(static_cast<std::size_t>(rows),
                                     static_cast<std::size_t>(cols));
                std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(cols)));
                for (auto& x : node.weight.data) x = dist(rng);
            }
            nodes.push_back(std::move(node));
        } else if (kind == "edge") {
            int p = 0, c = 0;
            if (!(ss >> p >> c)) fail("expected: edge <parent> <child>");
            edges.emplace_back(p, c);
        } else {
            fail("unknown directive '" + kind + "'");
        }
    }
    try {
        return build_graph(std::move(nodes), std::move(edges));
    } catch (const std::runtime_error& e) {
        throw FormatError(path + ": " + e.what());
    }
}

void assign_weights_from_checkpoint(CompGraph& graph, const NetworkParams& params) {
    std::size_t next = 0;
    for (std::size_t idx : graph.topo_order) {
        GraphNode& node = graph.nodes[idx];
        if (node.op != NodeOp::LinearMap) continue;
        if (next >= params.weights.size())
            throw CheckpointError("checkpoint has fewer weight matrices than linear nodes");
        const Matrix& w = params.weights[next++];
        if (!w.same_shape(node.weight))
            throw CheckpointError("checkpoint weight shape mismatch at node " +
                                  std::to_string(node.id));
        node.weight = w;
    }
    if (next != params.weights.size())
        throw CheckpointError("checkpoint has more weight matrices than linear nodes");
}

CompGraph chain_graph(const NetworkParams& params) {
    std::vector<GraphNode> nodes;
    std::vector<std::pair<int, int>> edges;
    int id = 0;
    nodes.push_back({id, params.input_dim(), NodeOp::Input, {}});
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        const LayerSpec& s = params.layers[l];
        nodes.push_back({id + 1, s.out_dim, NodeOp::LinearMap, params.weights[l]});
        edges.emplace_back(id, id + 1);
        ++id;
        if (s.activation == Activation::ReLU) {
            nodes.push_back({id + 1, s.out_dim, NodeOp::ReLU, {}});
            edges.emplace_back(id, id + 1);
            ++id;
        }
    }
    return build_graph(std::move(nodes), std::move(edges), id);
}

}  // namespace ar
