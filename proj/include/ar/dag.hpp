#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ar/network.hpp"

namespace ar {

enum class NodeOp { Input, LinearMap, ReLU, Sum, Output };

struct GraphNode {
    int id = 0;
    std::size_t dim = 0;
    NodeOp op = NodeOp::Input;
    Matrix weight;  // LinearMap only
};

// Directed acyclic computation graph. Nodes are addressed by position in
// `nodes`; `edges` carry user-facing ids. The relaxed value of the output
// node is clamped to the supplied loss gradient; every other node relaxes
// toward the sum of its children's carriers pulled back through the frozen
// Jacobians.
struct CompGraph {
    std::vector<GraphNode> nodes;
    std::vector<std::pair<int, int>> edges;

    // Derived on construction.
    std::vector<std::vector<std::uint8_t>> adjacency;  // A[i][j] == 1 iff edge i->j
    std::vector<std::vector<std::size_t>> parents;
    std::vector<std::vector<std::size_t>> children;
    std::vector<std::size_t> topo_order;
    std::size_t output_index = 0;

    std::size_t size() const { return nodes.size(); }
    std::size_t index_of(int id) const;

private:
    std::unordered_map<int, std::size_t> id_to_index_;
    friend CompGraph build_graph(std::vector<GraphNode>, std::vector<std::pair<int, int>>, int);
};

// Validates shapes, arity, and acyclicity. output_id < 0 designates the
// unique Output-op node; a non-negative output_id designates that node as
// the clamped output instead (it must be a sink).
CompGraph build_graph(std::vector<GraphNode> nodes, std::vector<std::pair<int, int>> edges,
                      int output_id = -1);

struct NodeState {
    std::vector<Vector> forward;
    std::vector<Vector> relaxed;
};

// Topological evaluation; relaxed values start as copies of the forward
// values. Inputs are matched to Input nodes in node-list order.
NodeState dag_forward(const CompGraph& graph, const std::vector<Vector>& inputs);

// Clamp the output node's carrier to the loss gradient dL/dx^out.
void set_output_gradient(NodeState& state, const CompGraph& graph, const Vector& grad);

// One Jacobi step over all non-output nodes; returns max ||dg||_inf.
double dag_relax_step(NodeState& state, const CompGraph& graph, double eta_x);

// Forward + clamp + iterate; returns the per-node equilibrated carriers.
std::vector<Vector> dag_relax(const CompGraph& graph, const std::vector<Vector>& inputs,
                              const Vector& output_grad, std::size_t iters, double eta_x);

// Relaxation velocity field at the current carriers (zero at the output node).
std::vector<Vector> relaxation_velocity(const NodeState& state, const CompGraph& graph);

// Frozen-Jacobian energy. The quadratic cross terms hold the child carrier
// fixed at `at`'s values while the squared and parent-slot terms are taken
// from `relaxed`; minus its gradient in `relaxed`, evaluated at
// relaxed == at, is exactly the relaxation velocity.
double energy_linearized(const std::vector<Vector>& relaxed, const NodeState& at,
                         const CompGraph& graph);
double energy(const NodeState& state, const CompGraph& graph);

// Block matrix over node coordinates: identity diagonal blocks, -J^T where
// A[i,j] = 1, zero elsewhere. Jacobians frozen at `state`'s forward values.
Matrix hessian(const CompGraph& graph, const NodeState& state);

struct ConvexityReport {
    bool is_upper_triangular_under_topo_order = false;
    bool diagonal_all_ones = false;
    std::vector<double> eigenvalues;  // diagonal of the triangular Hessian
    // Spectrum of (H + H^T)/2, for inspection only; triangular eigenvalues
    // certify less than positive-definiteness for non-symmetric H.
    std::vector<double> symmetric_part_eigenvalues;
};

ConvexityReport check_convexity(const CompGraph& graph, const NodeState& state);

// Line-oriented description:
//   node <id> <dim> <op> [rows cols]     op in {input, linear, relu, sum, output}
//   edge <parent-id> <child-id>
// Blank lines and lines starting with '#' are skipped. LinearMap weights are
// seeded Gaussian (std 1/sqrt(cols)) unless replaced afterwards.
CompGraph parse_graph_file(const std::string& path, std::uint64_t seed = 0);

// Assigns checkpoint weight matrices to LinearMap nodes in topological order.
void assign_weights_from_checkpoint(CompGraph& graph, const NetworkParams& params);

// Chain graph mirroring an MLP: Input, then per layer a LinearMap node and,
// for ReLU layers, a ReLU node; the final node is the designated output.
CompGraph chain_graph(const NetworkParams& params);

}  // namespace ar
