#pragma once

#include "fnbench/matrix.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fnbench {

using Edge = std::pair<std::uint32_t, std::uint32_t>; // directed parent -> child

/// One news item: a rooted propagation tree. Node 0 is the news root, the
/// remaining nodes are engaged users; x holds one feature row per node.
/// Labels are fixed repo-wide: 1 = fake, 0 = real.
struct PropagationGraph {
    std::string id;
    int label = 0;
    std::size_t n = 0;
    std::vector<Edge> edges;
    Matrix x; // n rows, feature_dim cols
};

struct Dataset {
    std::string name;
    std::size_t feature_dim = 0;
    std::vector<PropagationGraph> graphs;

    std::size_t total_nodes() const;
    std::size_t total_edges() const;
    std::size_t fake_count() const;
};

/// Disjoint union of graphs: features stacked in input order, edge indices
/// offset by cumulative node counts. Edges never cross graph boundaries.
struct GraphBatch {
    Matrix x;
    std::vector<Edge> edges;               // global node indices
    std::vector<std::uint32_t> graph_of;   // node -> graph index
    std::vector<std::size_t> node_offset;  // per graph, strictly increasing
    std::vector<int> labels;               // per graph
    std::size_t graph_count = 0;

    std::size_t node_count() const { return graph_of.size(); }
    std::size_t nodes_in_graph(std::size_t g) const;
};

/// Returns every violated invariant, not just the first. Empty means ok.
/// tree_mode additionally demands a tree rooted at node 0.
std::vector<std::string> validate_graph(const PropagationGraph& g, bool tree_mode);

/// Seeded shuffle split of [0, n) into a floor(fraction * n) prefix and the rest.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double fraction, std::uint64_t seed);

/// Deterministic shuffled split; train gets floor(fraction * N) graphs.
/// Throws validation_error on an empty dataset or fraction outside (0, 1].
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed);

GraphBatch batch_graphs(const std::vector<const PropagationGraph*>& graphs);
GraphBatch batch_graphs(const Dataset& ds);

} // namespace fnbench
