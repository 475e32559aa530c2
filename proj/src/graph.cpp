#include "fnbench/graph.hpp"

#include "fnbench/errors.hpp"
#include "fnbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fnbench {

std::size_t Dataset::total_nodes() const {
    std::size_t s = 0;
    for (const auto& g : graphs) s += g.n;
    return s;
}

std::size_t Dataset::total_edges() const {
    std::size_t s = 0;
    for (const auto& g : graphs) s += g.edges.size();
    return s;
}

std::size_t Dataset::fake_count() const {
    std::size_t s = 0;
    for (const auto& g : graphs) s += g.label == 1 ? 1 : 0;
    return s;
}

std::size_t GraphBatch::nodes_in_graph(std::size_t g) const {
    const std::size_t end = g + 1 < graph_count ? node_offset[g + 1] : node_count();
    return end - node_offset[g];
}

std::vector<std::string> validate_graph(const PropagationGraph& g, bool tree_mode) {
    std::vector<std::string> bad;
    const auto fail = [&](std::string msg) { bad.push_back(std::move(msg)); };

    if (g.n < 1) fail("node count must be >= 1, got " + std::to_string(g.n));
    if (g.label != 0 && g.label != 1)
        fail("label must be 0 (real) or 1 (fake), got " + std::to_string(g.label));
    if (g.x.rows != g.n)
        fail("feature rows (" + std::to_string(g.x.rows) + ") != node count (" +
             std::to_string(g.n) + ")");
    if (!all_finite(g.x)) fail("node features contain non-finite values");

    bool endpoints_ok = true;
    for (const auto& [src, dst] : g.edges) {
        if (src >= g.n || dst >= g.n) {
            fail("edge (" + std::to_string(src) + "," + std::to_string(dst) +
                 ") out of range for " + std::to_string(g.n) + " nodes");
            endpoints_ok = false;
        }
    }

    if (!tree_mode || g.n < 1 || !endpoints_ok) return bad;

    if (g.edges.size() != g.n - 1)
        fail("|edges| = " + std::to_string(g.edges.size()) + " != n-1 = " +
             std::to_string(g.n - 1));

    std::vector<std::uint32_t> parents(g.n, 0);
    for (const auto& [src, dst] : g.edges) ++parents[dst];
    if (parents[0] > 0) fail("root node 0 must not have a parent");
    for (std::size_t v = 1; v < g.n; ++v)
        if (parents[v] != 1)
            fail("node " + std::to_string(v) + " has " + std::to_string(parents[v]) +
                 " parents (expected 1)");

    // Reachability from the root along parent->child edges.
    std::vector<std::vector<std::uint32_t>> children(g.n);
    for (const auto& [src, dst] : g.edges) children[src].push_back(dst);
    std::vector<char> seen(g.n, 0);
    std::vector<std::uint32_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
        const std::uint32_t v = stack.back();
        stack.pop_back();
        for (const std::uint32_t c : children[v])
            if (!seen[c]) {
                seen[c] = 1;
                stack.push_back(c);
            }
    }
    std::size_t unreachable = 0;
    for (std::size_t v = 0; v < g.n; ++v)
        if (!seen[v]) ++unreachable;
    if (unreachable > 0)
        fail(std::to_string(unreachable) + " node(s) unreachable from root 0");

    // Directed cycle detection (iterative three-color DFS over all nodes).
    std::vector<char> color(g.n, 0); // 0 white, 1 gray, 2 black
    bool cycle = false;
    for (std::size_t start = 0; start < g.n && !cycle; ++start) {
        if (color[start] != 0) continue;
        std::vector<std::pair<std::uint32_t, std::size_t>> dfs;
        dfs.emplace_back(static_cast<std::uint32_t>(start), 0);
        color[start] = 1;
        while (!dfs.empty() && !cycle) {
            auto& [v, next] = dfs.back();
            if (next < children[v].size()) {
                const std::uint32_t c = children[v][next++];
                if (color[c] == 1) {
                    bad.push_back("cycle detected through node " + std::to_string(c));
                    cycle = true;
                } else if (color[c] == 0) {
                    color[c] = 1;
                    dfs.emplace_back(c, 0);
                }
            } else {
                color[v] = 2;
                dfs.pop_back();
            }
        }
    }
    return bad;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>>
split_indices(std::size_t n, double fraction, std::uint64_t seed) {
    if (n == 0) throw validation_error("split: empty dataset");
    if (!(fraction > 0.0) || fraction > 1.0)
        throw validation_error("split: fraction must be in (0, 1], got " +
                               std::to_string(fraction));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(n)));
    std::vector<std::size_t> train(order.begin(), order.begin() + cut);
    std::vector<std::size_t> test(order.begin() + cut, order.end());
    return {std::move(train), std::move(test)};
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed) {
    auto [train_idx, test_idx] = split_indices(ds.graphs.size(), train_fraction, seed);
    Dataset train{ds.name + "/train", ds.feature_dim, {}};
    Dataset test{ds.name + "/test", ds.feature_dim, {}};
    train.graphs.reserve(train_idx.size());
    test.graphs.reserve(test_idx.size());
    for (const std::size_t i : train_idx) train.graphs.push_back(ds.graphs[i]);
    for (const std::size_t i : test_idx) test.graphs.push_back(ds.graphs[i]);
    return {std::move(train), std::move(test)};
}

GraphBatch batch_graphs(const std::vector<const PropagationGraph*>& graphs) {
    if (graphs.empty()) throw validation_error("batch_graphs: empty graph list");
    const std::size_t dim = graphs.front()->x.cols;
    std::size_t total = 0;
    std::size_t total_edges = 0;
    for (const PropagationGraph* g : graphs) {
        if (g->x.cols != dim)
            throw validation_error("batch_graphs: feature dim mismatch, graph '" +
                                   g->id + "' has " + std::to_string(g->x.cols) +
                                   " (expected " + std::to_string(dim) + ")");
        if (g->x.rows != g->n)
            throw validation_error("batch_graphs: graph '" + g->id +
                                   "' has feature rows != node count");
        total += g->n;
        total_edges += g->edges.size();
    }

    GraphBatch b;
    b.graph_count = graphs.size();
    b.x = Matrix(total, dim);
    b.edges.reserve(total_edges);
    b.graph_of.resize(total);
    b.node_offset.reserve(graphs.size());
    b.labels.reserve(graphs.size());

    std::size_t offset = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const PropagationGraph& g = *graphs[gi];
        b.node_offset.push_back(offset);
        b.labels.push_back(g.label);
        std::copy(g.x.data.begin(), g.x.data.end(), b.x.row(offset));
        for (const auto& [src, dst] : g.edges)
            b.edges.emplace_back(static_cast<std::uint32_t>(src + offset),
                                 static_cast<std::uint32_t>(dst + offset));
        for (std::size_t v = 0; v < g.n; ++v)
            b.graph_of[offset + v] = static_cast<std::uint32_t>(gi);
        offset += g.n;
    }
    return b;
}

GraphBatch batch_graphs(const Dataset& ds) {
    std::vector<const PropagationGraph*> ptrs;
    ptrs.reserve(ds.graphs.size());
    for (const auto& g : ds.graphs) ptrs.push_back(&g);
    return batch_graphs(ptrs);
}

} // namespace fnbench
