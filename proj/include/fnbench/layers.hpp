#pragma once

#include "fnbench/graph.hpp"
#include "fnbench/matrix.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fnbench {

/// Per-node adjacency in CSR form, built once per batch. Neighbor lists are
/// sorted and duplicate-free; deg(i) counts the stored neighbors.
struct Neighborhood {
    std::vector<std::size_t> offset;  // node_count + 1
    std::vector<std::uint32_t> adj;
    bool symmetrized = false;
    bool self_loops = false;

    std::size_t node_count() const { return offset.empty() ? 0 : offset.size() - 1; }
    std::size_t degree(std::size_t i) const { return offset[i + 1] - offset[i]; }
    std::span<const std::uint32_t> neighbors(std::size_t i) const {
        return {adj.data() + offset[i], offset[i + 1] - offset[i]};
    }
    std::size_t edge_slots() const { return adj.size(); }
};

/// symmetrize: every stored edge (u,v) contributes v to N(u) and u to N(v);
/// self_loops: i is a member of N(i).
Neighborhood build_neighborhood(const GraphBatch& batch, bool symmetrize,
                                bool self_loops);

enum class AggregateKind { sum, mean, max };

/// AGGREGATE({h_j : j in N(i)}) per node. An empty neighborhood yields a
/// zero row for all three kinds.
Matrix aggregate_neighbors(const Matrix& h, const Neighborhood& nb, AggregateKind kind);

/// UPDATE(h_i, agg_i) -> out row. Generic reference path; the specialized
/// layers are checked against compositions of this.
using UpdateFn = std::function<void(std::size_t node, std::span<const double> self,
                                    std::span<const double> agg,
                                    std::span<double> out)>;

Matrix message_passing_step(const Matrix& h, const Neighborhood& nb,
                            AggregateKind kind, std::size_t out_dim,
                            const UpdateFn& update);

// ---------------------------------------------------------------------------
// GCN: out_i = ReLU(W . mean_{j in N(i)} h_j + b). Self-loops are expected in
// nb so the node's own feature survives the pure-neighbor mean.
// ---------------------------------------------------------------------------

struct GcnParams {
    Matrix w; // in x out
    Matrix b; // 1 x out
};

struct GcnCache {
    Matrix agg; // degree-mean aggregate
    Matrix pre; // agg * w + b
};

struct GcnGrads {
    Matrix dh;
    GcnParams dp;
};

Matrix gcn_forward(const Matrix& h, const Neighborhood& nb, const GcnParams& p,
                   GcnCache* cache = nullptr);
GcnGrads gcn_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                      const GcnParams& p, const GcnCache& cache);

// ---------------------------------------------------------------------------
// GAT: multi-head attention aggregation. Per head, attention logits come from
// a learned score over the transformed node pair (LeakyReLU, then softmax over
// N(i)). The final layer averages heads; non-final layers concatenate them.
// ---------------------------------------------------------------------------

enum class GatActivation { elu, relu };

struct GatParams {
    std::vector<Matrix> w; // K matrices, in x head_dim
    std::vector<Matrix> a; // K vectors, 2*head_dim x 1
    double leaky_slope = 0.2;

    std::size_t heads() const { return w.size(); }
};

struct GatConfig {
    bool final_layer = false;       // average heads instead of concatenating
    GatActivation act = GatActivation::elu;
};

struct GatCache {
    std::vector<Matrix> g;               // per head: h * w_k
    std::vector<std::vector<double>> e;  // per head: attention, nb.adj layout
    std::vector<std::vector<double>> q;  // per head: pre-LeakyReLU logits
    Matrix u;                            // pre-activation combined heads
};

struct GatGrads {
    Matrix dh;
    GatParams dp;
};

Matrix gat_forward(const Matrix& h, const Neighborhood& nb, const GatParams& p,
                   const GatConfig& cfg, GatCache* cache = nullptr);
GatGrads gat_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                      const GatParams& p, const GatConfig& cfg, const GatCache& cache);

// ---------------------------------------------------------------------------
// GraphSAGE: out_i = ReLU(W . concat(h_i, AGG_{j in N(i)}) + b) with mean or
// max-pool aggregation. nb must not contain self-loops; the node's own
// feature enters through the concatenation.
// ---------------------------------------------------------------------------

enum class SageAggregator { mean, maxpool };

struct SageParams {
    Matrix w;      // (in + pool_dim) x out; pool_dim = in
    Matrix b;      // 1 x out
    Matrix w_pool; // in x in, maxpool only (empty for mean)
    Matrix b_pool; // 1 x in, maxpool only
};

struct SageCache {
    Matrix concat;                    // n x 2*in
    Matrix pre;                       // concat * w + b
    Matrix pool_pre;                  // h * w_pool + b_pool (maxpool)
    std::vector<std::uint32_t> argmax; // n*in winners (maxpool), UINT32_MAX if none
};

struct SageGrads {
    Matrix dh;
    SageParams dp;
};

Matrix sage_forward(const Matrix& h, const Neighborhood& nb, const SageParams& p,
                    SageAggregator agg, SageCache* cache = nullptr);
SageGrads sage_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                        const SageParams& p, SageAggregator agg,
                        const SageCache& cache);

// ---------------------------------------------------------------------------
// GIN: out_i = MLP((1 + eps) h_i + sum_{j in N(i)} h_j), MLP = two affine
// layers with a ReLU between. nb must not contain self-loops; the self term
// is explicit. eps is a 1x1 parameter, trained only when learn_eps is set.
// ---------------------------------------------------------------------------

struct GinParams {
    Matrix eps; // 1 x 1
    bool learn_eps = false;
    Matrix w1; // in x hidden (hidden = out)
    Matrix b1; // 1 x hidden
    Matrix w2; // hidden x out
    Matrix b2; // 1 x out
};

struct GinCache {
    Matrix s;  // (1+eps) h + neighbor sum
    Matrix z1; // s * w1 + b1
    Matrix r;  // relu(z1)
};

struct GinGrads {
    Matrix dh;
    GinParams dp;
};

Matrix gin_forward(const Matrix& h, const Neighborhood& nb, const GinParams& p,
                   GinCache* cache = nullptr);
GinGrads gin_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                      const GinParams& p, const GinCache& cache);

} // namespace fnbench
