#pragma once

#include "fnbench/adam.hpp"
#include "fnbench/graph.hpp"
#include "fnbench/layers.hpp"

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace fnbench {

enum class LayerType { gcn, gat, sage, gin };

LayerType layer_type_from_string(const std::string& s); // throws validation_error
const char* to_string(LayerType t);

struct ModelConfig {
    LayerType type = LayerType::gcn;
    std::size_t input_dim = 0;
    std::size_t hidden = 180;
    std::size_t layers = 2;
    std::size_t heads = 4;       // GAT, non-final layers (concatenated)
    std::size_t heads_final = 2; // GAT, final layer (averaged)
    GatActivation gat_act = GatActivation::elu;
    SageAggregator sage_agg = SageAggregator::mean;
    bool gin_learn_eps = false;
    bool symmetrize = true;
};

using LayerParams = std::variant<GcnParams, GatParams, SageParams, GinParams>;
using LayerCache = std::variant<GcnCache, GatCache, SageCache, GinCache>;

/// Stacked message-passing layers, global mean pooling, then a linear
/// 2-class head on the pooled graph embedding.
struct GnnModel {
    ModelConfig cfg;
    std::vector<LayerParams> layers;
    Matrix head_w; // hidden x 2
    Matrix head_b; // 1 x 2
};

struct ModelGrads {
    std::vector<LayerParams> layers;
    Matrix head_w;
    Matrix head_b;
};

struct ModelCache {
    std::vector<Matrix> inputs; // h before each layer; inputs[0] is batch.x
    std::vector<LayerCache> layer_caches;
    Matrix pooled; // graph_count x hidden
};

/// Glorot-uniform weights, zero biases. Throws validation_error on an
/// unsatisfiable configuration (e.g. hidden not divisible by heads).
GnnModel init_model(const ModelConfig& cfg, std::uint64_t seed);

/// The adjacency the configured layer type expects (self-loops for GCN/GAT,
/// none for SAGE/GIN).
Neighborhood model_neighborhood(const ModelConfig& cfg, const GraphBatch& batch);

/// Mean of the node rows per graph: out[g] = mean_{i in graph g} h[i].
Matrix global_mean_pool(const Matrix& h, const GraphBatch& batch);
Matrix global_mean_pool_backward(const Matrix& dpooled, const GraphBatch& batch);

/// Logits, one row per graph in the batch.
Matrix model_forward(const GnnModel& m, const GraphBatch& batch,
                     const Neighborhood& nb, ModelCache* cache = nullptr);

ModelGrads model_backward(const Matrix& dlogits, const GnnModel& m,
                          const GraphBatch& batch, const Neighborhood& nb,
                          const ModelCache& cache);

/// Every trainable matrix in a fixed traversal order; the same order is used
/// for params and grads so the two lists pair up for the optimizer.
std::vector<Matrix*> trainable_params(GnnModel& m);
std::vector<Matrix*> trainable_grads(ModelGrads& g);

struct TrainOptions {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double lr = 0.01;
    std::uint64_t seed = 0;
    std::size_t eval_batch = 512;
};

struct EpochRow {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
};

struct TrainReport {
    std::vector<EpochRow> rows;
    double final_train_acc = 0.0;
    double final_test_acc = 0.0;
    double wall_seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> config; // echoed as "# config"
};

struct EvalResult {
    double accuracy = 0.0;
    std::array<std::array<std::size_t, 2>, 2> confusion{}; // [label][pred]
};

/// Pre-batched evaluation set; build once, reuse every epoch.
struct EvalBatches {
    std::vector<GraphBatch> batches;
    std::vector<Neighborhood> neighborhoods;
    std::size_t graph_count = 0;

    static EvalBatches build(const ModelConfig& cfg, const Dataset& ds,
                             std::size_t chunk);
};

EvalResult evaluate_model(const GnnModel& m, const EvalBatches& eval);

/// Full training run: Adam on softmax cross-entropy, per-epoch curve in
/// report. Deterministic for a fixed (cfg, data, options) tuple.
GnnModel train_gnn(const ModelConfig& cfg, const Dataset& train, const Dataset& test,
                   const TrainOptions& opt, TrainReport* report = nullptr);

/// Shortest-round-trip decimal rendering; the same bytes on every run.
std::string format_double(double v);

/// CSV per EpochRow plus "# final,train_acc,test_acc,seconds" and an optional
/// "# config,k=v,..." trailer. seconds is "na" unless include_timing is set,
/// so identical runs produce identical bytes.
void write_report_csv(std::ostream& out, const TrainReport& report,
                      bool include_timing);
void write_report_csv(const std::string& path, const TrainReport& report,
                      bool include_timing);

/// Parses what write_report_csv emits; unknown "#" lines are ignored.
TrainReport read_report_csv(const std::string& path);

} // namespace fnbench
