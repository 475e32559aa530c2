#include "fnbench/model.hpp"

#include "fnbench/errors.hpp"
#include "fnbench/rng.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fnbench {

LayerType layer_type_from_string(const std::string& s) {
    if (s == "gcn") return LayerType::gcn;
    if (s == "gat") return LayerType::gat;
    if (s == "sage" || s == "graphsage") return LayerType::sage;
    if (s == "gin") return LayerType::gin;
    throw validation_error("unknown layer type '" + s +
                           "' (expected gcn, gat, sage or gin)");
}

const char* to_string(LayerType t) {
    switch (t) {
        case LayerType::gcn: return "gcn";
        case LayerType::gat: return "gat";
        case LayerType::sage: return "sage";
        case LayerType::gin: return "gin";
    }
    return "?";
}

namespace {

Matrix glorot(Rng& rng, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (double& v : m.data) v = (2.0 * rng.uniform() - 1.0) * limit;
    return m;
}

void check_config(const ModelConfig& cfg) {
    if (cfg.input_dim == 0) throw validation_error("model input_dim must be >= 1");
    if (cfg.hidden == 0) throw validation_error("model hidden size must be >= 1");
    if (cfg.layers == 0) throw validation_error("model needs at least one layer");
    if (cfg.type == LayerType::gat) {
        if (cfg.heads == 0 || cfg.heads_final == 0)
            throw validation_error("gat needs at least one attention head");
        if (cfg.layers > 1 && cfg.hidden % cfg.heads != 0)
            throw validation_error("gat hidden size " + std::to_string(cfg.hidden) +
                                   " is not divisible by " + std::to_string(cfg.heads) +
                                   " heads");
    }
}

} // namespace

GnnModel init_model(const ModelConfig& cfg, std::uint64_t seed) {
    check_config(cfg);
    GnnModel m;
    m.cfg = cfg;
    Rng rng(seed);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::size_t in = l == 0 ? cfg.input_dim : cfg.hidden;
        const std::size_t out = cfg.hidden;
        const bool final_layer = l + 1 == cfg.layers;
        switch (cfg.type) {
            case LayerType::gcn: {
                GcnParams p;
                p.w = glorot(rng, in, out);
                p.b = Matrix(1, out);
                m.layers.emplace_back(std::move(p));
                break;
            }
            case LayerType::gat: {
                GatParams p;
                const std::size_t k = final_layer ? cfg.heads_final : cfg.heads;
                const std::size_t head_dim = final_layer ? out : out / cfg.heads;
                for (std::size_t i = 0; i < k; ++i) {
                    p.w.push_back(glorot(rng, in, head_dim));
                    p.a.push_back(glorot(rng, 2 * head_dim, 1));
                }
                m.layers.emplace_back(std::move(p));
                break;
            }
            case LayerType::sage: {
                SageParams p;
                p.w = glorot(rng, 2 * in, out);
                p.b = Matrix(1, out);
                if (cfg.sage_agg == SageAggregator::maxpool) {
                    p.w_pool = glorot(rng, in, in);
                    p.b_pool = Matrix(1, in);
                }
                m.layers.emplace_back(std::move(p));
                break;
            }
            case LayerType::gin: {
                GinParams p;
                p.eps = Matrix(1, 1);
                p.learn_eps = cfg.gin_learn_eps;
                p.w1 = glorot(rng, in, out);
                p.b1 = Matrix(1, out);
                p.w2 = glorot(rng, out, out);
                p.b2 = Matrix(1, out);
                m.layers.emplace_back(std::move(p));
                break;
            }
        }
    }
    m.head_w = glorot(rng, cfg.hidden, 2);
    m.head_b = Matrix(1, 2);
    return m;
}

Neighborhood model_neighborhood(const ModelConfig& cfg, const GraphBatch& batch) {
    const bool self_loops =
        cfg.type == LayerType::gcn || cfg.type == LayerType::gat;
    return build_neighborhood(batch, cfg.symmetrize, self_loops);
}

Matrix global_mean_pool(const Matrix& h, const GraphBatch& batch) {
    if (h.rows != batch.node_count())
        throw shape_error("global_mean_pool: row count does not match batch");
    Matrix pooled(batch.graph_count, h.cols);
    for (std::size_t i = 0; i < h.rows; ++i) {
        double* pg = pooled.row(batch.graph_of[i]);
        const double* hi = h.row(i);
        for (std::size_t c = 0; c < h.cols; ++c) pg[c] += hi[c];
    }
    for (std::size_t g = 0; g < batch.graph_count; ++g) {
        const double inv = 1.0 / static_cast<double>(batch.nodes_in_graph(g));
        double* pg = pooled.row(g);
        for (std::size_t c = 0; c < h.cols; ++c) pg[c] *= inv;
    }
    return pooled;
}

Matrix global_mean_pool_backward(const Matrix& dpooled, const GraphBatch& batch) {
    Matrix dh(batch.node_count(), dpooled.cols);
    for (std::size_t i = 0; i < dh.rows; ++i) {
        const std::uint32_t g = batch.graph_of[i];
        const double inv = 1.0 / static_cast<double>(batch.nodes_in_graph(g));
        const double* dg = dpooled.row(g);
        double* di = dh.row(i);
        for (std::size_t c = 0; c < dh.cols; ++c) di[c] = dg[c] * inv;
    }
    return dh;
}

namespace {

Matrix apply_layer(const LayerParams& lp, const Matrix& h, const Neighborhood& nb,
                   const ModelConfig& cfg, bool final_layer, LayerCache* out_cache) {
    if (const auto* p = std::get_if<GcnParams>(&lp)) {
        GcnCache c;
        Matrix out = gcn_forward(h, nb, *p, out_cache ? &c : nullptr);
        if (out_cache) *out_cache = std::move(c);
        return out;
    }
    if (const auto* p = std::get_if<GatParams>(&lp)) {
        const GatConfig gc{final_layer, cfg.gat_act};
        GatCache c;
        Matrix out = gat_forward(h, nb, *p, gc, out_cache ? &c : nullptr);
        if (out_cache) *out_cache = std::move(c);
        return out;
    }
    if (const auto* p = std::get_if<SageParams>(&lp)) {
        SageCache c;
        Matrix out = sage_forward(h, nb, *p, cfg.sage_agg, out_cache ? &c : nullptr);
        if (out_cache) *out_cache = std::move(c);
        return out;
    }
    const auto& p = std::get<GinParams>(lp);
    GinCache c;
    Matrix out = gin_forward(h, nb, p, out_cache ? &c : nullptr);
    if (out_cache) *out_cache = std::move(c);
    return out;
}

} // namespace

Matrix model_forward(const GnnModel& m, const GraphBatch& batch,
                     const Neighborhood& nb, ModelCache* cache) {
    if (cache) {
        cache->inputs.clear();
        cache->layer_caches.clear();
        cache->layer_caches.resize(m.layers.size());
    }
    Matrix h = batch.x;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const bool final_layer = l + 1 == m.layers.size();
        LayerCache* lc = cache ? &cache->layer_caches[l] : nullptr;
        Matrix next = apply_layer(m.layers[l], h, nb, m.cfg, final_layer, lc);
        if (cache) cache->inputs.push_back(std::move(h));
        h = std::move(next);
    }
    Matrix pooled = global_mean_pool(h, batch);
    Matrix logits = matmul(pooled, m.head_w);
    add_row_inplace(logits, m.head_b);
    if (cache) cache->pooled = std::move(pooled);
    return logits;
}

ModelGrads model_backward(const Matrix& dlogits, const GnnModel& m,
                          const GraphBatch& batch, const Neighborhood& nb,
                          const ModelCache& cache) {
    ModelGrads g;
    g.head_w = matmul_at_b(cache.pooled, dlogits);
    g.head_b = colsum(dlogits);
    const Matrix dpooled = matmul_a_bt(dlogits, m.head_w);
    Matrix dh = global_mean_pool_backward(dpooled, batch);

    g.layers.resize(m.layers.size());
    for (std::size_t l = m.layers.size(); l-- > 0;) {
        const bool final_layer = l + 1 == m.layers.size();
        const Matrix& input = cache.inputs[l];
        if (const auto* p = std::get_if<GcnParams>(&m.layers[l])) {
            GcnGrads lg = gcn_backward(dh, input, nb, *p,
                                       std::get<GcnCache>(cache.layer_caches[l]));
            dh = std::move(lg.dh);
            g.layers[l] = std::move(lg.dp);
        } else if (const auto* p = std::get_if<GatParams>(&m.layers[l])) {
            const GatConfig gc{final_layer, m.cfg.gat_act};
            GatGrads lg = gat_backward(dh, input, nb, *p, gc,
                                       std::get<GatCache>(cache.layer_caches[l]));
            dh = std::move(lg.dh);
            g.layers[l] = std::move(lg.dp);
        } else if (const auto* p = std::get_if<SageParams>(&m.layers[l])) {
            SageGrads lg = sage_backward(dh, input, nb, *p, m.cfg.sage_agg,
                                         std::get<SageCache>(cache.layer_caches[l]));
            dh = std::move(lg.dh);
            g.layers[l] = std::move(lg.dp);
        } else {
            const auto& gp = std::get<GinParams>(m.layers[l]);
            GinGrads lg = gin_backward(dh, input, nb, gp,
                                       std::get<GinCache>(cache.layer_caches[l]));
            dh = std::move(lg.dh);
            g.layers[l] = std::move(lg.dp);
        }
    }
    return g;
}

namespace {

void collect_matrices(std::vector<LayerParams>& layers, Matrix& head_w,
                      Matrix& head_b, std::vector<Matrix*>& out) {
    for (LayerParams& lp : layers) {
        if (auto* p = std::get_if<GcnParams>(&lp)) {
            out.push_back(&p->w);
            out.push_back(&p->b);
        } else if (auto* p = std::get_if<GatParams>(&lp)) {
            for (std::size_t k = 0; k < p->w.size(); ++k) {
                out.push_back(&p->w[k]);
                out.push_back(&p->a[k]);
            }
        } else if (auto* p = std::get_if<SageParams>(&lp)) {
            out.push_back(&p->w);
            out.push_back(&p->b);
            if (!p->w_pool.data.empty()) {
                out.push_back(&p->w_pool);
                out.push_back(&p->b_pool);
            }
        } else if (auto* p = std::get_if<GinParams>(&lp)) {
            out.push_back(&p->w1);
            out.push_back(&p->b1);
            out.push_back(&p->w2);
            out.push_back(&p->b2);
            if (p->learn_eps) out.push_back(&p->eps);
        }
    }
    out.push_back(&head_w);
    out.push_back(&head_b);
}

} // namespace

std::vector<Matrix*> trainable_params(GnnModel& m) {
    std::vector<Matrix*> out;
    collect_matrices(m.layers, m.head_w, m.head_b, out);
    return out;
}

std::vector<Matrix*> trainable_grads(ModelGrads& g) {
    std::vector<Matrix*> out;
    collect_matrices(g.layers, g.head_w, g.head_b, out);
    return out;
}

EvalBatches EvalBatches::build(const ModelConfig& cfg, const Dataset& ds,
                               std::size_t chunk) {
    if (chunk == 0) throw validation_error("eval chunk size must be >= 1");
    EvalBatches eb;
    eb.graph_count = ds.graphs.size();
    for (std::size_t start = 0; start < ds.graphs.size(); start += chunk) {
        const std::size_t stop = std::min(start + chunk, ds.graphs.size());
        std::vector<const PropagationGraph*> group;
        group.reserve(stop - start);
        for (std::size_t i = start; i < stop; ++i) group.push_back(&ds.graphs[i]);
        eb.batches.push_back(batch_graphs(group));
        eb.neighborhoods.push_back(model_neighborhood(cfg, eb.batches.back()));
    }
    return eb;
}

EvalResult evaluate_model(const GnnModel& m, const EvalBatches& eval) {
    if (eval.graph_count == 0)
        throw validation_error("cannot evaluate on an empty graph set");
    EvalResult r;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < eval.batches.size(); ++b) {
        const GraphBatch& batch = eval.batches[b];
        const Matrix logits = model_forward(m, batch, eval.neighborhoods[b]);
        for (std::size_t g = 0; g < batch.graph_count; ++g) {
            const int pred = logits(g, 1) > logits(g, 0) ? 1 : 0;
            const int label = batch.labels[g];
            r.confusion[label][pred] += 1;
            if (pred == label) ++correct;
        }
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(eval.graph_count);
    return r;
}

GnnModel train_gnn(const ModelConfig& cfg, const Dataset& train, const Dataset& test,
                   const TrainOptions& opt, TrainReport* report) {
    if (train.graphs.empty()) throw validation_error("training set is empty");
    if (test.graphs.empty()) throw validation_error("test set is empty");
    if (opt.epochs == 0) throw validation_error("epochs must be >= 1");
    if (opt.batch_size == 0) throw validation_error("batch size must be >= 1");
    if (train.feature_dim != test.feature_dim)
        throw validation_error("train and test feature dims differ (" +
                               std::to_string(train.feature_dim) + " vs " +
                               std::to_string(test.feature_dim) + ")");

    ModelConfig mc = cfg;
    if (mc.input_dim == 0) mc.input_dim = train.feature_dim;
    if (mc.input_dim != train.feature_dim)
        throw validation_error("model input_dim " + std::to_string(mc.input_dim) +
                               " does not match data feature dim " +
                               std::to_string(train.feature_dim));

    const auto t0 = std::chrono::steady_clock::now();
    GnnModel model = init_model(mc, derive_seed(opt.seed, "init"));
    std::vector<Matrix*> params = trainable_params(model);
    AdamConfig acfg;
    acfg.lr = opt.lr;
    AdamState state = AdamState::init(
        {params.begin(), params.end()}, acfg);

    const EvalBatches test_eval = EvalBatches::build(mc, test, opt.eval_batch);

    const std::size_t n = train.graphs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    if (report) report->rows.clear();
    for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(opt.seed, "shuffle", epoch));
        shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t train_correct = 0;
        for (std::size_t start = 0; start < n; start += opt.batch_size) {
            const std::size_t stop = std::min(start + opt.batch_size, n);
            std::vector<const PropagationGraph*> group;
            group.reserve(stop - start);
            for (std::size_t i = start; i < stop; ++i)
                group.push_back(&train.graphs[order[i]]);
            const GraphBatch batch = batch_graphs(group);
            const Neighborhood nb = model_neighborhood(mc, batch);

            ModelCache cache;
            const Matrix logits = model_forward(model, batch, nb, &cache);
            const LossGrad lg = cross_entropy(logits, batch.labels);
            loss_sum += lg.loss * static_cast<double>(batch.graph_count);
            for (std::size_t g = 0; g < batch.graph_count; ++g) {
                const int pred = logits(g, 1) > logits(g, 0) ? 1 : 0;
                if (pred == batch.labels[g]) ++train_correct;
            }

            ModelGrads grads = model_backward(lg.grad, model, batch, nb, cache);
            const std::vector<Matrix*> gptrs = trainable_grads(grads);
            adam_step(params, {gptrs.begin(), gptrs.end()}, state);
        }

        // Running train accuracy: each graph is scored by the forward pass of
        // its own minibatch, before that batch's update.
        const double train_loss = loss_sum / static_cast<double>(n);
        const double train_acc =
            static_cast<double>(train_correct) / static_cast<double>(n);
        const double test_acc = evaluate_model(model, test_eval).accuracy;
        if (report)
            report->rows.push_back({epoch, train_loss, train_acc, test_acc});
    }

    if (report) {
        report->final_train_acc = report->rows.back().train_acc;
        report->final_test_acc = report->rows.back().test_acc;
        report->wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        report->config = {
            {"model", to_string(mc.type)},
            {"hidden", std::to_string(mc.hidden)},
            {"layers", std::to_string(mc.layers)},
            {"epochs", std::to_string(opt.epochs)},
            {"batch", std::to_string(opt.batch_size)},
            {"lr", format_double(opt.lr)},
            {"seed", std::to_string(opt.seed)},
        };
    }
    return model;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

void write_report_csv(std::ostream& out, const TrainReport& report,
                      bool include_timing) {
    out << "epoch,train_loss,train_acc,test_acc\n";
    for (const EpochRow& r : report.rows)
        out << r.epoch << ',' << format_double(r.train_loss) << ','
            << format_double(r.train_acc) << ',' << format_double(r.test_acc)
            << '\n';
    out << "# final," << format_double(report.final_train_acc) << ','
        << format_double(report.final_test_acc) << ',';
    if (include_timing)
        out << format_double(report.wall_seconds);
    else
        out << "na";
    out << '\n';
    if (!report.config.empty()) {
        out << "# config";
        for (const auto& [k, v] : report.config) out << ',' << k << '=' << v;
        out << '\n';
    }
}

void write_report_csv(const std::string& path, const TrainReport& report,
                      bool include_timing) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    write_report_csv(out, report, include_timing);
    if (!out.flush()) throw io_error("failed writing " + path);
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_report_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw validation_error(where + ": bad numeric field '" + s + "'");
    return v;
}

} // namespace

TrainReport read_report_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open " + path);
    TrainReport report;
    std::string line;
    std::size_t lineno = 0;
    bool saw_final = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = path + ":" + std::to_string(lineno);
        if (line.rfind("# final,", 0) == 0) {
            const auto f = split_csv_line(line.substr(8));
            if (f.size() != 3)
                throw validation_error(where + ": final line needs 3 fields");
            report.final_train_acc = parse_report_double(f[0], where);
            report.final_test_acc = parse_report_double(f[1], where);
            report.wall_seconds = f[2] == "na" ? 0.0 : parse_report_double(f[2], where);
            saw_final = true;
            continue;
        }
        if (line.rfind("# config,", 0) == 0) {
            for (const std::string& kv : split_csv_line(line.substr(9))) {
                const std::size_t eq = kv.find('=');
                if (eq == std::string::npos)
                    throw validation_error(where + ": config entry '" + kv +
                                           "' is not key=value");
                report.config.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
            }
            continue;
        }
        if (line[0] == '#') continue;
        if (line == "epoch,train_loss,train_acc,test_acc") continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4)
            throw validation_error(where + ": expected 4 columns, got " +
                                   std::to_string(f.size()));
        EpochRow row;
        row.epoch = static_cast<std::size_t>(parse_report_double(f[0], where));
        row.train_loss = parse_report_double(f[1], where);
        row.train_acc = parse_report_double(f[2], where);
        row.test_acc = parse_report_double(f[3], where);
        report.rows.push_back(row);
    }
    if (!saw_final)
        throw validation_error(path + ": missing '# final' summary line");
    return report;
}

} // namespace fnbench
