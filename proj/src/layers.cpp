#include "fnbench/layers.hpp"

#include "fnbench/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace fnbench {

namespace {

void require_cols(const Matrix& h, std::size_t expected, const char* what) {
    if (h.cols != expected)
        throw shape_error(std::string(what) + ": input has " + std::to_string(h.cols) +
                          " columns, parameters expect " + std::to_string(expected));
}

void require_nodes(const Matrix& h, const Neighborhood& nb, const char* what) {
    if (h.rows != nb.node_count())
        throw shape_error(std::string(what) + ": " + std::to_string(h.rows) +
                          " feature rows for " + std::to_string(nb.node_count()) +
                          " nodes");
}

} // namespace

Neighborhood build_neighborhood(const GraphBatch& batch, bool symmetrize,
                                bool self_loops) {
    const std::size_t n = batch.node_count();
    std::vector<std::vector<std::uint32_t>> lists(n);
    if (self_loops)
        for (std::size_t i = 0; i < n; ++i)
            lists[i].push_back(static_cast<std::uint32_t>(i));
    for (const auto& [src, dst] : batch.edges) {
        lists[src].push_back(dst);
        if (symmetrize) lists[dst].push_back(src);
    }

    Neighborhood nb;
    nb.symmetrized = symmetrize;
    nb.self_loops = self_loops;
    nb.offset.resize(n + 1, 0);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
        auto& l = lists[i];
        std::sort(l.begin(), l.end());
        l.erase(std::unique(l.begin(), l.end()), l.end());
        nb.offset[i] = total;
        total += l.size();
    }
    nb.offset[n] = total;
    nb.adj.reserve(total);
    for (const auto& l : lists) nb.adj.insert(nb.adj.end(), l.begin(), l.end());
    return nb;
}

Matrix aggregate_neighbors(const Matrix& h, const Neighborhood& nb,
                           AggregateKind kind) {
    require_nodes(h, nb, "aggregate_neighbors");
    const std::size_t d = h.cols;
    Matrix out(h.rows, d);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const auto nbrs = nb.neighbors(i);
        double* oi = out.row(i);
        if (nbrs.empty()) continue; // zero row for sum, mean and max alike
        if (kind == AggregateKind::max) {
            std::memcpy(oi, h.row(nbrs[0]), d * sizeof(double));
            for (std::size_t s = 1; s < nbrs.size(); ++s) {
                const double* hj = h.row(nbrs[s]);
                for (std::size_t c = 0; c < d; ++c) oi[c] = std::max(oi[c], hj[c]);
            }
        } else {
            for (const std::uint32_t j : nbrs) {
                const double* hj = h.row(j);
                for (std::size_t c = 0; c < d; ++c) oi[c] += hj[c];
            }
            if (kind == AggregateKind::mean) {
                const double inv = 1.0 / static_cast<double>(nbrs.size());
                for (std::size_t c = 0; c < d; ++c) oi[c] *= inv;
            }
        }
    }
    return out;
}

Matrix message_passing_step(const Matrix& h, const Neighborhood& nb,
                            AggregateKind kind, std::size_t out_dim,
                            const UpdateFn& update) {
    const Matrix agg = aggregate_neighbors(h, nb, kind);
    Matrix out(h.rows, out_dim);
    for (std::size_t i = 0; i < h.rows; ++i)
        update(i, h.row_span(i), agg.row_span(i), {out.row(i), out_dim});
    return out;
}

// --------------------------------- GCN ------------------------------------

Matrix gcn_forward(const Matrix& h, const Neighborhood& nb, const GcnParams& p,
                   GcnCache* cache) {
    require_nodes(h, nb, "gcn_forward");
    require_cols(h, p.w.rows, "gcn_forward");
    Matrix agg = aggregate_neighbors(h, nb, AggregateKind::mean);
    Matrix pre = matmul(agg, p.w);
    add_row_inplace(pre, p.b);
    Matrix out = relu(pre);
    if (cache) {
        cache->agg = std::move(agg);
        cache->pre = std::move(pre);
    }
    return out;
}

GcnGrads gcn_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                      const GcnParams& p, const GcnCache& cache) {
    const Matrix dpre = relu_backward(dout, cache.pre);
    GcnGrads g;
    g.dp.w = matmul_at_b(cache.agg, dpre);
    g.dp.b = colsum(dpre);
    const Matrix dagg = matmul_a_bt(dpre, p.w);
    g.dh = Matrix(h.rows, h.cols);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const auto nbrs = nb.neighbors(i);
        if (nbrs.empty()) continue;
        const double inv = 1.0 / static_cast<double>(nbrs.size());
        const double* di = dagg.row(i);
        for (const std::uint32_t j : nbrs) {
            double* gj = g.dh.row(j);
            for (std::size_t c = 0; c < h.cols; ++c) gj[c] += di[c] * inv;
        }
    }
    return g;
}

// --------------------------------- GAT ------------------------------------

namespace {

Matrix gat_activation(const Matrix& u, GatActivation act) {
    return act == GatActivation::elu ? elu(u) : relu(u);
}

Matrix gat_activation_backward(const Matrix& dout, const Matrix& u, GatActivation act) {
    return act == GatActivation::elu ? elu_backward(dout, u) : relu_backward(dout, u);
}

} // namespace

Matrix gat_forward(const Matrix& h, const Neighborhood& nb, const GatParams& p,
                   const GatConfig& cfg, GatCache* cache) {
    require_nodes(h, nb, "gat_forward");
    const std::size_t heads = p.heads();
    if (heads == 0 || p.a.size() != heads)
        throw shape_error("gat_forward: need K >= 1 weight/attention pairs");
    const std::size_t head_dim = p.w[0].cols;
    for (std::size_t k = 0; k < heads; ++k) {
        require_cols(h, p.w[k].rows, "gat_forward");
        if (p.w[k].cols != head_dim)
            throw shape_error("gat_forward: head output dims must agree");
        if (p.a[k].rows != 2 * head_dim || p.a[k].cols != 1)
            throw shape_error("gat_forward: attention vector must be 2*head_dim x 1");
    }

    const std::size_t n = h.rows;
    const std::size_t out_dim = cfg.final_layer ? head_dim : heads * head_dim;
    Matrix u(n, out_dim);
    const double head_scale = cfg.final_layer ? 1.0 / static_cast<double>(heads) : 1.0;

    if (cache) {
        cache->g.assign(heads, Matrix());
        cache->e.assign(heads, {});
        cache->q.assign(heads, {});
    }

    std::vector<double> e(nb.edge_slots());
    std::vector<double> q(nb.edge_slots());
    for (std::size_t k = 0; k < heads; ++k) {
        Matrix g = matmul(h, p.w[k]);
        const double* a_src = p.a[k].data.data();
        const double* a_dst = a_src + head_dim;

        // Per-node attention scores over the transformed pair, then a
        // neighborhood softmax with max subtraction.
        std::vector<double> c(n), d(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double* gi = g.row(i);
            double cs = 0.0, ds = 0.0;
            for (std::size_t t = 0; t < head_dim; ++t) {
                cs += gi[t] * a_src[t];
                ds += gi[t] * a_dst[t];
            }
            c[i] = cs;
            d[i] = ds;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = nb.offset[i], hi = nb.offset[i + 1];
            if (lo == hi) continue;
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t s = lo; s < hi; ++s) {
                const double qv = c[i] + d[nb.adj[s]];
                q[s] = qv;
                const double sv = qv > 0.0 ? qv : p.leaky_slope * qv;
                e[s] = sv;
                mx = std::max(mx, sv);
            }
            double sum = 0.0;
            for (std::size_t s = lo; s < hi; ++s) {
                e[s] = std::exp(e[s] - mx);
                sum += e[s];
            }
            for (std::size_t s = lo; s < hi; ++s) e[s] /= sum;
        }

        const std::size_t col0 = cfg.final_layer ? 0 : k * head_dim;
        for (std::size_t i = 0; i < n; ++i) {
            double* ui = u.row(i) + col0;
            for (std::size_t s = nb.offset[i]; s < nb.offset[i + 1]; ++s) {
                const double* gj = g.row(nb.adj[s]);
                const double w = e[s] * head_scale;
                for (std::size_t t = 0; t < head_dim; ++t) ui[t] += w * gj[t];
            }
        }

        if (cache) {
            cache->g[k] = std::move(g);
            cache->e[k] = e;
            cache->q[k] = q;
        }
    }

    Matrix out = gat_activation(u, cfg.act);
    if (cache) cache->u = std::move(u);
    return out;
}

GatGrads gat_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                      const GatParams& p, const GatConfig& cfg, const GatCache& cache) {
    const std::size_t heads = p.heads();
    const std::size_t head_dim = p.w[0].cols;
    const std::size_t n = h.rows;
    const double head_scale = cfg.final_layer ? 1.0 / static_cast<double>(heads) : 1.0;

    const Matrix du = gat_activation_backward(dout, cache.u, cfg.act);

    GatGrads out;
    out.dh = Matrix(h.rows, h.cols);
    out.dp.leaky_slope = p.leaky_slope;
    out.dp.w.reserve(heads);
    out.dp.a.reserve(heads);

    std::vector<double> de(nb.edge_slots());
    for (std::size_t k = 0; k < heads; ++k) {
        const Matrix& g = cache.g[k];
        const std::vector<double>& e = cache.e[k];
        const std::vector<double>& q = cache.q[k];
        const double* a_src = p.a[k].data.data();
        const double* a_dst = a_src + head_dim;
        const std::size_t col0 = cfg.final_layer ? 0 : k * head_dim;

        Matrix dg(n, head_dim);
        std::vector<double> dc(n, 0.0), dd(n, 0.0);

        // Aggregation part: o_i = sum_s e_s * g_j, with the head scale folded
        // into the incoming gradient.
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t lo = nb.offset[i], hi = nb.offset[i + 1];
            if (lo == hi) continue;
            const double* doi = du.row(i) + col0;
            for (std::size_t s = lo; s < hi; ++s) {
                const std::uint32_t j = nb.adj[s];
                const double* gj = g.row(j);
                double* dgj = dg.row(j);
                double acc = 0.0;
                for (std::size_t t = 0; t < head_dim; ++t) {
                    acc += doi[t] * gj[t];
                    dgj[t] += e[s] * head_scale * doi[t];
                }
                de[s] = acc * head_scale;
            }
            // softmax backward over this node's slots
            double dot = 0.0;
            for (std::size_t s = lo; s < hi; ++s) dot += e[s] * de[s];
            for (std::size_t s = lo; s < hi; ++s) {
                const double ds_s = e[s] * (de[s] - dot);
                const double dq_s = q[s] > 0.0 ? ds_s : ds_s * p.leaky_slope;
                dc[i] += dq_s;
                dd[nb.adj[s]] += dq_s;
            }
        }

        Matrix da(2 * head_dim, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double* gi = g.row(i);
            double* dgi = dg.row(i);
            for (std::size_t t = 0; t < head_dim; ++t) {
                da.data[t] += dc[i] * gi[t];
                da.data[head_dim + t] += dd[i] * gi[t];
                dgi[t] += dc[i] * a_src[t] + dd[i] * a_dst[t];
            }
        }

        out.dp.w.push_back(matmul_at_b(h, dg));
        out.dp.a.push_back(std::move(da));
        add_inplace(out.dh, matmul_a_bt(dg, p.w[k]));
    }
    return out;
}

// ------------------------------- GraphSAGE --------------------------------

Matrix sage_forward(const Matrix& h, const Neighborhood& nb, const SageParams& p,
                    SageAggregator agg, SageCache* cache) {
    require_nodes(h, nb, "sage_forward");
    const std::size_t in = h.cols;
    if (p.w.rows != 2 * in)
        throw shape_error("sage_forward: weight expects " +
                          std::to_string(p.w.rows / 2) + " input columns, got " +
                          std::to_string(in));

    Matrix neighbor_agg;
    Matrix pool_pre;
    std::vector<std::uint32_t> argmax;
    if (agg == SageAggregator::mean) {
        neighbor_agg = aggregate_neighbors(h, nb, AggregateKind::mean);
    } else {
        require_cols(h, p.w_pool.rows, "sage_forward(maxpool)");
        pool_pre = matmul(h, p.w_pool);
        add_row_inplace(pool_pre, p.b_pool);
        const std::size_t pd = pool_pre.cols;
        neighbor_agg = Matrix(h.rows, pd);
        argmax.assign(h.rows * pd, std::numeric_limits<std::uint32_t>::max());
        for (std::size_t i = 0; i < h.rows; ++i) {
            const auto nbrs = nb.neighbors(i);
            if (nbrs.empty()) continue; // zero neighbor half
            double* oi = neighbor_agg.row(i);
            std::uint32_t* am = argmax.data() + i * pd;
            const double* first = pool_pre.row(nbrs[0]);
            for (std::size_t c = 0; c < pd; ++c) {
                oi[c] = first[c];
                am[c] = nbrs[0];
            }
            for (std::size_t s = 1; s < nbrs.size(); ++s) {
                const double* pj = pool_pre.row(nbrs[s]);
                for (std::size_t c = 0; c < pd; ++c)
                    if (pj[c] > oi[c]) {
                        oi[c] = pj[c];
                        am[c] = nbrs[s];
                    }
            }
        }
    }

    Matrix concat(h.rows, in + neighbor_agg.cols);
    for (std::size_t i = 0; i < h.rows; ++i) {
        double* ci = concat.row(i);
        std::memcpy(ci, h.row(i), in * sizeof(double));
        std::memcpy(ci + in, neighbor_agg.row(i), neighbor_agg.cols * sizeof(double));
    }
    Matrix pre = matmul(concat, p.w);
    add_row_inplace(pre, p.b);
    Matrix out = relu(pre);
    if (cache) {
        cache->concat = std::move(concat);
        cache->pre = std::move(pre);
        cache->pool_pre = std::move(pool_pre);
        cache->argmax = std::move(argmax);
    }
    return out;
}

SageGrads sage_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                        const SageParams& p, SageAggregator agg,
                        const SageCache& cache) {
    const std::size_t in = h.cols;
    const Matrix dpre = relu_backward(dout, cache.pre);
    SageGrads g;
    g.dp.w = matmul_at_b(cache.concat, dpre);
    g.dp.b = colsum(dpre);
    const Matrix dconcat = matmul_a_bt(dpre, p.w);

    g.dh = Matrix(h.rows, in);
    const std::size_t agg_dim = dconcat.cols - in;
    Matrix dagg(h.rows, agg_dim);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const double* dci = dconcat.row(i);
        std::memcpy(g.dh.row(i), dci, in * sizeof(double));
        std::memcpy(dagg.row(i), dci + in, agg_dim * sizeof(double));
    }

    if (agg == SageAggregator::mean) {
        for (std::size_t i = 0; i < h.rows; ++i) {
            const auto nbrs = nb.neighbors(i);
            if (nbrs.empty()) continue;
            const double inv = 1.0 / static_cast<double>(nbrs.size());
            const double* di = dagg.row(i);
            for (const std::uint32_t j : nbrs) {
                double* gj = g.dh.row(j);
                for (std::size_t c = 0; c < in; ++c) gj[c] += di[c] * inv;
            }
        }
        g.dp.w_pool = Matrix();
        g.dp.b_pool = Matrix();
    } else {
        const std::size_t pd = agg_dim;
        Matrix dpool(h.rows, pd);
        for (std::size_t i = 0; i < h.rows; ++i) {
            const double* di = dagg.row(i);
            const std::uint32_t* am = cache.argmax.data() + i * pd;
            for (std::size_t c = 0; c < pd; ++c)
                if (am[c] != std::numeric_limits<std::uint32_t>::max())
                    dpool(am[c], c) += di[c];
        }
        g.dp.w_pool = matmul_at_b(h, dpool);
        g.dp.b_pool = colsum(dpool);
        add_inplace(g.dh, matmul_a_bt(dpool, p.w_pool));
    }
    return g;
}

// --------------------------------- GIN ------------------------------------

namespace {

double gin_eps_value(const GinParams& p) {
    if (p.eps.rows != 1 || p.eps.cols != 1)
        throw shape_error("gin: eps must be a 1x1 matrix");
    return p.eps.data[0];
}

} // namespace

Matrix gin_forward(const Matrix& h, const Neighborhood& nb, const GinParams& p,
                   GinCache* cache) {
    require_nodes(h, nb, "gin_forward");
    require_cols(h, p.w1.rows, "gin_forward");
    const double eps = gin_eps_value(p);

    Matrix s = aggregate_neighbors(h, nb, AggregateKind::sum);
    axpy_inplace(s, 1.0 + eps, h);
    Matrix z1 = matmul(s, p.w1);
    add_row_inplace(z1, p.b1);
    Matrix r = relu(z1);
    Matrix out = matmul(r, p.w2);
    add_row_inplace(out, p.b2);
    if (cache) {
        cache->s = std::move(s);
        cache->z1 = std::move(z1);
        cache->r = std::move(r);
    }
    return out;
}

GinGrads gin_backward(const Matrix& dout, const Matrix& h, const Neighborhood& nb,
                      const GinParams& p, const GinCache& cache) {
    const double eps = gin_eps_value(p);
    GinGrads g;
    g.dp.learn_eps = p.learn_eps;
    g.dp.w2 = matmul_at_b(cache.r, dout);
    g.dp.b2 = colsum(dout);
    const Matrix dr = matmul_a_bt(dout, p.w2);
    const Matrix dz1 = relu_backward(dr, cache.z1);
    g.dp.w1 = matmul_at_b(cache.s, dz1);
    g.dp.b1 = colsum(dz1);
    const Matrix ds = matmul_a_bt(dz1, p.w1);

    g.dp.eps = Matrix(1, 1);
    double deps = 0.0;
    for (std::size_t i = 0; i < h.data.size(); ++i) deps += ds.data[i] * h.data[i];
    g.dp.eps.data[0] = deps;

    g.dh = scale(ds, 1.0 + eps);
    for (std::size_t i = 0; i < h.rows; ++i) {
        const double* di = ds.row(i);
        for (const std::uint32_t j : nb.neighbors(i)) {
            double* gj = g.dh.row(j);
            for (std::size_t c = 0; c < h.cols; ++c) gj[c] += di[c];
        }
    }
    return g;
}

} // namespace fnbench
