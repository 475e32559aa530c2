#include "fnbench/errors.hpp"
#include "fnbench/gradcheck.hpp"
#include "fnbench/layers.hpp"
#include "fnbench/rng.hpp"

#include "testutil.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

using namespace fnbench;
using testutil::batch_of;
using testutil::max_abs_diff;
using testutil::random_graph;
using testutil::random_matrix;
using testutil::rows;
using testutil::weighted_sum;

namespace {

PropagationGraph star4() {
    PropagationGraph g;
    g.id = "star";
    g.n = 4;
    g.edges = {{0, 1}, {0, 2}, {0, 3}};
    g.x = rows({{1.0, 1.0}, {2.0, -1.0}, {4.0, 0.5}, {8.0, 3.0}});
    return g;
}

} // namespace

TEST_CASE("build_neighborhood handles symmetry, self-loops and duplicates") {
    const GraphBatch batch = batch_of(star4());

    const Neighborhood sym = build_neighborhood(batch, true, false);
    CHECK(sym.node_count() == 4);
    CHECK(sym.degree(0) == 3);
    CHECK(sym.degree(1) == 1);
    CHECK(sym.degree(3) == 1);
    const auto n0 = sym.neighbors(0);
    CHECK(std::vector<std::uint32_t>(n0.begin(), n0.end()) ==
          std::vector<std::uint32_t>{1, 2, 3});
    CHECK(sym.neighbors(1)[0] == 0);

    const Neighborhood with_self = build_neighborhood(batch, true, true);
    CHECK(with_self.degree(0) == 4);
    CHECK(with_self.degree(2) == 2);
    const auto s2 = with_self.neighbors(2);
    CHECK(std::vector<std::uint32_t>(s2.begin(), s2.end()) ==
          std::vector<std::uint32_t>{0, 2});

    const Neighborhood directed = build_neighborhood(batch, false, false);
    CHECK(directed.degree(0) == 3);
    CHECK(directed.degree(1) == 0); // children do not see their parent

    PropagationGraph dup = star4();
    dup.edges.push_back({0, 1}); // duplicate edge collapses
    const Neighborhood dedup = build_neighborhood(batch_of(dup), true, false);
    CHECK(dedup.degree(0) == 3);
    CHECK(dedup.degree(1) == 1);
}

TEST_CASE("aggregate_neighbors computes sum, mean and max per node") {
    const GraphBatch batch = batch_of(star4());
    const Neighborhood nb = build_neighborhood(batch, true, false);

    const Matrix sum = aggregate_neighbors(batch.x, nb, AggregateKind::sum);
    CHECK(sum(0, 0) == 14.0); // 2 + 4 + 8
    CHECK(sum(0, 1) == 2.5);
    CHECK(sum(1, 0) == 1.0); // only the root

    const Matrix mean = aggregate_neighbors(batch.x, nb, AggregateKind::mean);
    CHECK(mean(0, 0) == doctest::Approx(14.0 / 3.0).epsilon(1e-15));
    CHECK(mean(2, 1) == 1.0);

    const Matrix mx = aggregate_neighbors(batch.x, nb, AggregateKind::max);
    CHECK(mx(0, 0) == 8.0);
    CHECK(mx(0, 1) == 3.0); // per-column winners may differ
    CHECK(mx(3, 0) == 1.0);
}

TEST_CASE("aggregate_neighbors yields zero rows for isolated nodes") {
    const GraphBatch batch = batch_of(star4());
    const Neighborhood directed = build_neighborhood(batch, false, false);
    for (const auto kind :
         {AggregateKind::sum, AggregateKind::mean, AggregateKind::max}) {
        const Matrix agg = aggregate_neighbors(batch.x, directed, kind);
        CHECK(agg(1, 0) == 0.0); // node 1 has no stored neighbors
        CHECK(agg(1, 1) == 0.0);
        CHECK(all_finite(agg));
    }
}

TEST_CASE("message_passing_step applies the update to self and aggregate") {
    const GraphBatch batch = batch_of(star4());
    const Neighborhood nb = build_neighborhood(batch, true, false);
    const Matrix out = message_passing_step(
        batch.x, nb, AggregateKind::sum, 2,
        [](std::size_t, std::span<const double> self, std::span<const double> agg,
           std::span<double> out_row) {
            for (std::size_t c = 0; c < out_row.size(); ++c)
                out_row[c] = 2.0 * self[c] + agg[c];
        });
    CHECK(out(0, 0) == 16.0); // 2*1 + 14
    CHECK(out(1, 1) == -1.0); // 2*(-1) + 1
}

TEST_CASE("sum aggregation sees multiplicity where mean and max cannot") {
    // Node 0 with neighbors {0.5, 0.5} versus a single neighbor {0.5}.
    PropagationGraph two;
    two.id = "two";
    two.n = 3;
    two.edges = {{0, 1}, {0, 2}};
    two.x = rows({{1.0}, {0.5}, {0.5}});
    PropagationGraph one;
    one.id = "one";
    one.n = 2;
    one.edges = {{0, 1}};
    one.x = rows({{1.0}, {0.5}});

    const Neighborhood nb2 = build_neighborhood(batch_of(two), true, false);
    const Neighborhood nb1 = build_neighborhood(batch_of(one), true, false);

    CHECK(aggregate_neighbors(two.x, nb2, AggregateKind::mean)(0, 0) ==
          aggregate_neighbors(one.x, nb1, AggregateKind::mean)(0, 0));
    CHECK(aggregate_neighbors(two.x, nb2, AggregateKind::max)(0, 0) ==
          aggregate_neighbors(one.x, nb1, AggregateKind::max)(0, 0));
    CHECK(aggregate_neighbors(two.x, nb2, AggregateKind::sum)(0, 0) !=
          aggregate_neighbors(one.x, nb1, AggregateKind::sum)(0, 0));

    // GIN inherits the sum's sensitivity; its root outputs differ.
    GinParams p;
    p.eps = Matrix(1, 1);
    p.w1 = rows({{1.0}});
    p.b1 = Matrix(1, 1);
    p.w2 = rows({{1.0}});
    p.b2 = Matrix(1, 1);
    const Matrix g2 = gin_forward(two.x, nb2, p);
    const Matrix g1 = gin_forward(one.x, nb1, p);
    CHECK(std::abs(g2(0, 0) - g1(0, 0)) > 0.4);
}

TEST_CASE("gcn on a two-node path matches the hand computation") {
    PropagationGraph g;
    g.id = "path";
    g.n = 2;
    g.edges = {{0, 1}};
    g.x = rows({{1.0}, {3.0}});
    const Neighborhood nb = build_neighborhood(batch_of(g), true, true);
    GcnParams p;
    p.w = rows({{1.0}});
    p.b = Matrix(1, 1);
    const Matrix out = gcn_forward(g.x, nb, p);
    CHECK(out(0, 0) == 2.0); // mean of {1, 3} through the identity weight
    CHECK(out(1, 0) == 2.0);
}

TEST_CASE("sage mean on a two-node path matches the hand computation") {
    PropagationGraph g;
    g.id = "path";
    g.n = 2;
    g.edges = {{0, 1}};
    g.x = rows({{2.0}, {4.0}});
    const Neighborhood nb = build_neighborhood(batch_of(g), true, false);
    SageParams p;
    p.w = rows({{1.0}, {1.0}}); // sums self and aggregate
    p.b = Matrix(1, 1);
    const Matrix out = sage_forward(g.x, nb, p, SageAggregator::mean);
    CHECK(out(0, 0) == 6.0); // 2 + mean{4}
    CHECK(out(1, 0) == 6.0); // 4 + mean{2}
}

TEST_CASE("gin on a three-node chain matches the hand computation") {
    PropagationGraph g;
    g.id = "chain";
    g.n = 3;
    g.edges = {{0, 1}, {1, 2}};
    g.x = rows({{1.0}, {2.0}, {3.0}});
    const Neighborhood nb = build_neighborhood(batch_of(g), true, false);
    GinParams p;
    p.eps = Matrix(1, 1); // eps = 0
    p.w1 = rows({{1.0}});
    p.b1 = Matrix(1, 1);
    p.w2 = rows({{1.0}});
    p.b2 = Matrix(1, 1);
    const Matrix out = gin_forward(g.x, nb, p);
    CHECK(out(0, 0) == 3.0); // 1 + 2
    CHECK(out(1, 0) == 6.0); // 2 + 1 + 3
    CHECK(out(2, 0) == 5.0); // 3 + 2
}

TEST_CASE("layer forwards match message_passing_step compositions") {
    Rng rng(301);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.index(9);
        const std::size_t in = 1 + rng.index(4);
        const std::size_t out_dim = 1 + rng.index(4);
        const PropagationGraph g = random_graph(rng, n, in);
        const GraphBatch batch = batch_of(g);

        // GCN: relu(W . mean + b) over the closed neighborhood.
        {
            const Neighborhood nb = build_neighborhood(batch, true, true);
            GcnParams p{random_matrix(rng, in, out_dim), random_matrix(rng, 1, out_dim)};
            const Matrix ref = message_passing_step(
                batch.x, nb, AggregateKind::mean, out_dim,
                [&](std::size_t, std::span<const double>, std::span<const double> agg,
                    std::span<double> o) {
                    for (std::size_t c = 0; c < o.size(); ++c) {
                        double z = p.b(0, c);
                        for (std::size_t k = 0; k < in; ++k) z += agg[k] * p.w(k, c);
                        o[c] = z > 0.0 ? z : 0.0;
                    }
                });
            CHECK(max_abs_diff(gcn_forward(batch.x, nb, p), ref) < 1e-10);
        }

        // SAGE mean: relu(W . concat(self, mean) + b) over the open neighborhood.
        {
            const Neighborhood nb = build_neighborhood(batch, true, false);
            SageParams p;
            p.w = random_matrix(rng, 2 * in, out_dim);
            p.b = random_matrix(rng, 1, out_dim);
            const Matrix ref = message_passing_step(
                batch.x, nb, AggregateKind::mean, out_dim,
                [&](std::size_t, std::span<const double> self,
                    std::span<const double> agg, std::span<double> o) {
                    for (std::size_t c = 0; c < o.size(); ++c) {
                        double z = p.b(0, c);
                        for (std::size_t k = 0; k < in; ++k) z += self[k] * p.w(k, c);
                        for (std::size_t k = 0; k < in; ++k)
                            z += agg[k] * p.w(in + k, c);
                        o[c] = z > 0.0 ? z : 0.0;
                    }
                });
            CHECK(max_abs_diff(sage_forward(batch.x, nb, p, SageAggregator::mean),
                               ref) < 1e-10);
        }

        // GIN: MLP((1 + eps) self + sum).
        {
            const Neighborhood nb = build_neighborhood(batch, true, false);
            GinParams p;
            p.eps = rows({{0.3}});
            p.w1 = random_matrix(rng, in, out_dim);
            p.b1 = random_matrix(rng, 1, out_dim);
            p.w2 = random_matrix(rng, out_dim, out_dim);
            p.b2 = random_matrix(rng, 1, out_dim);
            const Matrix ref = message_passing_step(
                batch.x, nb, AggregateKind::sum, out_dim,
                [&](std::size_t, std::span<const double> self,
                    std::span<const double> agg, std::span<double> o) {
                    std::vector<double> s(in), r(out_dim);
                    for (std::size_t k = 0; k < in; ++k)
                        s[k] = (1.0 + p.eps(0, 0)) * self[k] + agg[k];
                    for (std::size_t c = 0; c < out_dim; ++c) {
                        double z = p.b1(0, c);
                        for (std::size_t k = 0; k < in; ++k) z += s[k] * p.w1(k, c);
                        r[c] = z > 0.0 ? z : 0.0;
                    }
                    for (std::size_t c = 0; c < out_dim; ++c) {
                        double z = p.b2(0, c);
                        for (std::size_t k = 0; k < out_dim; ++k)
                            z += r[k] * p.w2(k, c);
                        o[c] = z;
                    }
                });
            CHECK(max_abs_diff(gin_forward(batch.x, nb, p), ref) < 1e-10);
        }
    }
}

TEST_CASE("gat with zero attention vector reduces to mean aggregation") {
    Rng rng(311);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 2 + rng.index(8);
        const PropagationGraph g = random_graph(rng, n, 3);
        const GraphBatch batch = batch_of(g);
        const Neighborhood nb = build_neighborhood(batch, true, true);

        GatParams p;
        p.w.push_back(random_matrix(rng, 3, 4));
        p.a.push_back(Matrix(8, 1)); // zero scores: uniform softmax
        GatConfig cfg;
        cfg.final_layer = true;
        cfg.act = GatActivation::elu;

        const Matrix mean_of_g =
            aggregate_neighbors(matmul(batch.x, p.w[0]), nb, AggregateKind::mean);
        CHECK(max_abs_diff(gat_forward(batch.x, nb, p, cfg), elu(mean_of_g)) < 1e-12);
    }
}

TEST_CASE("gat on a star with identity weights matches the hand computation") {
    PropagationGraph g;
    g.id = "star";
    g.n = 3;
    g.edges = {{0, 1}, {0, 2}};
    g.x = rows({{3.0}, {6.0}, {9.0}});
    const Neighborhood nb = build_neighborhood(batch_of(g), true, true);
    GatParams p;
    p.w.push_back(rows({{1.0}}));
    p.a.push_back(Matrix(2, 1));
    GatConfig cfg;
    cfg.final_layer = true;
    const Matrix out = gat_forward(g.x, nb, p, cfg);
    CHECK(out(0, 0) == doctest::Approx(6.0).epsilon(1e-12));  // mean{3,6,9}
    CHECK(out(1, 0) == doctest::Approx(4.5).epsilon(1e-12));  // mean{3,6}
    CHECK(out(2, 0) == doctest::Approx(6.0).epsilon(1e-12));  // mean{3,9}
}

TEST_CASE("gat attention rows are non-negative and sum to one") {
    Rng rng(321);
    const PropagationGraph g = random_graph(rng, 9, 3);
    const GraphBatch batch = batch_of(g);
    const Neighborhood nb = build_neighborhood(batch, true, true);

    GatParams p;
    for (int k = 0; k < 2; ++k) {
        p.w.push_back(random_matrix(rng, 3, 2));
        p.a.push_back(random_matrix(rng, 4, 1));
    }
    GatCache cache;
    gat_forward(batch.x, nb, p, GatConfig{}, &cache);

    REQUIRE(cache.e.size() == 2);
    for (const auto& e : cache.e) {
        REQUIRE(e.size() == nb.edge_slots());
        for (std::size_t i = 0; i < nb.node_count(); ++i) {
            double sum = 0.0;
            for (std::size_t s = nb.offset[i]; s < nb.offset[i + 1]; ++s) {
                CHECK(e[s] >= 0.0);
                sum += e[s];
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("gat concatenates per-head blocks on hidden layers") {
    Rng rng(331);
    const PropagationGraph g = random_graph(rng, 7, 3);
    const GraphBatch batch = batch_of(g);
    const Neighborhood nb = build_neighborhood(batch, true, true);

    GatParams two;
    for (int k = 0; k < 2; ++k) {
        two.w.push_back(random_matrix(rng, 3, 2));
        two.a.push_back(random_matrix(rng, 4, 1));
    }
    GatConfig cfg; // non-final: concatenation
    const Matrix out = gat_forward(batch.x, nb, two, cfg);
    REQUIRE(out.cols == 4);

    for (int k = 0; k < 2; ++k) {
        GatParams solo;
        solo.w.push_back(two.w[k]);
        solo.a.push_back(two.a[k]);
        const Matrix head = gat_forward(batch.x, nb, solo, cfg);
        REQUIRE(head.cols == 2);
        for (std::size_t i = 0; i < out.rows; ++i)
            for (std::size_t c = 0; c < 2; ++c)
                CHECK(out(i, 2 * std::size_t(k) + c) ==
                      doctest::Approx(head(i, c)).epsilon(1e-12));
    }
}

TEST_CASE("gat averaging identical heads equals the single head") {
    Rng rng(341);
    const PropagationGraph g = random_graph(rng, 6, 3);
    const GraphBatch batch = batch_of(g);
    const Neighborhood nb = build_neighborhood(batch, true, true);

    GatParams solo;
    solo.w.push_back(random_matrix(rng, 3, 5));
    solo.a.push_back(random_matrix(rng, 10, 1));
    GatParams trio;
    for (int k = 0; k < 3; ++k) {
        trio.w.push_back(solo.w[0]);
        trio.a.push_back(solo.a[0]);
    }
    GatConfig cfg;
    cfg.final_layer = true;
    CHECK(max_abs_diff(gat_forward(batch.x, nb, solo, cfg),
                       gat_forward(batch.x, nb, trio, cfg)) < 1e-12);
}

TEST_CASE("sage maxpool aggregate matches the max composition") {
    Rng rng(351);
    const PropagationGraph g = random_graph(rng, 8, 3);
    const GraphBatch batch = batch_of(g);
    const Neighborhood nb = build_neighborhood(batch, true, false);

    SageParams p;
    p.w = random_matrix(rng, 6, 4);
    p.b = random_matrix(rng, 1, 4);
    p.w_pool = random_matrix(rng, 3, 3);
    p.b_pool = random_matrix(rng, 1, 3);

    SageCache cache;
    sage_forward(batch.x, nb, p, SageAggregator::maxpool, &cache);

    Matrix pool_pre = matmul(batch.x, p.w_pool);
    add_row_inplace(pool_pre, p.b_pool);
    const Matrix agg = aggregate_neighbors(pool_pre, nb, AggregateKind::max);
    for (std::size_t i = 0; i < batch.node_count(); ++i)
        for (std::size_t c = 0; c < 3; ++c)
            CHECK(cache.concat(i, 3 + c) == doctest::Approx(agg(i, c)).epsilon(1e-12));
}

TEST_CASE("layer analytic gradients agree with finite differences") {
    Rng rng(401);
    const std::size_t n = 7, in = 3, out_dim = 4;
    const PropagationGraph g = random_graph(rng, n, in);
    const GraphBatch batch = batch_of(g);
    const Matrix r = random_matrix(rng, n, out_dim);

    SUBCASE("gcn") {
        const Neighborhood nb = build_neighborhood(batch, true, true);
        GcnParams p{random_matrix(rng, in, out_dim, 0.8),
                    random_matrix(rng, 1, out_dim, 0.3)};
        GcnCache cache;
        gcn_forward(batch.x, nb, p, &cache);
        const GcnGrads grads = gcn_backward(r, batch.x, nb, p, cache);

        CHECK(grad_check(
                  [&](const Matrix& w) {
                      return weighted_sum(gcn_forward(batch.x, nb, {w, p.b}), r);
                  },
                  p.w, grads.dp.w) < 1e-6);
        CHECK(grad_check(
                  [&](const Matrix& b) {
                      return weighted_sum(gcn_forward(batch.x, nb, {p.w, b}), r);
                  },
                  p.b, grads.dp.b) < 1e-6);
        CHECK(grad_check(
                  [&](const Matrix& h) {
                      return weighted_sum(gcn_forward(h, nb, p), r);
                  },
                  batch.x, grads.dh) < 1e-6);
    }

    SUBCASE("gat") {
        const Neighborhood nb = build_neighborhood(batch, true, true);
        for (const bool final_layer : {false, true}) {
            for (const auto act : {GatActivation::elu, GatActivation::relu}) {
                GatParams p;
                const std::size_t head_dim = final_layer ? out_dim : 2;
                for (int k = 0; k < 2; ++k) {
                    p.w.push_back(random_matrix(rng, in, head_dim, 0.8));
                    p.a.push_back(random_matrix(rng, 2 * head_dim, 1, 0.5));
                }
                GatConfig cfg;
                cfg.final_layer = final_layer;
                cfg.act = act;
                const Matrix rr =
                    random_matrix(rng, n, final_layer ? out_dim : 2 * 2);

                GatCache cache;
                gat_forward(batch.x, nb, p, cfg, &cache);
                const GatGrads grads = gat_backward(rr, batch.x, nb, p, cfg, cache);

                for (int k = 0; k < 2; ++k) {
                    CHECK(grad_check(
                              [&](const Matrix& w) {
                                  GatParams q = p;
                                  q.w[k] = w;
                                  return weighted_sum(
                                      gat_forward(batch.x, nb, q, cfg), rr);
                              },
                              p.w[k], grads.dp.w[k]) < 1e-6);
                    CHECK(grad_check(
                              [&](const Matrix& a) {
                                  GatParams q = p;
                                  q.a[k] = a;
                                  return weighted_sum(
                                      gat_forward(batch.x, nb, q, cfg), rr);
                              },
                              p.a[k], grads.dp.a[k]) < 1e-6);
                }
                CHECK(grad_check(
                          [&](const Matrix& h) {
                              return weighted_sum(gat_forward(h, nb, p, cfg), rr);
                          },
                          batch.x, grads.dh) < 1e-6);
            }
        }
    }

    SUBCASE("sage mean") {
        const Neighborhood nb = build_neighborhood(batch, true, false);
        SageParams p;
        p.w = random_matrix(rng, 2 * in, out_dim, 0.8);
        p.b = random_matrix(rng, 1, out_dim, 0.3);
        SageCache cache;
        sage_forward(batch.x, nb, p, SageAggregator::mean, &cache);
        const SageGrads grads =
            sage_backward(r, batch.x, nb, p, SageAggregator::mean, cache);

        CHECK(grad_check(
                  [&](const Matrix& w) {
                      SageParams q = p;
                      q.w = w;
                      return weighted_sum(
                          sage_forward(batch.x, nb, q, SageAggregator::mean), r);
                  },
                  p.w, grads.dp.w) < 1e-6);
        CHECK(grad_check(
                  [&](const Matrix& b) {
                      SageParams q = p;
                      q.b = b;
                      return weighted_sum(
                          sage_forward(batch.x, nb, q, SageAggregator::mean), r);
                  },
                  p.b, grads.dp.b) < 1e-6);
        CHECK(grad_check(
                  [&](const Matrix& h) {
                      return weighted_sum(
                          sage_forward(h, nb, p, SageAggregator::mean), r);
                  },
                  batch.x, grads.dh) < 1e-6);
    }

    SUBCASE("sage maxpool") {
        const Neighborhood nb = build_neighborhood(batch, true, false);
        SageParams p;
        p.w = random_matrix(rng, 2 * in, out_dim, 0.8);
        p.b = random_matrix(rng, 1, out_dim, 0.3);
        p.w_pool = random_matrix(rng, in, in, 0.8);
        p.b_pool = random_matrix(rng, 1, in, 0.3);
        SageCache cache;
        sage_forward(batch.x, nb, p, SageAggregator::maxpool, &cache);
        const SageGrads grads =
            sage_backward(r, batch.x, nb, p, SageAggregator::maxpool, cache);

        auto probe = [&](auto field) {
            return [&, field](const Matrix& m) {
                SageParams q = p;
                q.*field = m;
                return weighted_sum(
                    sage_forward(batch.x, nb, q, SageAggregator::maxpool), r);
            };
        };
        CHECK(grad_check(probe(&SageParams::w), p.w, grads.dp.w) < 1e-6);
        CHECK(grad_check(probe(&SageParams::b), p.b, grads.dp.b) < 1e-6);
        CHECK(grad_check(probe(&SageParams::w_pool), p.w_pool, grads.dp.w_pool) <
              1e-6);
        CHECK(grad_check(probe(&SageParams::b_pool), p.b_pool, grads.dp.b_pool) <
              1e-6);
        CHECK(grad_check(
                  [&](const Matrix& h) {
                      return weighted_sum(
                          sage_forward(h, nb, p, SageAggregator::maxpool), r);
                  },
                  batch.x, grads.dh) < 1e-6);
    }

    SUBCASE("gin") {
        const Neighborhood nb = build_neighborhood(batch, true, false);
        GinParams p;
        p.eps = rows({{0.2}});
        p.learn_eps = true;
        p.w1 = random_matrix(rng, in, out_dim, 0.8);
        p.b1 = random_matrix(rng, 1, out_dim, 0.3);
        p.w2 = random_matrix(rng, out_dim, out_dim, 0.8);
        p.b2 = random_matrix(rng, 1, out_dim, 0.3);
        GinCache cache;
        gin_forward(batch.x, nb, p, &cache);
        const GinGrads grads = gin_backward(r, batch.x, nb, p, cache);

        auto probe = [&](auto field) {
            return [&, field](const Matrix& m) {
                GinParams q = p;
                q.*field = m;
                return weighted_sum(gin_forward(batch.x, nb, q), r);
            };
        };
        CHECK(grad_check(probe(&GinParams::w1), p.w1, grads.dp.w1) < 1e-6);
        CHECK(grad_check(probe(&GinParams::b1), p.b1, grads.dp.b1) < 1e-6);
        CHECK(grad_check(probe(&GinParams::w2), p.w2, grads.dp.w2) < 1e-6);
        CHECK(grad_check(probe(&GinParams::b2), p.b2, grads.dp.b2) < 1e-6);
        CHECK(grad_check(probe(&GinParams::eps), p.eps, grads.dp.eps) < 1e-6);
        CHECK(grad_check(
                  [&](const Matrix& h) {
                      return weighted_sum(gin_forward(h, nb, p), r);
                  },
                  batch.x, grads.dh) < 1e-6);
    }
}

TEST_CASE("layers are equivariant to node relabeling") {
    Rng rng(501);
    const std::size_t n = 8, in = 3, out_dim = 4;
    const PropagationGraph g = random_graph(rng, n, in);

    std::vector<std::uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const PropagationGraph gp = testutil::permute_graph(g, perm);

    const GraphBatch b1 = batch_of(g);
    const GraphBatch b2 = batch_of(gp);

    auto check_equivariant = [&](const Matrix& out, const Matrix& out_p) {
        REQUIRE(out.rows == out_p.rows);
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < out.cols; ++c)
                worst = std::max(worst,
                                 std::abs(out(i, c) - out_p(perm[i], c)));
        CHECK(worst < 1e-10);
    };

    {
        const Neighborhood n1 = build_neighborhood(b1, true, true);
        const Neighborhood n2 = build_neighborhood(b2, true, true);
        GcnParams p{random_matrix(rng, in, out_dim), random_matrix(rng, 1, out_dim)};
        check_equivariant(gcn_forward(b1.x, n1, p), gcn_forward(b2.x, n2, p));

        GatParams q;
        q.w.push_back(random_matrix(rng, in, out_dim));
        q.a.push_back(random_matrix(rng, 2 * out_dim, 1));
        GatConfig cfg;
        cfg.final_layer = true;
        check_equivariant(gat_forward(b1.x, n1, q, cfg),
                          gat_forward(b2.x, n2, q, cfg));
    }
    {
        const Neighborhood n1 = build_neighborhood(b1, true, false);
        const Neighborhood n2 = build_neighborhood(b2, true, false);
        SageParams p;
        p.w = random_matrix(rng, 2 * in, out_dim);
        p.b = random_matrix(rng, 1, out_dim);
        check_equivariant(sage_forward(b1.x, n1, p, SageAggregator::mean),
                          sage_forward(b2.x, n2, p, SageAggregator::mean));

        GinParams q;
        q.eps = rows({{0.1}});
        q.w1 = random_matrix(rng, in, out_dim);
        q.b1 = random_matrix(rng, 1, out_dim);
        q.w2 = random_matrix(rng, out_dim, out_dim);
        q.b2 = random_matrix(rng, 1, out_dim);
        check_equivariant(gin_forward(b1.x, n1, q), gin_forward(b2.x, n2, q));
    }
}

TEST_CASE("single-node graphs stay finite through every layer") {
    PropagationGraph g;
    g.id = "lonely";
    g.n = 1;
    g.x = rows({{0.7, -1.2}});
    const GraphBatch batch = batch_of(g);
    Rng rng(601);

    const Neighborhood closed = build_neighborhood(batch, true, true);
    GcnParams gcn{random_matrix(rng, 2, 3), random_matrix(rng, 1, 3)};
    CHECK(all_finite(gcn_forward(batch.x, closed, gcn)));

    GatParams gat;
    gat.w.push_back(random_matrix(rng, 2, 3));
    gat.a.push_back(random_matrix(rng, 6, 1));
    GatConfig cfg;
    cfg.final_layer = true;
    CHECK(all_finite(gat_forward(batch.x, closed, gat, cfg)));

    const Neighborhood open = build_neighborhood(batch, true, false);
    CHECK(open.degree(0) == 0);
    SageParams sage;
    sage.w = random_matrix(rng, 4, 3);
    sage.b = random_matrix(rng, 1, 3);
    CHECK(all_finite(sage_forward(batch.x, open, sage, SageAggregator::mean)));
    sage.w_pool = random_matrix(rng, 2, 2);
    sage.b_pool = random_matrix(rng, 1, 2);
    CHECK(all_finite(sage_forward(batch.x, open, sage, SageAggregator::maxpool)));

    GinParams gin;
    gin.eps = rows({{0.0}});
    gin.w1 = random_matrix(rng, 2, 3);
    gin.b1 = random_matrix(rng, 1, 3);
    gin.w2 = random_matrix(rng, 3, 3);
    gin.b2 = random_matrix(rng, 1, 3);
    const Matrix out = gin_forward(batch.x, open, gin);
    CHECK(all_finite(out));

    // Backward through the isolated node is finite too.
    GinCache cache;
    gin_forward(batch.x, open, gin, &cache);
    const GinGrads grads =
        gin_backward(random_matrix(rng, 1, 3), batch.x, open, gin, cache);
    CHECK(all_finite(grads.dh));
}

TEST_CASE("layers reject mismatched shapes") {
    Rng rng(701);
    const PropagationGraph g = random_graph(rng, 4, 3);
    const GraphBatch batch = batch_of(g);
    const Neighborhood nb = build_neighborhood(batch, true, true);

    GcnParams p{random_matrix(rng, 5, 4), random_matrix(rng, 1, 4)}; // wrong in dim
    CHECK_THROWS_AS(gcn_forward(batch.x, nb, p), shape_error);

    GinParams q;
    q.eps = Matrix(2, 2); // eps must be 1x1
    q.w1 = random_matrix(rng, 3, 4);
    q.b1 = random_matrix(rng, 1, 4);
    q.w2 = random_matrix(rng, 4, 4);
    q.b2 = random_matrix(rng, 1, 4);
    const Neighborhood open = build_neighborhood(batch, true, false);
    CHECK_THROWS_AS(gin_forward(batch.x, open, q), shape_error);
}
