#include "fnbench/synth.hpp"

#include "fnbench/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

namespace fnbench {

Attachment attachment_from_string(const std::string& s) {
    if (s == "uniform") return Attachment::uniform;
    if (s == "preferential") return Attachment::preferential;
    throw validation_error("unknown attachment law '" + s +
                           "' (expected uniform or preferential)");
}

const char* to_string(Attachment a) {
    return a == Attachment::uniform ? "uniform" : "preferential";
}

std::vector<Edge> generate_tree(std::size_t n, Attachment attachment, Rng& rng) {
    if (n == 0) throw validation_error("cannot generate an empty tree");
    std::vector<Edge> edges;
    edges.reserve(n - 1);
    if (attachment == Attachment::uniform) {
        for (std::size_t k = 1; k < n; ++k) {
            const auto parent = static_cast<std::uint32_t>(rng.index(k));
            edges.emplace_back(parent, static_cast<std::uint32_t>(k));
        }
    } else {
        // Degree-proportional attachment via the repeated-endpoint pool: each
        // edge pushes both endpoints, so a node appears degree-many times
        // (plus once for the root's initial entry).
        std::vector<std::uint32_t> pool{0};
        for (std::size_t k = 1; k < n; ++k) {
            const std::uint32_t parent = pool[rng.index(pool.size())];
            edges.emplace_back(parent, static_cast<std::uint32_t>(k));
            pool.push_back(parent);
            pool.push_back(static_cast<std::uint32_t>(k));
        }
    }
    return edges;
}

namespace {

void check_params(const GenParams& p) {
    if (p.num_graphs < 2) throw validation_error("num_graphs must be >= 2");
    if (!(p.avg_nodes >= 2.0))
        throw validation_error("avg_nodes must be >= 2 (trees have >= 2 nodes)");
    if (p.feature_dim == 0) throw validation_error("feature_dim must be >= 1");
    if (!(p.sep >= 0.0)) throw validation_error("separation must be >= 0");
}

std::vector<double> unit_direction(std::uint64_t seed, std::size_t dim) {
    Rng rng(derive_seed(seed, "direction"));
    std::vector<double> u(dim);
    double norm = 0.0;
    while (norm == 0.0) {
        for (double& v : u) v = rng.normal();
        for (const double v : u) norm += v * v;
        norm = std::sqrt(norm);
    }
    for (double& v : u) v /= norm;
    return u;
}

} // namespace

Dataset generate_dataset(const GenParams& p) {
    check_params(p);
    const std::vector<double> u = unit_direction(p.seed, p.feature_dim);
    const double geo_p = 1.0 / (p.avg_nodes - 1.0); // avg_nodes == 2 => always n = 2

    Dataset ds;
    ds.name = "synthetic";
    ds.feature_dim = p.feature_dim;
    ds.graphs.reserve(p.num_graphs);
    for (std::size_t i = 0; i < p.num_graphs; ++i) {
        Rng rng(derive_seed(p.seed, "graph", i));
        PropagationGraph g;
        char idbuf[16];
        std::snprintf(idbuf, sizeof idbuf, "g%06zu", i + 1);
        g.id = idbuf;
        g.label = i % 2 == 1 ? 1 : 0; // exactly floor(num_graphs / 2) fake

        g.n = 2 + rng.geometric(geo_p);
        const Attachment att = p.structural_signal && g.label == 1
                                   ? Attachment::preferential
                                   : p.attachment;
        g.edges = generate_tree(g.n, att, rng);

        const double sign = g.label == 1 ? 1.0 : -1.0;
        g.x = Matrix(g.n, p.feature_dim);
        for (std::size_t k = 0; k < g.n; ++k) {
            const double shift = (k == 0 ? 2.0 : 1.0) * sign * p.sep;
            double* row = g.x.row(k);
            for (std::size_t c = 0; c < p.feature_dim; ++c)
                row[c] = shift * u[c] + rng.normal();
        }
        ds.graphs.push_back(std::move(g));
    }
    return ds;
}

namespace {

const char* const kNato[26] = {
    "alpha",  "bravo",    "charlie", "delta", "echo",   "foxtrot", "golf",
    "hotel",  "india",    "juliett", "kilo",  "lima",   "mike",    "november",
    "oscar",  "papa",     "quebec",  "romeo", "sierra", "tango",   "uniform",
    "victor", "whiskey",  "xray",    "yankee", "zulu",
};

} // namespace

std::vector<CorpusDoc> root_sign_corpus(const Dataset& ds) {
    const std::size_t dims = std::min<std::size_t>(ds.feature_dim, 26);
    std::vector<CorpusDoc> docs;
    docs.reserve(ds.graphs.size());
    for (const PropagationGraph& g : ds.graphs) {
        CorpusDoc d;
        d.id = g.id;
        d.label = g.label;
        for (std::size_t c = 0; c < dims; ++c) {
            if (c > 0) d.text.push_back(' ');
            d.text += kNato[c];
            d.text += g.x(0, c) >= 0.0 ? "pos" : "neg";
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

void write_generation_metadata(const std::string& dataset_path, const GenParams& p,
                               const Dataset& ds) {
    nlohmann::ordered_json meta;
    meta["params"] = {
        {"num_graphs", p.num_graphs},
        {"avg_nodes", p.avg_nodes},
        {"feature_dim", p.feature_dim},
        {"sep", p.sep},
        {"attachment", to_string(p.attachment)},
        {"structural_signal", p.structural_signal},
        {"seed", p.seed},
    };
    meta["realized"] = {
        {"graphs", ds.graphs.size()},
        {"fake", ds.fake_count()},
        {"nodes", ds.total_nodes()},
        {"edges", ds.total_edges()},
    };
    const std::string path = dataset_path + ".meta.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open " + path + " for writing");
    out << meta.dump(2) << '\n';
    if (!out.flush()) throw io_error("failed writing " + path);
}

} // namespace fnbench
