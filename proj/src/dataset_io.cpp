#include "fnbench/dataset_io.hpp"

#include "fnbench/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <unordered_set>

namespace fnbench {

namespace {

using ojson = nlohmann::ordered_json;

PropagationGraph graph_from_json(const ojson& j, std::size_t line_no) {
    PropagationGraph g;
    try {
        g.id = j.at("id").get<std::string>();
        g.label = j.at("label").get<int>();
        g.n = j.at("n").get<std::size_t>();
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2)
                throw validation_error("edge is not a pair");
            g.edges.emplace_back(e[0].get<std::uint32_t>(), e[1].get<std::uint32_t>());
        }
        const auto& x = j.at("x");
        if (!x.is_array()) throw validation_error("x is not an array");
        const std::size_t rows = x.size();
        const std::size_t cols = rows > 0 ? x[0].size() : 0;
        g.x = Matrix(rows, cols);
        for (std::size_t r = 0; r < rows; ++r) {
            const auto& row = x[r];
            if (!row.is_array() || row.size() != cols)
                throw validation_error("feature row " + std::to_string(r) +
                                       " has inconsistent length");
            for (std::size_t c = 0; c < cols; ++c) g.x(r, c) = row[c].get<double>();
        }
    } catch (const ojson::exception& e) {
        throw validation_error("line " + std::to_string(line_no) +
                               ": malformed graph object: " + e.what());
    }
    return g;
}

} // namespace

Dataset load_dataset(const std::string& path, bool tree_mode) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open dataset file: " + path);

    Dataset ds;
    ds.name = path;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const ojson::exception& e) {
            // Number overflow (e.g. 1e999) throws out_of_range, not parse_error.
            throw validation_error("line " + std::to_string(line_no) +
                                   ": JSON parse failure: " + e.what());
        }
        PropagationGraph g = graph_from_json(j, line_no);

        const auto violations = validate_graph(g, tree_mode);
        if (!violations.empty()) {
            std::ostringstream msg;
            msg << "graph '" << g.id << "' (line " << line_no << ") invalid:";
            for (const auto& v : violations) msg << "\n  - " << v;
            throw validation_error(msg.str());
        }
        if (!ids.insert(g.id).second)
            throw validation_error("duplicate graph id '" + g.id + "' at line " +
                                   std::to_string(line_no));
        if (ds.graphs.empty()) {
            ds.feature_dim = g.x.cols;
        } else if (g.x.cols != ds.feature_dim) {
            throw validation_error("graph '" + g.id + "' has feature dim " +
                                   std::to_string(g.x.cols) + ", dataset uses " +
                                   std::to_string(ds.feature_dim));
        }
        ds.graphs.push_back(std::move(g));
    }
    if (ds.graphs.empty()) throw validation_error("no graphs in " + path);
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot open output file: " + path);
    for (const auto& g : ds.graphs) {
        ojson j;
        j["id"] = g.id;
        j["label"] = g.label;
        j["n"] = g.n;
        ojson edges = ojson::array();
        for (const auto& [src, dst] : g.edges) edges.push_back({src, dst});
        j["edges"] = std::move(edges);
        ojson x = ojson::array();
        for (std::size_t r = 0; r < g.x.rows; ++r) {
            ojson row = ojson::array();
            for (std::size_t c = 0; c < g.x.cols; ++c) row.push_back(g.x(r, c));
            x.push_back(std::move(row));
        }
        j["x"] = std::move(x);
        out << j.dump() << '\n';
    }
    if (!out) throw io_error("write failure: " + path);
}

std::pair<Dataset, Dataset> split_dataset_by_file(const Dataset& ds,
                                                  const std::string& split_path) {
    std::ifstream in(split_path);
    if (!in) throw io_error("cannot open split file: " + split_path);
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const ojson::exception& e) {
        throw validation_error("split file parse failure: " + std::string(e.what()));
    }
    if (!j.contains("train") || !j.contains("test"))
        throw validation_error("split file must contain 'train' and 'test' id lists");

    std::unordered_set<std::string> train_ids, test_ids;
    for (const auto& v : j["train"]) train_ids.insert(v.get<std::string>());
    for (const auto& v : j["test"]) test_ids.insert(v.get<std::string>());

    Dataset train{ds.name + "/train", ds.feature_dim, {}};
    Dataset test{ds.name + "/test", ds.feature_dim, {}};
    for (const auto& g : ds.graphs) {
        const bool in_train = train_ids.count(g.id) > 0;
        const bool in_test = test_ids.count(g.id) > 0;
        if (in_train && in_test)
            throw validation_error("graph id '" + g.id + "' in both split lists");
        if (!in_train && !in_test)
            throw validation_error("graph id '" + g.id + "' missing from split file");
        (in_train ? train : test).graphs.push_back(g);
    }
    return {std::move(train), std::move(test)};
}

} // namespace fnbench
