#include "fnbench/baselines.hpp"

#include "fnbench/errors.hpp"
#include "fnbench/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

namespace fnbench {

double sparse_at(const SparseRow& row, std::uint32_t f) {
    const auto it = std::lower_bound(row.idx.begin(), row.idx.end(), f);
    if (it == row.idx.end() || *it != f) return 0.0;
    return row.val[static_cast<std::size_t>(it - row.idx.begin())];
}

namespace {

void check_training_input(const DocMatrix& x, const std::vector<int>& y) {
    if (x.rows.empty()) throw validation_error("empty training set");
    if (x.rows.size() != y.size())
        throw validation_error("feature rows and labels disagree (" +
                               std::to_string(x.rows.size()) + " vs " +
                               std::to_string(y.size()) + ")");
    for (const int label : y)
        if (label != 0 && label != 1)
            throw validation_error("labels must be 0 or 1, got " +
                                   std::to_string(label));
    for (const SparseRow& r : x.rows)
        for (const std::uint32_t c : r.idx)
            if (c >= x.cols)
                throw validation_error("sparse column " + std::to_string(c) +
                                       " out of range for " +
                                       std::to_string(x.cols) + " columns");
}

double softplus(double t) {
    return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace

double LinearModel::score(const SparseRow& row) const {
    double s = b;
    for (std::size_t k = 0; k < row.idx.size(); ++k) {
        const std::uint32_t c = row.idx[k];
        if (c < w.size()) s += w[c] * row.val[k];
    }
    return s;
}

LinearModel train_logreg(const DocMatrix& x, const std::vector<int>& y,
                         const LogregOptions& opt) {
    check_training_input(x, y);
    LinearModel m;
    m.w.assign(x.cols, 0.0);
    const std::size_t n = x.rows.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> grad(x.cols);
    for (std::size_t it = 0; it < opt.iters; ++it) {
        for (std::size_t c = 0; c < x.cols; ++c) grad[c] = opt.l2 * m.w[c];
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const SparseRow& row = x.rows[i];
            const double delta = (sigmoid(m.score(row)) - y[i]) * inv_n;
            for (std::size_t k = 0; k < row.idx.size(); ++k)
                grad[row.idx[k]] += delta * row.val[k];
            grad_b += delta;
        }
        for (std::size_t c = 0; c < x.cols; ++c) m.w[c] -= opt.lr * grad[c];
        m.b -= opt.lr * grad_b;
    }
    return m;
}

double logreg_objective(const LinearModel& m, const DocMatrix& x,
                        const std::vector<int>& y, double l2) {
    double loss = 0.0;
    for (std::size_t i = 0; i < x.rows.size(); ++i) {
        const double z = m.score(x.rows[i]);
        loss += y[i] == 1 ? softplus(-z) : softplus(z);
    }
    loss /= static_cast<double>(x.rows.size());
    double reg = 0.0;
    for (const double wc : m.w) reg += wc * wc;
    return loss + 0.5 * l2 * reg;
}

LinearModel train_svm(const DocMatrix& x, const std::vector<int>& y,
                      const SvmOptions& opt) {
    check_training_input(x, y);
    LinearModel m;
    m.w.assign(x.cols, 0.0);
    const std::size_t n = x.rows.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    std::vector<double> grad(x.cols);
    for (std::size_t it = 0; it < opt.iters; ++it) {
        for (std::size_t c = 0; c < x.cols; ++c) grad[c] = opt.lambda * m.w[c];
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const SparseRow& row = x.rows[i];
            const double ysig = y[i] == 1 ? 1.0 : -1.0;
            if (ysig * m.score(row) < 1.0) {
                for (std::size_t k = 0; k < row.idx.size(); ++k)
                    grad[row.idx[k]] -= ysig * row.val[k] * inv_n;
                grad_b -= ysig * inv_n;
            }
        }
        const double step = opt.lr0 / std::sqrt(static_cast<double>(it + 1));
        for (std::size_t c = 0; c < x.cols; ++c) m.w[c] -= step * grad[c];
        m.b -= step * grad_b;
    }
    return m;
}

double svm_objective(const LinearModel& m, const DocMatrix& x,
                     const std::vector<int>& y, double lambda) {
    double hinge = 0.0;
    for (std::size_t i = 0; i < x.rows.size(); ++i) {
        const double ysig = y[i] == 1 ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - ysig * m.score(x.rows[i]));
    }
    hinge /= static_cast<double>(x.rows.size());
    double reg = 0.0;
    for (const double wc : m.w) reg += wc * wc;
    return 0.5 * lambda * reg + hinge;
}

// ----------------------------- decision tree ------------------------------

namespace {

double gini(const std::array<std::size_t, 2>& counts) {
    const double n = static_cast<double>(counts[0] + counts[1]);
    if (n == 0.0) return 0.0;
    const double p0 = counts[0] / n;
    const double p1 = counts[1] / n;
    return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitChoice {
    bool found = false;
    std::uint32_t feature = 0;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
};

struct TreeBuilder {
    const DocMatrix& x;
    const std::vector<int>& y;
    const TreeOptions& opt;
    std::size_t mtry;  // features examined per node
    Rng* rng;          // feature subsampling; nullptr scans all features
    std::vector<TreeNode> nodes;

    // Features examined at one node, ascending. Floyd's algorithm keeps the
    // draw count at mtry regardless of the feature count.
    std::vector<std::uint32_t> sample_features() {
        const std::size_t d = x.cols;
        std::vector<std::uint32_t> feats;
        if (!rng || mtry >= d) {
            feats.resize(d);
            for (std::size_t f = 0; f < d; ++f) feats[f] = static_cast<std::uint32_t>(f);
            return feats;
        }
        std::unordered_set<std::uint32_t> chosen;
        for (std::size_t j = d - mtry; j < d; ++j) {
            const std::uint32_t t = static_cast<std::uint32_t>(rng->index(j + 1));
            chosen.insert(chosen.contains(t) ? static_cast<std::uint32_t>(j) : t);
        }
        feats.assign(chosen.begin(), chosen.end());
        std::sort(feats.begin(), feats.end());
        return feats;
    }

    SplitChoice best_split(const std::vector<std::uint32_t>& samples,
                           const std::array<std::size_t, 2>& counts) {
        const double parent_gini = gini(counts);
        const double n = static_cast<double>(samples.size());
        SplitChoice best;
        std::vector<std::pair<double, int>> vals(samples.size());
        for (const std::uint32_t f : sample_features()) {
            for (std::size_t i = 0; i < samples.size(); ++i)
                vals[i] = {sparse_at(x.rows[samples[i]], f), y[samples[i]]};
            std::sort(vals.begin(), vals.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::array<std::size_t, 2> left{};
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                ++left[vals[i].second];
                if (vals[i].first == vals[i + 1].first) continue;
                const std::array<std::size_t, 2> right{counts[0] - left[0],
                                                       counts[1] - left[1]};
                const double nl = static_cast<double>(i + 1);
                const double gain = parent_gini - (nl / n) * gini(left) -
                                    ((n - nl) / n) * gini(right);
                if (gain > best.gain) {
                    best.found = true;
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = vals[i].first +
                                     0.5 * (vals[i + 1].first - vals[i].first);
                }
            }
        }
        return best;
    }

    std::int32_t build(const std::vector<std::uint32_t>& samples, std::size_t depth) {
        std::array<std::size_t, 2> counts{};
        for (const std::uint32_t s : samples) ++counts[y[s]];

        const std::int32_t id = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        nodes[id].counts = counts;
        nodes[id].prediction = counts[1] > counts[0] ? 1 : 0;

        const bool impure = counts[0] > 0 && counts[1] > 0;
        if (!impure || depth >= opt.max_depth ||
            samples.size() < opt.min_samples_split)
            return id;
        const SplitChoice split = best_split(samples, counts);
        if (!split.found) return id; // every examined feature is constant here

        std::vector<std::uint32_t> ls, rs;
        for (const std::uint32_t s : samples) {
            if (sparse_at(x.rows[s], split.feature) <= split.threshold)
                ls.push_back(s);
            else
                rs.push_back(s);
        }
        nodes[id].feature = static_cast<std::int32_t>(split.feature);
        nodes[id].threshold = split.threshold;
        const std::int32_t left = build(ls, depth + 1);
        const std::int32_t right = build(rs, depth + 1);
        nodes[id].left = left;
        nodes[id].right = right;
        return id;
    }
};

} // namespace

int DecisionTree::predict(const SparseRow& row) const {
    std::int32_t at = 0;
    while (nodes[at].feature >= 0) {
        const TreeNode& node = nodes[at];
        at = sparse_at(row, static_cast<std::uint32_t>(node.feature)) <= node.threshold
                 ? node.left
                 : node.right;
    }
    return nodes[at].prediction;
}

std::size_t DecisionTree::depth() const {
    if (nodes.empty()) return 0;
    std::size_t max_depth = 0;
    // depth of node i = depth of parent + 1; children always follow parents
    std::vector<std::size_t> depths(nodes.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].feature < 0) {
            max_depth = std::max(max_depth, depths[i]);
            continue;
        }
        depths[nodes[i].left] = depths[i] + 1;
        depths[nodes[i].right] = depths[i] + 1;
    }
    return max_depth;
}

DecisionTree train_decision_tree(const DocMatrix& x, const std::vector<int>& y,
                                 const TreeOptions& opt) {
    check_training_input(x, y);
    if (opt.min_samples_split < 2)
        throw validation_error("min_samples_split must be >= 2");
    std::vector<std::uint32_t> samples(x.rows.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        samples[i] = static_cast<std::uint32_t>(i);
    TreeBuilder builder{x, y, opt, x.cols, nullptr, {}};
    builder.build(samples, 0);
    DecisionTree t;
    t.nodes = std::move(builder.nodes);
    return t;
}

int RandomForest::predict(const SparseRow& row) const {
    std::size_t ones = 0;
    for (const DecisionTree& t : trees) ones += t.predict(row) == 1;
    return 2 * ones > trees.size() ? 1 : 0; // tie votes resolve to 0
}

RandomForest train_random_forest(const DocMatrix& x, const std::vector<int>& y,
                                 const ForestOptions& opt) {
    check_training_input(x, y);
    if (opt.n_trees == 0) throw validation_error("forest needs at least one tree");
    const std::size_t d = x.cols;
    const std::size_t mtry =
        opt.mtry > 0 ? std::min(opt.mtry, d)
                     : std::max<std::size_t>(
                           1, static_cast<std::size_t>(std::sqrt(
                                  static_cast<double>(d))));

    RandomForest forest;
    forest.trees.reserve(opt.n_trees);
    const std::size_t n = x.rows.size();
    for (std::size_t t = 0; t < opt.n_trees; ++t) {
        Rng rng(derive_seed(opt.seed, "tree", t));
        std::vector<std::uint32_t> samples(n);
        if (opt.bootstrap) {
            for (std::size_t i = 0; i < n; ++i)
                samples[i] = static_cast<std::uint32_t>(rng.index(n));
        } else {
            for (std::size_t i = 0; i < n; ++i)
                samples[i] = static_cast<std::uint32_t>(i);
        }
        const bool subsample = mtry < d;
        TreeBuilder builder{x, y, opt.tree, mtry, subsample ? &rng : nullptr, {}};
        builder.build(samples, 0);
        DecisionTree tree;
        tree.nodes = std::move(builder.nodes);
        forest.trees.push_back(std::move(tree));
    }
    return forest;
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& y) {
    if (pred.size() != y.size() || pred.empty())
        throw validation_error("prediction/label size mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == y[i];
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

std::vector<int> predict_all(const LinearModel& m, const DocMatrix& x) {
    std::vector<int> out(x.rows.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.predict(x.rows[i]);
    return out;
}

std::vector<int> predict_all(const DecisionTree& m, const DocMatrix& x) {
    std::vector<int> out(x.rows.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.predict(x.rows[i]);
    return out;
}

std::vector<int> predict_all(const RandomForest& m, const DocMatrix& x) {
    std::vector<int> out(x.rows.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = m.predict(x.rows[i]);
    return out;
}

} // namespace fnbench
