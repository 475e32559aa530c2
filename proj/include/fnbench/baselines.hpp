#pragma once

#include "fnbench/text.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace fnbench {

/// Value of column f in a sorted sparse row (0.0 when absent).
double sparse_at(const SparseRow& row, std::uint32_t f);

// ---------------------------------------------------------------------------
// Linear models: logistic regression and a hinge-loss SVM, both trained by
// full-batch (sub)gradient descent from a zero start.
// ---------------------------------------------------------------------------

struct LinearModel {
    std::vector<double> w;
    double b = 0.0;

    double score(const SparseRow& row) const; // w . x + b
    int predict(const SparseRow& row) const { return score(row) > 0.0 ? 1 : 0; }
};

struct LogregOptions {
    double lr = 0.1;
    std::size_t iters = 500;
    double l2 = 1e-4;
};

LinearModel train_logreg(const DocMatrix& x, const std::vector<int>& y,
                         const LogregOptions& opt = {});

/// Mean log-loss plus the l2 penalty; the quantity train_logreg descends.
double logreg_objective(const LinearModel& m, const DocMatrix& x,
                        const std::vector<int>& y, double l2);

struct SvmOptions {
    double lambda = 1e-4; // l2 strength on w
    double lr0 = 0.5;     // step t is lr0 / sqrt(t + 1)
    std::size_t iters = 500;
};

LinearModel train_svm(const DocMatrix& x, const std::vector<int>& y,
                      const SvmOptions& opt = {});

/// (lambda/2) ||w||^2 + mean hinge(1 - y~ (w . x + b)) with y~ in {-1, +1}.
double svm_objective(const LinearModel& m, const DocMatrix& x,
                     const std::vector<int>& y, double lambda);

// ---------------------------------------------------------------------------
// CART-style decision tree on gini impurity. Thresholds sit at midpoints of
// consecutive distinct values; rows with value <= threshold go left. A node
// splits while it is impure, depth and min_samples_split allow, and some
// candidate exists; ties prefer the lowest feature then lowest threshold.
// ---------------------------------------------------------------------------

struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    int prediction = 0;                  // majority label, tie -> 0
    std::array<std::size_t, 2> counts{}; // training labels seen at this node
};

struct DecisionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root (absent if untrained)

    int predict(const SparseRow& row) const;
    std::size_t depth() const;
};

struct TreeOptions {
    std::size_t max_depth = 4;
    std::size_t min_samples_split = 2;
};

DecisionTree train_decision_tree(const DocMatrix& x, const std::vector<int>& y,
                                 const TreeOptions& opt = {});

// ---------------------------------------------------------------------------
// Random forest: bootstrap-sampled trees over random feature subsets at each
// node, combined by majority vote (tie -> 0). With n_trees = 1, bootstrap off
// and mtry = feature count it degenerates to train_decision_tree exactly.
// ---------------------------------------------------------------------------

struct ForestOptions {
    std::size_t n_trees = 100;
    TreeOptions tree;
    bool bootstrap = true;
    std::size_t mtry = 0; // 0: floor(sqrt(feature count)), min 1
    std::uint64_t seed = 42;
};

struct RandomForest {
    std::vector<DecisionTree> trees;

    int predict(const SparseRow& row) const;
};

RandomForest train_random_forest(const DocMatrix& x, const std::vector<int>& y,
                                 const ForestOptions& opt = {});

// ---------------------------------------------------------------------------

double accuracy(const std::vector<int>& pred, const std::vector<int>& y);

std::vector<int> predict_all(const LinearModel& m, const DocMatrix& x);
std::vector<int> predict_all(const DecisionTree& m, const DocMatrix& x);
std::vector<int> predict_all(const RandomForest& m, const DocMatrix& x);

} // namespace fnbench
