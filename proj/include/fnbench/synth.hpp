#pragma once

#include "fnbench/graph.hpp"
#include "fnbench/rng.hpp"
#include "fnbench/text.hpp"

#include <string>
#include <vector>

namespace fnbench {

enum class Attachment { uniform, preferential };

Attachment attachment_from_string(const std::string& s); // throws validation_error
const char* to_string(Attachment a);

struct GenParams {
    std::size_t num_graphs = 500;
    double avg_nodes = 58.0; // node counts are 2 + Geometric(1 / (avg_nodes - 1))
    std::size_t feature_dim = 10;
    double sep = 0.5; // class separation delta
    Attachment attachment = Attachment::uniform;
    bool structural_signal = false; // fake graphs switch to preferential
    std::uint64_t seed = 0;
};

/// Edges of a random recursive tree: node k in [1, n) attaches to a parent
/// among 0..k-1, uniformly or proportionally to current degree.
std::vector<Edge> generate_tree(std::size_t n, Attachment attachment, Rng& rng);

/// Labeled dataset with alternating labels (exactly floor(n/2) fake) and a
/// feature-mean class signal of +/- sep along a seeded unit direction; the
/// root carries twice the shift. Deterministic per seed, per graph.
Dataset generate_dataset(const GenParams& p);

/// Paired baseline view of a generated dataset: one document per graph made
/// of sign tokens of the root feature vector (first 26 coordinates at most).
std::vector<CorpusDoc> root_sign_corpus(const Dataset& ds);

/// Sidecar JSON (<dataset_path>.meta.json) echoing params and realized totals.
void write_generation_metadata(const std::string& dataset_path, const GenParams& p,
                               const Dataset& ds);

} // namespace fnbench
