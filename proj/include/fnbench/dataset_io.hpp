#pragma once

#include "fnbench/graph.hpp"

#include <string>
#include <utility>

namespace fnbench {

/// Reads a UTF-8 JSONL graph dataset, one object per line:
/// {"id":"g000001","label":1,"n":3,"edges":[[0,1],[0,2]],"x":[[...],[...],[...]]}
/// Parse failures report the line number; invariant violations report the
/// graph id. Throws io_error / validation_error.
Dataset load_dataset(const std::string& path, bool tree_mode = true);

/// Writes the JSONL format above, one graph per line, byte-deterministic.
void save_dataset(const Dataset& ds, const std::string& path);

/// Optional split override: JSON {"train":["id",...],"test":["id",...]}.
/// Every dataset id must appear in exactly one list.
std::pair<Dataset, Dataset> split_dataset_by_file(const Dataset& ds,
                                                  const std::string& split_path);

} // namespace fnbench
