#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nestfc/model.hpp"

namespace nestfc {

/// CSV with header `subject_id,replicate_id,x,y`. Rows may come in any
/// order; subjects and replicates are numbered by first appearance. Throws
/// DataError naming the offending line.
NestedDataset read_dataset(std::istream& in, const std::string& source = "<stream>");
NestedDataset read_dataset(const std::filesystem::path& path);

/// Values are written with 17 significant digits so they read back exactly.
void write_dataset(std::ostream& out, const NestedDataset& data);
void write_dataset(const std::filesystem::path& path, const NestedDataset& data);

/// Generator labels keyed by subject id (and replicate id).
struct TruthLabels {
  std::vector<std::string> subject_ids;
  std::vector<int> subject_labels;
  std::vector<std::vector<std::string>> replicate_ids;
  std::vector<std::vector<int>> curve_labels;
};

TruthLabels truth_of(const SimulatedData& sim);
void write_truth(const std::filesystem::path& path, const TruthLabels& truth);
TruthLabels read_truth(const std::filesystem::path& path);

}  // namespace nestfc
