#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fewshot/embedding_store.hpp"

namespace fewshot {

struct SubsetSpec {
  std::size_t per_class_cap = 600;
  std::size_t min_class_size = 600;
  /// Protected target classes, matched by exact name.
  std::vector<std::string> excluded_classes;
  std::uint64_t seed = 0;
};

enum class DropReason { kExcluded, kInsufficient };

struct DroppedClass {
  std::string name;
  DropReason reason;
  std::size_t available;
};

struct BuildReport {
  std::size_t retained_class_count = 0;
  std::vector<std::string> retained_classes;
  std::vector<DroppedClass> dropped;
  /// Exclusion entries naming classes the source does not have.
  std::vector<std::string> unknown_exclusions;
  std::size_t per_class_cap = 0;
  std::size_t min_class_size = 0;
  std::uint64_t seed = 0;
  std::string sampling = "seeded uniform without replacement, per-class stream";
};

struct SubsetResult {
  DatasetManifest manifest;
  BuildReport report;
};

/// Builds a capped, class-balanced base set. Each retained class contributes
/// exactly `per_class_cap` records drawn by a per-class seeded shuffle;
/// classes below max(min_class_size, per_class_cap) records are dropped, as
/// are excluded ones. Output records keep source order and are tagged train.
/// Throws Error(kNoClassesRetained) when nothing survives.
SubsetResult build_subset(const DatasetManifest& source, const SubsetSpec& spec);

std::string_view drop_reason_name(DropReason reason);

}  // namespace fewshot
