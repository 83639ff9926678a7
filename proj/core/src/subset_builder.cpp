#include "fewshot/subset_builder.hpp"

#include <algorithm>
#include <set>

#include "fewshot/error.hpp"
#include "fewshot/random.hpp"

namespace fewshot {

std::string_view drop_reason_name(DropReason reason) {
  return reason == DropReason::kExcluded ? "excluded" : "insufficient";
}

SubsetResult build_subset(const DatasetManifest& source, const SubsetSpec& spec) {
  if (spec.per_class_cap == 0 || spec.min_class_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "per_class_cap and min_class_size must be positive");
  }

  const std::size_t class_count = source.class_table.size();
  std::vector<std::vector<std::size_t>> members(class_count);
  for (std::size_t i = 0; i < source.records.size(); ++i) {
    members[source.records[i].label].push_back(i);
  }

  std::vector<bool> excluded(class_count, false);
  BuildReport report;
  report.per_class_cap = spec.per_class_cap;
  report.min_class_size = spec.min_class_size;
  report.seed = spec.seed;
  for (const auto& name : std::set<std::string>(spec.excluded_classes.begin(),
                                                spec.excluded_classes.end())) {
    if (auto idx = source.find_class(name)) {
      excluded[*idx] = true;
    } else {
      report.unknown_exclusions.push_back(name);
    }
  }

  // Fewer than per_class_cap records cannot satisfy the exact-cap guarantee,
  // so the effective threshold is the larger of the two.
  const std::size_t threshold = std::max(spec.min_class_size, spec.per_class_cap);
  std::vector<bool> selected(source.records.size(), false);
  std::vector<std::int64_t> remap(class_count, -1);
  DatasetManifest out;
  out.dimension = source.dimension;

  for (std::size_t c = 0; c < class_count; ++c) {
    const auto& name = source.class_table[c];
    if (excluded[c]) {
      report.dropped.push_back({name, DropReason::kExcluded, members[c].size()});
      continue;
    }
    if (members[c].size() < threshold) {
      report.dropped.push_back({name, DropReason::kInsufficient, members[c].size()});
      continue;
    }
    std::vector<std::size_t> pick = members[c];
    Rng rng(derive_seed(spec.seed, c));
    rng.partial_shuffle(std::span<std::size_t>(pick), spec.per_class_cap);
    for (std::size_t k = 0; k < spec.per_class_cap; ++k) selected[pick[k]] = true;
    remap[c] = static_cast<std::int64_t>(out.class_table.size());
    out.class_table.push_back(name);
  }

  if (out.class_table.empty()) {
    throw Error(ErrorCode::kNoClassesRetained, "subset retains zero classes");
  }

  for (std::size_t i = 0; i < source.records.size(); ++i) {
    if (!selected[i]) continue;
    EmbeddingRecord r = source.records[i];
    r.label = static_cast<std::uint32_t>(remap[r.label]);
    r.split = Split::kTrain;
    out.records.push_back(std::move(r));
  }

  report.retained_classes = out.class_table;
  report.retained_class_count = out.class_table.size();
  return {std::move(out), std::move(report)};
}

}  // namespace fewshot
