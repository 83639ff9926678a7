#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fewshot {

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };

std::string_view split_name(Split split);
/// Accepts "train", "validation" (or "val") and "test".
Split parse_split(std::string_view name);

/// One embedded sample. `label` indexes the owning manifest's class table.
struct EmbeddingRecord {
  std::string sample_id;
  Split split = Split::kTrain;
  std::string domain;
  std::uint32_t label = 0;
  std::vector<float> vector;

  /// Float payloads compare by bit pattern, so -0.0f != 0.0f here.
  friend bool operator==(const EmbeddingRecord& a, const EmbeddingRecord& b);
};

struct DatasetManifest {
  static constexpr std::uint16_t kFormatVersion = 1;

  std::uint16_t format_version = kFormatVersion;
  std::uint32_t dimension = 0;
  std::vector<std::string> class_table;
  std::vector<EmbeddingRecord> records;

  std::optional<std::uint32_t> find_class(std::string_view name) const;
  /// Throws Error(kUnknownClass) if `name` is not in the class table.
  std::uint32_t class_index(std::string_view name) const;
  const std::string& class_name(const EmbeddingRecord& record) const {
    return class_table[record.label];
  }

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

/// Checks every manifest invariant. Records are inspected in order and the
/// first offending one is named in the thrown Error. A class declared in the
/// class table with no records is allowed (treated as explicitly empty).
void validate(const DatasetManifest& manifest);

// Binary layout (all integers little-endian):
//   "EMBM" u16 version u32 dimension u32 class_count
//   class_count x (u16 len, utf-8 name)
//   u64 record_count
//   record_count x (u16 len, id; u8 split; u16 len, domain; u32 class; dim x f32)
std::string encode_manifest(const DatasetManifest& manifest);
DatasetManifest decode_manifest(std::string_view bytes);

/// JSON-lines variant: a header object carrying format_version, dimension and
/// class_table, then one record object per line with the label as a name.
void write_manifest_jsonl(const DatasetManifest& manifest, std::ostream& out);
DatasetManifest read_manifest_jsonl(std::istream& in);

/// Loads either the binary or the JSON-lines form (sniffed from the first
/// bytes) and validates it.
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Always writes the canonical binary form.
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Non-owning, order-preserving selection of records from one manifest. The
/// manifest must outlive the view.
class RecordView {
 public:
  RecordView(const DatasetManifest& manifest, std::vector<const EmbeddingRecord*> records)
      : manifest_(&manifest), records_(std::move(records)) {}

  const DatasetManifest& manifest() const { return *manifest_; }
  std::span<const EmbeddingRecord* const> records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const EmbeddingRecord& operator[](std::size_t i) const { return *records_[i]; }
  auto begin() const { return records_.begin(); }
  auto end() const { return records_.end(); }

 private:
  const DatasetManifest* manifest_;
  std::vector<const EmbeddingRecord*> records_;
};

/// Filters by split (all splits when unset) and by class names (no filter
/// when unset; an empty set selects nothing). Unknown names throw
/// Error(kUnknownClass).
RecordView view(const DatasetManifest& manifest, std::optional<Split> split = std::nullopt,
                const std::optional<std::vector<std::string>>& classes = std::nullopt);

/// Names of the classes with at least one record in `records`, in
/// class-table order.
std::vector<std::string> present_classes(const RecordView& records);

}  // namespace fewshot
