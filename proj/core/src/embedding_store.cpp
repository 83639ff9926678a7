#include "fewshot/embedding_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fewshot/error.hpp"
#include "byte_io.hpp"

namespace fewshot {

namespace {

using detail::ByteReader;
using detail::ByteWriter;
using detail::read_file;

constexpr char kMagic[4] = {'E', 'M', 'B', 'M'};

std::string single_quoted(std::string_view s) { return "'" + std::string(s) + "'"; }

/// Applies the per-record invariants in a fixed order, remembering ids seen.
class RecordChecker {
 public:
  RecordChecker(std::uint32_t dimension, std::size_t class_count)
      : dimension_(dimension), class_count_(class_count) {}

  void check(const EmbeddingRecord& r, std::size_t position) {
    const std::string who = "record " + std::to_string(position) + " " + single_quoted(r.sample_id);
    if (r.label >= class_count_) {
      throw Error(ErrorCode::kUnknownLabel,
                  who + ": class index " + std::to_string(r.label) + " not in class table");
    }
    if (r.vector.size() != dimension_) {
      throw Error(ErrorCode::kDimensionMismatch,
                  who + ": vector length " + std::to_string(r.vector.size()) +
                      " != dimension " + std::to_string(dimension_));
    }
    for (std::size_t i = 0; i < r.vector.size(); ++i) {
      if (!std::isfinite(r.vector[i])) {
        throw Error(ErrorCode::kNonFiniteValue,
                    who + ": non-finite value at component " + std::to_string(i));
      }
    }
    if (!seen_.insert(r.sample_id).second) {
      throw Error(ErrorCode::kDuplicateSampleId, who + ": duplicate sample_id");
    }
  }

 private:
  std::uint32_t dimension_;
  std::size_t class_count_;
  std::unordered_set<std::string> seen_;
};

void check_header(std::uint16_t version, std::uint32_t dimension,
                  const std::vector<std::string>& class_table) {
  if (version != DatasetManifest::kFormatVersion) {
    throw Error(ErrorCode::kCorruptHeader,
                "unsupported format_version " + std::to_string(version));
  }
  if (dimension == 0) throw Error(ErrorCode::kCorruptHeader, "dimension must be positive");
  std::unordered_set<std::string_view> names;
  for (const auto& name : class_table) {
    if (!names.insert(name).second) {
      throw Error(ErrorCode::kCorruptHeader, "duplicate class name " + single_quoted(name));
    }
  }
}

Split split_from_byte(std::uint8_t tag, const std::string& who) {
  if (tag > 2) {
    throw Error(ErrorCode::kCorruptRecord, who + ": invalid split tag " + std::to_string(tag));
  }
  return static_cast<Split>(tag);
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "validation" || name == "val") return Split::kValidation;
  if (name == "test") return Split::kTest;
  throw Error(ErrorCode::kInvalidArgument, "unknown split " + single_quoted(name));
}

bool operator==(const EmbeddingRecord& a, const EmbeddingRecord& b) {
  if (a.sample_id != b.sample_id || a.split != b.split || a.domain != b.domain ||
      a.label != b.label || a.vector.size() != b.vector.size()) {
    return false;
  }
  return a.vector.empty() ||
         std::memcmp(a.vector.data(), b.vector.data(), a.vector.size() * sizeof(float)) == 0;
}

std::optional<std::uint32_t> DatasetManifest::find_class(std::string_view name) const {
  const auto it = std::find(class_table.begin(), class_table.end(), name);
  if (it == class_table.end()) return std::nullopt;
  return static_cast<std::uint32_t>(it - class_table.begin());
}

std::uint32_t DatasetManifest::class_index(std::string_view name) const {
  if (auto idx = find_class(name)) return *idx;
  throw Error(ErrorCode::kUnknownClass, "unknown class " + single_quoted(name));
}

void validate(const DatasetManifest& manifest) {
  check_header(manifest.format_version, manifest.dimension, manifest.class_table);
  RecordChecker checker(manifest.dimension, manifest.class_table.size());
  for (std::size_t i = 0; i < manifest.records.size(); ++i) checker.check(manifest.records[i], i);
}

std::string encode_manifest(const DatasetManifest& manifest) {
  ByteWriter w;
  w.raw(kMagic, sizeof(kMagic));
  w.integer(manifest.format_version);
  w.integer(manifest.dimension);
  w.integer(static_cast<std::uint32_t>(manifest.class_table.size()));
  for (const auto& name : manifest.class_table) w.str16(name, "class name");
  w.integer(static_cast<std::uint64_t>(manifest.records.size()));
  for (const auto& r : manifest.records) {
    w.str16(r.sample_id, "sample_id");
    w.integer(static_cast<std::uint8_t>(r.split));
    w.str16(r.domain, "domain tag");
    w.integer(r.label);
    for (float v : r.vector) w.f32(v);
  }
  return w.take();
}

DatasetManifest decode_manifest(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(ErrorCode::kCorruptHeader, "missing EMBM magic");
  }
  ByteReader r(bytes.substr(sizeof(kMagic)));
  DatasetManifest m;
  m.format_version = r.integer<std::uint16_t>();
  m.dimension = r.integer<std::uint32_t>();
  const auto class_count = r.integer<std::uint32_t>();
  // Each class name takes at least two bytes.
  if (class_count > r.remaining() / 2) {
    throw Error(ErrorCode::kCorruptHeader, "class_count exceeds file size");
  }
  m.class_table.reserve(class_count);
  for (std::uint32_t i = 0; i < class_count; ++i) m.class_table.push_back(r.str16());
  check_header(m.format_version, m.dimension, m.class_table);

  const auto record_count = r.integer<std::uint64_t>();
  const std::uint64_t min_record_bytes = 2 + 1 + 2 + 4 + 4ULL * m.dimension;
  if (record_count > r.remaining() / min_record_bytes) {
    throw Error(ErrorCode::kCorruptHeader, "record_count exceeds file size");
  }
  m.records.reserve(record_count);
  RecordChecker checker(m.dimension, m.class_table.size());
  for (std::uint64_t i = 0; i < record_count; ++i) {
    r.set_context(ErrorCode::kCorruptRecord, "record " + std::to_string(i));
    EmbeddingRecord rec;
    rec.sample_id = r.str16();
    const std::string who = "record " + std::to_string(i) + " " + single_quoted(rec.sample_id);
    r.set_context(ErrorCode::kCorruptRecord, who);
    rec.split = split_from_byte(r.integer<std::uint8_t>(), who);
    rec.domain = r.str16();
    rec.label = r.integer<std::uint32_t>();
    rec.vector.resize(m.dimension);
    for (auto& v : rec.vector) v = r.f32();
    checker.check(rec, i);
    m.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) {
    throw Error(ErrorCode::kCorruptRecord,
                std::to_string(r.remaining()) + " trailing bytes after last record");
  }
  return m;
}

void write_manifest_jsonl(const DatasetManifest& manifest, std::ostream& out) {
  nlohmann::json header = {{"format", "EMBM"},
                           {"format_version", manifest.format_version},
                           {"dimension", manifest.dimension},
                           {"class_table", manifest.class_table}};
  out << header.dump() << '\n';
  for (const auto& r : manifest.records) {
    nlohmann::json line = {{"sample_id", r.sample_id},
                           {"split", split_name(r.split)},
                           {"domain", r.domain},
                           {"label", manifest.class_table.at(r.label)},
                           {"vector", r.vector}};
    out << line.dump() << '\n';
  }
}

DatasetManifest read_manifest_jsonl(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
    }
    return false;
  };

  if (!next_line()) throw Error(ErrorCode::kCorruptHeader, "empty JSON-lines manifest");
  DatasetManifest m;
  try {
    const auto header = nlohmann::json::parse(line);
    m.format_version = header.at("format_version").get<std::uint16_t>();
    m.dimension = header.at("dimension").get<std::uint32_t>();
    m.class_table = header.at("class_table").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptHeader, std::string("JSON-lines header: ") + e.what());
  }
  check_header(m.format_version, m.dimension, m.class_table);

  std::unordered_map<std::string, std::uint32_t> index;
  for (std::uint32_t i = 0; i < m.class_table.size(); ++i) index.emplace(m.class_table[i], i);

  RecordChecker checker(m.dimension, m.class_table.size());
  while (next_line()) {
    const std::size_t position = m.records.size();
    EmbeddingRecord rec;
    std::string label;
    try {
      const auto obj = nlohmann::json::parse(line);
      rec.sample_id = obj.at("sample_id").get<std::string>();
      rec.split = parse_split(obj.at("split").get<std::string>());
      rec.domain = obj.value("domain", std::string());
      label = obj.at("label").get<std::string>();
      const auto& values = obj.at("vector");
      rec.vector.reserve(values.size());
      for (const auto& v : values) {
        // Non-finite values cannot be written in JSON; null stands in for them.
        rec.vector.push_back(v.is_null() ? std::nanf("") : static_cast<float>(v.get<double>()));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kCorruptRecord,
                  "line " + std::to_string(line_no) + ": " + e.what());
    }
    const auto it = index.find(label);
    if (it == index.end()) {
      throw Error(ErrorCode::kUnknownLabel, "record " + std::to_string(position) + " " +
                                                single_quoted(rec.sample_id) + ": unknown label " +
                                                single_quoted(label));
    }
    rec.label = it->second;
    checker.check(rec, position);
    m.records.push_back(std::move(rec));
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() >= sizeof(kMagic) && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0) {
    return decode_manifest(bytes);
  }
  const auto first = bytes.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && bytes[first] == '{') {
    std::istringstream in(bytes);
    return read_manifest_jsonl(in);
  }
  throw Error(ErrorCode::kCorruptHeader, path.string() + ": missing EMBM magic");
}

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  validate(manifest);
  detail::write_file(path, encode_manifest(manifest));
}

RecordView view(const DatasetManifest& manifest, std::optional<Split> split,
                const std::optional<std::vector<std::string>>& classes) {
  std::vector<bool> wanted(manifest.class_table.size(), !classes.has_value());
  if (classes) {
    for (const auto& name : *classes) wanted[manifest.class_index(name)] = true;
  }
  std::vector<const EmbeddingRecord*> selected;
  for (const auto& r : manifest.records) {
    if (split && r.split != *split) continue;
    if (!wanted[r.label]) continue;
    selected.push_back(&r);
  }
  return RecordView(manifest, std::move(selected));
}

std::vector<std::string> present_classes(const RecordView& records) {
  std::vector<bool> seen(records.manifest().class_table.size(), false);
  for (const EmbeddingRecord* r : records) seen[r->label] = true;
  std::vector<std::string> out;
  for (std::size_t c = 0; c < seen.size(); ++c) {
    if (seen[c]) out.push_back(records.manifest().class_table[c]);
  }
  return out;
}

}  // namespace fewshot
