#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "confusion_export.hpp"
#include "digest.hpp"
#include "fewshot/embedding_store.hpp"
#include "fewshot/error.hpp"
#include "fewshot/evaluation.hpp"
#include "fewshot/meta_trainer.hpp"
#include "fewshot/subset_builder.hpp"
#include "fewshot/synthetic.hpp"

namespace fewshot::cli {

namespace {

using nlohmann::ordered_json;

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "write to '" + path + "' failed");
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for writing");
  return out;
}

ordered_json file_echo(const std::string& path) {
  return {{"path", path}, {"sha256", sha256_file(path)}};
}

struct Seed {
  std::uint64_t value;
  const char* source;
};

/// A missing seed is drawn from the OS and announced, never left implicit.
Seed resolve_seed(const std::optional<std::uint64_t>& given, Streams io) {
  if (given) return {*given, "given"};
  std::random_device rd;
  const std::uint64_t value = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
  ordered_json notice;
  notice["notice"] = "seed_drawn";
  notice["seed"] = value;
  io.err << notice.dump() << '\n';
  return {value, "drawn"};
}

QueryCount parse_queries(const std::string& text) {
  if (text == "all") return QueryCount::all_remaining();
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != text.size() || pos == 0 || n == 0 || text[0] == '-') {
    throw UsageError("--q must be a positive integer or 'all', got '" + text + "'");
  }
  return QueryCount::per_class(static_cast<std::size_t>(n));
}

ordered_json queries_json(QueryCount q) {
  return q.is_all_remaining() ? ordered_json("all") : ordered_json(q.count());
}

/// The given head, or the identity map when none is supplied.
std::pair<ProjectionHead, ordered_json> head_or_identity(const std::optional<std::string>& path,
                                                         std::size_t dim) {
  if (!path) return {ProjectionHead::identity(dim), ordered_json{{"identity", dim}}};
  ProjectionHead head = load_head(*path);
  if (head.in_dim() != dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "head expects input dimension " + std::to_string(head.in_dim()) +
                    " but the manifest has dimension " + std::to_string(dim));
  }
  return {std::move(head), file_echo(*path)};
}

void emit_report(const EvaluationReport& report, const std::optional<std::string>& path,
                 Streams io) {
  const std::string text = report_to_json(report);
  if (!path) {
    io.out << text;
    return;
  }
  write_text(*path, text);
  char line[160];
  std::snprintf(line, sizeof(line), "%s: accuracy %.4f +/- %.4f over %zu episodes", report.protocol.c_str(),
                report.accuracy.mean, report.accuracy.ci95, report.episodes);
  io.out << line;
  if (report.protocol != "fsl") {
    std::snprintf(line, sizeof(line), ", balanced %.4f +/- %.4f", report.balanced_accuracy.mean,
                  report.balanced_accuracy.ci95);
    io.out << line;
  }
  io.out << '\n';
}

std::vector<std::string> read_exclusions(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    names.push_back(line.substr(first, last - first + 1));
  }
  return names;
}

class EpisodeLogWriter {
 public:
  EpisodeLogWriter(const std::optional<std::string>& path, std::string_view protocol,
                   std::vector<std::string> labels)
      : labels_(std::move(labels)) {
    if (!path) return;
    file_ = open_output(*path);
    write_log_header(file_, protocol, labels_);
  }
  void attach(EvaluationOptions& options) {
    if (!file_.is_open()) return;
    options.on_episode = [this](const EpisodeResult& r, const Episode&) {
      write_log_episode(file_, r, labels_);
    };
  }
  void close() {
    if (!file_.is_open()) return;
    file_.close();
    if (!file_) throw Error(ErrorCode::kIo, "failed writing prediction log");
  }

 private:
  std::vector<std::string> labels_;
  std::ofstream file_;
};

}  // namespace

void gen_synthetic(const GenSyntheticArgs& args, Streams io) {
  const Seed seed = resolve_seed(args.seed, io);
  DatasetManifest manifest;
  if (args.kind == "gaussian") {
    SyntheticSpec spec;
    spec.classes = args.classes;
    spec.samples_per_class = args.samples;
    spec.dim = args.dim;
    spec.separation = args.separation;
    spec.noise = args.noise;
    spec.train_fraction = args.train_fraction;
    spec.validation_fraction = args.validation_fraction;
    spec.shuffle_labels = args.shuffle_labels;
    spec.seed = seed.value;
    manifest = generate_gaussian_clusters(spec);
  } else {
    RotatedClusterSpec spec;
    spec.base_classes = args.classes;
    spec.novel_classes = args.novel_classes;
    spec.samples_per_class = args.samples;
    spec.dim = args.dim;
    spec.nuisance_noise = args.noise;
    spec.seed = seed.value;
    manifest = generate_rotated_clusters(spec).manifest;
  }
  if (args.format == "jsonl") {
    std::ofstream out = open_output(args.out);
    write_manifest_jsonl(manifest, out);
    out.close();
    if (!out) throw Error(ErrorCode::kIo, "write to '" + args.out + "' failed");
  } else {
    save_manifest(manifest, args.out);
  }
  ordered_json summary;
  summary["out"] = file_echo(args.out);
  summary["kind"] = args.kind;
  summary["format"] = args.format;
  summary["classes"] = manifest.class_table.size();
  summary["records"] = manifest.records.size();
  summary["dimension"] = manifest.dimension;
  summary["seed"] = seed.value;
  summary["seed_source"] = seed.source;
  io.out << summary.dump() << '\n';
}

void validate_manifest(const ValidateArgs& args, Streams io) {
  const DatasetManifest m = load_manifest(args.manifest);
  std::map<Split, std::size_t> splits;
  std::vector<std::size_t> per_class(m.class_table.size(), 0);
  for (const auto& r : m.records) {
    ++splits[r.split];
    ++per_class[r.label];
  }
  ordered_json j;
  j["valid"] = true;
  j["manifest"] = file_echo(args.manifest);
  j["format"] = read_text(args.manifest).rfind("EMBM", 0) == 0 ? "binary" : "jsonl";
  j["format_version"] = m.format_version;
  j["dimension"] = m.dimension;
  j["classes"] = m.class_table.size();
  j["records"] = m.records.size();
  ordered_json split_counts = ordered_json::object();
  for (Split s : {Split::kTrain, Split::kValidation, Split::kTest}) {
    split_counts[std::string(split_name(s))] = splits[s];
  }
  j["splits"] = split_counts;
  ordered_json class_counts = ordered_json::object();
  for (std::size_t c = 0; c < m.class_table.size(); ++c) class_counts[m.class_table[c]] = per_class[c];
  j["class_sizes"] = class_counts;
  io.out << j.dump(2) << '\n';
}

void build_subset(const BuildSubsetArgs& args, Streams io) {
  const Seed seed = resolve_seed(args.seed, io);
  const DatasetManifest source = load_manifest(args.source);
  SubsetSpec spec;
  spec.per_class_cap = args.cap;
  spec.min_class_size = args.min;
  spec.seed = seed.value;
  spec.excluded_classes = args.exclude;
  if (args.exclude_file) {
    const auto more = read_exclusions(*args.exclude_file);
    spec.excluded_classes.insert(spec.excluded_classes.end(), more.begin(), more.end());
  }
  const auto [manifest, report] = fewshot::build_subset(source, spec);
  save_manifest(manifest, args.out);

  ordered_json j;
  j["source"] = file_echo(args.source);
  j["output"] = file_echo(args.out);
  if (args.exclude_file) j["exclude_file"] = file_echo(*args.exclude_file);
  j["per_class_cap"] = report.per_class_cap;
  j["min_class_size"] = report.min_class_size;
  j["seed"] = report.seed;
  j["seed_source"] = seed.source;
  j["sampling"] = report.sampling;
  j["retained_class_count"] = report.retained_class_count;
  j["retained_records"] = manifest.records.size();
  j["retained_classes"] = report.retained_classes;
  ordered_json dropped = ordered_json::array();
  for (const auto& d : report.dropped) {
    dropped.push_back({{"name", d.name}, {"reason", drop_reason_name(d.reason)}, {"available", d.available}});
  }
  j["dropped"] = dropped;
  j["unknown_exclusions"] = report.unknown_exclusions;
  const std::string text = j.dump(2) + "\n";
  if (args.report) {
    write_text(*args.report, text);
    io.out << "retained " << report.retained_class_count << " classes, dropped " << report.dropped.size()
           << '\n';
  } else {
    io.out << text;
  }
}

void train(const TrainArgs& args, Streams io) {
  if (!args.lr) throw UsageError("--lr is required (no default initial learning rate)");
  TrainConfig config;
  config.epochs = args.epochs;
  config.episodes_per_epoch = args.episodes;
  config.n_way = args.n;
  config.k_shot = args.k;
  config.queries = parse_queries(args.q);
  config.learning_rate = *args.lr;
  config.lr_decay = args.lr_gamma;
  config.lr_step_epochs = args.lr_step;
  config.temperature = args.temp;
  try {
    validate(config);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const Seed seed = resolve_seed(args.seed, io);
  config.seed = seed.value;

  const DatasetManifest manifest = load_manifest(args.manifest);
  const RecordView base = view(manifest, parse_split(args.split));
  ProjectionHead initial = args.init_head
                               ? load_head(*args.init_head)
                               : ProjectionHead::identity(manifest.dimension,
                                                          args.out_dim.value_or(manifest.dimension),
                                                          args.bias);

  ordered_json echo;
  echo["split"] = args.split;
  echo["n_way"] = config.n_way;
  echo["k_shot"] = config.k_shot;
  echo["queries_per_class"] = queries_json(config.queries);
  echo["epochs"] = config.epochs;
  echo["episodes_per_epoch"] = config.episodes_per_epoch;
  echo["learning_rate"] = config.learning_rate;
  echo["lr_decay"] = config.lr_decay;
  echo["lr_step_epochs"] = config.lr_step_epochs;
  echo["temperature"] = config.temperature;
  echo["seed"] = config.seed;
  echo["seed_source"] = seed.source;
  echo["head"] = {{"out_dim", initial.out_dim()}, {"in_dim", initial.in_dim()}, {"bias", initial.has_bias()}};
  ordered_json inputs;
  inputs["manifest"] = file_echo(args.manifest);
  inputs["init_head"] = args.init_head ? file_echo(*args.init_head) : ordered_json("identity");
  echo["inputs"] = inputs;

  const auto result = fewshot::train(base, config, std::move(initial), [&](const EpochLog& e) {
    ordered_json line;
    line["epoch"] = e.epoch;
    line["loss"] = round_sig6(e.mean_loss);
    line["accuracy"] = round_sig6(e.mean_accuracy);
    line["lr"] = round_sig6(e.learning_rate);
    line["seconds"] = round_sig6(e.seconds);
    io.out << line.dump() << '\n';
    io.out.flush();
  });
  save_head(result.head, args.out_head);

  if (args.log) {
    ordered_json log;
    log["config"] = echo;
    ordered_json epochs = ordered_json::array();
    for (const auto& e : result.log.epochs) {
      epochs.push_back({{"epoch", e.epoch},
                        {"mean_loss", round_sig6(e.mean_loss)},
                        {"mean_accuracy", round_sig6(e.mean_accuracy)},
                        {"learning_rate", round_sig6(e.learning_rate)},
                        {"seconds", round_sig6(e.seconds)}});
    }
    log["epochs"] = epochs;
    log["output_head"] = file_echo(args.out_head);
    write_text(*args.log, log.dump(2) + "\n");
  }
}

void eval_fsl(const EvalFslArgs& args, Streams io) {
  const QueryCount queries = parse_queries(args.q);
  const Seed seed = resolve_seed(args.seed, io);
  const DatasetManifest manifest = load_manifest(args.manifest);
  const RecordView pool = view(manifest, parse_split(args.split));
  const auto [head, head_echo] = head_or_identity(args.head, manifest.dimension);

  EvaluationOptions options;
  options.workers = args.workers;
  EpisodeLogWriter log(args.log, "fsl", present_classes(pool));
  log.attach(options);
  EvaluationReport report = run_fsl_protocol(pool, head, {args.temp}, args.episodes,
                                             {args.n, args.k, queries, 0, seed.value}, options);
  log.close();
  report.config["split"] = args.split;
  report.config["seed_source"] = seed.source;
  report.config["inputs"] = {{"manifest", file_echo(args.manifest)}, {"head", head_echo}};
  emit_report(report, args.report, io);
}

void eval_comparable(const EvalComparableArgs& args, Streams io) {
  const Seed seed = resolve_seed(args.seed, io);
  const DatasetManifest support_manifest = load_manifest(args.support_manifest);
  std::optional<DatasetManifest> separate_query;
  if (args.query_manifest && *args.query_manifest != args.support_manifest) {
    separate_query = load_manifest(*args.query_manifest);
  }
  const DatasetManifest& query_manifest = separate_query ? *separate_query : support_manifest;
  if (query_manifest.dimension != support_manifest.dimension) {
    throw Error(ErrorCode::kDimensionMismatch, "support and query manifests differ in dimension");
  }
  const RecordView support = view(support_manifest, parse_split(args.support_split));
  const RecordView query = view(query_manifest, parse_split(args.query_split));
  const auto [head, head_echo] = head_or_identity(args.head, support_manifest.dimension);

  EvaluationOptions options;
  options.workers = args.workers;
  EpisodeLogWriter log(args.log, "comparable", present_classes(support));
  log.attach(options);
  EvaluationReport report =
      run_comparable_protocol(support, query, head, {args.temp}, args.episodes,
                              {args.n, args.k, QueryCount::per_class(0), 0, seed.value}, options);
  log.close();
  report.config["support_split"] = args.support_split;
  report.config["query_split"] = args.query_split;
  report.config["seed_source"] = seed.source;
  ordered_json inputs;
  inputs["support_manifest"] = file_echo(args.support_manifest);
  inputs["query_manifest"] = file_echo(args.query_manifest.value_or(args.support_manifest));
  inputs["head"] = head_echo;
  report.config["inputs"] = inputs;
  emit_report(report, args.report, io);
}

void collapse(const CollapseArgs& args, Streams io) {
  std::map<std::string, Polarity> mapping;
  try {
    const auto j = nlohmann::json::parse(read_text(args.map));
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "label map must be a JSON object");
    for (const auto& [label, value] : j.items()) {
      const std::string v = value.is_string() ? value.get<std::string>() : std::string();
      if (v == "pos" || v == "positive") {
        mapping[label] = Polarity::kPositive;
      } else if (v == "neg" || v == "negative") {
        mapping[label] = Polarity::kNegative;
      } else {
        throw Error(ErrorCode::kInvalidArgument,
                    "label map value for '" + label + "' must be \"pos\" or \"neg\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("label map: ") + e.what());
  }
  std::ifstream in(args.log, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + args.log + "'");
  const PredictionLog log = read_prediction_log(in);
  EvaluationReport report = collapse_labels(log, mapping);
  report.config["inputs"] = {{"log", file_echo(args.log)}, {"map", file_echo(args.map)}};
  emit_report(report, args.report, io);
}

void export_confusion(const ExportConfusionArgs& args, Streams io) {
  if (!args.csv && !args.svg) throw UsageError("give --csv and/or --svg");
  const EvaluationReport report = report_from_json(read_text(args.report));
  if (args.csv) write_text(*args.csv, confusion_csv(report));
  if (args.svg) write_text(*args.svg, confusion_svg(report));
  io.out << "exported " << report.labels.size() << "x" << report.labels.size() << " confusion matrix\n";
}

void dump_embeddings(const DumpEmbeddingsArgs& args, Streams io) {
  const DatasetManifest manifest = load_manifest(args.manifest);
  const RecordView records =
      args.split ? view(manifest, parse_split(*args.split)) : view(manifest);
  const auto [head, head_echo] = head_or_identity(args.head, manifest.dimension);
  std::ofstream out = open_output(args.out);
  out << "sample_id,label,split,domain";
  for (std::size_t d = 0; d < head.out_dim(); ++d) out << ",e" << d;
  out << '\n';
  auto field = [](const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  };
  char buf[32];
  for (const EmbeddingRecord* r : records) {
    std::vector<double> z = project(head, std::span<const float>(r->vector));
    if (args.normalize) z = normalized(z);
    out << field(r->sample_id) << ',' << field(manifest.class_name(*r)) << ',' << split_name(r->split)
        << ',' << field(r->domain);
    for (double v : z) {
      std::snprintf(buf, sizeof(buf), "%.9g", v);
      out << ',' << buf;
    }
    out << '\n';
  }
  out.close();
  if (!out) throw Error(ErrorCode::kIo, "write to '" + args.out + "' failed");
  io.out << "wrote " << records.size() << " rows of dimension " << head.out_dim() << '\n';
}

}  // namespace fewshot::cli
