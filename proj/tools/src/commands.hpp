#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fewshot::cli {

/// Bad flag values detected after parsing; reported with the usage exit code.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

struct GenSyntheticArgs {
  std::string kind = "gaussian";
  std::size_t classes = 8;
  std::size_t novel_classes = 8;
  std::size_t samples = 100;
  std::size_t dim = 16;
  double separation = 10.0;
  double noise = 1.0;
  double train_fraction = 0.6;
  double validation_fraction = 0.2;
  bool shuffle_labels = false;
  std::optional<std::uint64_t> seed;
  std::string format = "binary";
  std::string out;
};

struct ValidateArgs {
  std::string manifest;
};

struct BuildSubsetArgs {
  std::string source;
  std::size_t cap = 600;
  std::size_t min = 600;
  std::optional<std::string> exclude_file;
  std::vector<std::string> exclude;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::string> report;
};

struct TrainArgs {
  std::string manifest;
  std::string split = "train";
  std::size_t n = 8;
  std::size_t k = 5;
  std::string q = "15";
  std::size_t epochs = 100;
  std::size_t episodes = 2000;
  std::optional<double> lr;
  std::size_t lr_step = 10;
  double lr_gamma = 0.1;
  double temp = 0.07;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> init_head;
  std::optional<std::size_t> out_dim;
  bool bias = false;
  std::string out_head;
  std::optional<std::string> log;
};

struct EvalFslArgs {
  std::string manifest;
  std::string split = "test";
  std::optional<std::string> head;
  std::size_t n = 8;
  std::size_t k = 5;
  std::string q = "15";
  std::size_t episodes = 10000;
  double temp = 0.07;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> report;
  std::optional<std::string> log;
  std::size_t workers = 0;
};

struct EvalComparableArgs {
  std::string support_manifest;
  std::string support_split = "validation";
  std::optional<std::string> query_manifest;
  std::string query_split = "test";
  std::optional<std::string> head;
  std::size_t n = 8;
  std::size_t k = 5;
  std::size_t episodes = 10000;
  double temp = 0.07;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> report;
  std::optional<std::string> log;
  std::size_t workers = 0;
};

struct CollapseArgs {
  std::string log;
  std::string map;
  std::optional<std::string> report;
};

struct ExportConfusionArgs {
  std::string report;
  std::optional<std::string> csv;
  std::optional<std::string> svg;
};

struct DumpEmbeddingsArgs {
  std::string manifest;
  std::optional<std::string> split;
  std::optional<std::string> head;
  bool normalize = false;
  std::string out;
};

void gen_synthetic(const GenSyntheticArgs& args, Streams io);
void validate_manifest(const ValidateArgs& args, Streams io);
void build_subset(const BuildSubsetArgs& args, Streams io);
void train(const TrainArgs& args, Streams io);
void eval_fsl(const EvalFslArgs& args, Streams io);
void eval_comparable(const EvalComparableArgs& args, Streams io);
void collapse(const CollapseArgs& args, Streams io);
void export_confusion(const ExportConfusionArgs& args, Streams io);
void dump_embeddings(const DumpEmbeddingsArgs& args, Streams io);

}  // namespace fewshot::cli
