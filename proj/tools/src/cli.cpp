#include "cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <functional>
#include <ostream>

#include "commands.hpp"
#include "fewshot/error.hpp"

namespace fewshot::cli {

namespace {

const std::vector<std::string> kSplits{"train", "validation", "val", "test"};

void report_error(std::ostream& err, std::string_view code, std::string_view message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", code}, {"message", message}};
  err << j.dump() << '\n';
}

CLI::Option* add_seed(CLI::App* sub, std::optional<std::uint64_t>& seed) {
  return sub->add_option("--seed", seed, "Master seed (drawn at random and recorded when omitted)");
}

CLI::Option* add_split(CLI::App* sub, const std::string& flag, std::string& value,
                       const std::string& help) {
  return sub->add_option(flag, value, help)->check(CLI::IsMember(kSplits))->capture_default_str();
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app("Embedding-space few-shot evaluation and episodic training", "fewshot");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  Streams io{out, err};
  std::function<void()> action;

  GenSyntheticArgs gen;
  {
    auto* sub = app.add_subcommand("gen-synthetic", "Write a synthetic Gaussian-cluster manifest");
    sub->add_option("--kind", gen.kind, "gaussian clusters, or rotated 2-D structure in --dim space")
        ->check(CLI::IsMember({"gaussian", "rotated"}))
        ->capture_default_str();
    sub->add_option("--classes", gen.classes, "Class count (base classes for --kind rotated)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--novel-classes", gen.novel_classes, "Novel (test split) classes for --kind rotated")
        ->capture_default_str();
    sub->add_option("--samples", gen.samples, "Samples per class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--dim", gen.dim, "Embedding dimension")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--separation", gen.separation, "Distance of cluster centres from the origin")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--noise", gen.noise, "Per-coordinate noise standard deviation")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--train-frac", gen.train_fraction, "Fraction of each class tagged train")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sub->add_option("--val-frac", gen.validation_fraction, "Fraction of each class tagged validation")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    sub->add_flag("--shuffle-labels", gen.shuffle_labels, "Permute labels so they carry no signal");
    add_seed(sub, gen.seed);
    sub->add_option("--format", gen.format, "Output encoding")
        ->check(CLI::IsMember({"binary", "jsonl"}))
        ->capture_default_str();
    sub->add_option("--out", gen.out, "Output manifest path")->required();
    sub->callback([&] { action = [&] { gen_synthetic(gen, io); }; });
  }

  ValidateArgs val;
  {
    auto* sub = app.add_subcommand("validate-manifest", "Check a manifest and print a summary");
    sub->add_option("--manifest", val.manifest, "Manifest (binary or JSON lines)")->required();
    sub->callback([&] { action = [&] { validate_manifest(val, io); }; });
  }

  BuildSubsetArgs subset;
  {
    auto* sub = app.add_subcommand("build-subset", "Build a capped, class-balanced base set");
    sub->add_option("--source", subset.source, "Source manifest")->required();
    sub->add_option("--cap", subset.cap, "Records kept per class")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--min", subset.min, "Classes with fewer records are dropped")->capture_default_str();
    sub->add_option("--exclude-file", subset.exclude_file, "Text file, one excluded class per line");
    sub->add_option("--exclude", subset.exclude, "Excluded class (repeatable)");
    add_seed(sub, subset.seed);
    sub->add_option("--out", subset.out, "Output manifest path")->required();
    sub->add_option("--report", subset.report, "Build report JSON (stdout when omitted)");
    sub->callback([&] { action = [&] { build_subset(subset, io); }; });
  }

  TrainArgs tr;
  {
    auto* sub = app.add_subcommand("train", "Episodic training of a linear projection head");
    sub->add_option("--manifest", tr.manifest, "Base-set manifest")->required();
    add_split(sub, "--split", tr.split, "Split to train on");
    sub->add_option("--n", tr.n, "Ways per episode")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--k", tr.k, "Shots per class")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--q", tr.q, "Queries per class, or 'all'")->capture_default_str();
    sub->add_option("--epochs", tr.epochs, "Epochs")->capture_default_str();
    sub->add_option("--episodes", tr.episodes, "Episodes per epoch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--lr", tr.lr, "Initial learning rate (required)");
    sub->add_option("--lr-step", tr.lr_step, "Epochs between decays")->capture_default_str();
    sub->add_option("--lr-gamma", tr.lr_gamma, "Decay factor")->capture_default_str();
    sub->add_option("--temp", tr.temp, "Softmax temperature")->capture_default_str();
    add_seed(sub, tr.seed);
    sub->add_option("--init-head", tr.init_head, "Starting head (identity when omitted)");
    sub->add_option("--out-dim", tr.out_dim, "Output dimension of a fresh identity head")
        ->check(CLI::PositiveNumber);
    sub->add_flag("--bias", tr.bias, "Give a fresh head a bias vector");
    sub->add_option("--out-head", tr.out_head, "Trained head output path")->required();
    sub->add_option("--log", tr.log, "Training log JSON");
    sub->callback([&] { action = [&] { train(tr, io); }; });
  }

  EvalFslArgs fsl;
  {
    auto* sub = app.add_subcommand("eval-fsl", "Standard N-way K-shot evaluation");
    sub->add_option("--manifest", fsl.manifest, "Manifest")->required();
    add_split(sub, "--split", fsl.split, "Split to sample from");
    sub->add_option("--head", fsl.head, "Projection head (identity when omitted)");
    sub->add_option("--n", fsl.n, "Ways per episode")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--k", fsl.k, "Shots per class")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--q", fsl.q, "Queries per class, or 'all'")->capture_default_str();
    sub->add_option("--episodes", fsl.episodes, "Episode count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--temp", fsl.temp, "Softmax temperature")->capture_default_str();
    add_seed(sub, fsl.seed);
    sub->add_option("--report", fsl.report, "Report JSON (stdout when omitted)");
    sub->add_option("--log", fsl.log, "Per-query prediction log (JSON lines)");
    sub->add_option("--workers", fsl.workers, "Worker threads, 0 = all cores")->capture_default_str();
    sub->callback([&] { action = [&] { eval_fsl(fsl, io); }; });
  }

  EvalComparableArgs cmp;
  {
    auto* sub = app.add_subcommand(
        "eval-comparable", "Fresh supports each episode, whole query pool classified every time");
    sub->add_option("--support-manifest", cmp.support_manifest, "Manifest holding support records")
        ->required();
    add_split(sub, "--support-split", cmp.support_split, "Support split");
    sub->add_option("--query-manifest", cmp.query_manifest,
                    "Manifest holding queries (defaults to the support manifest)");
    add_split(sub, "--query-split", cmp.query_split, "Query split");
    sub->add_option("--head", cmp.head, "Projection head (identity when omitted)");
    sub->add_option("--n", cmp.n, "Ways per episode")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--k", cmp.k, "Shots per class")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--episodes", cmp.episodes, "Episode count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--temp", cmp.temp, "Softmax temperature")->capture_default_str();
    add_seed(sub, cmp.seed);
    sub->add_option("--report", cmp.report, "Report JSON (stdout when omitted)");
    sub->add_option("--log", cmp.log, "Per-query prediction log (JSON lines)");
    sub->add_option("--workers", cmp.workers, "Worker threads, 0 = all cores")->capture_default_str();
    sub->callback([&] { action = [&] { eval_comparable(cmp, io); }; });
  }

  CollapseArgs col;
  {
    auto* sub = app.add_subcommand("collapse", "Re-score a prediction log under a binary label map");
    sub->add_option("--log", col.log, "Prediction log from eval-fsl or eval-comparable")->required();
    sub->add_option("--map", col.map, "JSON object: label -> \"pos\" | \"neg\"")->required();
    sub->add_option("--report", col.report, "Report JSON (stdout when omitted)");
    sub->callback([&] { action = [&] { collapse(col, io); }; });
  }

  ExportConfusionArgs exp;
  {
    auto* sub = app.add_subcommand("export-confusion", "Write a report's confusion matrix as CSV/SVG");
    sub->add_option("--report", exp.report, "Evaluation report JSON")->required();
    sub->add_option("--csv", exp.csv, "CSV output path");
    sub->add_option("--svg", exp.svg, "SVG heatmap output path");
    sub->callback([&] { action = [&] { export_confusion(exp, io); }; });
  }

  DumpEmbeddingsArgs dump;
  {
    auto* sub = app.add_subcommand("dump-embeddings", "Export projected vectors and labels as CSV");
    sub->add_option("--manifest", dump.manifest, "Manifest")->required();
    sub->add_option("--split", dump.split, "Only this split")->check(CLI::IsMember(kSplits));
    sub->add_option("--head", dump.head, "Projection head (identity when omitted)");
    sub->add_flag("--normalize", dump.normalize, "L2-normalize each projected vector");
    sub->add_option("--out", dump.out, "CSV output path")->required();
    sub->callback([&] { action = [&] { dump_embeddings(dump, io); }; });
  }

  if (args.size() > 1 && !args[1].empty() && args[1][0] != '-') {
    const auto subs = app.get_subcommands([&](CLI::App* s) { return s->get_name() == args[1]; });
    if (subs.empty()) {
      report_error(err, "usage", "unknown subcommand '" + args[1] + "'");
      return kExitUsage;
    }
  }

  std::vector<std::string> reversed(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    report_error(err, "usage", e.what());
    return kExitUsage;
  }

  try {
    if (action) action();
    return kExitOk;
  } catch (const UsageError& e) {
    report_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    report_error(err, error_code_name(e.code()), e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    report_error(err, "internal", e.what());
    return kExitRuntime;
  }
}

}  // namespace fewshot::cli
