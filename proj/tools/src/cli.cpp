// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The FuDoBa Authors

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fudoba/analysis.hpp"
#include "fudoba/bayesopt.hpp"
#include "fudoba/config.hpp"
#include "fudoba/embed_client.hpp"
#include "fudoba/embedding_store.hpp"
#include "fudoba/error.hpp"
#include "fudoba/evaluator.hpp"
#include "fudoba/fusion.hpp"
#include "fudoba/io_util.hpp"
#include "fudoba/random.hpp"

namespace fudoba::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

constexpr const char* kMethodFudoba = "FuDoBa";
constexpr const char* kMethodConcat = "FuDoBa-CP";

/// Options shared by every subcommand; unset values leave the config file
/// (or the built-in default) in charge.
struct GlobalFlags {
  std::optional<std::string> config;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::string> labels;
  std::vector<std::string> modalities;  // name=path
  std::optional<double> w1;
  std::optional<double> w2;
  bool quiet = false;
};

struct FuseFlags {
  std::optional<std::string> theta;
  std::string strategy = "fudoba";
  int cp_dim = kConcatProjectDefaultDim;
};

struct OptimizeFlags {
  std::optional<int> budget;
  std::optional<int> n_init;
  std::optional<int> folds;
  std::optional<std::string> resume;
  std::string strategy = "fudoba";
  int cp_dim = kConcatProjectDefaultDim;
  std::optional<std::string> method;
};

struct CompareFlags {
  std::string scores;
  double alpha = 0.05;
  bool iman_davenport = false;
  std::optional<std::string> output;
  std::optional<std::string> json;
};

struct EmbedFlags {
  std::string docs;
  std::optional<std::string> base_url;
  std::optional<std::string> model;
  std::optional<int> batch_size;
  std::optional<int> timeout;
  std::optional<int> max_retries;
  std::optional<std::string> cache_dir;
  std::string output;
  std::string modality = "llm";
};

struct ReportFlags {
  std::vector<std::string> runs;
  std::string format = "md";
  std::optional<std::string> output;
};

ExperimentConfig resolve_config(const GlobalFlags& g) {
  ExperimentConfig cfg;
  if (g.config) {
    if (!fs::exists(*g.config)) {
      throw Error(ErrorCode::kInvalidArgument, "config file not found: " + *g.config);
    }
    cfg = load_experiment_config(*g.config);
  }
  if (g.threads) cfg.threads = *g.threads;
  if (g.seed) cfg.seed = *g.seed;
  if (g.output_dir) cfg.output_dir = *g.output_dir;
  if (g.labels) cfg.labels = *g.labels;
  if (!g.modalities.empty()) {
    cfg.modalities.clear();
    for (const auto& spec : g.modalities) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::kInvalidArgument, "--modality expects name=path, got " + spec);
      }
      cfg.modalities.emplace_back(spec.substr(0, eq), spec.substr(eq + 1));
    }
  }
  if (g.w1) cfg.norm.w1 = *g.w1;
  if (g.w2) cfg.norm.w2 = *g.w2;
  return cfg;
}

AlignedData load_inputs(const ExperimentConfig& cfg) {
  std::vector<EmbeddingMatrix> matrices;
  for (const auto& [name, path] : cfg.modalities) {
    matrices.push_back(load_embedding_matrix(path, format_from_extension(path), name));
  }
  const auto labels = load_labels(cfg.labels);
  return align_modalities(matrices, labels);
}

std::string dataset_name(const ExperimentConfig& cfg) {
  return cfg.dataset_name.empty() ? cfg.labels.stem().string() : cfg.dataset_name;
}

ordered_json spans_json(const std::vector<ColumnSpan>& spans) {
  ordered_json out = ordered_json::array();
  for (const auto& s : spans) {
    out.push_back({{"modality", s.modality}, {"begin", s.begin}, {"end", s.end}});
  }
  return out;
}

void write_json(const fs::path& path, const ordered_json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

int cmd_fuse(const GlobalFlags& g, const FuseFlags& f, std::ostream& out) {
  auto cfg = resolve_config(g);
  cfg.validate_for_run();
  const bool concat = f.strategy == "cp";
  if (!concat && !f.theta) throw Error(ErrorCode::kInvalidArgument, "fuse needs --theta (or --strategy cp)");
  if (f.theta && !fs::exists(*f.theta)) {
    throw Error(ErrorCode::kInvalidArgument, "theta file not found: " + *f.theta);
  }
  const auto data = load_inputs(cfg);
  const FusedDataset fused = concat ? fuse_concat_project(data.matrices, data.labels, f.cp_dim, cfg.norm)
                                    : fuse(data.matrices, data.labels, load_fusion_config(*f.theta), cfg.norm);

  EmbeddingMatrix x;
  x.modality_name = "fused";
  x.row_ids = fused.row_ids;
  x.data = fused.x;
  fs::create_directories(cfg.output_dir);
  const fs::path matrix_path = cfg.output_dir / "fused.fdb";
  save_embedding_matrix(x, matrix_path, MatrixFormat::kBinary);
  save_labels(fused.labels, cfg.output_dir / "fused_labels.csv");

  ordered_json manifest;
  manifest["dataset"] = dataset_name(cfg);
  manifest["method"] = concat ? kMethodConcat : kMethodFudoba;
  manifest["rows"] = fused.x.rows();
  manifest["l_final"] = fused.x.cols();
  manifest["config"] = concat ? ordered_json::object() : to_json(fused.config);
  manifest["column_spans"] = spans_json(fused.column_spans);
  manifest["norm"] = {{"w1", cfg.norm.w1}, {"w2", cfg.norm.w2}};
  manifest["matrix"] = matrix_path.filename().string();
  manifest["labels"] = "fused_labels.csv";
  write_json(cfg.output_dir / "manifest.json", manifest);
  out << "wrote " << matrix_path.string() << " (" << fused.x.rows() << " x " << fused.x.cols() << ")\n";
  return kExitOk;
}

ReportRow report_row_from_best(const ordered_json& best) {
  ReportRow row;
  row.dataset = best.value("dataset", "");
  row.method = best.value("method", "");
  if (best.contains("config") && !best["config"].empty()) row.config = fusion_config_from_json(best["config"]);
  row.l_final = best.value("l_final", 0);
  if (best.contains("mean_f1")) row.f1 = best["mean_f1"].get<double>();
  if (best.contains("macro_precision")) row.precision = best["macro_precision"].get<double>();
  if (best.contains("macro_recall")) row.recall = best["macro_recall"].get<double>();
  return row;
}

void write_run_outputs(const fs::path& dir, const ordered_json& best, const SoftmaxRegression* model) {
  write_json(dir / "best.json", best);
  if (model) model->save(dir / "model.fdb");
  const std::vector<ReportRow> rows{report_row_from_best(best)};
  emit_report(rows, ReportFormat::kMarkdown, dir / "report.md");
}

int cmd_optimize(const GlobalFlags& g, const OptimizeFlags& f, std::ostream& out) {
  auto cfg = resolve_config(g);
  if (f.budget) cfg.budget = *f.budget;
  if (f.n_init) cfg.n_init = *f.n_init;
  if (f.folds) cfg.folds = *f.folds;
  cfg.validate_for_run();
  const std::uint64_t seed = cfg.require_seed();
  std::vector<TrialRecord> resume;
  if (f.resume) {
    if (!fs::exists(*f.resume)) throw Error(ErrorCode::kInvalidArgument, "resume trace not found: " + *f.resume);
    resume = load_trace(*f.resume);
  }
  const auto data = load_inputs(cfg);
  const CVConfig cv = cfg.cv_config();
  fs::create_directories(cfg.output_dir);

  if (f.strategy == "cp") {
    const auto fused = fuse_concat_project(data.matrices, data.labels, f.cp_dim, cfg.norm);
    const auto eval = evaluate_objective(fused, cv);
    ordered_json best;
    best["dataset"] = dataset_name(cfg);
    best["method"] = f.method.value_or(kMethodConcat);
    best["config"] = ordered_json::object();
    best["l_final"] = fused.x.cols();
    const auto metrics = to_json(eval);
    for (const auto& [k, v] : metrics.items()) best[k] = v;
    write_run_outputs(cfg.output_dir, best, eval.fitted_model.get());
    out << "FuDoBa-CP (p=" << fused.x.cols() << "): mean macro-F1 " << eval.mean_f1 << "\n";
    return kExitOk;
  }
  if (f.strategy != "fudoba") throw Error(ErrorCode::kInvalidArgument, "unknown strategy " + f.strategy);

  const SearchSpace space = cfg.search_space();
  const fs::path trace_path = cfg.output_dir / "trace.jsonl";
  BoOptions options;
  options.budget = cfg.budget;
  options.n_init = cfg.n_init;
  options.seed = seed;
  options.max_candidates = cfg.max_candidates;
  options.threads = cfg.threads;
  std::vector<TrialRecord> streamed = resume;
  options.on_trial = [&](const TrialRecord& record) {
    streamed.push_back(record);
    save_trace(streamed, trace_path);
    if (!g.quiet) {
      spdlog::info("trial {}: mean macro-F1 {:.4f}{}", record.trial_index, record.mean_f1,
                   record.error.empty() ? "" : " (failed: " + record.error + ")");
    }
  };
  const auto result = run_fusion_bo(data.matrices, data.labels, space, options, cv, cfg.norm, resume);
  save_trace(result.search.trace, trace_path);

  ordered_json best;
  best["dataset"] = dataset_name(cfg);
  best["method"] = f.method.value_or(kMethodFudoba);
  best["trial_index"] = result.search.best.trial_index;
  best["config"] = to_json(result.search.best.config);
  best["l_final"] = result.best_fused.x.cols();
  const auto metrics = to_json(result.best_eval);
  for (const auto& [k, v] : metrics.items()) best[k] = v;
  best["column_spans"] = spans_json(result.best_fused.column_spans);
  best["trials"] = result.search.trace.size();
  best["space_exhausted"] = result.search.space_exhausted;
  write_run_outputs(cfg.output_dir, best, result.best_eval.fitted_model.get());

  if (result.search.trace.size() >= 10) {
    ImportanceOptions io;
    io.seed = derive_seed(seed, "importance");
    const auto importance = parameter_importance(result.search.trace, ThetaEncoding(space), io);
    write_json(cfg.output_dir / "importance.json", to_json(importance));
  }
  out << "best trial " << result.search.best.trial_index << ": mean macro-F1 " << result.best_eval.mean_f1
      << ", l_final " << result.best_fused.x.cols() << "\n";
  return kExitOk;
}

int cmd_compare(const CompareFlags& f, std::ostream& out) {
  if (!fs::exists(f.scores)) throw Error(ErrorCode::kInvalidArgument, "score table not found: " + f.scores);
  const auto table = load_score_table(f.scores);
  const auto summary = friedman_nemenyi(
      table, f.alpha, f.iman_davenport ? FriedmanPValue::kImanDavenport : FriedmanPValue::kChiSquare);
  const std::string md = rank_report_markdown(summary);
  if (f.output) write_file_atomic(*f.output, md);
  if (f.json) write_json(*f.json, to_json(summary));
  out << md;
  return kExitOk;
}

int cmd_embed(const GlobalFlags& g, const EmbedFlags& f, std::ostream& out) {
  auto cfg = resolve_config(g);
  EmbedEndpoint ep;
  ep.base_url = f.base_url.value_or(cfg.embed.base_url);
  ep.model_name = f.model.value_or(cfg.embed.model);
  ep.batch_size = f.batch_size.value_or(cfg.embed.batch_size);
  ep.timeout_seconds = f.timeout.value_or(cfg.embed.timeout_seconds);
  ep.max_retries = f.max_retries.value_or(cfg.embed.max_retries);
  ep.api_key = api_key_from_environment();
  if (cfg.seed) ep.jitter_seed = *cfg.seed;
  const fs::path cache_dir = f.cache_dir ? fs::path(*f.cache_dir) : cfg.embed.cache_dir;
  if (ep.model_name.empty()) throw Error(ErrorCode::kInvalidArgument, "embed needs --model");
  if (!fs::exists(f.docs)) throw Error(ErrorCode::kInvalidArgument, "documents file not found: " + f.docs);

  const auto docs = load_documents(f.docs);
  EmbedStats stats;
  auto matrix = embed_documents(docs, ep, cache_dir, &stats);
  matrix.modality_name = f.modality;
  const fs::path output(f.output);
  if (output.has_parent_path()) fs::create_directories(output.parent_path());
  save_embedding_matrix(matrix, output, format_from_extension(output));
  out << "embedded " << docs.size() << " documents (" << stats.cache_hits << " cached, " << stats.fetched
      << " fetched, " << stats.requests << " requests)\n";
  return kExitOk;
}

int cmd_report(const ReportFlags& f, std::ostream& out) {
  std::vector<ReportRow> rows;
  for (const auto& run : f.runs) {
    fs::path path(run);
    if (fs::is_directory(path)) path /= "best.json";
    if (!fs::exists(path)) throw Error(ErrorCode::kInvalidArgument, "run result not found: " + path.string());
    ordered_json best;
    try {
      best = ordered_json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
    }
    rows.push_back(report_row_from_best(best));
  }
  const ReportFormat format = f.format == "csv" ? ReportFormat::kCsv : ReportFormat::kMarkdown;
  const std::string text = render_report(rows, format);
  if (f.output) write_file_atomic(*f.output, text);
  out << text;
  return kExitOk;
}

int exit_code_for(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kValidation: return kExitValidation;
    case ErrorCategory::kNetwork: return kExitNetwork;
    case ErrorCategory::kRuntime: break;
  }
  return kExitRuntime;
}

void configure_logging(bool quiet) {
  auto logger = spdlog::get("fudoba");
  if (!logger) logger = spdlog::stderr_color_mt("fudoba");
  spdlog::set_default_logger(logger);
  spdlog::set_level(quiet ? spdlog::level::warn : spdlog::level::info);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Early fusion of document embeddings with Bayesian-optimized weights", "fudoba"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--config", g.config, "TOML experiment config");
  app.add_option("--threads", g.threads, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--seed", g.seed, "Top-level random seed");
  app.add_option("--output-dir", g.output_dir, "Directory for run outputs");
  app.add_option("--labels", g.labels, "Labels CSV (id,label)");
  app.add_option("--modality", g.modalities, "Modality matrix as name=path (repeatable, ordered)");
  app.add_option("--w1", g.w1, "L1 weight of the row normalization");
  app.add_option("--w2", g.w2, "L2 weight of the row normalization");
  app.add_flag("-q,--quiet", g.quiet, "Only log warnings and errors");

  FuseFlags fuse_flags;
  auto* fuse_cmd = app.add_subcommand("fuse", "Build the fused matrix for one fusion config");
  fuse_cmd->add_option("--theta", fuse_flags.theta, "Fusion config JSON");
  fuse_cmd->add_option("--strategy", fuse_flags.strategy, "fudoba or cp")
      ->check(CLI::IsMember({"fudoba", "cp"}));
  fuse_cmd->add_option("--cp-dim", fuse_flags.cp_dim, "Projected dimension for --strategy cp")
      ->check(CLI::PositiveNumber);

  OptimizeFlags opt_flags;
  auto* opt_cmd = app.add_subcommand("optimize", "Search fusion configs with Bayesian optimization");
  opt_cmd->add_option("--budget", opt_flags.budget, "Total trials");
  opt_cmd->add_option("--n-init", opt_flags.n_init, "Random initial trials");
  opt_cmd->add_option("--folds", opt_flags.folds, "Cross-validation folds");
  opt_cmd->add_option("--resume", opt_flags.resume, "Continue from an existing trace");
  opt_cmd->add_option("--strategy", opt_flags.strategy, "fudoba or cp")
      ->check(CLI::IsMember({"fudoba", "cp"}));
  opt_cmd->add_option("--cp-dim", opt_flags.cp_dim, "Projected dimension for --strategy cp")
      ->check(CLI::PositiveNumber);
  opt_cmd->add_option("--method", opt_flags.method, "Method name used in reports");

  CompareFlags cmp_flags;
  auto* cmp_cmd = app.add_subcommand("compare", "Friedman test with Nemenyi post-hoc on a score table");
  cmp_cmd->add_option("scores", cmp_flags.scores, "CSV: dataset,<method>,...")->required();
  cmp_cmd->add_option("--alpha", cmp_flags.alpha, "Significance level (0.05 or 0.10)");
  cmp_cmd->add_flag("--iman-davenport", cmp_flags.iman_davenport, "Use the F-distributed statistic");
  cmp_cmd->add_option("--output", cmp_flags.output, "Write the markdown report here");
  cmp_cmd->add_option("--json", cmp_flags.json, "Write the summary as JSON here");

  EmbedFlags emb_flags;
  auto* emb_cmd = app.add_subcommand("embed", "Embed documents through an OpenAI-compatible endpoint");
  emb_cmd->add_option("--docs", emb_flags.docs, "CSV: id,text")->required();
  emb_cmd->add_option("--base-url", emb_flags.base_url, "Endpoint base URL");
  emb_cmd->add_option("--model", emb_flags.model, "Model name");
  emb_cmd->add_option("--batch-size", emb_flags.batch_size, "Texts per request");
  emb_cmd->add_option("--timeout", emb_flags.timeout, "Request timeout in seconds");
  emb_cmd->add_option("--max-retries", emb_flags.max_retries, "Retries per batch");
  emb_cmd->add_option("--cache-dir", emb_flags.cache_dir, "Vector cache directory");
  emb_cmd->add_option("--output", emb_flags.output, "Output matrix (.fdb or .csv)")->required();
  emb_cmd->add_option("--modality-name", emb_flags.modality, "Modality name of the output");

  ReportFlags rep_flags;
  auto* rep_cmd = app.add_subcommand("report", "Tabulate results of finished runs");
  rep_cmd->add_option("runs", rep_flags.runs, "Run directories or best.json files")->required();
  rep_cmd->add_option("--format", rep_flags.format, "md or csv")->check(CLI::IsMember({"md", "csv"}));
  rep_cmd->add_option("--output", rep_flags.output, "Write the table here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  configure_logging(g.quiet);
  try {
    if (*fuse_cmd) return cmd_fuse(g, fuse_flags, out);
    if (*opt_cmd) return cmd_optimize(g, opt_flags, out);
    if (*cmp_cmd) return cmd_compare(cmp_flags, out);
    if (*emb_cmd) return cmd_embed(g, emb_flags, out);
    if (*rep_cmd) return cmd_report(rep_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

}  // namespace fudoba::cli
