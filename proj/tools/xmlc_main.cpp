/*
 * Copyright 2026 The xmlc-nar Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// xmlc: command-line entry point.
//
//   xmlc prepare   <data> --out DIR            dataset summary, label statistics
//   xmlc train     <config.json>               checkpoint, history, resolved config
//   xmlc evaluate  <checkpoint> <data> --out DIR
//   xmlc predict   <checkpoint> <data> [--out FILE]
//   xmlc gradcheck [--seed N]...
//
// Exit codes: 0 success, 1 validation or contract error, 2 runtime failure.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xmlc/checkpoint.hpp"
#include "xmlc/dataset.hpp"
#include "xmlc/errors.hpp"
#include "xmlc/gradcheck_suite.hpp"
#include "xmlc/report.hpp"
#include "xmlc/run_config.hpp"
#include "xmlc/training.hpp"

namespace fs = std::filesystem;
using namespace xmlc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir.string() + ": " + ec.message());
}

// ---------------------------------------------------------------------------
// prepare

struct PrepareArgs {
  std::string data;
  std::string out;
  double a = 0.55;
  double b = 1.5;
};

int cmd_prepare(const PrepareArgs& args) {
  const SparseDataset ds = parse_xmlc(fs::path(args.data));
  const LabelStats stats = label_stats(ds);
  const PropensityModel prop = compute_propensities(stats, ds.size(), args.a, args.b);
  ensure_dir(args.out);

  const nlohmann::json summary{{"path", fs::absolute(args.data).lexically_normal().string()},
                               {"n_points", ds.size()},
                               {"n_features", ds.n_features},
                               {"n_labels", ds.n_labels},
                               {"mean_labels_per_point", ds.mean_label_count()},
                               {"max_labels_per_point", stats.max_set_size},
                               {"empty_label_points", ds.empty_label_count()},
                               {"total_label_assignments", stats.total_assignments},
                               {"propensity", {{"a", args.a}, {"b", args.b}}}};
  open_output(fs::path(args.out) / "summary.json") << summary.dump(2) << '\n';
  auto csv = open_output(fs::path(args.out) / "label_stats.csv");
  write_label_stats_csv(stats, prop, csv);

  std::cout << "points " << ds.size() << "  features " << ds.n_features << "  labels " << ds.n_labels
            << "  mean |y| " << std::setprecision(6) << ds.mean_label_count() << "  max |y| " << stats.max_set_size
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string output_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  if (!args.output_dir.empty()) cfg.output_dir = args.output_dir;
  if (args.seed) cfg.train.seed = *args.seed;
  cfg.validate();

  const SparseDataset full = parse_xmlc(cfg.train_path);
  SparseDataset train_set, validation;
  if (cfg.validation_path) {
    train_set = full;
    validation = parse_xmlc(*cfg.validation_path);
  } else {
    std::tie(train_set, validation) = split(full, 1.0 - cfg.validation_fraction, cfg.train.seed);
  }
  const std::size_t max_set = label_stats(drop_empty_labels(train_set)).max_set_size;

  Model model = [&]() -> Model {
    if (cfg.model_type == "nar") {
      cfg.nar.resolve(max_set);
      return NarModel(cfg.nar, full.n_features, full.n_labels, cfg.train.seed);
    }
    cfg.ar.resolve(max_set);
    return ArModel(cfg.ar, full.n_features, full.n_labels, cfg.train.seed);
  }();

  ensure_dir(cfg.output_dir);
  open_output(cfg.output_dir / "resolved_config.json") << to_json(cfg).dump(2) << '\n';

  TrainState state;
  TrainHistory history;
  int status = kExitOk;
  try {
    history = train(model, train_set, validation, cfg.train, &state, [&](const EpochRecord& r) {
      if (!args.quiet) {
        std::cout << "epoch " << r.epoch << "  objective " << std::setprecision(6) << r.objective << "  val P@1 "
                  << r.val_p1 << '\n';
      }
    });
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    status = kExitRuntime;
  }

  CheckpointMeta meta{to_json(cfg.train), state.optimizer, state.rng_state, history.best_epoch};
  save_checkpoint(cfg.output_dir / "checkpoint.json", model, meta);
  auto hist = open_output(cfg.output_dir / "history.csv");
  write_history_csv(history, hist);
  auto timing = open_output(cfg.output_dir / "timing.csv");
  write_timing_csv(history, timing);
  if (status == kExitOk) {
    std::cout << "best epoch " << history.best_epoch << ", outputs in " << cfg.output_dir.string() << '\n';
  }
  return status;
}

// ---------------------------------------------------------------------------
// evaluate / predict

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::vector<std::size_t> ks{1, 3, 5};
  std::optional<std::size_t> n_refine;
  std::string propensity_from;
  double a = 0.55;
  double b = 1.5;
  std::string dataset_name;
  std::size_t workers = 1;
};

std::size_t refine_steps(const std::optional<std::size_t>& flag, const CheckpointMeta& meta) {
  if (flag) return *flag;
  if (meta.train_config.is_object()) return train_config_from_json(meta.train_config).n_refine;
  return TrainConfig{}.n_refine;
}

int cmd_evaluate(const EvalArgs& args) {
  CheckpointMeta meta;
  const Model model = load_checkpoint(args.checkpoint, &meta);
  const SparseDataset ds = parse_xmlc(fs::path(args.data));
  std::vector<std::size_t> ks = args.ks;
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  // Propensities come from the training file when given, else from the
  // evaluated data itself.
  const SparseDataset prop_source = args.propensity_from.empty() ? ds : parse_xmlc(fs::path(args.propensity_from));
  if (prop_source.n_labels != ds.n_labels) throw ContractError("propensity source has a different label space");
  const PropensityModel prop = compute_propensities(label_stats(prop_source), prop_source.size(), args.a, args.b);

  const MetricTable table = evaluate(model, ds, &prop, ks, refine_steps(args.n_refine, meta), args.workers);
  const std::string name = args.dataset_name.empty() ? fs::path(args.data).stem().string() : args.dataset_name;
  const std::vector<EvalReport> reports{EvalReport::from_table(name, model_type(model), table)};

  ensure_dir(args.out);
  auto csv = open_output(fs::path(args.out) / "report.csv");
  write_report_csv(reports, csv);
  open_output(fs::path(args.out) / "report.json") << report_to_json(reports).dump(2) << '\n';

  for (const auto& row : reports[0].rows) {
    std::cout << metric_name(row.metric) << '@' << row.k << ' ' << std::fixed << std::setprecision(2)
              << 100.0 * row.mean << '\n';
  }
  return kExitOk;
}

struct PredictArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::size_t top_k = 5;
  std::optional<std::size_t> n_refine;
};

int cmd_predict(const PredictArgs& args) {
  CheckpointMeta meta;
  const Model model = load_checkpoint(args.checkpoint, &meta);
  const SparseDataset ds = parse_xmlc(fs::path(args.data));
  if (ds.n_features != model_n_features(model) || ds.n_labels != model_n_labels(model)) {
    throw ContractError("dataset feature or label space does not match the checkpoint");
  }
  if (args.top_k == 0 || args.top_k > ds.n_labels) {
    throw ContractError("top-k must lie in [1, " + std::to_string(ds.n_labels) + "]");
  }
  const auto scores = score_dataset(model, ds, refine_steps(args.n_refine, meta));

  std::ofstream file;
  if (!args.out.empty()) file = open_output(args.out);
  std::ostream& out = args.out.empty() ? std::cout : file;
  out << "example\tpredictions\n" << std::setprecision(17);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << i << '\t';
    const auto top = rank_k(scores[i], args.top_k);
    for (std::size_t j = 0; j < top.size(); ++j) out << (j ? " " : "") << top[j] << ':' << scores[i][top[j]];
    out << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckArgs {
  std::vector<std::uint64_t> seeds{1};
  std::string corrupt_op;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  if (!args.corrupt_op.empty()) {
    const auto op = ad::op_from_name(args.corrupt_op);
    if (!op) throw ContractError("unknown op '" + args.corrupt_op + "'");
    ad::set_corrupted_op(*op);
  }
  bool all_passed = true;
  std::vector<std::string> failing;
  for (std::uint64_t seed : args.seeds) {
    const GradSuiteReport r = gradcheck_suite(seed);
    std::cout << "seed " << seed << '\n';
    for (const auto& e : r.entries) {
      const std::string label = e.op ? std::string(ad::op_name(*e.op)) + " (" + e.name + ")" : e.name;
      std::cout << "  " << std::left << std::setw(40) << label << std::right << std::setw(6) << e.checked
                << "  max rel err " << std::scientific << std::setprecision(3) << e.max_rel_error
                << std::defaultfloat << (e.passed ? "  ok" : "  FAIL") << '\n';
    }
    all_passed = all_passed && r.passed();
    for (const auto& n : r.failing_names())
      if (std::find(failing.begin(), failing.end(), n) == failing.end()) failing.push_back(n);
  }
  ad::set_corrupted_op(std::nullopt);
  if (all_passed) {
    std::cout << "gradcheck passed\n";
    return kExitOk;
  }
  std::cout << "gradcheck FAILED:";
  for (const auto& n : failing) std::cout << ' ' << n;
  std::cout << '\n';
  return kExitInvalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Extreme multi-label classification: NAR latent-variable and AR seq2seq models"};
  app.require_subcommand(1);

  PrepareArgs prepare;
  auto* p = app.add_subcommand("prepare", "Summarize a dataset and write label statistics");
  p->add_option("data", prepare.data, "XMLC data file")->required()->check(CLI::ExistingFile);
  p->add_option("--out", prepare.out, "Output directory")->required();
  p->add_option("--a", prepare.a, "Propensity parameter a");
  p->add_option("--b", prepare.b, "Propensity parameter b");

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train a model from a JSON run config");
  t->add_option("config", train_args.config, "Run config JSON")->required()->check(CLI::ExistingFile);
  t->add_option("--output-dir", train_args.output_dir, "Override output_dir");
  t->add_option("--seed", train_args.seed, "Override train.seed");
  t->add_flag("--quiet", train_args.quiet, "Suppress per-epoch progress");

  EvalArgs eval;
  auto* e = app.add_subcommand("evaluate", "Write P@k, nDCG@k, PSP@k, PSnDCG@k reports");
  e->add_option("checkpoint", eval.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  e->add_option("data", eval.data, "XMLC data file")->required()->check(CLI::ExistingFile);
  e->add_option("--out", eval.out, "Output directory")->required();
  e->add_option("--ks", eval.ks, "Cut-offs")->delimiter(',');
  e->add_option("--n-refine", eval.n_refine, "NAR refinement steps (default: from checkpoint)");
  e->add_option("--propensity-from", eval.propensity_from, "Training file for label propensities")
      ->check(CLI::ExistingFile);
  e->add_option("--a", eval.a, "Propensity parameter a");
  e->add_option("--b", eval.b, "Propensity parameter b");
  e->add_option("--name", eval.dataset_name, "Dataset name in the report");
  e->add_option("--workers", eval.workers, "Scoring threads")->check(CLI::PositiveNumber);

  PredictArgs predict;
  auto* pr = app.add_subcommand("predict", "Dump top-k labels and scores per example");
  pr->add_option("checkpoint", predict.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  pr->add_option("data", predict.data, "XMLC data file")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", predict.out, "Output file (default: stdout)");
  pr->add_option("--top-k", predict.top_k, "Labels per example");
  pr->add_option("--n-refine", predict.n_refine, "NAR refinement steps (default: from checkpoint)");

  GradcheckArgs grad;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of every primitive and both objectives");
  g->add_option("--seed", grad.seeds, "Seeds (repeatable)")->delimiter(',');
  g->add_option("--corrupt-op", grad.corrupt_op, "Scale one op's backward rule (negative control)")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*p) return cmd_prepare(prepare);
    if (*t) return cmd_train(train_args);
    if (*e) return cmd_evaluate(eval);
    if (*pr) return cmd_predict(predict);
    if (*g) return cmd_gradcheck(grad);
  } catch (const ParseError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInvalid;
  } catch (const SchemaError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInvalid;
  } catch (const ContractError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInvalid;
  } catch (const ShapeError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInvalid;
  } catch (const DomainError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
