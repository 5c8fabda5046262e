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

// Acceptance suite. Prints one line per criterion:
//
//   PASS|FAIL|BLOCKED  <criterion>  <measurements>
//
// Exit status: 1 if any criterion failed, 77 if nothing failed but at least
// one criterion was blocked (benchmark data missing), 0 otherwise.
//
// Benchmark data is read from $XMLC_DATA_DIR/<name>/{train,test}.txt.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metric_oracle.hpp"
#include "xmlc/ar_model.hpp"
#include "xmlc/attention.hpp"
#include "xmlc/checkpoint.hpp"
#include "xmlc/gradcheck_suite.hpp"
#include "xmlc/metrics.hpp"
#include "xmlc/nar_model.hpp"
#include "xmlc/report.hpp"
#include "xmlc/run_config.hpp"
#include "xmlc/training.hpp"

using namespace xmlc;
namespace fs = std::filesystem;

namespace {

enum class Status { kPass, kFail, kBlocked };

struct Outcome {
  Status status;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// Accumulates named sub-checks; the criterion passes only if all do.
struct Checks {
  bool ok = true;
  std::vector<std::string> notes;

  void add(bool passed, const std::string& note) {
    ok = ok && passed;
    notes.push_back(note + (passed ? "" : " [failed]"));
  }
  Outcome outcome() const {
    std::string joined;
    for (const auto& n : notes) joined += (joined.empty() ? "" : "; ") + n;
    return {ok ? Status::kPass : Status::kFail, joined};
  }
};

std::optional<fs::path> benchmark_file(const std::string& name, const std::string& split) {
  const char* root = std::getenv("XMLC_DATA_DIR");
  if (root == nullptr) return std::nullopt;
  const fs::path p = fs::path(root) / name / (split + ".txt");
  if (!fs::exists(p)) return std::nullopt;
  return p;
}

std::optional<std::string> missing_data(std::initializer_list<const char*> names) {
  std::string missing;
  for (const char* name : names) {
    for (const char* part : {"train", "test"}) {
      if (!benchmark_file(name, part)) missing += std::string(missing.empty() ? "" : ", ") + name + "/" + part + ".txt";
    }
  }
  if (missing.empty()) return std::nullopt;
  return "missing " + missing + " under $XMLC_DATA_DIR";
}

double log_normal_pdf(double x, double mu, double sigma) {
  const double d = (x - mu) / sigma;
  return -0.5 * d * d - std::log(sigma) - 0.5 * std::log(2.0 * M_PI);
}

Tensor random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

// ---------------------------------------------------------------------------
// Training pipeline shared by the determinism and benchmark criteria. Mirrors
// `xmlc train` followed by `xmlc evaluate --propensity-from <train>`.

struct PipelineResult {
  std::string history_csv;
  std::string report_csv;
  std::string report_json;
  EvalReport report;
  double train_seconds = 0.0;
};

PipelineResult run_pipeline(RunConfig cfg, const fs::path& test_path, const std::string& dataset_name) {
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

  PipelineResult out;
  const auto start = Clock::now();
  const TrainHistory history = train(model, train_set, validation, cfg.train);
  out.train_seconds = seconds_since(start);
  std::ostringstream hist;
  write_history_csv(history, hist);
  out.history_csv = hist.str();

  const SparseDataset test = parse_xmlc(test_path);
  const PropensityModel prop =
      compute_propensities(label_stats(full), full.size(), cfg.propensity_a, cfg.propensity_b);
  const MetricTable table = evaluate(model, test, &prop, {1, 3, 5}, cfg.train.n_refine);
  const std::vector<EvalReport> reports{EvalReport::from_table(dataset_name, cfg.model_type, table)};
  std::ostringstream csv;
  write_report_csv(reports, csv);
  out.report_csv = csv.str();
  out.report_json = report_to_json(reports).dump(2);
  out.report = reports[0];
  return out;
}

RunConfig benchmark_config(const std::string& dataset, const std::string& model_type) {
  const fs::path config = fs::path(XMLC_SOURCE_DIR) / "configs" / (dataset + "_" + model_type + ".json");
  RunConfig cfg = load_run_config(config);
  cfg.train_path = *benchmark_file(dataset, "train");
  cfg.output_dir = fs::temp_directory_path() / "xmlc_acceptance" / (dataset + "_" + model_type);
  cfg.validate();
  return cfg;
}

// Trained benchmark runs are shared between the reproduction and trend
// criteria.
const PipelineResult& benchmark_run(const std::string& dataset, const std::string& model_type) {
  static std::map<std::string, PipelineResult> cache;
  const std::string key = dataset + "/" + model_type;
  auto it = cache.find(key);
  if (it == cache.end()) {
    it = cache
             .emplace(key, run_pipeline(benchmark_config(dataset, model_type), *benchmark_file(dataset, "test"),
                                        dataset))
             .first;
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Criteria.

Outcome metric_oracle() {
  const auto start = Clock::now();
  Rng rng(2718);
  double worst = 0.0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 5 + rng.below(16);  // L <= 20
    std::vector<double> scores;
    LabelSet truth;
    PropensityModel prop;
    for (std::size_t l = 0; l < n; ++l) {
      double s = rng.normal();
      if (rng.uniform() < 0.2) s = std::round(s);  // exercise ties
      scores.push_back(s);
      if (rng.uniform() < 0.3) truth.push_back(static_cast<std::uint32_t>(l));
      prop.propensities.push_back(1.0 - rng.uniform());  // (0, 1]
    }
    if (truth.empty()) truth.push_back(static_cast<std::uint32_t>(rng.below(n)));
    for (std::size_t k : {1, 3, 5}) {
      const auto ref = oracle::metrics(scores, truth, prop.propensities, k);
      for (double diff : {precision_at_k(scores, truth, k) - ref.p, *ndcg_at_k(scores, truth, k) - ref.ndcg,
                          psp_at_k(scores, truth, prop, k) - ref.psp,
                          psndcg_at_k(scores, truth, prop, k) - ref.psndcg}) {
        worst = std::max(worst, std::abs(diff));
        ++compared;
      }
    }
  }
  const double elapsed = seconds_since(start);
  Checks c;
  c.add(worst < 1e-9, std::to_string(compared) + " values, max abs diff " + fmt(worst) + " (< 1e-9)");
  c.add(elapsed < 10.0, "runtime " + fmt(elapsed) + " s (< 10 s)");
  return c.outcome();
}

Outcome gradient_suite() {
  const auto start = Clock::now();
  Checks c;
  for (std::uint64_t seed : {1, 2, 3}) {
    // 7 trials per primitive and seed: 21 random inputs per primitive overall.
    const GradSuiteReport report = gradcheck_suite(seed, 7, 1e-4);
    std::string failing;
    for (const auto& name : report.failing_names()) failing += " " + name;
    c.add(report.passed(), "seed " + std::to_string(seed) + ": " + std::to_string(report.entries.size()) +
                               " entries, max rel err " + fmt(report.max_rel_error()) + failing);
  }
  const double elapsed = seconds_since(start);
  c.add(elapsed < 120.0, "runtime " + fmt(elapsed) + " s (< 120 s)");
  return c.outcome();
}

struct McStats {
  double mean, se;
};

McStats kl_monte_carlo(double mq, double sq, double mp, double sp, std::size_t n, Rng& rng) {
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = mq + sq * rng.normal();
    const double d = log_normal_pdf(x, mq, sq) - log_normal_pdf(x, mp, sp);
    sum += d;
    sum_sq += d * d;
  }
  const double mean = sum / n;
  return {mean, std::sqrt((sum_sq - n * mean * mean) / (n - 1) / n)};
}

NarConfig tiny_nar() {
  NarConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_latent = 1;
  c.d_ff = 16;
  c.d_head_hidden = 8;
  c.d_decoder_hidden = 8;
  c.l_max = 2;
  c.t_budget = 3;
  return c;
}

// log p(y, |y| | x) by trapezoid quadrature over the two one-dimensional
// latent positions, against the mean of 10^4 single-sample ELBO draws.
std::pair<double, McStats> elbo_vs_marginal(Reparameterization mode) {
  NarConfig c = tiny_nar();
  c.reparameterization = mode;
  NarModel model(c, 6, 3, 55);
  const LabelSet y{2};
  const SparseRow x{{0, 0.6}, {2, -0.3}, {4, 0.74}};

  ad::Graph g(false);
  const PriorVars prior = model.encode_prior(g, x);
  const double mu_p = prior.gaussian.mu.value().item();
  const double sigma_p = prior.gaussian.sigma.value().item();

  const std::size_t grid = 100;
  const double lo = -10.0, hi = 10.0, h = (hi - lo) / (grid - 1);
  std::vector<double> terms;
  terms.reserve(grid * grid);
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      const double z0 = lo + h * i, z1 = lo + h * j;
      ad::Graph q(false);
      auto z = q.constant(Tensor({2, 1}, std::vector<double>{z0, z1}));
      const PriorVars p = model.encode_prior(q, x);
      auto [recon, length] = model.log_likelihood(q, z, p.feature_state, y);
      const double w = (i == 0 || i == grid - 1 ? 0.5 : 1.0) * (j == 0 || j == grid - 1 ? 0.5 : 1.0);
      terms.push_back(recon.value().item() + length.value().item() + log_normal_pdf(z0, mu_p, sigma_p) +
                      log_normal_pdf(z1, mu_p, sigma_p) + std::log(w * h * h));
    }
  }
  const double top = *std::max_element(terms.begin(), terms.end());
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - top);
  const double log_marginal = top + std::log(acc);

  Rng rng(99);
  const std::size_t n = 10000;
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    ad::Graph e(false);
    const double v = model.elbo(e, x, y, model.sample_noise(y, rng), 1.0).total.value().item();
    sum += v;
    sum_sq += v * v;
  }
  const double mean = sum / n;
  return {log_marginal, {mean, std::sqrt((sum_sq - n * mean * mean) / (n - 1) / n)}};
}

Outcome vae_math() {
  Checks c;
  const std::size_t n = 1000000;

  {
    Rng rng(77);
    const double mq = 0.3, sq = 0.8, mp = -0.5, sp = 1.4;
    const McStats mc = kl_monte_carlo(mq, sq, mp, sp, n, rng);
    const double closed = kl_diag_gaussians(Tensor::matrix(1, 1, mq), Tensor::matrix(1, 1, sq),
                                            Tensor::matrix(1, 1, mp), Tensor::matrix(1, 1, sp));
    const double z = std::abs(mc.mean - closed) / mc.se;
    c.add(z < 3.0, "KL closed " + fmt(closed, 6) + " vs MC " + fmt(mc.mean, 6) + " (" + fmt(z) + " se)");
  }

  {
    const double mu = 0.4, sigma = 1.3;
    Rng rng(2024);
    const std::size_t side = 1000;
    const Tensor eps = random_matrix(side, side, rng);
    ad::Graph g(false);
    const Tensor z = reparameterize(g.constant(Tensor::matrix(side, side, mu)),
                                    g.constant(Tensor::matrix(side, side, sigma)), g.constant(eps),
                                    Reparameterization::kVariance)
                         .value();
    double mean = 0.0;
    for (double v : z.data()) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : z.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    const double target = std::pow(sigma, 4);
    const double z_mean = std::abs(mean - mu) / std::sqrt(target / n);
    const double z_var = std::abs(var - target) / (target * std::sqrt(2.0 / (n - 1)));
    c.add(z_mean < 3.0 && z_var < 3.0, "z = mu + eps*sigma^2: mean " + fmt(mean, 5) + " (" + fmt(z_mean) +
                                           " se), var " + fmt(var, 5) + " vs sigma^4 " + fmt(target, 5) + " (" +
                                           fmt(z_var) + " se)");
  }

  for (auto mode : {Reparameterization::kVariance, Reparameterization::kStdDev}) {
    const auto [log_marginal, elbo] = elbo_vs_marginal(mode);
    c.add(elbo.mean <= log_marginal + 3.0 * elbo.se,
          std::string(mode == Reparameterization::kVariance ? "variance" : "std_dev") + " ELBO " +
              fmt(elbo.mean, 5) + " +- " + fmt(elbo.se, 2) + " <= log marginal " + fmt(log_marginal, 5));
  }
  return c.outcome();
}

Outcome structural() {
  Checks c;

  double worst = 0.0;
  for (auto mode : {AttentionScale::kSequenceLength, AttentionScale::kKeyDim}) {
    Rng rng(11);
    ParameterSet params;
    const auto stack = EncoderStack::create(params, "enc", 2, 8, 16, 2, mode, rng);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t rows = 2 + rng.below(8);
      const Tensor x = random_matrix(rows, 8, rng);
      std::vector<std::uint32_t> perm(rows);
      std::iota(perm.begin(), perm.end(), 0u);
      shuffle(perm, rng);
      ad::Graph g(false);
      const Tensor out = stack(g, g.constant(x)).value();
      const Tensor out_perm = stack(g, ad::gather_rows(g.constant(x), perm)).value();
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < 8; ++j) worst = std::max(worst, std::abs(out_perm.at(i, j) - out.at(perm[i], j)));
    }
  }
  c.add(worst < 1e-10, "attention equivariance max diff " + fmt(worst) + " (< 1e-10)");

  std::size_t equal = 0;
  Rng feature_rng(21);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ArConfig cfg;
    cfg.d_hidden = 8;
    cfg.d_embed = 5;
    cfg.max_steps = 5;
    ArModel m(cfg, 6, 8, seed);
    Rng spread(seed);
    for (double& v : m.params().get("ar.output.weight").value.data()) v = 2.0 * spread.normal();
    SparseRow x;
    for (std::uint32_t f = 0; f < 6; ++f)
      if (feature_rng.uniform() < 0.5) x.push_back({f, feature_rng.normal()});
    const ArPrediction greedy = m.greedy_decode(x);
    const auto beam = m.beam_decode(x, 1);
    equal += beam.size() == 1 && beam[0].sequence == greedy.sequence && beam[0].scores == greedy.scores &&
             beam[0].log_prob == greedy.log_prob;
  }
  c.add(equal == 100, "beam_width=1 equals greedy on " + std::to_string(equal) + "/100 models");

  const fs::path dir = fs::temp_directory_path() / "xmlc_acceptance";
  fs::create_directories(dir);
  for (const std::string type : {"nar", "ar"}) {
    NarConfig nc = tiny_nar();
    nc.d_latent = 4;
    ArConfig ac;
    ac.d_hidden = 8;
    ac.d_embed = 5;
    ac.max_steps = 4;
    const Model m = type == "nar" ? Model(NarModel(nc, 6, 5, 3)) : Model(ArModel(ac, 6, 5, 3));
    const fs::path path = dir / ("roundtrip_" + type + ".json");
    save_checkpoint(path, m, CheckpointMeta{});
    const Model loaded = load_checkpoint(path);
    bool same = model_type(loaded) == type;
    auto it = model_params(loaded).begin();
    for (const auto& p : model_params(m)) {
      same = same && it != model_params(loaded).end() && p.name == it->name && bit_equal(p.value, it->value);
      ++it;
    }
    same = same && checkpoint_to_json(m).dump() == checkpoint_to_json(loaded).dump();
    c.add(same, type + " checkpoint round trip " + (same ? "bit-exact" : "differs"));
  }
  return c.outcome();
}

// The first n examples of `ds` that carry labels.
SparseDataset first_labelled(const SparseDataset& ds, std::size_t n) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size() && idx.size() < n; ++i)
    if (ds.examples[i].has_labels()) idx.push_back(i);
  return subset(ds, idx);
}

Outcome overfit() {
  if (auto missing = missing_data({"bibtex"})) return {Status::kBlocked, *missing};
  const SparseDataset ds = first_labelled(parse_xmlc(*benchmark_file("bibtex", "train")), 50);
  const PropensityModel prop = PropensityModel::uniform(ds.n_labels);
  const std::size_t max_set = label_stats(ds).max_set_size;
  Checks c;

  {
    RunConfig cfg = benchmark_config("bibtex", "nar");
    cfg.nar.resolve(max_set);
    TrainConfig t = cfg.train;
    t.learning_rate = 3e-3;
    t.batch_size = 4;
    t.max_epochs = 300;
    t.kl_warmup_steps = 100;
    t.early_stopping = false;
    Model m = NarModel(cfg.nar, ds.n_features, ds.n_labels, t.seed);
    const auto start = Clock::now();
    train(m, ds, ds, t);
    const double elapsed = seconds_since(start);
    const double p1 = evaluate(m, ds, &prop, {1}, t.n_refine).get(Metric::kPrecision, 1).mean;
    std::size_t length_ok = 0;
    for (const auto& ex : ds.examples) length_ok += std::get<NarModel>(m).infer(ex.features, 0).length == ex.labels.size();
    const double length_acc = static_cast<double>(length_ok) / ds.size();
    c.add(p1 >= 0.95, "NAR train P@1 " + fmt(p1) + " (>= 0.95)");
    c.add(length_acc >= 0.95, "NAR length accuracy " + fmt(length_acc) + " (>= 0.95)");
    c.add(elapsed < 600.0, "NAR runtime " + fmt(elapsed) + " s (< 600 s)");
  }
  {
    RunConfig cfg = benchmark_config("bibtex", "ar");
    cfg.ar.resolve(max_set);
    TrainConfig t = cfg.train;
    t.learning_rate = 3e-3;
    t.batch_size = 4;
    t.max_epochs = 200;
    t.early_stopping = false;
    Model m = ArModel(cfg.ar, ds.n_features, ds.n_labels, t.seed);
    const auto start = Clock::now();
    train(m, ds, ds, t);
    const double elapsed = seconds_since(start);
    const double p1 = evaluate(m, ds, &prop, {1}, 0).get(Metric::kPrecision, 1).mean;
    c.add(p1 == 1.0, "AR train P@1 " + fmt(p1) + " (= 1)");
    c.add(elapsed < 600.0, "AR runtime " + fmt(elapsed) + " s (< 600 s)");
  }
  return c.outcome();
}

Outcome reproduction() {
  if (auto missing = missing_data({"bibtex", "mediamill"})) return {Status::kBlocked, *missing};
  Checks c;
  const PipelineResult& bib_nar = benchmark_run("bibtex", "nar");
  const PipelineResult& bib_ar = benchmark_run("bibtex", "ar");
  const PipelineResult& mm_nar = benchmark_run("mediamill", "nar");
  const double nar_p1 = 100.0 * bib_nar.report.mean(Metric::kPrecision, 1);
  const double ar_p1 = 100.0 * bib_ar.report.mean(Metric::kPrecision, 1);
  const double mm_p5 = 100.0 * mm_nar.report.mean(Metric::kPrecision, 5);
  c.add(nar_p1 >= 40.0, "Bibtex NAR P@1 " + fmt(nar_p1, 4) + " (>= 40)");
  c.add(ar_p1 >= 80.0, "Bibtex AR P@1 " + fmt(ar_p1, 4) + " (>= 80)");
  c.add(std::abs(mm_p5 - 46.12) <= 8.0, "Mediamill NAR P@5 " + fmt(mm_p5, 4) + " (46.12 +- 8)");
  for (const auto* run : {&bib_nar, &bib_ar, &mm_nar}) {
    c.add(run->train_seconds < 4 * 3600.0, run->report.dataset + " " + run->report.model + " training " +
                                               fmt(run->train_seconds / 60.0) + " min (< 240 min)");
  }
  return c.outcome();
}

Outcome trend() {
  if (auto missing = missing_data({"bibtex", "mediamill"})) return {Status::kBlocked, *missing};
  Checks c;
  for (const std::string dataset : {"bibtex", "mediamill"}) {
    const EvalReport& nar = benchmark_run(dataset, "nar").report;
    const EvalReport& ar = benchmark_run(dataset, "ar").report;
    const double gap1 = ar.mean(Metric::kPrecision, 1) - nar.mean(Metric::kPrecision, 1);
    const double gap5 = ar.mean(Metric::kPrecision, 5) - nar.mean(Metric::kPrecision, 5);
    c.add(gap1 > 0.0, dataset + " AR - NAR at P@1 " + fmt(100.0 * gap1) + " (> 0)");
    c.add(gap5 < gap1, dataset + " AR - NAR at P@5 " + fmt(100.0 * gap5) + " (< P@1 gap)");
  }
  return c.outcome();
}

Outcome determinism() {
  Checks c;
  const fs::path data = fs::path(XMLC_SOURCE_DIR) / "tests" / "data";
  for (const std::string type : {"nar", "ar"}) {
    RunConfig cfg = load_run_config(fs::path(XMLC_SOURCE_DIR) / "configs" / ("toy_" + type + ".json"));
    const PipelineResult a = run_pipeline(cfg, data / "toy_test.txt", "toy");
    const PipelineResult b = run_pipeline(cfg, data / "toy_test.txt", "toy");
    c.add(a.history_csv == b.history_csv, type + " history " + std::to_string(a.history_csv.size()) + " bytes " +
                                              (a.history_csv == b.history_csv ? "identical" : "differ"));
    const bool reports_equal = a.report_csv == b.report_csv && a.report_json == b.report_json;
    c.add(reports_equal, type + " report " + (reports_equal ? "identical" : "differ"));
  }
  return c.outcome();
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"metric_oracle", metric_oracle}, {"gradient_suite", gradient_suite}, {"vae_math", vae_math},
      {"structural", structural},       {"overfit", overfit},               {"reproduction", reproduction},
      {"trend", trend},                 {"determinism", determinism},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xmlc acceptance suite"};
  std::vector<std::string> only;
  app.add_option("--only", only, "run only these criteria")->delimiter(',');
  bool list = false;
  app.add_flag("--list", list, "list criterion names and exit");
  CLI11_PARSE(app, argc, argv);

  if (list) {
    for (const auto& c : criteria()) std::cout << c.name << '\n';
    return 0;
  }
  for (const auto& name : only) {
    const bool known = std::any_of(criteria().begin(), criteria().end(),
                                   [&](const Criterion& c) { return name == c.name; });
    if (!known) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 2;
    }
  }

  std::size_t failed = 0, blocked = 0;
  for (const auto& criterion : criteria()) {
    if (!only.empty() && std::find(only.begin(), only.end(), criterion.name) == only.end()) continue;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criterion.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("error: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kFail ? "FAIL" : "BLOCKED";
    failed += o.status == Status::kFail;
    blocked += o.status == Status::kBlocked;
    std::cout << std::left << std::setw(8) << tag << std::setw(16) << criterion.name << o.detail << "  ("
              << fmt(seconds_since(start)) << " s)" << std::endl;
  }
  if (failed > 0) return 1;
  if (blocked > 0) return 77;
  return 0;
}
