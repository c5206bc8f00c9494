// mproj: ingest embeddings, build projections, evaluate and run seeded experiments.
// Exit codes: 0 ok, 1 usage error, 2 data error or failed check.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mproj/attribute_data.hpp"
#include "mproj/debias.hpp"
#include "mproj/embeddings.hpp"
#include "mproj/error.hpp"
#include "mproj/experiment.hpp"
#include "mproj/metrics.hpp"
#include "mproj/probes.hpp"
#include "mproj/theorems.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mproj;

namespace {

// Relative inputs that do not exist from the working directory are looked up
// under $MPROJ_DATA_DIR.
fs::path input_path(const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || fs::exists(path)) return path;
  if (const char* dir = std::getenv("MPROJ_DATA_DIR"); dir && *dir) {
    fs::path alt = fs::path(dir) / path;
    if (fs::exists(alt)) return alt;
  }
  return path;
}

void write_json(const json& j, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream f(out);
  if (!f) throw DataError("cannot write " + out);
  f << j.dump(2) << "\n";
}

EmbeddingSpace load_space(const std::string& path, std::optional<std::size_t> limit) {
  LoadOptions lo;
  lo.limit = limit;
  LoadResult r = load_text_embeddings(input_path(path), lo);
  if (r.limit_exceeds_file) std::cerr << "warning: limit exceeds file length; using all " << r.space.size() << " rows\n";
  if (r.duplicate_tokens) std::cerr << "warning: dropped " << r.duplicate_tokens << " duplicate tokens\n";
  return std::move(r.space);
}

std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      out.push_back(std::stod(part));
    } catch (const std::exception&) {
      throw UsageError("bad split fraction '" + part + "'");
    }
  }
  if (!out.empty() && out.size() != 3) throw UsageError("--split needs three comma-separated fractions");
  return out;
}

std::vector<std::string> read_token_list(const std::string& path) {
  std::ifstream in(input_path(path));
  if (!in) throw DataError("cannot open token list " + path);
  std::vector<std::string> out;
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::map<std::string, double> read_group_rates(const std::string& path) {
  std::ifstream in(input_path(path));
  if (!in) throw DataError("cannot open group rates " + path);
  std::map<std::string, double> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line[0] == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("expected profession,rate", n);
    try {
      out[line.substr(0, comma)] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      if (n == 1) continue;  // header
      throw ParseError("bad rate", n);
    }
  }
  return out;
}

struct DatasetArgs {
  std::string plus = "he", minus = "she";
  std::size_t k = 0, neutral_k = 0;
  double neutral_threshold = 0.3;
  bool absolute = false;
  std::string split = "0.7,0.15,0.15";
  std::uint64_t seed = 0;
};

void add_dataset_flags(CLI::App* app, DatasetArgs& a) {
  app->add_option("--plus", a.plus, "seed token of the PLUS class")->capture_default_str();
  app->add_option("--minus", a.minus, "seed token of the MINUS class")->capture_default_str();
  app->add_option("--k", a.k, "rows per polar class");
  app->add_option("--neutral-k", a.neutral_k, "neutral rows (0: none)");
  app->add_option("--neutral-threshold", a.neutral_threshold)->capture_default_str();
  app->add_flag("--absolute-threshold", a.absolute, "filter neutral rows on |cos|");
  app->add_option("--split", a.split, "train,dev,test fractions; empty for no split")->capture_default_str();
}

DatasetConfig to_dataset_config(const DatasetArgs& a) {
  DatasetConfig c;
  c.plus_seed = a.plus;
  c.minus_seed = a.minus;
  c.k = a.k;
  c.neutral_k = a.neutral_k;
  c.neutral_threshold = a.neutral_threshold;
  c.absolute_threshold = a.absolute;
  c.split = parse_fractions(a.split);
  return c;
}

void print_class_sizes(const LabeledPointSet& ds) {
  for (const auto& c : ds.classes) std::cout << to_string(c.label) << "\t" << c.indices.size() << "\n";
  if (!ds.splits.empty()) {
    std::map<Split, std::size_t> n;
    for (const auto& [_, s] : ds.splits) ++n[s];
    for (const auto& [s, c] : n) std::cout << to_string(s) << "\t" << c << "\n";
  }
}

// ---- ingest

struct IngestArgs {
  std::string embeddings, out_dataset, out_space;
  std::optional<std::size_t> limit;
  DatasetArgs ds;
};

int cmd_ingest(const IngestArgs& a) {
  EmbeddingSpace space = load_space(a.embeddings, a.limit);
  std::vector<std::string> warnings;
  LabeledPointSet ds = build_dataset(space, to_dataset_config(a.ds), a.ds.seed, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  save_dataset(ds, space, a.out_dataset);
  if (!a.out_space.empty()) save_text_embeddings(space, a.out_space);
  print_class_sizes(ds);
  return 0;
}

// ---- debias

struct DebiasArgs {
  std::string embeddings, dataset, strategy = "MP", out_pipeline, out_space, config;
  std::optional<std::size_t> limit;
  std::string trainer = "hinge", tmp_mode = "approx";
  std::size_t max_iters = 35;
  double stop_margin = 0.02;
  std::uint64_t seed = 0;
  DatasetArgs ds;
};

int cmd_debias(const DebiasArgs& a) {
  EmbeddingSpace space = load_space(a.embeddings, a.limit);
  LabeledPointSet ds;
  if (!a.dataset.empty()) {
    ds = load_dataset(input_path(a.dataset), space);
  } else {
    ds = build_dataset(space, to_dataset_config(a.ds), a.seed);
  }
  StrategyOptions opt;
  if (!a.config.empty()) opt = load_config(input_path(a.config)).options;
  opt.inlp.trainer.trainer = parse_trainer(a.trainer);
  opt.inlp.max_iters = a.max_iters;
  opt.inlp.stop_margin = a.stop_margin;
  if (a.tmp_mode == "exact") {
    opt.tmp.mode = MedianMode::Exact2d;
  } else if (a.tmp_mode != "approx") {
    throw UsageError("--tmp-mode must be exact or approx");
  }

  auto sequence = parse_strategy_sequence(a.strategy);
  ProjectionPipeline raw = run_strategy(space.matrix(), ds, sequence, opt, a.seed, space.name());

  // Guarding curve over the pipeline prefixes; stored per step.
  const bool has_splits = !ds.splits.empty();
  LabeledMatrix train = labeled_rows(space.matrix(), ds, has_splits ? std::optional(Split::Train) : std::nullopt);
  LabeledMatrix dev = labeled_rows(space.matrix(), ds, has_splits ? std::optional(Split::Dev) : std::nullopt);
  TrainerParams tp = opt.inlp.trainer;
  tp.seed = a.seed;
  auto curve = guarding_curve(train, dev, raw, tp);
  double majority = majority_rate(dev.y);

  ProjectionPipeline pipeline(raw.source_space());
  for (const auto& w : raw.warnings()) pipeline.warn(w);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    ProjectionStep s = raw.steps()[i];
    s.metadata["probe_dev_accuracy"] = curve[i + 1].second;
    pipeline.push_back(std::move(s));
  }
  save_pipeline(pipeline, static_cast<Eigen::Index>(space.dim()), a.out_pipeline);
  if (!a.out_space.empty()) save_text_embeddings(apply_pipeline(space, pipeline), a.out_space);

  std::cout << "steps\t" << pipeline.size() << "\n";
  std::cout << "majority\t" << majority << "\n";
  for (const auto& [i, acc] : curve) std::cout << "dev_accuracy\t" << i << "\t" << acc << "\n";
  for (const auto& w : pipeline.warnings()) std::cerr << "warning: " << w << "\n";
  return 0;
}

// ---- evaluate

struct EvaluateArgs {
  std::string before, after, pipeline, out;
  std::optional<std::size_t> limit;
  std::vector<std::string> similarity, weat;
  bool weat_raw = false, weat_strict = false;
  std::string neighbor_tokens;
  std::size_t k = 10;
  std::string bias_probes, bias_seeds = "he,she";
  std::size_t bias_k = 100;
  std::string predictions, group_rates, focus_group = "F", correlation = "pearson";
  std::string dataset;
  bool mlp = false, cluster = false;
  std::uint64_t seed = 0;
};

json similarity_json(const SimilarityResult& r) { return {{"rho", r.rho}, {"used", r.used}, {"dropped", r.dropped}}; }

json weat_json(const WeatResult& r) {
  return {{"effect_size", r.effect_size}, {"raw", r.raw}, {"dropped", r.dropped}, {"dropped_tokens", r.dropped_tokens}};
}

int cmd_evaluate(const EvaluateArgs& a) {
  EmbeddingSpace before = load_space(a.before, a.limit);
  EmbeddingSpace after;
  if (!a.after.empty()) {
    after = load_space(a.after, a.limit);
    if (after.vocab() != before.vocab()) throw DataError("--before and --after must share a vocabulary");
  } else if (!a.pipeline.empty()) {
    after = apply_pipeline(before, load_pipeline(input_path(a.pipeline)));
  } else {
    after = before.with_matrix(before.matrix(), before.name());
  }

  json report;
  report["tool"] = "mproj";
  report["kind"] = "evaluate";
  report["version"] = kVersion;
  report["inputs"] = {{"before", a.before}, {"after", a.after}, {"pipeline", a.pipeline}};

  if (!a.similarity.empty()) {
    json arr = json::array();
    for (const auto& p : a.similarity) {
      SimilarityBenchmark b = load_similarity_tsv(input_path(p));
      arr.push_back({{"name", b.name},
                     {"before", similarity_json(similarity_correlation(before, b))},
                     {"after", similarity_json(similarity_correlation(after, b))}});
    }
    report["similarity"] = arr;
  }
  if (!a.weat.empty()) {
    WeatOptions wo;
    wo.skip_missing = !a.weat_strict;
    json arr = json::array();
    for (const auto& p : a.weat) {
      for (const auto& t : load_weat_tests(input_path(p))) {
        WeatResult rb = weat_effect_size(before, t, wo), ra = weat_effect_size(after, t, wo);
        for (const auto& tok : rb.dropped_tokens) std::cerr << "warning: " << t.name << ": dropped " << tok << "\n";
        arr.push_back({{"name", t.name},
                       {"mode", a.weat_raw ? "raw" : "effect_size"},
                       {"before", weat_json(rb)},
                       {"after", weat_json(ra)}});
      }
    }
    report["weat"] = arr;
  }
  if (!a.neighbor_tokens.empty()) {
    NeighborStability ns = neighbor_stability(before, after, read_token_list(a.neighbor_tokens), a.k);
    json per = json::array();
    for (const auto& d : ns.per_token) {
      per.push_back({{"token", d.token}, {"entering", d.entering}, {"leaving", d.leaving}});
    }
    report["neighbors"] = {
        {"k", a.k}, {"changed", ns.changed}, {"total", ns.total}, {"missing", ns.missing}, {"per_token", per}};
  }
  if (!a.bias_probes.empty()) {
    auto comma = a.bias_seeds.find(',');
    if (comma == std::string::npos) throw UsageError("--bias-seeds needs plus,minus");
    Vector dir = seed_direction(before, a.bias_seeds.substr(0, comma), a.bias_seeds.substr(comma + 1));
    auto probes = read_token_list(a.bias_probes);
    BiasByNeighbor b0 = bias_by_neighbor(before, before, probes, dir, a.bias_k);
    BiasByNeighbor b1 = bias_by_neighbor(before, after, probes, dir, a.bias_k);
    report["bias_by_neighbor"] = {{"k", a.bias_k},
                                  {"percentage_before", b0.percentage},
                                  {"percentage_after", b1.percentage},
                                  {"missing", b1.missing},
                                  {"degenerate", b1.degenerate}};
  }
  if (!a.predictions.empty()) {
    auto records = load_predictions_csv(input_path(a.predictions));
    std::map<std::string, double> rates;
    if (!a.group_rates.empty()) rates = read_group_rates(a.group_rates);
    TprGapOptions to;
    to.focus_group = a.focus_group;
    if (a.correlation == "spearman") {
      to.correlation = CorrelationKind::Spearman;
    } else if (a.correlation != "pearson") {
      throw UsageError("--correlation must be pearson or spearman");
    }
    TprGapResult r = tpr_gap_suite(records, rates, to);
    report["tpr_gap"] = {{"accuracy", r.accuracy},
                         {"focus_group", r.focus_group},
                         {"other_group", r.other_group},
                         {"gap", r.gap},
                         {"gap_rms", r.gap_rms},
                         {"correlation", r.correlation ? json(*r.correlation) : json(nullptr)},
                         {"correlation_kind", a.correlation},
                         {"excluded", r.excluded}};
  }
  if (!a.dataset.empty()) {
    LabeledPointSet ds = load_dataset(input_path(a.dataset), before);
    const bool has_splits = !ds.splits.empty();
    auto tr = has_splits ? std::optional(Split::Train) : std::nullopt;
    auto te = has_splits ? std::optional(Split::Test) : std::nullopt;
    TrainerParams tp;
    tp.seed = a.seed;
    json probes;
    for (const auto* s : {&before, &after}) {
      LabeledMatrix train = labeled_rows(s->matrix(), ds, tr), test = labeled_rows(s->matrix(), ds, te);
      LinearProbe p = train_linear(train.x, train.y, tp);
      ProbeReport pr = evaluate_probe(p, test.x, test.y, "test");
      json entry = {{"linear_accuracy", pr.accuracy}, {"majority", pr.majority_rate}};
      if (a.mlp) {
        MlpParams mp;
        mp.seed = a.seed;
        MlpReport mr = train_mlp_probe(train, test, mp);
        entry["mlp_accuracy"] = mr.test_accuracy;
      }
      if (a.cluster) {
        LabeledMatrix all = labeled_rows(s->matrix(), ds, std::nullopt);
        ClusterReport cr = kmeans_vmeasure(all.x, all.y, ds.classes.size(), a.seed);
        entry["v_measure"] = cr.score.v;
      }
      probes[s == &before ? "before" : "after"] = entry;
    }
    report["probes"] = probes;
  }
  write_json(report, a.out);
  return 0;
}

// ---- experiment

struct ExperimentArgs {
  std::string config, out, csv, strategy;
  std::optional<std::size_t> runs, threads;
  std::optional<std::uint64_t> seed;
};

int cmd_experiment(const ExperimentArgs& a) {
  ExperimentConfig cfg = load_config(input_path(a.config));
  if (!a.strategy.empty()) cfg.strategy = a.strategy;
  if (a.runs) cfg.runs = *a.runs;
  if (a.threads) cfg.threads = *a.threads;
  if (a.seed) cfg.rng_seed = *a.seed;
  cfg.validate();

  fs::path data_dir;
  if (const char* dir = std::getenv("MPROJ_DATA_DIR"); dir && *dir) data_dir = dir;
  ExperimentInputs inputs = load_inputs(cfg, data_dir);
  json report = run_experiment(inputs, cfg);
  write_json(report, a.out);

  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw DataError("cannot write " + a.csv);
    f << "metric,step,count,mean,ci_low,ci_high,pct_low,pct_high\n";
    auto cell = [](const json& v) { return v.is_null() ? std::string{} : v.dump(); };
    for (const auto& [name, m] : report["metrics"].items()) {
      const auto& t = m["trajectory"];
      for (std::size_t i = 0; i < t["mean"].size(); ++i) {
        f << name << "," << i << "," << t["count"][i] << "," << cell(t["mean"][i]) << "," << cell(t["ci_low"][i]) << ","
          << cell(t["ci_high"][i]) << "," << cell(t["pct_low"][i]) << "," << cell(t["pct_high"][i]) << "\n";
      }
    }
  }
  return 0;
}

// ---- verify-theorems

struct VerifyArgs {
  std::string suite = "all", out;
  std::optional<std::size_t> instances, directions;
  std::uint64_t seed = 1;
};

int cmd_verify(const VerifyArgs& a) {
  static const std::set<std::string> known{"all", "tukey-bound", "median-depth", "adversarial", "approx"};
  if (!known.count(a.suite)) throw UsageError("unknown suite '" + a.suite + "'");
  auto want = [&](const char* s) { return a.suite == "all" || a.suite == s; };

  std::vector<SuiteResult> results;
  std::vector<bool> oks;
  TukeySuiteParams tp;
  tp.rng_seed = a.seed;
  if (a.instances) tp.instances = *a.instances;
  if (want("tukey-bound")) results.push_back(check_tukey_bound(tp)), oks.push_back(results.back().ok());
  if (want("median-depth")) results.push_back(check_median_depth(tp)), oks.push_back(results.back().ok());
  if (want("adversarial")) {
    AdversarialSuiteParams ap;
    ap.rng_seed = a.seed;
    if (a.directions) ap.directions = *a.directions;
    results.push_back(check_adversarial_upper(ap));
    oks.push_back(results.back().ok());
  }
  if (want("approx")) {
    ApproxSuiteParams xp;
    xp.rng_seed = a.seed;
    if (a.instances) xp.instances = *a.instances;
    results.push_back(check_approx_depth(xp));
    oks.push_back(results.back().ok());
    results.push_back(check_approx_median(xp));
    oks.push_back(results.back().detail["rate"] >= 0.9);
  }

  json arr = json::array();
  bool all_ok = true;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    std::cout << (oks[i] ? "PASS" : "FAIL") << "  " << r.name << "  " << r.passed << "/" << r.instances << "  "
              << r.seconds << "s\n";
    arr.push_back({{"name", r.name},
                   {"instances", r.instances},
                   {"passed", r.passed},
                   {"seconds", r.seconds},
                   {"ok", static_cast<bool>(oks[i])},
                   {"detail", r.detail}});
    all_ok = all_ok && oks[i];
  }
  if (!a.out.empty()) write_json({{"tool", "mproj"}, {"kind", "verify-theorems"}, {"suites", arr}}, a.out);
  return all_ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Attribute removal by targeted linear projections"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  IngestArgs ingest;
  auto* ci = app.add_subcommand("ingest", "load embeddings and build a labeled dataset");
  ci->add_option("--embeddings", ingest.embeddings, "text embeddings file")->required();
  ci->add_option("--limit", ingest.limit, "keep the first N rows");
  ci->add_option("--out", ingest.out_dataset, "dataset JSON")->required();
  ci->add_option("--out-space", ingest.out_space, "write the (limited) space");
  ci->add_option("--seed", ingest.ds.seed, "rng seed");
  add_dataset_flags(ci, ingest.ds);

  DebiasArgs debias;
  auto* cd = app.add_subcommand("debias", "compute a projection pipeline");
  cd->add_option("--embeddings", debias.embeddings)->required();
  cd->add_option("--limit", debias.limit);
  cd->add_option("--dataset", debias.dataset, "dataset JSON from ingest");
  cd->add_option("--strategy", debias.strategy, "e.g. MP, TMP, INLP, MP+R34, INLP8+R27")->capture_default_str();
  cd->add_option("--trainer", debias.trainer, "hinge or logistic")->capture_default_str();
  cd->add_option("--max-iters", debias.max_iters)->capture_default_str();
  cd->add_option("--stop-margin", debias.stop_margin)->capture_default_str();
  cd->add_option("--tmp-mode", debias.tmp_mode, "exact (2-d only) or approx")->capture_default_str();
  cd->add_option("--config", debias.config, "experiment config supplying inlp/tmp options");
  cd->add_option("--seed", debias.seed);
  cd->add_option("--out", debias.out_pipeline, "pipeline JSON")->required();
  cd->add_option("--out-space", debias.out_space, "write the projected space");
  add_dataset_flags(cd, debias.ds);

  EvaluateArgs eval;
  auto* ce = app.add_subcommand("evaluate", "score a space pair");
  ce->add_option("--before", eval.before, "original embeddings")->required();
  auto* after_opt = ce->add_option("--after", eval.after, "debiased embeddings");
  ce->add_option("--pipeline", eval.pipeline, "pipeline JSON applied to --before")->excludes(after_opt);
  ce->add_option("--limit", eval.limit);
  ce->add_option("--similarity", eval.similarity, "similarity TSV (repeatable)");
  ce->add_option("--weat", eval.weat, "WEAT JSON (repeatable)");
  ce->add_flag("--weat-raw", eval.weat_raw, "report the unnormalized WEAT statistic as primary");
  ce->add_flag("--weat-strict", eval.weat_strict, "fail on tokens missing from the space");
  ce->add_option("--neighbors", eval.neighbor_tokens, "token list file for neighbor stability");
  ce->add_option("--k", eval.k, "neighbors per token")->capture_default_str();
  ce->add_option("--bias-probes", eval.bias_probes, "token list file for bias-by-neighbor");
  ce->add_option("--bias-seeds", eval.bias_seeds, "plus,minus seed tokens")->capture_default_str();
  ce->add_option("--bias-k", eval.bias_k)->capture_default_str();
  ce->add_option("--predictions", eval.predictions, "CSV true,predicted,group");
  ce->add_option("--group-rates", eval.group_rates, "CSV profession,rate");
  ce->add_option("--focus-group", eval.focus_group)->capture_default_str();
  ce->add_option("--correlation", eval.correlation, "pearson or spearman")->capture_default_str();
  ce->add_option("--dataset", eval.dataset, "dataset JSON for probe and cluster scores");
  ce->add_flag("--mlp", eval.mlp, "also train the MLP probe");
  ce->add_flag("--cluster", eval.cluster, "also report k-means V-measure");
  ce->add_option("--seed", eval.seed);
  ce->add_option("--out", eval.out, "report path (default stdout)");

  ExperimentArgs exp;
  auto* cx = app.add_subcommand("experiment", "seeded multi-run experiment");
  cx->add_option("--config", exp.config, "experiment JSON")->required();
  cx->add_option("--strategy", exp.strategy);
  cx->add_option("--runs", exp.runs);
  cx->add_option("--threads", exp.threads);
  cx->add_option("--seed", exp.seed);
  cx->add_option("--out", exp.out, "report path (default stdout)");
  cx->add_option("--csv", exp.csv, "per-step trajectory CSV");

  VerifyArgs ver;
  auto* cv = app.add_subcommand("verify-theorems", "run the geometric bound suites");
  cv->add_option("--suite", ver.suite, "all, tukey-bound, median-depth, adversarial, approx")->capture_default_str();
  cv->add_option("--instances", ver.instances);
  cv->add_option("--directions", ver.directions);
  cv->add_option("--seed", ver.seed)->capture_default_str();
  cv->add_option("--out", ver.out, "JSON summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ci) return cmd_ingest(ingest);
    if (*cd) return cmd_debias(debias);
    if (*ce) return cmd_evaluate(eval);
    if (*cx) return cmd_experiment(exp);
    if (*cv) return cmd_verify(ver);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
