#include "mproj/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "mproj/error.hpp"
#include "mproj/stats.hpp"

namespace mproj {

namespace {

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Leading keyword plus an optional trailing count.
bool match_counted(const std::string& tok, const std::string& word, std::optional<std::size_t>& count) {
  if (tok.rfind(word, 0) != 0) return false;
  std::string rest = tok.substr(word.size());
  if (rest.empty()) return true;
  if (!std::all_of(rest.begin(), rest.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    return false;
  }
  count = std::stoull(rest);
  return true;
}

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw UsageError("config: " + where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!ok.count(it.key())) throw UsageError("config: unknown key '" + it.key() + "' in " + where);
  }
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& data_dir) {
  std::filesystem::path path(p);
  if (path.is_relative() && !data_dir.empty()) return data_dir / path;
  return path;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

std::vector<StrategyToken> parse_strategy_sequence(const std::string& spec) {
  std::vector<StrategyToken> out;
  std::string s = upper(spec);
  std::size_t start = 0;
  while (start <= s.size()) {
    auto end = s.find('+', start);
    if (end == std::string::npos) end = s.size();
    std::string tok = trim(s.substr(start, end - start));
    if (tok.empty()) throw UsageError("strategy '" + spec + "': empty element");
    StrategyToken t;
    if (tok == "MP") {
      t.strategy = Strategy::MP;
    } else if (tok == "TMP") {
      t.strategy = Strategy::TMP;
    } else if (match_counted(tok, "INLP", t.count)) {
      t.strategy = Strategy::INLP;
    } else if (match_counted(tok, "RANDOM", t.count) || match_counted(tok, "R", t.count)) {
      t.strategy = Strategy::Random;
    } else {
      throw UsageError("strategy '" + spec + "': unknown element '" + tok + "'");
    }
    if (t.count && *t.count == 0) throw UsageError("strategy '" + spec + "': zero count in '" + tok + "'");
    out.push_back(t);
    start = end + 1;
  }
  return out;
}

std::string to_string(const std::vector<StrategyToken>& sequence) {
  std::string out;
  for (const auto& t : sequence) {
    if (!out.empty()) out += '+';
    switch (t.strategy) {
      case Strategy::MP: out += "MP"; break;
      case Strategy::TMP: out += "TMP"; break;
      case Strategy::INLP: out += "INLP"; break;
      case Strategy::Random: out += "R"; break;
    }
    if (t.count) out += std::to_string(*t.count);
  }
  return out;
}

LabeledMatrix labeled_rows(const Matrix& points, const LabeledPointSet& dataset, std::optional<Split> split) {
  auto view = dataset.view(split);
  LabeledMatrix out;
  out.x.resize(static_cast<Eigen::Index>(view.rows.size()), points.cols());
  for (std::size_t i = 0; i < view.rows.size(); ++i) {
    out.x.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(view.rows[i]));
  }
  out.y = std::move(view.labels);
  return out;
}

ProjectionPipeline run_strategy(const Matrix& points, const LabeledPointSet& dataset,
                                const std::vector<StrategyToken>& sequence, const StrategyOptions& options,
                                std::uint64_t rng_seed, std::string source_space) {
  if (sequence.empty()) throw UsageError("empty strategy sequence");
  const bool has_splits = !dataset.splits.empty();
  std::optional<Split> fit_split = has_splits ? std::optional<Split>(Split::Train) : std::nullopt;
  std::optional<Split> dev_split = has_splits ? std::optional<Split>(Split::Dev) : std::nullopt;
  auto fit_view = dataset.view(fit_split);

  ProjectionPipeline pipeline(std::move(source_space));
  Matrix current = points;
  std::uint64_t draws = 0;

  auto push = [&](ProjectionStep step) {
    current = project_along(current, step.w);
    step.iteration = pipeline.size() + 1;
    pipeline.push_back(std::move(step));
  };

  for (const auto& tok : sequence) {
    switch (tok.strategy) {
      case Strategy::MP: {
        std::vector<std::vector<std::size_t>> classes(dataset.classes.size());
        for (std::size_t i = 0; i < fit_view.rows.size(); ++i) {
          classes[static_cast<std::size_t>(fit_view.labels[i])].push_back(fit_view.rows[i]);
        }
        ProjectionPipeline mp = mp_multiclass(current, classes, options.mp_anchor);
        for (const auto& w : mp.warnings()) pipeline.warn(w);
        for (const auto& s : mp.steps()) push(s);
        break;
      }
      case Strategy::TMP: {
        const AttributeClass* minus = dataset.find(AttributeLabel::Minus);
        const AttributeClass* plus = dataset.find(AttributeLabel::Plus);
        if (!minus || !plus) throw DataError("TMP needs MINUS and PLUS classes");
        auto keep = [&](const AttributeClass& c) {
          std::vector<std::size_t> rows;
          for (std::size_t r : c.indices) {
            auto it = dataset.splits.find(r);
            if (!has_splits || (it != dataset.splits.end() && it->second == Split::Train)) rows.push_back(r);
          }
          return rows;
        };
        auto rm = keep(*minus), rp = keep(*plus);
        TmpOptions tmp = options.tmp;
        tmp.approx.rng_seed = splitmix64(rng_seed ^ 0x746d70ULL);
        push(tmp_step(current, rm, rp, tmp));
        break;
      }
      case Strategy::INLP: {
        InlpOptions inlp = options.inlp;
        if (tok.count) inlp.max_iters = *tok.count;
        inlp.trainer.seed = splitmix64(rng_seed ^ 0x696e6c70ULL);
        LabeledMatrix train = labeled_rows(current, dataset, fit_split);
        LabeledMatrix dev = labeled_rows(current, dataset, dev_split);
        InlpResult r = inlp_run(train, dev, inlp);
        for (const auto& w : r.pipeline.warnings()) pipeline.warn(w);
        for (const auto& s : r.pipeline.steps()) push(s);
        break;
      }
      case Strategy::Random: {
        std::size_t count = tok.count.value_or(1);
        for (std::size_t i = 0; i < count; ++i) {
          ProjectionStep s = random_step(current, splitmix64(rng_seed + 0x1000003ULL * ++draws));
          push(std::move(s));
        }
        break;
      }
    }
  }
  return pipeline;
}

void ExperimentConfig::validate() const {
  if (trim(strategy).empty()) throw UsageError("config: strategy must be non-empty");
  parse_strategy_sequence(strategy);
  if (runs == 0) throw UsageError("config: runs must be >= 1");
  for (const auto& m : metrics) {
    if (m != "similarity" && m != "weat" && m != "probe") throw UsageError("config: unknown metric '" + m + "'");
  }
  if (!dataset.split.empty() && dataset.split.size() != 3) {
    throw UsageError("config: dataset.split needs three fractions");
  }
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, {"embeddings", "dataset", "strategy", "inlp", "tmp", "mp_anchor", "metrics", "benchmarks",
                   "weat_raw", "rng_seed", "runs", "threads"},
               "top level");
    if (j.contains("embeddings")) {
      const auto& e = j.at("embeddings");
      if (e.is_string()) {
        c.embeddings = e.get<std::string>();
      } else {
        check_keys(e, {"path", "limit"}, "embeddings");
        c.embeddings = e.value("path", std::string{});
        if (e.contains("limit") && !e.at("limit").is_null()) c.limit = e.at("limit").get<std::size_t>();
      }
    }
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      check_keys(d, {"plus_seed", "minus_seed", "k", "neutral_k", "neutral_threshold", "absolute_threshold", "split",
                     "path"},
                 "dataset");
      c.dataset.plus_seed = d.value("plus_seed", c.dataset.plus_seed);
      c.dataset.minus_seed = d.value("minus_seed", c.dataset.minus_seed);
      c.dataset.k = d.value("k", c.dataset.k);
      c.dataset.neutral_k = d.value("neutral_k", c.dataset.neutral_k);
      c.dataset.neutral_threshold = d.value("neutral_threshold", c.dataset.neutral_threshold);
      c.dataset.absolute_threshold = d.value("absolute_threshold", c.dataset.absolute_threshold);
      if (d.contains("split")) c.dataset.split = d.at("split").get<std::vector<double>>();
      c.dataset.path = d.value("path", c.dataset.path);
    }
    c.strategy = j.value("strategy", c.strategy);
    if (j.contains("inlp")) {
      const auto& i = j.at("inlp");
      check_keys(i, {"trainer", "max_iters", "stop_margin", "l2", "epochs", "orthogonalize", "precheck"}, "inlp");
      if (i.contains("trainer")) c.options.inlp.trainer.trainer = parse_trainer(i.at("trainer").get<std::string>());
      c.options.inlp.max_iters = i.value("max_iters", c.options.inlp.max_iters);
      c.options.inlp.stop_margin = i.value("stop_margin", c.options.inlp.stop_margin);
      c.options.inlp.trainer.l2 = i.value("l2", c.options.inlp.trainer.l2);
      c.options.inlp.trainer.epochs = i.value("epochs", c.options.inlp.trainer.epochs);
      c.options.inlp.orthogonalize = i.value("orthogonalize", c.options.inlp.orthogonalize);
      c.options.inlp.precheck = i.value("precheck", c.options.inlp.precheck);
    }
    if (j.contains("tmp")) {
      const auto& t = j.at("tmp");
      check_keys(t, {"mode", "iterations", "directions"}, "tmp");
      std::string mode = t.value("mode", std::string{"approx"});
      if (mode == "exact") {
        c.options.tmp.mode = MedianMode::Exact2d;
      } else if (mode == "approx") {
        c.options.tmp.mode = MedianMode::Approx;
      } else {
        throw UsageError("config: tmp.mode must be 'exact' or 'approx'");
      }
      c.options.tmp.approx.iterations = t.value("iterations", c.options.tmp.approx.iterations);
      c.options.tmp.approx.directions = t.value("directions", c.options.tmp.approx.directions);
    }
    c.options.mp_anchor = j.value("mp_anchor", c.options.mp_anchor);
    if (j.contains("metrics")) c.metrics = j.at("metrics").get<std::vector<std::string>>();
    if (j.contains("benchmarks")) {
      const auto& b = j.at("benchmarks");
      check_keys(b, {"similarity", "weat"}, "benchmarks");
      if (b.contains("similarity")) c.similarity_benchmarks = b.at("similarity").get<std::vector<std::string>>();
      if (b.contains("weat")) c.weat_tests = b.at("weat").get<std::vector<std::string>>();
    }
    c.weat_raw = j.value("weat_raw", c.weat_raw);
    c.rng_seed = j.value("rng_seed", c.rng_seed);
    c.runs = j.value("runs", c.runs);
    c.threads = j.value("threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["embeddings"] = {{"path", c.embeddings}, {"limit", c.limit ? nlohmann::json(*c.limit) : nlohmann::json(nullptr)}};
  j["dataset"] = {{"plus_seed", c.dataset.plus_seed},
                  {"minus_seed", c.dataset.minus_seed},
                  {"k", c.dataset.k},
                  {"neutral_k", c.dataset.neutral_k},
                  {"neutral_threshold", c.dataset.neutral_threshold},
                  {"absolute_threshold", c.dataset.absolute_threshold},
                  {"split", c.dataset.split},
                  {"path", c.dataset.path}};
  j["strategy"] = c.strategy;
  j["inlp"] = {{"trainer", to_string(c.options.inlp.trainer.trainer)},
               {"max_iters", c.options.inlp.max_iters},
               {"stop_margin", c.options.inlp.stop_margin},
               {"l2", c.options.inlp.trainer.l2},
               {"epochs", c.options.inlp.trainer.epochs},
               {"orthogonalize", c.options.inlp.orthogonalize},
               {"precheck", c.options.inlp.precheck}};
  j["tmp"] = {{"mode", c.options.tmp.mode == MedianMode::Exact2d ? "exact" : "approx"},
              {"iterations", c.options.tmp.approx.iterations},
              {"directions", c.options.tmp.approx.directions}};
  j["mp_anchor"] = c.options.mp_anchor;
  j["metrics"] = c.metrics;
  j["benchmarks"] = {{"similarity", c.similarity_benchmarks}, {"weat", c.weat_tests}};
  j["weat_raw"] = c.weat_raw;
  j["rng_seed"] = c.rng_seed;
  j["runs"] = c.runs;
  j["threads"] = c.threads;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

LabeledPointSet build_dataset(const EmbeddingSpace& space, const DatasetConfig& config, std::uint64_t rng_seed,
                              std::vector<std::string>* warnings) {
  if (config.k == 0) throw UsageError("dataset.k must be >= 1");
  Vector dir = seed_direction(space, config.plus_seed, config.minus_seed, warnings);
  BiasDatasetParams p;
  p.k = config.k;
  p.neutral_k = config.neutral_k;
  p.neutral_threshold = config.neutral_threshold;
  p.absolute_threshold = config.absolute_threshold;
  p.rng_seed = rng_seed;
  LabeledPointSet ds = build_bias_dataset(space, dir, Vector(-dir), p);
  if (!config.split.empty()) {
    ds = split(ds, {config.split[0], config.split[1], config.split[2]}, rng_seed);
  }
  return ds;
}

ExperimentInputs load_inputs(const ExperimentConfig& config, const std::filesystem::path& data_dir) {
  if (config.embeddings.empty()) throw UsageError("config: embeddings path is required");
  ExperimentInputs in;
  LoadOptions lo;
  lo.limit = config.limit;
  in.space = load_text_embeddings(resolve(config.embeddings, data_dir), lo).space;
  if (!config.dataset.path.empty()) {
    in.dataset = load_dataset(resolve(config.dataset.path, data_dir), in.space);
  } else {
    in.dataset = build_dataset(in.space, config.dataset, config.rng_seed);
  }
  for (const auto& p : config.similarity_benchmarks) in.similarity.push_back(load_similarity_tsv(resolve(p, data_dir)));
  for (const auto& p : config.weat_tests) {
    for (auto& t : load_weat_tests(resolve(p, data_dir))) in.weat.push_back(std::move(t));
  }
  return in;
}

RunTrace run_once(const ExperimentInputs& inputs, const ExperimentConfig& config, std::uint64_t seed) {
  RunTrace trace;
  trace.seed = seed;
  auto sequence = parse_strategy_sequence(config.strategy);
  ProjectionPipeline pipeline =
      run_strategy(inputs.space.matrix(), inputs.dataset, sequence, config.options, seed, inputs.space.name());
  trace.steps = pipeline.size();
  trace.warnings = pipeline.warnings();

  auto wants = [&](const char* m) { return std::find(config.metrics.begin(), config.metrics.end(), m) != config.metrics.end(); };
  const bool has_splits = !inputs.dataset.splits.empty();
  TrainerParams probe_params = config.options.inlp.trainer;
  probe_params.seed = splitmix64(seed ^ 0x70726f6265ULL);

  Matrix current = inputs.space.matrix();
  for (std::size_t t = 0; t <= pipeline.size(); ++t) {
    if (t > 0) current = project_along(current, pipeline.steps()[t - 1].w);
    EmbeddingSpace space = inputs.space.with_matrix(current, inputs.space.name());
    if (wants("similarity")) {
      for (const auto& b : inputs.similarity) {
        trace.trajectories["similarity:" + b.name].push_back(similarity_correlation(space, b).rho);
      }
    }
    if (wants("weat")) {
      for (const auto& w : inputs.weat) {
        WeatResult r = weat_effect_size(space, w);
        trace.trajectories["weat:" + w.name].push_back(config.weat_raw ? r.raw : r.effect_size);
      }
    }
    if (wants("probe")) {
      LabeledMatrix train = labeled_rows(current, inputs.dataset, has_splits ? std::optional(Split::Train) : std::nullopt);
      LabeledMatrix dev = labeled_rows(current, inputs.dataset, has_splits ? std::optional(Split::Dev) : std::nullopt);
      LinearProbe probe = train_linear(train.x, train.y, probe_params);
      trace.trajectories["probe_dev_accuracy"].push_back(evaluate_probe(probe, dev.x, dev.y, "dev").accuracy);
    }
  }
  return trace;
}

nlohmann::json summary_to_json(std::span<const double> xs) {
  stats::Summary s = stats::summarize(xs);
  return {{"mean", s.mean},       {"stdev", opt_json(s.stdev)},     {"ci_low", opt_json(s.ci_low)},
          {"ci_high", opt_json(s.ci_high)}, {"pct_low", opt_json(s.pct_low)}, {"pct_high", opt_json(s.pct_high)},
          {"n", s.n}};
}

nlohmann::json run_experiment(const ExperimentInputs& inputs, const ExperimentConfig& config) {
  config.validate();
  std::vector<RunTrace> traces(config.runs);
  std::vector<std::exception_ptr> errors(config.runs);
  std::size_t workers = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, config.runs);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < config.runs; i = next++) {
      try {
        traces[i] = run_once(inputs, config, config.rng_seed + i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  nlohmann::json cfg = config_to_json(config);
  nlohmann::json report;
  report["tool"] = "mproj";
  report["kind"] = "experiment";
  report["version"] = kVersion;
  report["config"] = cfg;
  report["config_hash"] = fnv1a_hex(cfg.dump());
  report["strategy"] = to_string(parse_strategy_sequence(config.strategy));
  report["runs"] = config.runs;
  std::vector<std::uint64_t> seeds;
  std::vector<double> steps;
  std::set<std::string> warnings;
  for (const auto& t : traces) {
    seeds.push_back(t.seed);
    steps.push_back(static_cast<double>(t.steps));
    warnings.insert(t.warnings.begin(), t.warnings.end());
  }
  report["seeds"] = seeds;
  report["steps"] = summary_to_json(steps);
  report["warnings"] = std::vector<std::string>(warnings.begin(), warnings.end());

  nlohmann::json metrics = nlohmann::json::object();
  if (!traces.empty()) {
    for (const auto& [name, _] : traces.front().trajectories) {
      std::vector<double> finals;
      std::size_t len = 0;
      for (const auto& t : traces) {
        const auto& v = t.trajectories.at(name);
        finals.push_back(v.back());
        len = std::max(len, v.size());
      }
      nlohmann::json traj = {{"mean", nlohmann::json::array()},   {"stdev", nlohmann::json::array()},
                             {"ci_low", nlohmann::json::array()}, {"ci_high", nlohmann::json::array()},
                             {"pct_low", nlohmann::json::array()}, {"pct_high", nlohmann::json::array()},
                             {"count", nlohmann::json::array()}};
      for (std::size_t k = 0; k < len; ++k) {
        std::vector<double> xs;
        for (const auto& t : traces) {
          const auto& v = t.trajectories.at(name);
          if (k < v.size()) xs.push_back(v[k]);
        }
        nlohmann::json s = summary_to_json(xs);
        for (const char* f : {"mean", "stdev", "ci_low", "ci_high", "pct_low", "pct_high"}) traj[f].push_back(s[f]);
        traj["count"].push_back(xs.size());
      }
      metrics[name] = {{"final", summary_to_json(finals)}, {"per_run_final", finals}, {"trajectory", traj}};
    }
  }
  report["metrics"] = metrics;
  return report;
}

std::vector<double> final_values(const nlohmann::json& report, const std::string& metric) {
  if (!report.contains("metrics") || !report["metrics"].contains(metric)) {
    throw UsageError("report has no metric '" + metric + "'");
  }
  return report["metrics"][metric]["per_run_final"].get<std::vector<double>>();
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace mproj
