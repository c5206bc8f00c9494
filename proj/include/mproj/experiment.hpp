#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mproj/attribute_data.hpp"
#include "mproj/debias.hpp"
#include "mproj/embeddings.hpp"
#include "mproj/metrics.hpp"

namespace mproj {

// One element of a '+'-joined strategy sequence such as "MP+R34" or "INLP8+R27".
struct StrategyToken {
  Strategy strategy = Strategy::MP;
  std::optional<std::size_t> count;  // INLP: round budget; Random: number of steps
};

// Accepts MP, TMP, INLP, INLP<n>, R, R<n>, RANDOM, RANDOM<n> (case-insensitive).
// Throws UsageError on anything else or an empty sequence.
std::vector<StrategyToken> parse_strategy_sequence(const std::string& spec);
std::string to_string(const std::vector<StrategyToken>& sequence);

struct StrategyOptions {
  InlpOptions inlp;
  TmpOptions tmp;
  std::size_t mp_anchor = 0;  // class position used as the MP anchor
};

// Runs the sequence on `points` (all rows of the space). Each element sees the
// data as projected by everything before it. MP and INLP fit on the train
// split (all labeled rows if the dataset has no splits); INLP stops on dev.
// TMP uses the MINUS and PLUS classes. Random steps draw from the covariance
// of all current rows. Step iterations are renumbered 1..N.
ProjectionPipeline run_strategy(const Matrix& points, const LabeledPointSet& dataset,
                                const std::vector<StrategyToken>& sequence, const StrategyOptions& options,
                                std::uint64_t rng_seed, std::string source_space = {});

LabeledMatrix labeled_rows(const Matrix& points, const LabeledPointSet& dataset, std::optional<Split> split);

struct DatasetConfig {
  std::string plus_seed = "he";
  std::string minus_seed = "she";
  std::size_t k = 0;
  std::size_t neutral_k = 0;
  double neutral_threshold = 0.3;
  bool absolute_threshold = false;
  std::vector<double> split{0.7, 0.15, 0.15};
  std::string path;  // prebuilt dataset JSON; overrides the seed construction
};

struct ExperimentConfig {
  std::string embeddings;
  std::optional<std::size_t> limit;
  DatasetConfig dataset;
  std::string strategy = "MP";
  StrategyOptions options;
  std::vector<std::string> metrics{"similarity", "weat"};  // also: probe
  std::vector<std::string> similarity_benchmarks;
  std::vector<std::string> weat_tests;
  bool weat_raw = false;
  std::uint64_t rng_seed = 0;
  std::size_t runs = 1;
  std::size_t threads = 0;  // 0: hardware concurrency

  // Throws UsageError for an empty strategy, runs == 0 or an unknown metric.
  void validate() const;
};

// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

// Everything a run needs, already in memory.
struct ExperimentInputs {
  EmbeddingSpace space;
  LabeledPointSet dataset;
  std::vector<SimilarityBenchmark> similarity;
  std::vector<WeatTest> weat;
};

// Relative paths resolve against `data_dir` when given.
ExperimentInputs load_inputs(const ExperimentConfig& config, const std::filesystem::path& data_dir = {});

// Seed-based dataset for a loaded space: seed direction, bias dataset, split.
LabeledPointSet build_dataset(const EmbeddingSpace& space, const DatasetConfig& config, std::uint64_t rng_seed,
                              std::vector<std::string>* warnings = nullptr);

struct RunTrace {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  // metric name -> value after 0..steps projections
  std::map<std::string, std::vector<double>> trajectories;
  std::vector<std::string> warnings;
};

// A single seeded run: pipeline plus metric trajectories.
RunTrace run_once(const ExperimentInputs& inputs, const ExperimentConfig& config, std::uint64_t seed);

// Runs `config.runs` repetitions (run i uses rng_seed + i) on worker threads
// and reduces them in run order. The report carries no timestamps, so equal
// configs give equal bytes.
nlohmann::json run_experiment(const ExperimentInputs& inputs, const ExperimentConfig& config);

// Per-run final values of one metric, read back from a report.
std::vector<double> final_values(const nlohmann::json& report, const std::string& metric);

// Summary as JSON; fields without enough runs are null.
nlohmann::json summary_to_json(std::span<const double> xs);

std::string fnv1a_hex(const std::string& text);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mproj
