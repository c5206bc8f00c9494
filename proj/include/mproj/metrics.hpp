#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mproj/embeddings.hpp"

namespace mproj {

// ---- WEAT ----------------------------------------------------------------

struct WeatTest {
  std::string name;
  std::vector<std::string> targets_x, targets_y;
  std::vector<std::string> attributes_a, attributes_b;

  // Throws DataError on empty lists or a token shared by X/Y or A/B.
  void validate() const;
};

// {"name":..., "targets_X":[...], "targets_Y":[...], "attributes_A":[...], "attributes_B":[...]}
// A file may hold one object or an array of them.
std::vector<WeatTest> load_weat_tests(const std::filesystem::path& path);

struct WeatOptions {
  bool skip_missing = true;  // false: unknown tokens throw UnknownToken
};

struct WeatResult {
  double effect_size = 0.0;
  double raw = 0.0;  // mean_X s(x,A,B) - mean_Y s(y,A,B)
  std::map<std::string, std::size_t> dropped;  // per list: X, Y, A, B
  std::vector<std::string> dropped_tokens;
};

// s(w,A,B) = mean_a cos(w,a) - mean_b cos(w,b); the effect size divides the
// raw difference by the sample standard deviation of s over X u Y.
WeatResult weat_effect_size(const EmbeddingSpace& space, const WeatTest& test, const WeatOptions& options = {});

// ---- similarity benchmarks -------------------------------------------------

struct SimilarityPair {
  std::string a, b;
  double score = 0.0;
};

struct SimilarityBenchmark {
  std::string name;
  std::vector<SimilarityPair> pairs;
};

// "tok1\ttok2\tscore" per line; lines starting with '#' are skipped. Throws
// DataError on duplicate pairs or non-finite scores.
SimilarityBenchmark load_similarity_tsv(const std::filesystem::path& path, std::string name = {});

struct SimilarityResult {
  double rho = 0.0;
  std::size_t used = 0;
  std::size_t dropped = 0;
};

// Spearman correlation of human scores with cosine similarity; pairs with an
// unknown or zero-vector token are dropped and counted.
SimilarityResult similarity_correlation(const EmbeddingSpace& space, const SimilarityBenchmark& benchmark);

// ---- neighborhoods ---------------------------------------------------------

struct NeighborDiff {
  std::string token;
  std::vector<std::string> before, after;
  std::vector<std::string> entering, leaving;
};

struct NeighborStability {
  std::size_t changed = 0;  // neighbors that left the top-k, summed over tokens
  std::size_t total = 0;    // tokens * k
  std::size_t missing = 0;  // query tokens absent from the space
  std::vector<NeighborDiff> per_token;
};

// `before` and `after` must share a vocabulary (same rows, same order).
NeighborStability neighbor_stability(const EmbeddingSpace& before, const EmbeddingSpace& after,
                                     const std::vector<std::string>& tokens, std::size_t k);

struct BiasByNeighbor {
  double percentage = 0.0;  // 0..100
  std::map<std::string, double> per_token;
  std::size_t missing = 0;
  bool degenerate = false;  // no row has non-zero cosine with the bias direction
};

// Mean over probe tokens of the share of their k nearest neighbors in the
// debiased space whose original vector has cosine > 0 with bias_direction.
BiasByNeighbor bias_by_neighbor(const EmbeddingSpace& original, const EmbeddingSpace& debiased,
                                const std::vector<std::string>& probe_tokens, const Vector& bias_direction,
                                std::size_t k = 100);

// ---- TPR-GAP ----------------------------------------------------------------

struct PredictionRecord {
  std::string true_label;
  std::string predicted_label;
  std::string group;
};

// CSV with header "true,predicted,group".
std::vector<PredictionRecord> load_predictions_csv(const std::filesystem::path& path);

enum class CorrelationKind { Pearson, Spearman };

struct TprGapOptions {
  std::string focus_group = "F";
  std::optional<std::vector<std::string>> label_set;  // defaults to the observed true labels
  CorrelationKind correlation = CorrelationKind::Pearson;
};

struct TprGapResult {
  double accuracy = 0.0;
  std::string focus_group, other_group;
  std::map<std::string, double> tpr_focus, tpr_other;
  std::map<std::string, double> gap;  // TPR_focus - TPR_other
  double gap_rms = 0.0;
  std::optional<double> correlation;  // gap vs. share of the focus group
  std::vector<std::string> excluded;  // professions lacking support in a group
};

// group_rates: profession -> fraction of the focus group among its members.
TprGapResult tpr_gap_suite(const std::vector<PredictionRecord>& records,
                           const std::map<std::string, double>& group_rates, const TprGapOptions& options = {});

}  // namespace mproj
