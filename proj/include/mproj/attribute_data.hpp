#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mproj/embeddings.hpp"

namespace mproj {

enum class AttributeLabel { Minus, Plus, Neutral };

std::string to_string(AttributeLabel label);
AttributeLabel parse_attribute_label(const std::string& s);

enum class Split { Train, Dev, Test };

std::string to_string(Split split);
Split parse_split(const std::string& s);

struct AttributeClass {
  AttributeLabel label = AttributeLabel::Neutral;
  std::vector<std::size_t> indices;  // rows of the source space, in selection order
};

// Disjoint attribute classes over one embedding space, plus an optional
// train/dev/test assignment of every labeled row.
struct LabeledPointSet {
  std::string space;
  std::vector<AttributeClass> classes;
  std::map<std::size_t, Split> splits;

  std::size_t labeled_count() const;
  const AttributeClass* find(AttributeLabel label) const;

  // Rows and 0-based class ids (position in `classes`) for one split, ordered by
  // class then selection order. Without splits, `split` is ignored and every
  // labeled row is returned.
  struct View {
    std::vector<std::size_t> rows;
    std::vector<int> labels;
  };
  View view(std::optional<Split> split = std::nullopt) const;

  // Throws DataError if classes overlap or an index is out of range.
  void validate(std::size_t space_size) const;
};

Vector seed_direction(const EmbeddingSpace& space, const std::string& positive, const std::string& negative,
                      std::vector<std::string>* warnings = nullptr);

struct BiasDatasetParams {
  std::size_t k = 0;  // per polar class
  std::size_t neutral_k = 0;
  double neutral_threshold = 0.3;
  bool absolute_threshold = false;  // filter on |cos| instead of signed cos
  std::uint64_t rng_seed = 0;
};

// PLUS = top-k by cosine to dir_plus, MINUS = top-k to dir_minus; a row wanted
// by both goes to the class it is closer to and the other class refills from
// its ranking. NEUTRAL is a seeded uniform sample of the remaining rows whose
// cosine to dir_plus is below the threshold.
LabeledPointSet build_bias_dataset(const EmbeddingSpace& space, const Vector& dir_plus, const Vector& dir_minus,
                                   const BiasDatasetParams& params);

// Stratified per class (largest-remainder rounding), deterministic under seed.
LabeledPointSet split(const LabeledPointSet& dataset, std::array<double, 3> fractions, std::uint64_t rng_seed);

// {space, classes:[{label, tokens}], splits:{token: "train"|"dev"|"test"}}
void save_dataset(const LabeledPointSet& dataset, const EmbeddingSpace& space, const std::filesystem::path& path);
LabeledPointSet load_dataset(const std::filesystem::path& path, const EmbeddingSpace& space);

}  // namespace mproj
