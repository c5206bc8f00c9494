#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mproj/types.hpp"

namespace mproj {

// Vocabulary paired with a row-indexed matrix of d-dimensional vectors.
// Immutable once constructed.
class EmbeddingSpace {
 public:
  EmbeddingSpace() = default;

  // Throws DataError if vocab/matrix sizes disagree, a token repeats,
  // d == 0, or a coordinate is not finite.
  EmbeddingSpace(std::vector<std::string> vocab, Matrix matrix, std::string name = {});

  std::size_t size() const { return vocab_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(matrix_.cols()); }
  bool empty() const { return vocab_.empty(); }

  const std::vector<std::string>& vocab() const { return vocab_; }
  const Matrix& matrix() const { return matrix_; }
  const std::string& name() const { return name_; }
  const std::string& token(std::size_t row) const { return vocab_.at(row); }

  std::optional<std::size_t> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  // Throws UnknownToken.
  std::size_t index_of(std::string_view token) const;
  Vector vector(std::string_view token) const;

  double row_norm(std::size_t row) const { return norms_[row]; }

  // Same vocabulary, new coordinates.
  EmbeddingSpace with_matrix(Matrix matrix, std::string name) const;

  // Rows in the given order; vocabulary restricted accordingly.
  EmbeddingSpace subset(std::span<const std::size_t> rows, std::string name) const;

 private:
  std::vector<std::string> vocab_;
  Matrix matrix_;
  std::string name_;
  std::vector<double> norms_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct Neighbor {
  std::string token;
  std::size_t index = 0;
  double similarity = 0.0;
};

struct NeighborList {
  std::string query;
  std::vector<Neighbor> neighbors;
};

struct LoadOptions {
  std::optional<std::size_t> limit;
  std::string name;
};

struct LoadResult {
  EmbeddingSpace space;
  std::size_t duplicate_tokens = 0;  // later duplicates are dropped
  bool header_skipped = false;
  bool limit_exceeds_file = false;
};

// GloVe-style text: "token v1 ... vd" per line; a leading "n d" header is
// detected and skipped. Throws ParseError naming the offending line.
LoadResult load_text_embeddings(const std::filesystem::path& path, const LoadOptions& options = {});

// Writes with enough precision that a reload matches within 1e-5.
void save_text_embeddings(const EmbeddingSpace& space, const std::filesystem::path& path);

double cosine(const EmbeddingSpace& space, std::string_view a, std::string_view b);
double cosine(const Vector& a, const Vector& b);

// Exact top-k by cosine. Ties go to the lower vocabulary index.
NeighborList nearest_neighbors(const EmbeddingSpace& space, const Vector& query, std::size_t k,
                               const std::unordered_set<std::string>& exclude = {});

// Token query; the token itself never appears in its own list.
NeighborList nearest_neighbors(const EmbeddingSpace& space, std::string_view query, std::size_t k,
                               const std::unordered_set<std::string>& exclude = {});

// "query\ttok:sim,tok:sim,..."
std::string format_neighbor_line(const NeighborList& list);

}  // namespace mproj
