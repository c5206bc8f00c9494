#include "mproj/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "mproj/error.hpp"

namespace mproj {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

bool parse_count(std::string_view s, std::size_t& out) {
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

EmbeddingSpace::EmbeddingSpace(std::vector<std::string> vocab, Matrix matrix, std::string name)
    : vocab_(std::move(vocab)), matrix_(std::move(matrix)), name_(std::move(name)) {
  if (static_cast<Eigen::Index>(vocab_.size()) != matrix_.rows()) {
    throw DataError("vocabulary size " + std::to_string(vocab_.size()) +
                    " does not match matrix rows " + std::to_string(matrix_.rows()));
  }
  if (!vocab_.empty() && matrix_.cols() < 1) throw DataError("embedding dimension must be >= 1");
  if (!matrix_.allFinite()) throw DataError("embedding matrix contains non-finite values");
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) throw DataError("duplicate token: " + vocab_[i]);
  }
  norms_.resize(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) norms_[i] = matrix_.row(i).norm();
}

std::optional<std::size_t> EmbeddingSpace::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t EmbeddingSpace::index_of(std::string_view token) const {
  auto idx = find(token);
  if (!idx) throw UnknownToken(std::string(token));
  return *idx;
}

Vector EmbeddingSpace::vector(std::string_view token) const {
  return matrix_.row(index_of(token)).transpose();
}

EmbeddingSpace EmbeddingSpace::with_matrix(Matrix matrix, std::string name) const {
  return EmbeddingSpace(vocab_, std::move(matrix), std::move(name));
}

EmbeddingSpace EmbeddingSpace::subset(std::span<const std::size_t> rows, std::string name) const {
  std::vector<std::string> vocab;
  vocab.reserve(rows.size());
  Matrix m(rows.size(), matrix_.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    vocab.push_back(vocab_.at(rows[i]));
    m.row(i) = matrix_.row(rows[i]);
  }
  return EmbeddingSpace(std::move(vocab), std::move(m), std::move(name));
}

LoadResult load_text_embeddings(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file: " + path.string());
  if (options.limit && *options.limit == 0) throw UsageError("limit must be positive");

  LoadResult result;
  std::vector<std::string> vocab;
  std::vector<double> values;
  std::unordered_set<std::string> seen;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::string line;
  std::optional<std::size_t> header_dim;

  while (std::getline(in, line)) {
    ++line_no;
    auto fields = split_ws(line);
    if (fields.empty()) continue;

    if (vocab.empty() && dim == 0 && !result.header_skipped && fields.size() == 2) {
      std::size_t n_hint = 0, d_hint = 0;
      if (parse_count(fields[0], n_hint) && parse_count(fields[1], d_hint) && d_hint != 1) {
        // word2vec-style "n d" header
        result.header_skipped = true;
        header_dim = d_hint;
        continue;
      }
    }

    if (options.limit && vocab.size() >= *options.limit) break;

    if (dim == 0) {
      if (fields.size() < 2) throw ParseError("expected a token followed by at least one value", line_no);
      dim = fields.size() - 1;
      if (header_dim && *header_dim != dim) {
        throw ParseError("header declares d=" + std::to_string(*header_dim) + " but row has " +
                             std::to_string(dim) + " values",
                         line_no);
      }
    } else if (fields.size() - 1 != dim) {
      throw ParseError("dimension mismatch: expected " + std::to_string(dim) + " values, found " +
                           std::to_string(fields.size() - 1),
                       line_no);
    }

    std::string token(fields[0]);
    std::size_t base = values.size();
    values.resize(base + dim);
    for (std::size_t j = 0; j < dim; ++j) {
      double v = 0.0;
      if (!parse_double(fields[j + 1], v)) {
        throw ParseError("malformed number '" + std::string(fields[j + 1]) + "'", line_no);
      }
      if (!std::isfinite(v)) throw ParseError("non-finite value", line_no);
      values[base + j] = v;
    }
    if (!seen.insert(token).second) {
      ++result.duplicate_tokens;
      values.resize(base);
      continue;
    }
    vocab.push_back(std::move(token));
  }

  if (vocab.empty()) throw DataError("no embedding rows in " + path.string());
  if (options.limit && vocab.size() < *options.limit) result.limit_exceeds_file = true;

  Matrix m(vocab.size(), dim);
  std::copy(values.begin(), values.end(), m.data());
  std::string name = options.name.empty() ? path.filename().string() : options.name;
  result.space = EmbeddingSpace(std::move(vocab), std::move(m), std::move(name));
  return result;
}

void save_text_embeddings(const EmbeddingSpace& space, const std::filesystem::path& path) {
  if (space.empty()) throw UsageError("refusing to write an empty embedding space");
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << std::setprecision(9);
  const Matrix& m = space.matrix();
  for (std::size_t i = 0; i < space.size(); ++i) {
    out << space.token(i);
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << m(i, j);
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw UsageError("cosine: dimension mismatch");
  double na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) throw DegenerateDirection("cosine of a zero vector");
  double c = a.dot(b) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

double cosine(const EmbeddingSpace& space, std::string_view a, std::string_view b) {
  std::size_t ia = space.index_of(a), ib = space.index_of(b);
  double na = space.row_norm(ia), nb = space.row_norm(ib);
  if (na == 0.0 || nb == 0.0) throw DegenerateDirection("cosine of a zero vector");
  if (ia == ib) return 1.0;
  double c = space.matrix().row(ia).dot(space.matrix().row(ib)) / (na * nb);
  return std::clamp(c, -1.0, 1.0);
}

namespace {

NeighborList top_k(const EmbeddingSpace& space, const Vector& query, std::size_t k,
                   const std::vector<bool>& excluded, std::size_t excluded_count) {
  if (static_cast<std::size_t>(query.size()) != space.dim()) {
    throw UsageError("nearest_neighbors: query dimension mismatch");
  }
  double qn = query.norm();
  if (qn == 0.0) throw DegenerateDirection("nearest_neighbors: zero query vector");
  if (k > space.size() - excluded_count) {
    throw UsageError("nearest_neighbors: k=" + std::to_string(k) + " exceeds " +
                     std::to_string(space.size() - excluded_count) + " candidates");
  }

  Vector dots = space.matrix() * query;
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(space.size() - excluded_count);
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (excluded[i]) continue;
    double rn = space.row_norm(i);
    double sim = rn == 0.0 ? 0.0 : std::clamp(dots[i] / (rn * qn), -1.0, 1.0);
    scored.emplace_back(sim, i);
  }
  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), better);

  NeighborList out;
  out.neighbors.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.neighbors.push_back({space.token(scored[i].second), scored[i].second, scored[i].first});
  }
  return out;
}

std::pair<std::vector<bool>, std::size_t> exclusion_mask(const EmbeddingSpace& space,
                                                         const std::unordered_set<std::string>& exclude) {
  std::vector<bool> mask(space.size(), false);
  std::size_t count = 0;
  for (const auto& tok : exclude) {
    if (auto idx = space.find(tok); idx && !mask[*idx]) {
      mask[*idx] = true;
      ++count;
    }
  }
  return {std::move(mask), count};
}

}  // namespace

NeighborList nearest_neighbors(const EmbeddingSpace& space, const Vector& query, std::size_t k,
                               const std::unordered_set<std::string>& exclude) {
  auto [mask, count] = exclusion_mask(space, exclude);
  return top_k(space, query, k, mask, count);
}

NeighborList nearest_neighbors(const EmbeddingSpace& space, std::string_view query, std::size_t k,
                               const std::unordered_set<std::string>& exclude) {
  std::size_t qi = space.index_of(query);
  auto [mask, count] = exclusion_mask(space, exclude);
  if (!mask[qi]) {
    mask[qi] = true;
    ++count;
  }
  NeighborList out = top_k(space, space.matrix().row(qi).transpose(), k, mask, count);
  out.query = std::string(query);
  return out;
}

std::string format_neighbor_line(const NeighborList& list) {
  std::ostringstream os;
  os << list.query << '\t';
  os << std::setprecision(6);
  for (std::size_t i = 0; i < list.neighbors.size(); ++i) {
    if (i) os << ',';
    os << list.neighbors[i].token << ':' << list.neighbors[i].similarity;
  }
  return os.str();
}

}  // namespace mproj
