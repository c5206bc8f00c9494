#include "mproj/attribute_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include <json.hpp>

#include "mproj/error.hpp"

namespace mproj {

std::string to_string(AttributeLabel label) {
  switch (label) {
    case AttributeLabel::Minus: return "MINUS";
    case AttributeLabel::Plus: return "PLUS";
    case AttributeLabel::Neutral: return "NEUTRAL";
  }
  return "?";
}

AttributeLabel parse_attribute_label(const std::string& s) {
  if (s == "MINUS") return AttributeLabel::Minus;
  if (s == "PLUS") return AttributeLabel::Plus;
  if (s == "NEUTRAL") return AttributeLabel::Neutral;
  throw DataError("unknown attribute label: " + s);
}

std::string to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Dev: return "dev";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "dev") return Split::Dev;
  if (s == "test") return Split::Test;
  throw DataError("unknown split: " + s);
}

std::size_t LabeledPointSet::labeled_count() const {
  std::size_t n = 0;
  for (const auto& c : classes) n += c.indices.size();
  return n;
}

const AttributeClass* LabeledPointSet::find(AttributeLabel label) const {
  for (const auto& c : classes) {
    if (c.label == label) return &c;
  }
  return nullptr;
}

LabeledPointSet::View LabeledPointSet::view(std::optional<Split> which) const {
  View v;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t idx : classes[c].indices) {
      if (which && !splits.empty()) {
        auto it = splits.find(idx);
        if (it == splits.end() || it->second != *which) continue;
      }
      v.rows.push_back(idx);
      v.labels.push_back(static_cast<int>(c));
    }
  }
  return v;
}

void LabeledPointSet::validate(std::size_t space_size) const {
  std::unordered_set<std::size_t> seen;
  for (const auto& c : classes) {
    for (std::size_t idx : c.indices) {
      if (idx >= space_size) throw DataError("class index out of range: " + std::to_string(idx));
      if (!seen.insert(idx).second) throw DataError("row " + std::to_string(idx) + " appears in two classes");
    }
  }
  if (!splits.empty()) {
    for (std::size_t idx : seen) {
      if (!splits.count(idx)) throw DataError("labeled row " + std::to_string(idx) + " has no split");
    }
    if (splits.size() != seen.size()) throw DataError("split assigns rows that carry no label");
  }
}

Vector seed_direction(const EmbeddingSpace& space, const std::string& positive, const std::string& negative,
                      std::vector<std::string>* warnings) {
  Vector dir = space.vector(positive) - space.vector(negative);
  if (warnings && dir.isZero(0.0)) {
    warnings->push_back("seed direction " + positive + " - " + negative + " is the zero vector");
  }
  return dir;
}

namespace {

std::vector<double> cosines_to(const EmbeddingSpace& space, const Vector& dir) {
  std::vector<double> out(space.size(), 0.0);
  double dn = dir.norm();
  if (dn == 0.0) throw DegenerateDirection("attribute direction is the zero vector");
  Vector dots = space.matrix() * dir;
  for (std::size_t i = 0; i < space.size(); ++i) {
    double rn = space.row_norm(i);
    out[i] = rn == 0.0 ? 0.0 : dots[i] / (rn * dn);
  }
  return out;
}

// Row order by descending cosine, ties by ascending row; zero rows excluded.
std::vector<std::size_t> ranking(const EmbeddingSpace& space, const std::vector<double>& cos) {
  std::vector<std::size_t> order;
  order.reserve(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (space.row_norm(i) > 0.0) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cos[a] > cos[b]; });
  return order;
}

}  // namespace

LabeledPointSet build_bias_dataset(const EmbeddingSpace& space, const Vector& dir_plus, const Vector& dir_minus,
                                   const BiasDatasetParams& params) {
  if (static_cast<std::size_t>(dir_plus.size()) != space.dim() ||
      static_cast<std::size_t>(dir_minus.size()) != space.dim()) {
    throw UsageError("build_bias_dataset: direction dimension mismatch");
  }
  if (2 * params.k + params.neutral_k > space.size()) {
    throw UsageError("build_bias_dataset: 2k + neutral_k exceeds vocabulary size");
  }
  if (!(params.neutral_threshold > 0.0 && params.neutral_threshold <= 1.0)) {
    throw UsageError("build_bias_dataset: neutral threshold must lie in (0, 1]");
  }

  std::vector<double> cos_plus = cosines_to(space, dir_plus);
  std::vector<double> cos_minus = cosines_to(space, dir_minus);
  std::vector<std::size_t> rank_plus = ranking(space, cos_plus);
  std::vector<std::size_t> rank_minus = ranking(space, cos_minus);
  if (rank_plus.size() < 2 * params.k) throw DataError("not enough non-zero rows for the polar classes");

  // 0 = unassigned, 1 = plus, 2 = minus
  std::vector<char> owner(space.size(), 0);
  std::size_t k = params.k;
  for (std::size_t i = 0; i < k; ++i) owner[rank_plus[i]] |= 1;
  for (std::size_t i = 0; i < k; ++i) owner[rank_minus[i]] |= 2;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (owner[i] == 3) owner[i] = cos_plus[i] >= cos_minus[i] ? 1 : 2;
  }

  auto fill = [&](const std::vector<std::size_t>& rank, char tag) {
    std::vector<std::size_t> members;
    members.reserve(k);
    for (std::size_t i = 0; i < rank.size() && members.size() < k; ++i) {
      std::size_t row = rank[i];
      if (owner[row] == tag) {
        members.push_back(row);
      } else if (owner[row] == 0 && i >= k) {
        owner[row] = tag;
        members.push_back(row);
      }
    }
    return members;
  };
  // Plus keeps its own top-k winners first, then refills; minus likewise.
  std::vector<std::size_t> plus = fill(rank_plus, 1);
  std::vector<std::size_t> minus = fill(rank_minus, 2);
  if (plus.size() < k || minus.size() < k) throw DataError("could not fill polar classes to k");

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < space.size(); ++i) {
    if (owner[i] != 0) continue;
    double c = params.absolute_threshold ? std::abs(cos_plus[i]) : cos_plus[i];
    if (c < params.neutral_threshold || params.neutral_threshold >= 1.0) candidates.push_back(i);
  }
  if (candidates.size() < params.neutral_k) {
    throw DataError("only " + std::to_string(candidates.size()) + " neutral candidates under threshold, need " +
                    std::to_string(params.neutral_k));
  }
  std::mt19937_64 rng(params.rng_seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  candidates.resize(params.neutral_k);

  LabeledPointSet out;
  out.space = space.name();
  out.classes.push_back({AttributeLabel::Minus, std::move(minus)});
  out.classes.push_back({AttributeLabel::Plus, std::move(plus)});
  if (params.neutral_k > 0) out.classes.push_back({AttributeLabel::Neutral, std::move(candidates)});
  return out;
}

LabeledPointSet split(const LabeledPointSet& dataset, std::array<double, 3> fractions, std::uint64_t rng_seed) {
  double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9) throw UsageError("split fractions must sum to 1");
  for (double f : fractions) {
    if (f < 0.0) throw UsageError("split fractions must be non-negative");
  }

  LabeledPointSet out = dataset;
  out.splits.clear();
  std::mt19937_64 rng(rng_seed);
  for (const auto& cls : dataset.classes) {
    std::size_t n = cls.indices.size();
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainders{};
    std::size_t assigned = 0;
    for (int s = 0; s < 3; ++s) {
      double exact = fractions[s] * static_cast<double>(n);
      counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainders[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    while (assigned < n) {
      int best = static_cast<int>(std::max_element(remainders.begin(), remainders.end()) - remainders.begin());
      ++counts[best];
      remainders[best] = -1.0;
      ++assigned;
    }

    std::vector<std::size_t> order = cls.indices;
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t pos = 0;
    for (int s = 0; s < 3; ++s) {
      for (std::size_t i = 0; i < counts[s]; ++i) out.splits[order[pos++]] = static_cast<Split>(s);
    }
  }
  return out;
}

void save_dataset(const LabeledPointSet& dataset, const EmbeddingSpace& space, const std::filesystem::path& path) {
  nlohmann::json j;
  j["space"] = dataset.space;
  j["classes"] = nlohmann::json::array();
  for (const auto& cls : dataset.classes) {
    nlohmann::json tokens = nlohmann::json::array();
    for (std::size_t idx : cls.indices) tokens.push_back(space.token(idx));
    j["classes"].push_back({{"label", to_string(cls.label)}, {"tokens", std::move(tokens)}});
  }
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& [idx, s] : dataset.splits) splits[space.token(idx)] = to_string(s);
  j["splits"] = std::move(splits);

  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
}

LabeledPointSet load_dataset(const std::filesystem::path& path, const EmbeddingSpace& space) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset JSON: ") + e.what());
  }
  LabeledPointSet out;
  out.space = j.value("space", std::string{});
  for (const auto& c : j.at("classes")) {
    AttributeClass cls;
    cls.label = parse_attribute_label(c.at("label").get<std::string>());
    for (const auto& t : c.at("tokens")) cls.indices.push_back(space.index_of(t.get<std::string>()));
    out.classes.push_back(std::move(cls));
  }
  if (j.contains("splits")) {
    for (const auto& [tok, s] : j.at("splits").items()) out.splits[space.index_of(tok)] = parse_split(s.get<std::string>());
  }
  out.validate(space.size());
  return out;
}

}  // namespace mproj
