#include "mproj/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "mproj/error.hpp"
#include "mproj/stats.hpp"

namespace mproj {

void WeatTest::validate() const {
  if (targets_x.empty() || targets_y.empty() || attributes_a.empty() || attributes_b.empty()) {
    throw DataError("WEAT test " + name + ": all four word lists must be non-empty");
  }
  auto disjoint = [&](const std::vector<std::string>& p, const std::vector<std::string>& q, const char* what) {
    std::unordered_set<std::string> s(p.begin(), p.end());
    for (const auto& t : q) {
      if (s.count(t)) throw DataError("WEAT test " + name + ": token '" + t + "' appears in both " + what);
    }
  };
  disjoint(targets_x, targets_y, "X and Y");
  disjoint(attributes_a, attributes_b, "A and B");
}

std::vector<WeatTest> load_weat_tests(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open WEAT file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("WEAT JSON: ") + e.what());
  }
  auto parse_one = [](const nlohmann::json& o) {
    WeatTest t;
    t.name = o.value("name", std::string{"WEAT"});
    t.targets_x = o.at("targets_X").get<std::vector<std::string>>();
    t.targets_y = o.at("targets_Y").get<std::vector<std::string>>();
    t.attributes_a = o.at("attributes_A").get<std::vector<std::string>>();
    t.attributes_b = o.at("attributes_B").get<std::vector<std::string>>();
    t.validate();
    return t;
  };
  std::vector<WeatTest> out;
  try {
    if (j.is_array()) {
      for (const auto& o : j) out.push_back(parse_one(o));
    } else {
      out.push_back(parse_one(j));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("WEAT JSON: ") + e.what());
  }
  return out;
}

namespace {

// Rows of the tokens that exist with a non-zero vector; the rest are reported.
std::vector<std::size_t> resolve(const EmbeddingSpace& space, const std::vector<std::string>& tokens,
                                 const std::string& list, const WeatOptions& options, WeatResult& result) {
  std::vector<std::size_t> rows;
  for (const auto& t : tokens) {
    auto idx = space.find(t);
    if (idx && space.row_norm(*idx) > 0.0) {
      rows.push_back(*idx);
      continue;
    }
    if (!options.skip_missing) throw UnknownToken(t);
    ++result.dropped[list];
    result.dropped_tokens.push_back(t);
  }
  if (rows.empty()) throw DataError("WEAT list " + list + " has no usable tokens");
  return rows;
}

double row_cosine(const EmbeddingSpace& space, std::size_t i, std::size_t j) {
  return space.matrix().row(i).dot(space.matrix().row(j)) / (space.row_norm(i) * space.row_norm(j));
}

}  // namespace

WeatResult weat_effect_size(const EmbeddingSpace& space, const WeatTest& test, const WeatOptions& options) {
  test.validate();
  WeatResult result;
  for (const char* l : {"X", "Y", "A", "B"}) result.dropped[l] = 0;
  auto x = resolve(space, test.targets_x, "X", options, result);
  auto y = resolve(space, test.targets_y, "Y", options, result);
  auto a = resolve(space, test.attributes_a, "A", options, result);
  auto b = resolve(space, test.attributes_b, "B", options, result);

  auto association = [&](std::size_t w) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t r : a) sa += row_cosine(space, w, r);
    for (std::size_t r : b) sb += row_cosine(space, w, r);
    return sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  };
  std::vector<double> sx, sy, all;
  for (std::size_t w : x) sx.push_back(association(w));
  for (std::size_t w : y) sy.push_back(association(w));
  all.insert(all.end(), sx.begin(), sx.end());
  all.insert(all.end(), sy.begin(), sy.end());

  result.raw = stats::mean(sx) - stats::mean(sy);
  auto sd = stats::stdev(all);
  if (!sd || *sd == 0.0) throw DataError("WEAT test " + test.name + ": zero standard deviation of associations");
  result.effect_size = result.raw / *sd;
  return result;
}

SimilarityBenchmark load_similarity_tsv(const std::filesystem::path& path, std::string name) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open similarity benchmark: " + path.string());
  SimilarityBenchmark bench;
  bench.name = name.empty() ? path.stem().string() : std::move(name);
  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string a, b, s;
    if (!std::getline(ss, a, '\t') || !std::getline(ss, b, '\t') || !std::getline(ss, s, '\t')) {
      throw ParseError("expected tok1<TAB>tok2<TAB>score", line_no);
    }
    double score = 0.0;
    try {
      score = std::stod(s);
    } catch (const std::exception&) {
      throw ParseError("malformed score '" + s + "'", line_no);
    }
    if (!std::isfinite(score)) throw ParseError("non-finite score", line_no);
    auto key = std::minmax(a, b);
    if (!seen.insert(key).second) throw ParseError("duplicate pair " + a + "/" + b, line_no);
    bench.pairs.push_back({a, b, score});
  }
  return bench;
}

SimilarityResult similarity_correlation(const EmbeddingSpace& space, const SimilarityBenchmark& benchmark) {
  SimilarityResult r;
  std::vector<double> human, model;
  for (const auto& p : benchmark.pairs) {
    auto ia = space.find(p.a), ib = space.find(p.b);
    if (!ia || !ib || space.row_norm(*ia) == 0.0 || space.row_norm(*ib) == 0.0) {
      ++r.dropped;
      continue;
    }
    human.push_back(p.score);
    model.push_back(*ia == *ib ? 1.0 : row_cosine(space, *ia, *ib));
  }
  r.used = human.size();
  if (r.used < 2) throw DataError("similarity benchmark " + benchmark.name + ": fewer than two usable pairs");
  r.rho = stats::spearman(human, model);
  return r;
}

NeighborStability neighbor_stability(const EmbeddingSpace& before, const EmbeddingSpace& after,
                                     const std::vector<std::string>& tokens, std::size_t k) {
  if (before.vocab() != after.vocab()) throw UsageError("neighbor_stability: spaces must share a vocabulary");
  NeighborStability out;
  for (const auto& t : tokens) {
    if (!before.contains(t)) {
      ++out.missing;
      continue;
    }
    NeighborDiff diff;
    diff.token = t;
    if (k > 0) {
      for (const auto& n : nearest_neighbors(before, t, k).neighbors) diff.before.push_back(n.token);
      for (const auto& n : nearest_neighbors(after, t, k).neighbors) diff.after.push_back(n.token);
    }
    std::unordered_set<std::string> b(diff.before.begin(), diff.before.end());
    std::unordered_set<std::string> a(diff.after.begin(), diff.after.end());
    for (const auto& x : diff.after) {
      if (!b.count(x)) diff.entering.push_back(x);
    }
    for (const auto& x : diff.before) {
      if (!a.count(x)) diff.leaving.push_back(x);
    }
    out.changed += diff.leaving.size();
    out.total += k;
    out.per_token.push_back(std::move(diff));
  }
  return out;
}

BiasByNeighbor bias_by_neighbor(const EmbeddingSpace& original, const EmbeddingSpace& debiased,
                                const std::vector<std::string>& probe_tokens, const Vector& bias_direction,
                                std::size_t k) {
  if (original.vocab() != debiased.vocab()) throw UsageError("bias_by_neighbor: spaces must share a vocabulary");
  if (static_cast<std::size_t>(bias_direction.size()) != original.dim()) {
    throw UsageError("bias_by_neighbor: bias direction dimension mismatch");
  }
  double dn = bias_direction.norm();
  if (dn == 0.0) throw DegenerateDirection("bias_by_neighbor: zero bias direction");

  BiasByNeighbor out;
  std::vector<char> biased(original.size(), 0);
  Vector dots = original.matrix() * bias_direction;
  bool any_nonzero = false;
  for (std::size_t i = 0; i < original.size(); ++i) {
    double rn = original.row_norm(i);
    double c = rn == 0.0 ? 0.0 : dots[i] / (rn * dn);
    if (std::abs(c) > 1e-12) any_nonzero = true;
    biased[i] = c > 1e-12 ? 1 : 0;  // cos == 0 counts as not biased
  }
  out.degenerate = !any_nonzero;

  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& t : probe_tokens) {
    if (!debiased.contains(t)) {
      ++out.missing;
      continue;
    }
    auto list = nearest_neighbors(debiased, t, k);
    std::size_t hits = 0;
    for (const auto& n : list.neighbors) hits += biased[n.index];
    double frac = list.neighbors.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(list.neighbors.size());
    out.per_token[t] = frac;
    sum += frac;
    ++used;
  }
  if (used == 0) throw DataError("bias_by_neighbor: no probe token is in the vocabulary");
  out.percentage = 100.0 * sum / static_cast<double>(used);
  return out;
}

std::vector<PredictionRecord> load_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open predictions: " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<PredictionRecord> out;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "true,predicted,group") throw ParseError("expected header 'true,predicted,group'", line_no);
      header = true;
      continue;
    }
    std::stringstream ss(line);
    PredictionRecord r;
    std::string extra;
    if (!std::getline(ss, r.true_label, ',') || !std::getline(ss, r.predicted_label, ',') ||
        !std::getline(ss, r.group, ',') || std::getline(ss, extra, ',')) {
      throw ParseError("expected three comma-separated fields", line_no);
    }
    out.push_back(std::move(r));
  }
  if (!header) throw DataError("empty predictions file: " + path.string());
  return out;
}

TprGapResult tpr_gap_suite(const std::vector<PredictionRecord>& records,
                           const std::map<std::string, double>& group_rates, const TprGapOptions& options) {
  if (records.empty()) throw DataError("tpr_gap_suite: no prediction records");

  std::set<std::string> groups, observed;
  for (const auto& r : records) {
    groups.insert(r.group);
    observed.insert(r.true_label);
  }
  if (!groups.count(options.focus_group)) throw DataError("tpr_gap_suite: focus group '" + options.focus_group + "' absent");
  if (groups.size() != 2) throw DataError("tpr_gap_suite: expected exactly two groups");

  std::vector<std::string> labels = options.label_set ? *options.label_set
                                                      : std::vector<std::string>(observed.begin(), observed.end());
  std::set<std::string> declared(labels.begin(), labels.end());
  for (const auto& r : records) {
    if (!declared.count(r.true_label)) throw DataError("profession '" + r.true_label + "' absent from the label set");
    if (!declared.count(r.predicted_label)) {
      throw DataError("predicted profession '" + r.predicted_label + "' absent from the label set");
    }
  }

  TprGapResult out;
  out.focus_group = options.focus_group;
  for (const auto& g : groups) {
    if (g != options.focus_group) out.other_group = g;
  }

  std::map<std::pair<std::string, std::string>, std::pair<std::size_t, std::size_t>> tally;  // (group,label) -> hit,total
  std::size_t correct = 0;
  for (const auto& r : records) {
    auto& [hit, total] = tally[{r.group, r.true_label}];
    ++total;
    if (r.predicted_label == r.true_label) {
      ++hit;
      ++correct;
    }
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(records.size());

  double sq = 0.0;
  std::size_t used = 0;
  std::vector<double> gaps, rates;
  for (const auto& y : declared) {
    auto f = tally.find({out.focus_group, y});
    auto o = tally.find({out.other_group, y});
    if (f == tally.end() || o == tally.end() || f->second.second == 0 || o->second.second == 0) {
      out.excluded.push_back(y);
      continue;
    }
    double tf = static_cast<double>(f->second.first) / static_cast<double>(f->second.second);
    double to = static_cast<double>(o->second.first) / static_cast<double>(o->second.second);
    out.tpr_focus[y] = tf;
    out.tpr_other[y] = to;
    out.gap[y] = tf - to;
    sq += (tf - to) * (tf - to);
    ++used;
    if (auto it = group_rates.find(y); it != group_rates.end()) {
      gaps.push_back(tf - to);
      rates.push_back(it->second);
    }
  }
  out.gap_rms = used ? std::sqrt(sq / static_cast<double>(used)) : 0.0;
  if (gaps.size() >= 2) {
    try {
      out.correlation = options.correlation == CorrelationKind::Pearson ? stats::pearson(gaps, rates)
                                                                        : stats::spearman(gaps, rates);
    } catch (const DataError&) {
      out.correlation.reset();  // constant gaps or rates
    }
  }
  return out;
}

}  // namespace mproj
