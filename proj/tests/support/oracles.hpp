#pragma once

// Brute-force reference implementations used to freeze expected values.
// None of these call into the library's algorithms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

using Pt = std::pair<double, double>;

// Closed-halfplane depth: the minimum over a dense angle grid plus every
// direction orthogonal to q->p, nudged both ways.
inline std::size_t depth_2d(Pt q, const std::vector<Pt>& P, std::size_t grid = 7200) {
  auto count = [&](double ux, double uy) {
    std::size_t c = 0;
    for (const auto& p : P) {
      if ((p.first - q.first) * ux + (p.second - q.second) * uy >= -1e-12) ++c;
    }
    return c;
  };
  std::size_t best = P.size();
  std::vector<double> angles;
  for (std::size_t i = 0; i < grid; ++i) angles.push_back(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(grid));
  for (const auto& p : P) {
    double dx = p.first - q.first, dy = p.second - q.second;
    if (std::hypot(dx, dy) < 1e-12) continue;
    double a = std::atan2(dy, dx);
    for (double s : {-1.0, 1.0}) {
      for (double e : {-1e-7, 0.0, 1e-7}) angles.push_back(a + s * std::numbers::pi / 2 + e);
    }
  }
  for (double a : angles) best = std::min(best, count(std::cos(a), std::sin(a)));
  return best;
}

// Best halfplane classifier by enumerating lines through point pairs, each
// shifted and tilted slightly in every combination, plus constant rules.
inline std::size_t best_classifier_2d(const std::vector<Pt>& minus, const std::vector<Pt>& plus) {
  std::vector<Pt> all = minus;
  all.insert(all.end(), plus.begin(), plus.end());
  std::size_t best = std::min(minus.size(), plus.size());
  auto errors = [&](double nx, double ny, double c) {
    std::size_t e1 = 0, e2 = 0;  // orientation 1: plus iff n.x + c > 0
    for (const auto& p : minus) {
      double s = nx * p.first + ny * p.second + c;
      if (s > 0) ++e1; else ++e2;
    }
    for (const auto& p : plus) {
      double s = nx * p.first + ny * p.second + c;
      if (s > 0) ++e2; else ++e1;
    }
    return std::min(e1, e2);
  };
  const double eps = 1e-7;
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = 0; j < all.size(); ++j) {
      double dx = all[j].first - all[i].first, dy = all[j].second - all[i].second;
      if (i == j || std::hypot(dx, dy) < 1e-12) {
        dx = 1.0;
        dy = 0.0;
      }
      for (double tilt : {-eps, 0.0, eps}) {
        double a = std::atan2(dy, dx) + tilt;
        double nx = -std::sin(a), ny = std::cos(a);
        double c0 = -(nx * all[i].first + ny * all[i].second);
        for (double shift : {-eps, 0.0, eps}) best = std::min(best, errors(nx, ny, c0 + shift));
      }
    }
  }
  return best;
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  double m = mean(v), s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

inline double cos(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

using Vecs = std::vector<std::vector<double>>;

// Returns {effect size, raw difference}.
inline std::pair<double, double> weat(const Vecs& X, const Vecs& Y, const Vecs& A, const Vecs& B) {
  auto s = [&](const std::vector<double>& w) {
    std::vector<double> ca, cb;
    for (const auto& a : A) ca.push_back(cos(w, a));
    for (const auto& b : B) cb.push_back(cos(w, b));
    return mean(ca) - mean(cb);
  };
  std::vector<double> sx, sy, all;
  for (const auto& x : X) sx.push_back(s(x));
  for (const auto& y : Y) sy.push_back(s(y));
  all = sx;
  all.insert(all.end(), sy.begin(), sy.end());
  double raw = mean(sx) - mean(sy);
  return {raw / sample_sd(all), raw};
}

// Rank by counting: rank = #smaller + (#equal + 1) / 2.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double x : v) {
      if (x < v[i]) ++less;
      if (x == v[i]) ++equal;
    }
    r[i] = less + (equal + 1) / 2.0;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  double ma = mean(a), mb = mean(b), sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) { return pearson(ranks(a), ranks(b)); }

// V-measure from the contingency table, conditional entropies written out.
inline double v_measure(const std::vector<int>& labels, const std::vector<int>& clusters) {
  std::map<std::pair<int, int>, double> n_ck;
  std::map<int, double> n_c, n_k;
  const double N = static_cast<double>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    n_ck[{labels[i], clusters[i]}] += 1;
    n_c[labels[i]] += 1;
    n_k[clusters[i]] += 1;
  }
  double H_C = 0, H_K = 0, H_C_K = 0, H_K_C = 0;
  for (const auto& [c, n] : n_c) H_C -= n / N * std::log(n / N);
  for (const auto& [k, n] : n_k) H_K -= n / N * std::log(n / N);
  for (const auto& [ck, n] : n_ck) {
    H_C_K -= n / N * std::log(n / n_k[ck.second]);
    H_K_C -= n / N * std::log(n / n_c[ck.first]);
  }
  double h = H_C == 0 ? 1.0 : 1.0 - H_C_K / H_C;
  double c = H_K == 0 ? 1.0 : 1.0 - H_K_C / H_K;
  return h + c == 0 ? 0.0 : 2 * h * c / (h + c);
}

struct Rec {
  std::string t, p, g;
};

// RMS over professions of TPR(focus) - TPR(other).
inline double gap_rms(const std::vector<Rec>& recs, const std::string& focus) {
  std::set<std::string> profs;
  for (const auto& r : recs) profs.insert(r.t);
  double sq = 0;
  int used = 0;
  for (const auto& y : profs) {
    double hf = 0, nf = 0, ho = 0, no = 0;
    for (const auto& r : recs) {
      if (r.t != y) continue;
      if (r.g == focus) {
        nf += 1;
        hf += r.p == y;
      } else {
        no += 1;
        ho += r.p == y;
      }
    }
    if (nf == 0 || no == 0) continue;
    double g = hf / nf - ho / no;
    sq += g * g;
    ++used;
  }
  return std::sqrt(sq / used);
}

}  // namespace oracle
