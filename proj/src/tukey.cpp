#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mproj/error.hpp"
#include "mproj/geometry.hpp"

namespace mproj {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
// Critical angles closer than this are treated as one event.
constexpr double kAngleTol = 1e-10;

double point_scale(const Matrix& points, const Vector& q) {
  double s = q.cwiseAbs().maxCoeff();
  if (points.size() > 0) s = std::max(s, points.cwiseAbs().maxCoeff());
  return std::max(s, 1.0);
}

double wrap(double a) {
  a = std::fmod(a, kTwoPi);
  return a < 0.0 ? a + kTwoPi : a;
}

}  // namespace

DepthResult tukey_depth_exact_2d(const Vector& q, const Matrix& points) {
  if (q.size() != 2 || (points.rows() > 0 && points.cols() != 2)) {
    throw UsageError("tukey_depth_exact_2d: inputs must be 2-d");
  }
  const std::size_t n = points.rows();
  const double tol = 1e-12 * point_scale(points, q);

  std::size_t coincident = 0;
  std::vector<Eigen::Vector2d> rel;
  rel.reserve(n);
  std::vector<double> critical;
  critical.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector2d r = points.row(i).transpose() - q;
    if (r.norm() <= tol) {
      ++coincident;
      continue;
    }
    rel.push_back(r);
    double theta = std::atan2(r.y(), r.x());
    // The halfplane with normal angle phi contains r on the closed interval
    // phi in [theta - pi/2, theta + pi/2].
    critical.push_back(wrap(theta + std::numbers::pi / 2));
    critical.push_back(wrap(theta - std::numbers::pi / 2));
  }

  DepthResult result;
  result.point = q;
  result.depth = n;
  result.witness_direction = Eigen::Vector2d(1.0, 0.0);
  if (rel.empty()) return result;

  std::sort(critical.begin(), critical.end());
  std::vector<double> events;
  for (double a : critical) {
    if (events.empty() || a - events.back() > kAngleTol) events.push_back(a);
  }
  if (events.size() > 1 && events.front() + kTwoPi - events.back() <= kAngleTol) events.pop_back();

  // Every open arc between consecutive events has a constant count with no
  // boundary points; the closed count at an event is never smaller.
  for (std::size_t e = 0; e < events.size(); ++e) {
    double lo = events[e];
    double hi = e + 1 < events.size() ? events[e + 1] : events.front() + kTwoPi;
    double phi = 0.5 * (lo + hi);
    Eigen::Vector2d u(std::cos(phi), std::sin(phi));
    std::size_t count = coincident;
    for (const auto& r : rel) {
      if (r.dot(u) >= 0.0) ++count;
    }
    if (count < result.depth) {
      result.depth = count;
      result.witness_direction = u;
    }
  }
  return result;
}

namespace {

// Upper bound on depth from a fixed fan of directions, using pre-sorted
// projections. A slack keeps it an upper bound under rounding.
class DepthBound {
 public:
  explicit DepthBound(const Matrix& points, std::size_t fan = 24) {
    for (std::size_t k = 0; k < fan; ++k) {
      double phi = (static_cast<double>(k) + 0.318309886) * std::numbers::pi / static_cast<double>(fan);
      Eigen::Vector2d u(std::cos(phi), std::sin(phi));
      std::vector<double> proj(points.rows());
      for (Eigen::Index i = 0; i < points.rows(); ++i) proj[i] = points.row(i).dot(u);
      std::sort(proj.begin(), proj.end());
      dirs_.push_back(u);
      sorted_.push_back(std::move(proj));
    }
    slack_ = 1e-9 * std::max(1.0, points.size() ? points.cwiseAbs().maxCoeff() : 1.0);
  }

  // False when some fan direction already puts fewer than `level` points on
  // one side of q.
  bool admits(const Eigen::Vector2d& q, std::size_t level) const {
    if (level == 0) return true;
    for (std::size_t k = 0; k < dirs_.size(); ++k) {
      const auto& s = sorted_[k];
      if (level > s.size()) return false;
      double a = q.dot(dirs_[k]);
      if (a < s[level - 1] - slack_ || a > s[s.size() - level] + slack_) return false;
    }
    return true;
  }

  std::size_t upper(const Eigen::Vector2d& q) const {
    std::size_t best = sorted_.empty() ? 0 : sorted_.front().size();
    for (std::size_t k = 0; k < dirs_.size(); ++k) {
      const auto& s = sorted_[k];
      double a = q.dot(dirs_[k]);
      auto ge = static_cast<std::size_t>(s.end() - std::lower_bound(s.begin(), s.end(), a - slack_));
      auto le = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), a + slack_) - s.begin());
      best = std::min({best, ge, le});
    }
    return best;
  }

 private:
  std::vector<Eigen::Vector2d> dirs_;
  std::vector<std::vector<double>> sorted_;
  double slack_ = 0.0;
};

bool lex_less(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  return a.y() < b.y();
}

}  // namespace

DepthResult tukey_median_exact_2d(const Matrix& points) {
  if (points.cols() != 2) throw UsageError("tukey_median_exact_2d: points must be 2-d");
  const std::size_t n = points.rows();
  if (n == 0) throw UsageError("tukey_median_exact_2d: empty point set");

  const double tol = 1e-12 * point_scale(points, Vector::Zero(2));
  struct Line {
    Eigen::Vector2d origin, dir;
    std::size_t a, b;
  };
  std::vector<Line> lines;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      Eigen::Vector2d d = (points.row(b) - points.row(a)).transpose();
      if (d.norm() <= tol) continue;
      lines.push_back({points.row(a).transpose(), d, a, b});
    }
  }

  // Any reachable depth is a floor for the median; candidates that cannot
  // reach it are dropped before scoring.
  DepthBound bound(points);
  ApproxMedianOptions quick;
  quick.iterations = 60;
  quick.directions = 64;
  const std::size_t floor_depth = tukey_depth_exact_2d(tukey_median_approx(points, quick).point, points).depth;

  std::vector<Eigen::Vector2d> candidates;
  for (std::size_t i = 0; i < n; ++i) candidates.push_back(points.row(i).transpose());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (std::size_t j = i + 1; j < lines.size(); ++j) {
      const Line& l1 = lines[i];
      const Line& l2 = lines[j];
      // Lines sharing a data point meet at that point, already a candidate.
      if (l1.a == l2.a || l1.a == l2.b || l1.b == l2.a || l1.b == l2.b) continue;
      double denom = l1.dir.x() * l2.dir.y() - l1.dir.y() * l2.dir.x();
      double scale = l1.dir.norm() * l2.dir.norm();
      if (std::abs(denom) <= 1e-12 * scale) continue;
      Eigen::Vector2d diff = l2.origin - l1.origin;
      double t = (diff.x() * l2.dir.y() - diff.y() * l2.dir.x()) / denom;
      Eigen::Vector2d c = l1.origin + t * l1.dir;
      if (bound.admits(c, floor_depth)) candidates.push_back(c);
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> order;  // (upper bound, candidate)
  order.reserve(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) order.emplace_back(bound.upper(candidates[c]), c);
  std::sort(order.begin(), order.end(), [&](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return lex_less(candidates[x.second], candidates[y.second]);
  });

  DepthResult best;
  bool have = false;
  for (const auto& [ub, c] : order) {
    if (have && ub < best.depth) break;
    if (have && ub == best.depth && !lex_less(candidates[c], best.point.head<2>())) continue;
    DepthResult r = tukey_depth_exact_2d(candidates[c], points);
    if (!have || r.depth > best.depth || (r.depth == best.depth && lex_less(candidates[c], best.point.head<2>()))) {
      best = std::move(r);
      have = true;
    }
  }
  return best;
}

namespace {

Matrix sample_directions(std::size_t count, Eigen::Index dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix dirs(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < dim; ++j) dirs(i, j) = normal(rng);
      norm = dirs.row(i).norm();
    } while (norm == 0.0);
    dirs.row(i) /= norm;
  }
  return dirs;
}

// Depth against a fixed direction set, with the minimizing signed direction.
class SampledDepth {
 public:
  SampledDepth(const Matrix& points, Matrix directions) : dirs_(std::move(directions)) {
    Matrix proj = points * dirs_.transpose();  // n x m
    sorted_.resize(dirs_.rows());
    for (Eigen::Index k = 0; k < dirs_.rows(); ++k) {
      sorted_[k].resize(proj.rows());
      for (Eigen::Index i = 0; i < proj.rows(); ++i) sorted_[k][i] = proj(i, k);
      std::sort(sorted_[k].begin(), sorted_[k].end());
    }
  }

  std::size_t depth(const Vector& q, Vector* witness = nullptr) const {
    Vector qa = dirs_ * q;
    std::size_t best = SIZE_MAX;
    Eigen::Index best_k = 0;
    double best_sign = 1.0;
    for (Eigen::Index k = 0; k < dirs_.rows(); ++k) {
      const auto& s = sorted_[k];
      auto ge = static_cast<std::size_t>(s.end() - std::lower_bound(s.begin(), s.end(), qa[k]));
      auto le = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), qa[k]) - s.begin());
      if (ge < best) {
        best = ge;
        best_k = k;
        best_sign = 1.0;
      }
      if (le < best) {
        best = le;
        best_k = k;
        best_sign = -1.0;
      }
    }
    if (witness) *witness = best_sign * dirs_.row(best_k).transpose();
    return best;
  }

 private:
  Matrix dirs_;
  std::vector<std::vector<double>> sorted_;
};

}  // namespace

std::size_t tukey_depth_approx(const Vector& q, const Matrix& points, std::size_t directions, std::uint64_t rng_seed) {
  if (directions == 0) throw UsageError("tukey_depth_approx: need at least one direction");
  if (points.cols() != q.size()) throw UsageError("tukey_depth_approx: dimension mismatch");
  Matrix dirs = sample_directions(directions, q.size(), rng_seed);
  std::size_t best = points.rows();
  for (std::size_t k = 0; k < directions; ++k) {
    Vector u = dirs.row(k).transpose();
    std::size_t ge = 0, le = 0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      double s = (points.row(i).transpose() - q).dot(u);
      if (s >= 0.0) ++ge;
      if (s <= 0.0) ++le;
    }
    best = std::min({best, ge, le});
  }
  return best;
}

DepthResult tukey_median_approx(const Matrix& points, const ApproxMedianOptions& options) {
  const Eigen::Index n = points.rows(), d = points.cols();
  if (n == 0) throw UsageError("tukey_median_approx: empty point set");
  if (options.directions == 0) throw UsageError("tukey_median_approx: need at least one direction");

  Vector q(d);
  std::vector<double> column(n);
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) column[i] = points(i, j);
    auto mid = column.begin() + n / 2;
    std::nth_element(column.begin(), mid, column.end());
    double hi = *mid;
    if (n % 2 == 0) {
      double lo = *std::max_element(column.begin(), mid);
      q[j] = 0.5 * (lo + hi);
    } else {
      q[j] = hi;
    }
  }

  SampledDepth scorer(points, sample_directions(options.directions, d, options.rng_seed));
  Vector witness;
  std::size_t depth = scorer.depth(q, &witness);
  DepthResult best{q, depth, witness};

  double step = 0.5;
  for (std::size_t it = 0; it < options.iterations && step > 1e-6; ++it) {
    Vector centroid = Vector::Zero(d);
    std::size_t count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((points.row(i).transpose() - q).dot(witness) < 0.0) {
        centroid += points.row(i).transpose();
        ++count;
      }
    }
    if (count == 0) {
      centroid = points.colwise().mean().transpose();
    } else {
      centroid /= static_cast<double>(count);
    }
    Vector candidate = q + step * (centroid - q);
    Vector cand_witness;
    std::size_t cand_depth = scorer.depth(candidate, &cand_witness);
    if (cand_depth >= depth) {
      if (cand_depth == depth) step *= 0.8;
      q = candidate;
      depth = cand_depth;
      witness = cand_witness;
      if (depth > best.depth) best = {q, depth, witness};
    } else {
      step *= 0.5;
    }
  }
  return best;
}

}  // namespace mproj
