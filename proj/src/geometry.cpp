#include "mproj/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "mproj/error.hpp"

namespace mproj {

UnitVector UnitVector::normalize(const Vector& v) {
  double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateDirection("cannot normalize a zero or non-finite vector");
  return UnitVector(v / n);
}

UnitVector UnitVector::from_unit(const Vector& v) {
  if (std::abs(v.norm() - 1.0) >= 1e-12) throw UsageError("vector is not unit length");
  return UnitVector(v);
}

Matrix project_along(const Matrix& points, const UnitVector& w) {
  if (points.cols() != w.dim()) throw UsageError("project_along: dimension mismatch");
  Vector coef = points * w.coords();
  return points - coef * w.coords().transpose();
}

Vector project_along(const Vector& point, const UnitVector& w) {
  if (point.size() != w.dim()) throw UsageError("project_along: dimension mismatch");
  return point - point.dot(w.coords()) * w.coords();
}

std::size_t halfspace_count(const Matrix& points, const Vector& q, const Vector& u) {
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    if ((points.row(i).transpose() - q).dot(u) >= 0.0) ++count;
  }
  return count;
}

std::size_t best_threshold_errors(const std::vector<double>& minus_scores, const std::vector<double>& plus_scores,
                                  double* threshold, int* orientation) {
  struct Item {
    double s;
    bool plus;
  };
  std::vector<Item> items;
  items.reserve(minus_scores.size() + plus_scores.size());
  double scale = 1.0;
  for (double s : minus_scores) {
    items.push_back({s, false});
    scale = std::max(scale, std::abs(s));
  }
  for (double s : plus_scores) {
    items.push_back({s, true});
    scale = std::max(scale, std::abs(s));
  }
  std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.s < b.s; });
  const double tol = 1e-9 * scale;
  const std::size_t n_minus = minus_scores.size(), n_plus = plus_scores.size();

  // Orientation +1: scores above the cut are plus. Start with everything plus.
  std::size_t best = std::min(n_minus, n_plus);
  double best_t = -INFINITY;
  int best_o = n_minus <= n_plus ? 1 : -1;
  std::size_t minus_below = 0, plus_below = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    // Scores within tol of their predecessor are one location.
    do {
      if (items[j].plus) {
        ++plus_below;
      } else {
        ++minus_below;
      }
      ++j;
    } while (j < items.size() && items[j].s - items[j - 1].s <= tol);
    if (j == items.size()) break;
    double cut = 0.5 * (items[j - 1].s + items[j].s);
    std::size_t err_pos = plus_below + (n_minus - minus_below);
    std::size_t err_neg = minus_below + (n_plus - plus_below);
    if (err_pos < best) {
      best = err_pos;
      best_t = cut;
      best_o = 1;
    }
    if (err_neg < best) {
      best = err_neg;
      best_t = cut;
      best_o = -1;
    }
    i = j;
  }
  if (threshold) *threshold = best_t;
  if (orientation) *orientation = best_o;
  return best;
}

ClassifierResult best_linear_classifier_2d(const Matrix& minus, const Matrix& plus) {
  if ((minus.rows() > 0 && minus.cols() != 2) || (plus.rows() > 0 && plus.cols() != 2)) {
    throw UsageError("best_linear_classifier_2d: points must be 2-d");
  }
  const std::size_t nm = minus.rows(), np = plus.rows(), n = nm + np;
  Matrix pts(n, 2);
  std::vector<bool> is_plus(n);
  for (std::size_t i = 0; i < nm; ++i) pts.row(i) = minus.row(i);
  for (std::size_t i = 0; i < np; ++i) {
    pts.row(nm + i) = plus.row(i);
    is_plus[nm + i] = true;
  }
  double scale = 1.0;
  if (n > 0) scale = std::max(scale, pts.cwiseAbs().maxCoeff());
  const double tol = 1e-9 * scale;

  ClassifierResult best;
  best.misclassifications = std::min(nm, np);
  best.rule.normal = Vector::Zero(2);
  best.rule.offset = nm <= np ? 1.0 : -1.0;

  std::vector<double> on_minus, on_plus;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      Eigen::Vector2d dir = (pts.row(b) - pts.row(a)).transpose();
      double len = dir.norm();
      if (len <= tol) continue;
      dir /= len;
      Eigen::Vector2d normal(-dir.y(), dir.x());
      std::size_t off_pos = 0, off_neg = 0;  // errors if positive side is plus / minus
      on_minus.clear();
      on_plus.clear();
      for (std::size_t k = 0; k < n; ++k) {
        Eigen::Vector2d rel = (pts.row(k) - pts.row(a)).transpose();
        double s = normal.dot(rel);
        if (std::abs(s) <= tol) {
          (is_plus[k] ? on_plus : on_minus).push_back(dir.dot(rel));
        } else if (s > 0.0) {
          (is_plus[k] ? off_neg : off_pos) += 1;
        } else {
          (is_plus[k] ? off_pos : off_neg) += 1;
        }
      }
      double cut = 0.0;
      int orient = 1;
      std::size_t online = best_threshold_errors(on_minus, on_plus, &cut, &orient);
      std::size_t total = std::min(off_pos, off_neg) + online;
      if (total < best.misclassifications) {
        best.misclassifications = total;
        double sign = off_pos <= off_neg ? 1.0 : -1.0;
        // Tilt (or shift) the line about the cut so on-line points split the
        // same way, by less than any off-line point's distance.
        double min_off = INFINITY, max_along = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          Eigen::Vector2d rel = (pts.row(k) - pts.row(a)).transpose();
          double s = std::abs(normal.dot(rel));
          if (s > tol) min_off = std::min(min_off, s);
          max_along = std::max(max_along, std::abs(dir.dot(rel)));
        }
        if (!std::isfinite(min_off)) min_off = 1.0;
        Eigen::Vector2d nrm = sign * normal;
        Eigen::Vector2d origin = pts.row(a).transpose();
        double offset = -nrm.dot(origin);
        if (std::isfinite(cut)) {
          double delta = 0.5 * min_off / (max_along + std::abs(cut) + 1.0);
          nrm += delta * orient * dir;
          offset = -nrm.dot(origin) - delta * orient * cut;
        } else {
          offset += 0.5 * min_off * orient;
        }
        best.rule.normal = nrm;
        best.rule.offset = offset;
      }
    }
  }
  return best;
}

void write_points_csv(const Matrix& points, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out.precision(17);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (j) out << ',';
      out << points(i, j);
    }
    out << '\n';
  }
}

Matrix read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open points file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t\r", used) != std::string::npos) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw ParseError("malformed coordinate '" + cell + "'", line_no);
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw ParseError("ragged point row", line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

}  // namespace mproj
