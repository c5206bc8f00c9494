#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mproj/types.hpp"

namespace mproj {

// A direction of Euclidean norm one.
class UnitVector {
 public:
  // Normalizes; throws DegenerateDirection for a zero or non-finite input.
  static UnitVector normalize(const Vector& v);
  // Accepts only vectors already unit to within 1e-12.
  static UnitVector from_unit(const Vector& v);

  const Vector& coords() const { return coords_; }
  Eigen::Index dim() const { return coords_.size(); }
  double operator[](Eigen::Index i) const { return coords_[i]; }

 private:
  explicit UnitVector(Vector v) : coords_(std::move(v)) {}
  Vector coords_;
};

// p - (p . w) w for every row p.
Matrix project_along(const Matrix& points, const UnitVector& w);
Vector project_along(const Vector& point, const UnitVector& w);

// Tukey depth: the fewest points of P in any closed halfspace whose boundary
// passes through the query point.
struct DepthResult {
  Vector point;
  std::size_t depth = 0;
  Vector witness_direction;  // unit; the halfspace {x : (x - point) . u >= 0}
};

// Closed-halfspace count in direction u through q.
std::size_t halfspace_count(const Matrix& points, const Vector& q, const Vector& u);

// Exact depth in the plane by rotating a halfplane around q.
DepthResult tukey_depth_exact_2d(const Vector& q, const Matrix& points);

// Exact Tukey median in the plane. Candidates are P and the pairwise
// intersections of lines through two points of P; ties resolve to the
// lexicographically smallest candidate.
DepthResult tukey_median_exact_2d(const Matrix& points);

// Upper bound on depth from `directions` seeded random unit directions
// (both orientations of each). Sample i is the same for every count >= i.
std::size_t tukey_depth_approx(const Vector& q, const Matrix& points, std::size_t directions, std::uint64_t rng_seed);

struct ApproxMedianOptions {
  std::size_t iterations = 200;
  std::size_t directions = 512;
  std::uint64_t rng_seed = 0;
};

// Hill climb from the coordinate-wise median: each move pulls the point
// away from the witness halfspace, toward the centroid of the points outside it.
DepthResult tukey_median_approx(const Matrix& points, const ApproxMedianOptions& options = {});

// Lower-dimensional construction where a single projection cannot force many
// misclassifications: P near the vertices of a regular d-simplex, Q in a small
// ball above it, all in R^{d+1}.
struct AdversarialInstance {
  Matrix P;
  Matrix Q;
  std::size_t d = 0;       // simplex dimension; ambient dimension is d + 1
  double C = 0.0;          // height of the Q cluster center
  double eps = 0.0;        // Q radius
  double p_radius = 0.0;   // P jitter radius around each vertex
  Matrix simplex;          // (d+1) x d unit vertices, centered at the origin
  std::vector<std::size_t> vertex_of;  // vertex assignment of each P row
};

struct AdversarialParams {
  std::size_t d = 2;
  std::size_t m = 3;
  std::size_t n = 3;
  double C = 0.0;          // 0 selects 4d
  double eps = 0.0;        // 0 selects 1/(2d)
  double p_radius = -1.0;  // negative selects eps / 10
  std::uint64_t rng_seed = 0;
};

// Unit vertices of a regular d-simplex centered at the origin; pairwise dot -1/d.
Matrix regular_simplex(std::size_t d);

AdversarialInstance build_adversarial_instance(const AdversarialParams& params);

// A linear rule: predict plus iff normal . x + offset >= 0.
struct LinearRule {
  Vector normal;
  double offset = 0.0;
};

struct ClassifierResult {
  std::size_t misclassifications = 0;
  LinearRule rule;
};

// Exact fewest misclassifications of any halfplane classifier in the plane
// (constant classifiers included).
ClassifierResult best_linear_classifier_2d(const Matrix& minus, const Matrix& plus);

// Fewest misclassifications over thresholds of the 1-d scores `s`, both
// orientations, including the constant rules. Exact for 1-d data.
std::size_t best_threshold_errors(const std::vector<double>& minus_scores, const std::vector<double>& plus_scores,
                                  double* threshold = nullptr, int* orientation = nullptr);

// Upper bound on the best classifier for an adversarial instance after
// projection along w: min over explicit candidate normals (the simplex
// vertex directions lifted to R^{d+1}, the projected cluster-center direction
// and the coordinate axes) with the best threshold along each.
std::size_t adversarial_witness_errors(const AdversarialInstance& instance, const UnitVector& w);

// One point per row, comma separated, no header.
void write_points_csv(const Matrix& points, const std::filesystem::path& path);
Matrix read_points_csv(const std::filesystem::path& path);

}  // namespace mproj
