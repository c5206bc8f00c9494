#include <algorithm>
#include <cmath>
#include <random>

#include "mproj/error.hpp"
#include "mproj/geometry.hpp"

namespace mproj {

namespace {

// Uniform point strictly inside the ball of radius r in `dim` dimensions.
Vector ball_sample(Eigen::Index dim, double r, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector g(dim);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < dim; ++i) g[i] = gauss(rng);
    norm = g.norm();
  } while (norm == 0.0);
  double radius = r * (1.0 - 1e-9) * std::pow(unif(rng), 1.0 / static_cast<double>(dim));
  return g * (radius / norm);
}

}  // namespace

Matrix regular_simplex(std::size_t d) {
  if (d == 0) throw UsageError("regular_simplex: d must be >= 1");
  const auto dd = static_cast<Eigen::Index>(d);
  // Helmert rows: an orthonormal basis of the sum-zero hyperplane of R^{d+1}.
  Matrix helmert = Matrix::Zero(dd, dd + 1);
  for (Eigen::Index k = 1; k <= dd; ++k) {
    double s = 1.0 / std::sqrt(static_cast<double>(k * (k + 1)));
    for (Eigen::Index j = 0; j < k; ++j) helmert(k - 1, j) = s;
    helmert(k - 1, k) = -static_cast<double>(k) * s;
  }
  double scale = std::sqrt(static_cast<double>(d + 1) / static_cast<double>(d));
  Matrix vertices = helmert.transpose() * scale;  // row i: image of e_i - centroid
  return vertices;
}

AdversarialInstance build_adversarial_instance(const AdversarialParams& params) {
  if (params.d == 0) throw UsageError("adversarial instance: d must be >= 1");
  if (params.m == 0 || params.n == 0) throw UsageError("adversarial instance: m and n must be >= 1");
  AdversarialInstance inst;
  inst.d = params.d;
  const double d = static_cast<double>(params.d);
  inst.C = params.C > 0.0 ? params.C : 4.0 * d;
  inst.eps = params.eps > 0.0 ? params.eps : 1.0 / (2.0 * d);
  inst.p_radius = params.p_radius >= 0.0 ? params.p_radius : inst.eps / 10.0;
  if (inst.p_radius >= inst.eps) throw UsageError("adversarial instance: p_radius must be below eps");
  inst.simplex = regular_simplex(params.d);

  const auto dim = static_cast<Eigen::Index>(params.d);
  std::mt19937_64 rng(params.rng_seed);
  inst.P = Matrix::Zero(static_cast<Eigen::Index>(params.m), dim + 1);
  inst.vertex_of.resize(params.m);
  for (std::size_t i = 0; i < params.m; ++i) {
    std::size_t v = i % (params.d + 1);
    inst.vertex_of[i] = v;
    Vector p = inst.simplex.row(static_cast<Eigen::Index>(v)).transpose();
    if (inst.p_radius > 0.0) p += ball_sample(dim, inst.p_radius, rng);
    inst.P.row(static_cast<Eigen::Index>(i)).head(dim) = p.transpose();
  }

  inst.Q = Matrix::Zero(static_cast<Eigen::Index>(params.n), dim + 1);
  for (std::size_t i = 0; i < params.n; ++i) {
    Vector q = ball_sample(dim + 1, inst.eps, rng);
    q[dim] += inst.C;
    inst.Q.row(static_cast<Eigen::Index>(i)) = q.transpose();
  }
  return inst;
}

std::size_t adversarial_witness_errors(const AdversarialInstance& instance, const UnitVector& w) {
  const Eigen::Index D = instance.P.cols();
  if (w.dim() != D) throw UsageError("adversarial_witness_errors: dimension mismatch");
  Matrix P = project_along(instance.P, w);
  Matrix Q = project_along(instance.Q, w);

  std::vector<Vector> normals;
  Vector center = Vector::Zero(D);
  center[D - 1] = instance.C;
  normals.push_back(project_along(center, w));
  for (Eigen::Index v = 0; v < instance.simplex.rows(); ++v) {
    Vector r = Vector::Zero(D);
    r.head(D - 1) = instance.simplex.row(v).transpose();
    normals.push_back(r);
  }
  for (Eigen::Index i = 0; i < D; ++i) normals.push_back(Vector::Unit(D, i));

  std::size_t best = std::min<std::size_t>(P.rows(), Q.rows());
  for (const auto& n : normals) {
    if (n.norm() < 1e-12) continue;
    Vector sp = P * n, sq = Q * n;
    std::vector<double> a(sp.data(), sp.data() + sp.size()), b(sq.data(), sq.data() + sq.size());
    best = std::min(best, best_threshold_errors(a, b));
  }
  return best;
}

}  // namespace mproj
