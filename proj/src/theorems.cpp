#include "mproj/theorems.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "mproj/geometry.hpp"

namespace mproj {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

// Planar cloud of n points; every third instance sits on a small integer grid
// so that collinear and coincident points show up.
Matrix planar_cloud(std::size_t n, std::mt19937_64& rng, int style, const Eigen::Vector2d& shift) {
  Matrix P(static_cast<Eigen::Index>(n), 2);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::uniform_int_distribution<int> grid(-3, 3);
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    switch (style) {
      case 0:
        P(i, 0) = gauss(rng);
        P(i, 1) = 0.5 * gauss(rng);
        break;
      case 1:
        P(i, 0) = unif(rng);
        P(i, 1) = unif(rng);
        break;
      default:
        P(i, 0) = grid(rng);
        P(i, 1) = grid(rng);
        break;
    }
    P.row(i) += shift.transpose();
  }
  return P;
}

}  // namespace

SuiteResult check_tukey_bound(const TukeySuiteParams& params) {
  auto t0 = Clock::now();
  SuiteResult r;
  r.name = "tukey_bound";
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, params.max_per_class));
  std::normal_distribution<double> gauss;
  double slack_min = 1e300;
  for (std::size_t it = 0; it < params.instances; ++it) {
    int style = static_cast<int>(it % 3);
    Eigen::Vector2d shift(gauss(rng), gauss(rng));
    Matrix minus = planar_cloud(size(rng), rng, style, Eigen::Vector2d::Zero());
    Matrix plus = planar_cloud(size(rng), rng, style, shift);
    DepthResult tm = tukey_median_exact_2d(minus);
    DepthResult tp = tukey_median_exact_2d(plus);
    Vector diff = tp.point - tm.point;
    UnitVector w = diff.norm() > 1e-12 ? UnitVector::normalize(diff) : UnitVector::from_unit(Vector::Unit(2, 0));
    ClassifierResult best = best_linear_classifier_2d(project_along(minus, w), project_along(plus, w));
    std::size_t bound = std::min(tm.depth, tp.depth);
    ++r.instances;
    if (best.misclassifications >= bound) ++r.passed;
    slack_min = std::min(slack_min, static_cast<double>(best.misclassifications) - static_cast<double>(bound));
  }
  r.detail["min_slack"] = slack_min;
  r.seconds = elapsed(t0);
  return r;
}

SuiteResult check_median_depth(const TukeySuiteParams& params) {
  auto t0 = Clock::now();
  SuiteResult r;
  r.name = "median_depth";
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, 2 * params.max_per_class));
  double worst_ratio = 1e300;
  for (std::size_t it = 0; it < params.instances; ++it) {
    std::size_t n = size(rng);
    Matrix P = planar_cloud(n, rng, static_cast<int>(it % 3), Eigen::Vector2d::Zero());
    DepthResult m = tukey_median_exact_2d(P);
    ++r.instances;
    if (m.depth >= ceil_div(n, 3)) ++r.passed;
    worst_ratio = std::min(worst_ratio, static_cast<double>(m.depth) / static_cast<double>(ceil_div(n, 3)));
  }
  r.detail["worst_depth_over_bound"] = worst_ratio;
  r.seconds = elapsed(t0);
  return r;
}

SuiteResult check_adversarial_upper(const AdversarialSuiteParams& params) {
  auto t0 = Clock::now();
  SuiteResult r;
  r.name = "adversarial_upper";
  std::size_t tight = 0, worst = 0;
  std::uint64_t seed = params.rng_seed;
  for (std::size_t d : params.dims) {
    for (std::size_t m : params.sizes) {
      AdversarialParams ap;
      ap.d = d;
      ap.m = m;
      ap.n = m;
      ap.rng_seed = seed++;
      AdversarialInstance inst = build_adversarial_instance(ap);
      std::mt19937_64 rng(seed++);
      std::normal_distribution<double> gauss;
      const auto D = static_cast<Eigen::Index>(d + 1);
      for (std::size_t k = 0; k < params.directions; ++k) {
        Vector g(D);
        for (Eigen::Index i = 0; i < D; ++i) g[i] = gauss(rng);
        std::size_t errors = adversarial_witness_errors(inst, UnitVector::normalize(g));
        ++r.instances;
        if (errors <= ceil_div(m, d)) ++r.passed;
        if (errors <= ceil_div(m, d + 1)) ++tight;
        worst = std::max(worst, errors);
      }
    }
  }
  r.detail["tight"] = static_cast<double>(tight);
  r.detail["worst_errors"] = static_cast<double>(worst);
  r.seconds = elapsed(t0);
  return r;
}

SuiteResult check_approx_depth(const ApproxSuiteParams& params) {
  auto t0 = Clock::now();
  SuiteResult r;
  r.name = "approx_depth";
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, params.max_points));
  std::normal_distribution<double> gauss;
  for (std::size_t it = 0; it < params.instances; ++it) {
    Matrix P = planar_cloud(size(rng), rng, static_cast<int>(it % 3), Eigen::Vector2d::Zero());
    Vector q(2);
    q << gauss(rng), gauss(rng);
    std::size_t exact = tukey_depth_exact_2d(q, P).depth;
    std::size_t approx = tukey_depth_approx(q, P, params.directions, params.rng_seed + it);
    ++r.instances;
    if (approx >= exact) ++r.passed;
  }
  r.seconds = elapsed(t0);
  return r;
}

SuiteResult check_approx_median(const ApproxSuiteParams& params) {
  auto t0 = Clock::now();
  SuiteResult r;
  r.name = "approx_median";
  std::mt19937_64 rng(params.rng_seed);
  std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, params.max_points));
  for (std::size_t it = 0; it < params.instances; ++it) {
    Matrix P = planar_cloud(size(rng), rng, static_cast<int>(it % 2), Eigen::Vector2d::Zero());
    std::size_t exact = tukey_median_exact_2d(P).depth;
    ApproxMedianOptions opt;
    opt.directions = params.directions;
    opt.rng_seed = params.rng_seed + it;
    DepthResult approx = tukey_median_approx(P, opt);
    std::size_t rescored = tukey_depth_exact_2d(approx.point, P).depth;
    ++r.instances;
    if (rescored + 1 >= exact) ++r.passed;
  }
  r.detail["rate"] = r.instances ? static_cast<double>(r.passed) / static_cast<double>(r.instances) : 0.0;
  r.seconds = elapsed(t0);
  return r;
}

}  // namespace mproj
