#include <doctest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>

#include "mproj/debias.hpp"
#include "mproj/error.hpp"
#include "synthetic.hpp"

using namespace mproj;

namespace {

std::vector<std::size_t> range(std::size_t from, std::size_t to) {
  std::vector<std::size_t> r(to - from);
  std::iota(r.begin(), r.end(), from);
  return r;
}

Vector v2(double x, double y) {
  Vector v(2);
  v << x, y;
  return v;
}

Eigen::Index svd_rank(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) r += sv[i] > 1e-9 * sv[0];
  return r;
}

UnitVector random_unit(Eigen::Index d, std::mt19937_64& rng) {
  return UnitVector::normalize(synth::gaussian(1, Vector::Zero(d), 1.0, rng).row(0).transpose());
}

ProjectionPipeline random_pipeline(Eigen::Index d, std::size_t steps, std::mt19937_64& rng) {
  ProjectionPipeline p("rand");
  for (std::size_t i = 0; i < steps; ++i) p.push_back({random_unit(d, rng), Strategy::Random, i + 1, {}});
  return p;
}

}  // namespace

TEST_CASE("mp_step worked example") {
  Matrix data(4, 2);
  data << 1, 0, 3, 0, 0, 1, 0, 3;
  auto plus = range(0, 2), minus = range(2, 4);
  ProjectionStep s = mp_step(data, minus, plus);
  CHECK(s.strategy == Strategy::MP);
  CHECK(s.w[0] == doctest::Approx(1 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(s.w[1] == doctest::Approx(-1 / std::sqrt(2.0)).epsilon(1e-15));
  Matrix p = project_along(data, s.w);
  Vector mp = class_mean(p, plus), mm = class_mean(p, minus);
  for (Eigen::Index j = 0; j < 2; ++j) {
    CHECK(std::abs(mp[j] - 1.0) < 1e-12);
    CHECK(std::abs(mm[j] - 1.0) < 1e-12);
  }
}

TEST_CASE("mp_step errors and translation invariance") {
  Matrix same(4, 2);
  same << 1, 0, -1, 0, 0, 1, 0, -1;
  auto a = range(0, 2), b = range(2, 4);
  CHECK_THROWS_AS(mp_step(same, a, b), DegenerateDirection);
  std::vector<std::size_t> none;
  CHECK_THROWS_AS(mp_step(same, none, b), UsageError);

  std::mt19937_64 rng(2);
  Matrix X = synth::gaussian(40, Vector::Zero(6), 1.0, rng);
  X.topRows(20).col(0).array() += 2.0;
  Vector shift = synth::gaussian(1, Vector::Zero(6), 50.0, rng).row(0).transpose();
  Matrix Y = X.rowwise() + shift.transpose();
  auto lo = range(0, 20), hi = range(20, 40);
  ProjectionStep s1 = mp_step(X, hi, lo), s2 = mp_step(Y, hi, lo);
  CHECK((s1.w.coords() - s2.w.coords()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("mp_step makes class means coincide") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> n(1, 80), d(1, 40);
  for (int trial = 0; trial < 100; ++trial) {
    std::size_t n1 = n(rng), n2 = n(rng);
    Eigen::Index dim = static_cast<Eigen::Index>(d(rng));
    Matrix X = synth::vstack({synth::gaussian(n1, Vector::Zero(dim), 1.0, rng),
                              synth::gaussian(n2, Vector::Constant(dim, 0.5), 2.0, rng)});
    auto minus = range(0, n1), plus = range(n1, n1 + n2);
    ProjectionStep s = mp_step(X, minus, plus);
    Matrix P = project_along(X, s.w);
    CHECK((class_mean(P, plus) - class_mean(P, minus)).norm() < 1e-9);
  }
}

TEST_CASE("multiclass MP with unit-vector means") {
  std::vector<Vector> means{Vector::Unit(3, 0), Vector::Unit(3, 1), Vector::Unit(3, 2)};
  std::mt19937_64 rng(6);
  LabeledMatrix lm = synth::labeled_gaussians(means, 50, 0.2, rng);
  std::vector<std::vector<std::size_t>> classes{range(0, 50), range(50, 100), range(100, 150)};
  ProjectionPipeline p = mp_multiclass(lm.x, classes, 0);
  REQUIRE(p.size() == 2);
  CHECK(p.warnings().empty());
  Matrix P = p.apply(lm.x);
  Vector m0 = class_mean(P, classes[0]);
  for (const auto& c : classes) CHECK((class_mean(P, c) - m0).cwiseAbs().maxCoeff() < 1e-8);
  for (const auto& s : p.steps()) CHECK(s.metadata.at("means_recomputed") == 1.0);

  // k = 2 is the single step.
  ProjectionPipeline two = mp_multiclass(lm.x, {classes[0], classes[1]}, 1);
  REQUIRE(two.size() == 1);
  ProjectionStep direct = mp_step(lm.x, classes[1], classes[0]);
  CHECK(std::abs(std::abs(two.steps()[0].w.coords().dot(direct.w.coords())) - 1.0) < 1e-12);
}

TEST_CASE("multiclass MP skips a degenerate class") {
  Matrix X(6, 2);
  X << 1, 0, -1, 0, 0, 1, 0, -1, 5, 5, 6, 5;
  std::vector<std::vector<std::size_t>> classes{range(0, 2), range(2, 4), range(4, 6)};
  ProjectionPipeline p = mp_multiclass(X, classes, 0);
  CHECK(p.size() == 1);
  CHECK(p.warnings().size() == 1);
  CHECK_THROWS_AS(mp_multiclass(X, {classes[0]}, 0), UsageError);
  CHECK_THROWS_AS(mp_multiclass(X, classes, 3), UsageError);
}

TEST_CASE("TMP is robust to outliers where MP is not") {
  // A tight cluster per class plus two far outliers in the plus class.
  std::mt19937_64 rng(10);
  Matrix minus = synth::gaussian(20, v2(0, 0), 0.05, rng);
  Matrix plus = synth::vstack({synth::gaussian(20, v2(3, 0), 0.05, rng), synth::gaussian(2, v2(3, 60), 0.05, rng)});
  Matrix all = synth::vstack({minus, plus});
  auto mi = range(0, 20), pi = range(20, 42);

  TmpOptions exact;
  exact.mode = MedianMode::Exact2d;
  ProjectionStep t = tmp_step(all, mi, pi, exact);
  ProjectionStep m = mp_step(all, mi, pi);
  CHECK(t.strategy == Strategy::TMP);
  CHECK(t.metadata.at("exact") == 1.0);

  auto errors_after = [&](const UnitVector& w) {
    Matrix P = project_along(all, w);
    return best_linear_classifier_2d(P.topRows(20), P.bottomRows(22)).misclassifications;
  };
  std::size_t te = errors_after(t.w), me = errors_after(m.w);
  CHECK(te > me);

  // Projected points are collinear; brute-force every cut along the line.
  Matrix Pt = project_along(all, t.w);
  Vector along = v2(-t.w[1], t.w[0]);
  std::vector<double> s = std::vector<double>(42);
  for (Eigen::Index i = 0; i < 42; ++i) s[static_cast<std::size_t>(i)] = Pt.row(i).dot(along);
  std::size_t brute = 22;
  for (double cut : s) {
    for (double eps : {-1e-9, 1e-9}) {
      std::size_t e = 0;
      for (std::size_t i = 0; i < 42; ++i) e += (s[i] > cut + eps) != (i >= 20);
      brute = std::min({brute, e, 42 - e});
    }
  }
  CHECK(brute == te);
}

TEST_CASE("TMP medians project to the same point and bound the error") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> n(1, 20);
  for (int trial = 0; trial < 40; ++trial) {
    std::size_t n1 = n(rng), n2 = n(rng);
    Matrix minus = synth::gaussian(n1, v2(0, 0), 1.0, rng);
    Matrix plus = synth::gaussian(n2, v2(1.5, 0.5), 1.0, rng);
    Matrix all = synth::vstack({minus, plus});
    TmpOptions exact;
    exact.mode = MedianMode::Exact2d;
    std::optional<ProjectionStep> step;
    try {
      step = tmp_step(all, range(0, n1), range(n1, n1 + n2), exact);
    } catch (const DegenerateDirection&) {
      continue;
    }
    const ProjectionStep& s = *step;
    DepthResult tm = tukey_median_exact_2d(minus), tp = tukey_median_exact_2d(plus);
    CHECK(s.metadata.at("depth_minus") == static_cast<double>(tm.depth));
    CHECK(s.metadata.at("depth_plus") == static_cast<double>(tp.depth));
    CHECK((project_along(tm.point, s.w) - project_along(tp.point, s.w)).norm() < 1e-9);
    Matrix P = project_along(all, s.w);
    std::size_t err = best_linear_classifier_2d(P.topRows(static_cast<Eigen::Index>(n1)),
                                                P.bottomRows(static_cast<Eigen::Index>(n2)))
                          .misclassifications;
    CHECK(err >= std::min(tm.depth, tp.depth));
  }
}

TEST_CASE("TMP singleton classes and symmetric classes") {
  Matrix two(2, 3);
  two << 1, 2, 3, 4, 6, 3;
  ProjectionStep s = tmp_step(two, range(0, 1), range(1, 2));
  Vector expect = (two.row(1) - two.row(0)).transpose().normalized();
  CHECK((s.w.coords() - expect).norm() < 1e-12);

  // Mirror images across the y axis: w should lie along x.
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix minus = synth::gaussian(40, v2(-2, 0), 1.0, rng);
    Matrix plus = minus;
    plus.col(0) *= -1.0;
    TmpOptions opt;
    opt.approx.rng_seed = static_cast<std::uint64_t>(trial);
    ProjectionStep t = tmp_step(synth::vstack({minus, plus}), range(0, 40), range(40, 80), opt);
    double angle = std::acos(std::min(1.0, std::abs(t.w[0]))) * 180.0 / std::numbers::pi;
    CHECK(angle < 5.0);
  }
  CHECK_THROWS_AS(tmp_step(two, range(0, 1), range(0, 1)), DegenerateDirection);
}

TEST_CASE("INLP needs several rounds where MP needs one") {
  std::mt19937_64 rng(20);
  Vector mu = Vector::Zero(50);
  mu[0] = 3;
  LabeledMatrix train = synth::labeled_gaussians({mu, -mu}, 300, 1.0, rng);
  LabeledMatrix dev = synth::labeled_gaussians({mu, -mu}, 1000, 1.0, rng);
  InlpOptions opt;
  opt.trainer.seed = 1;
  InlpResult r = inlp_run(train, dev, opt);
  CHECK(r.majority == doctest::Approx(0.5));
  CHECK(r.rounds >= 2);
  REQUIRE(r.dev_accuracy.size() == r.rounds + 1);
  CHECK(r.dev_accuracy.front() > 0.99);
  CHECK(r.dev_accuracy.back() <= r.dev_accuracy.front());
  CHECK(r.dev_accuracy.back() <= r.majority + opt.stop_margin);
  for (const auto& step : r.pipeline.steps()) CHECK(std::abs(step.w.coords().norm() - 1.0) < 1e-12);

  // One MP step leaves a fresh probe at chance. A single seed scatters about
  // 2 points either way, so judge the mean.
  double mean_after = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 r2(100 + seed);
    LabeledMatrix tr = synth::labeled_gaussians({mu, -mu}, 300, 1.0, r2);
    LabeledMatrix dv = synth::labeled_gaussians({mu, -mu}, 1000, 1.0, r2);
    std::vector<std::size_t> c0, c1;
    for (std::size_t i = 0; i < tr.y.size(); ++i) (tr.y[i] == 0 ? c0 : c1).push_back(i);
    ProjectionPipeline mp;
    mp.push_back(mp_step(tr.x, c1, c0));
    auto curve = guarding_curve(tr, dv, mp, opt.trainer);
    REQUIRE(curve.size() == 2);
    CHECK(curve[0].second > 0.99);
    CHECK(curve[1].second < 0.6);
    mean_after += curve[1].second / 10.0;
  }
  CHECK(mean_after <= 0.5 + opt.stop_margin);
}

TEST_CASE("INLP budget, precheck and multiclass rounds") {
  std::mt19937_64 rng(22);
  Vector mu = Vector::Zero(10);
  mu[0] = 3;
  LabeledMatrix train = synth::labeled_gaussians({mu, -mu}, 100, 1.0, rng);
  LabeledMatrix dev = synth::labeled_gaussians({mu, -mu}, 100, 1.0, rng);
  InlpOptions one;
  one.max_iters = 1;
  CHECK(inlp_run(train, dev, one).pipeline.size() == 1);

  // Shuffled labels: already guarded.
  LabeledMatrix noise_train = train, noise_dev = dev;
  std::shuffle(noise_train.y.begin(), noise_train.y.end(), rng);
  std::shuffle(noise_dev.y.begin(), noise_dev.y.end(), rng);
  InlpOptions pre;
  pre.precheck = true;
  pre.stop_margin = 0.1;
  CHECK(inlp_run(noise_train, noise_dev, pre).pipeline.size() == 0);
  InlpOptions dflt;
  dflt.stop_margin = 0.1;
  CHECK(inlp_run(noise_train, noise_dev, dflt).pipeline.size() >= 1);

  std::vector<Vector> means{Vector::Unit(10, 0) * 4, Vector::Unit(10, 1) * 4, Vector::Unit(10, 2) * 4};
  LabeledMatrix t3 = synth::labeled_gaussians(means, 100, 1.0, rng);
  LabeledMatrix d3 = synth::labeled_gaussians(means, 100, 1.0, rng);
  InlpOptions two;
  two.max_iters = 1;
  CHECK(inlp_run(t3, d3, two).pipeline.size() == 2);

  InlpOptions ortho;
  ortho.orthogonalize = true;
  ortho.max_iters = 4;
  InlpResult r = inlp_run(t3, d3, ortho);
  const auto& st = r.pipeline.steps();
  for (std::size_t i = 0; i < st.size(); ++i) {
    for (std::size_t j = i + 1; j < st.size(); ++j) CHECK(std::abs(st[i].w.coords().dot(st[j].w.coords())) < 1e-9);
  }

  CHECK_THROWS_AS(inlp_run(LabeledMatrix{Matrix(0, 10), {}}, dev, one), DataError);
}

TEST_CASE("random directions follow the data covariance") {
  std::mt19937_64 rng(30);
  Matrix iso = synth::gaussian(20000, Vector::Zero(3), 1.0, rng);
  std::array<double, 8> octants{};
  Vector second = Vector::Zero(3), first = Vector::Zero(3);
  const int draws = 1000;
  for (int i = 0; i < draws; ++i) {
    Vector w = random_step(iso, static_cast<std::uint64_t>(i)).w.coords();
    int o = (w[0] > 0) + 2 * (w[1] > 0) + 4 * (w[2] > 0);
    octants[static_cast<std::size_t>(o)] += 1;
    first += w;
    second += w.cwiseProduct(w);
  }
  double chi2 = 0;
  for (double c : octants) chi2 += (c - draws / 8.0) * (c - draws / 8.0) / (draws / 8.0);
  CHECK(chi2 < 24.32);  // 7 dof, p = 0.001
  for (Eigen::Index j = 0; j < 3; ++j) {
    CHECK(std::abs(first[j] / draws) < 0.06);
    CHECK(std::abs(second[j] / draws - 1.0 / 3.0) < 0.04);
  }

  Matrix dom = synth::gaussian(5000, Vector::Zero(2), 1.0, rng);
  dom.col(0) *= 10.0;
  double a1 = 0, a2 = 0;
  for (int i = 0; i < 500; ++i) {
    Vector w = random_step(dom, static_cast<std::uint64_t>(i)).w.coords();
    a1 += std::abs(w[0]);
    a2 += std::abs(w[1]);
  }
  CHECK(a1 > 5 * a2);

  Vector dir(4);
  dir << 1, -2, 0.5, 3;
  Matrix rank1(30, 4);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < 30; ++i) rank1.row(i) = g(rng) * dir.transpose();
  for (int i = 0; i < 10; ++i) {
    Vector w = random_step(rank1, static_cast<std::uint64_t>(i)).w.coords();
    CHECK(std::abs(std::abs(w.dot(dir.normalized())) - 1.0) < 1e-9);
  }
  CHECK((random_step(iso, 7).w.coords() - random_step(iso, 7).w.coords()).norm() == 0.0);
  CHECK_THROWS_AS(covariance(Matrix(1, 3)), DataError);
}

TEST_CASE("pipeline algebra") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Index d = 2 + trial % 29;
    ProjectionPipeline p = random_pipeline(d, 1 + static_cast<std::size_t>(trial) % 6, rng);
    Matrix X = synth::gaussian(40, Vector::Zero(d), 1.0, rng);
    Matrix seq = p.apply(X);
    Matrix comp = X * p.composed_matrix(d).transpose();
    CHECK((seq - comp).cwiseAbs().maxCoeff() < 1e-8);
    Matrix prev = X;
    for (std::size_t k = 1; k <= p.size(); ++k) {
      Matrix cur = p.prefix(k).apply(X);
      CHECK(svd_rank(prev) - svd_rank(cur) <= 1);
      prev = cur;
    }
  }

  Matrix X = synth::gaussian(10, Vector::Zero(4), 1.0, rng);
  ProjectionPipeline empty;
  CHECK(empty.apply(X) == X);
  CHECK(empty.composed_matrix(4).isIdentity(0.0));

  // k mutually orthogonal steps drop full rank by exactly k.
  Matrix big = synth::gaussian(200, Vector::Zero(10), 1.0, rng);
  Eigen::HouseholderQR<Matrix> qr(synth::gaussian(10, Vector::Zero(10), 1.0, rng));
  Matrix Q = qr.householderQ();
  for (std::size_t k = 0; k <= 5; ++k) {
    ProjectionPipeline p;
    for (std::size_t i = 0; i < k; ++i) {
      p.push_back({UnitVector::normalize(Q.col(static_cast<Eigen::Index>(i))), Strategy::Random, i + 1, {}});
    }
    CHECK(svd_rank(p.apply(big)) == 10 - static_cast<Eigen::Index>(k));
  }

  ProjectionPipeline wrong = random_pipeline(3, 1, rng);
  CHECK_THROWS_AS(wrong.apply(X), UsageError);
}

TEST_CASE("apply_pipeline keeps the vocabulary") {
  std::mt19937_64 rng(41);
  EmbeddingSpace s = synth::space_from(synth::gaussian(20, Vector::Zero(5), 1.0, rng));
  ProjectionPipeline p = random_pipeline(5, 3, rng);
  EmbeddingSpace out = apply_pipeline(s, p);
  CHECK(out.vocab() == s.vocab());
  CHECK((out.matrix() - p.apply(s.matrix())).cwiseAbs().maxCoeff() == 0.0);
  EmbeddingSpace same = apply_pipeline(s, ProjectionPipeline());
  CHECK(same.matrix() == s.matrix());
}

TEST_CASE("pipeline JSON round trip") {
  std::mt19937_64 rng(42);
  ProjectionPipeline p = random_pipeline(7, 4, rng);
  ProjectionStep mp{UnitVector::normalize(Vector::Ones(7)), Strategy::MP, 5, {{"mean_distance", 0.125}}};
  p.push_back(mp);
  p.warn("something skipped");
  ProjectionPipeline back = pipeline_from_json(pipeline_to_json(p, 7));
  REQUIRE(back.size() == p.size());
  CHECK(back.source_space() == p.source_space());
  CHECK(back.warnings() == p.warnings());
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(back.steps()[i].w.coords() == p.steps()[i].w.coords());
    CHECK(back.steps()[i].strategy == p.steps()[i].strategy);
    CHECK(back.steps()[i].iteration == p.steps()[i].iteration);
    CHECK(back.steps()[i].metadata == p.steps()[i].metadata);
  }

  synth::TempDir tmp("pipe");
  save_pipeline(p, 7, tmp / "p.json");
  CHECK(load_pipeline(tmp / "p.json").size() == p.size());
  synth::write_file(tmp / "bad.json", "{\"steps\": [");
  CHECK_THROWS_AS(load_pipeline(tmp / "bad.json"), DataError);
  CHECK_THROWS_AS(load_pipeline(tmp / "none.json"), DataError);

  for (auto s : {Strategy::MP, Strategy::TMP, Strategy::INLP, Strategy::Random}) CHECK(parse_strategy(to_string(s)) == s);
  CHECK_THROWS_AS(parse_strategy("PCA"), UsageError);
}
