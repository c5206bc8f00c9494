#include <doctest.h>

#include <algorithm>
#include <random>

#include "mproj/debias.hpp"
#include "mproj/error.hpp"
#include "mproj/probes.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mproj;

namespace {

Vector axis(Eigen::Index d, Eigen::Index i, double s) {
  Vector v = Vector::Zero(d);
  v[i] = s;
  return v;
}

double accuracy(const LinearProbe& p, const LabeledMatrix& m) { return evaluate_probe(p, m.x, m.y, "test").accuracy; }

// XOR quadrants with a margin around both axes.
LabeledMatrix xor_data(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  std::bernoulli_distribution coin;
  LabeledMatrix out;
  out.x.resize(static_cast<Eigen::Index>(n), 2);
  for (std::size_t i = 0; i < n; ++i) {
    double sx = coin(rng) ? 1 : -1, sy = coin(rng) ? 1 : -1;
    out.x.row(static_cast<Eigen::Index>(i)) << sx * u(rng), sy * u(rng);
    out.y.push_back(sx * sy > 0 ? 1 : 0);
  }
  return out;
}

}  // namespace

TEST_CASE("linear probe on separated Gaussians") {
  std::mt19937_64 rng(1);
  Vector mu = axis(20, 0, 3);
  LabeledMatrix train = synth::labeled_gaussians({-mu, mu}, 300, 1.0, rng);
  LabeledMatrix test = synth::labeled_gaussians({-mu, mu}, 300, 1.0, rng);
  for (Trainer t : {Trainer::Hinge, Trainer::Logistic}) {
    TrainerParams p;
    p.trainer = t;
    LinearProbe probe = train_linear(train.x, train.y, p);
    CHECK(probe.weights.rows() == 1);
    CHECK(accuracy(probe, train) >= 0.99);
    CHECK(accuracy(probe, test) > 0.99);
  }
}

TEST_CASE("linear probe on shuffled labels stays near majority") {
  std::mt19937_64 rng(2);
  Vector mu = axis(20, 0, 3);
  LabeledMatrix train = synth::labeled_gaussians({-mu, mu}, 500, 1.0, rng);
  LabeledMatrix test = synth::labeled_gaussians({-mu, mu}, 1500, 1.0, rng);
  std::shuffle(train.y.begin(), train.y.end(), rng);
  std::shuffle(test.y.begin(), test.y.end(), rng);
  ProbeReport r = evaluate_probe(train_linear(train.x, train.y, {}), test.x, test.y, "test");
  CHECK(std::abs(r.accuracy - r.majority_rate) <= 0.03);
}

TEST_CASE("three-class probe") {
  std::mt19937_64 rng(3);
  std::vector<Vector> means{axis(10, 0, 4), axis(10, 1, 4), axis(10, 2, 4)};
  LabeledMatrix train = synth::labeled_gaussians(means, 200, 1.0, rng);
  LabeledMatrix test = synth::labeled_gaussians(means, 200, 1.0, rng);
  LinearProbe probe = train_linear(train.x, train.y, {});
  CHECK(probe.num_classes == 3);
  CHECK(probe.weights.rows() == 3);
  ProbeReport r = evaluate_probe(probe, test.x, test.y, "dev");
  CHECK(r.accuracy > 0.99);
  CHECK(r.majority_rate == doctest::Approx(1.0 / 3.0));
  CHECK(r.per_class_accuracy.size() == 3);
  CHECK(r.split == "dev");
  CHECK(r.guarded(0.7));
  CHECK_FALSE(r.guarded(0.02));
}

TEST_CASE("probe errors and determinism") {
  Matrix x = Matrix::Ones(4, 2);
  CHECK_THROWS_AS(train_linear(x, {1, 1, 1, 1}, {}), DataError);
  std::mt19937_64 rng(4);
  LabeledMatrix d = synth::labeled_gaussians({axis(5, 0, 1), axis(5, 0, -1)}, 50, 1.0, rng);
  TrainerParams p;
  p.seed = 77;
  LinearProbe a = train_linear(d.x, d.y, p), b = train_linear(d.x, d.y, p);
  CHECK((a.weights - b.weights).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.biases - b.biases).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(parse_trainer("svm") == Trainer::Hinge);
  CHECK(parse_trainer(to_string(Trainer::Logistic)) == Trainer::Logistic);
  CHECK_THROWS_AS(parse_trainer("tree"), UsageError);
  CHECK(majority_rate({0, 1, 1, 2}) == 0.5);
  CHECK_THROWS_AS(evaluate_predictions({0}, {0, 1}, "dev"), UsageError);
}

TEST_CASE("guarding curve for MP and INLP") {
  std::mt19937_64 rng(5);
  std::vector<Vector> means{axis(20, 0, 4), axis(20, 1, 4), axis(20, 2, 4)};
  LabeledMatrix train = synth::labeled_gaussians(means, 1000, 1.0, rng);
  LabeledMatrix dev = synth::labeled_gaussians(means, 1000, 1.0, rng);
  std::vector<std::vector<std::size_t>> classes(3);
  for (std::size_t i = 0; i < train.y.size(); ++i) classes[static_cast<std::size_t>(train.y[i])].push_back(i);
  ProjectionPipeline mp = mp_multiclass(train.x, classes, 0);
  auto curve = guarding_curve(train, dev, mp, {});
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(curve[i].first == i);
  CHECK(curve[0].second > 0.99);
  CHECK(curve[2].second <= 1.0 / 3.0 + 0.02);

  auto base = guarding_curve(train, dev, ProjectionPipeline(), {});
  REQUIRE(base.size() == 1);
  CHECK(base[0].second == curve[0].second);

  InlpResult inlp = inlp_run(train, dev, {});
  auto ic = guarding_curve(train, dev, inlp.pipeline, {});
  CHECK(ic.back().second <= ic.front().second);
}

TEST_CASE("MLP solves XOR") {
  std::mt19937_64 rng(6);
  LabeledMatrix train = xor_data(800, rng), test = xor_data(400, rng);
  MlpParams p;
  p.hidden_width = 16;
  p.epochs = 100;
  p.seed = 3;
  MlpReport r = train_mlp_probe(train, test, p);
  CHECK(r.test_accuracy > 0.95);
  CHECK(train_mlp_probe(train, test, p).test_accuracy == r.test_accuracy);

  MlpParams bad = p;
  bad.hidden_width = 0;
  CHECK_THROWS_AS(train_mlp_probe(train, test, bad), UsageError);
  bad = p;
  bad.validation_fraction = 0.9;
  CHECK_THROWS_AS(train_mlp_probe(train, test, bad), UsageError);
}

TEST_CASE("MLP finds class structure a linear probe cannot use") {
  // Same mean, different spread: only the norm carries the label.
  std::mt19937_64 rng(16);
  auto make = [&](std::size_t n) {
    LabeledMatrix m = synth::labeled_gaussians({Vector::Zero(10), Vector::Zero(10)}, n, 1.0, rng);
    m.x.bottomRows(static_cast<Eigen::Index>(n)) *= 2.0;
    return m;
  };
  LabeledMatrix train = make(800), test = make(800);
  double lin = accuracy(train_linear(train.x, train.y, {}), test);
  MlpParams p;
  p.seed = 2;
  MlpReport r = train_mlp_probe(train, test, p);
  CHECK(lin < 0.6);
  CHECK(r.test_accuracy > lin + 0.10);
}

TEST_CASE("untrained MLP is at chance on average") {
  std::mt19937_64 rng(17);
  LabeledMatrix train = xor_data(400, rng), test = xor_data(400, rng);
  double total = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    MlpParams p;
    p.epochs = 0;
    p.seed = seed;
    total += train_mlp_probe(train, test, p).test_accuracy;
  }
  CHECK(std::abs(total / 30 - 0.5) < 0.1);
}

TEST_CASE("MLP is not worse than the linear probe") {
  std::mt19937_64 rng(7);
  for (double sep : {0.5, 1.0, 3.0}) {
    for (Eigen::Index d : {2, 10}) {
      std::vector<Vector> means{axis(d, 0, sep), axis(d, 0, -sep), axis(d, 1, sep)};
      LabeledMatrix train = synth::labeled_gaussians(means, 2000, 1.0, rng);
      LabeledMatrix test = synth::labeled_gaussians(means, 1000, 1.0, rng);
      double lin = accuracy(train_linear(train.x, train.y, {}), test);
      MlpParams p;
      p.seed = 1;
      CHECK(train_mlp_probe(train, test, p).test_accuracy >= lin - 0.02);
    }
  }
}

TEST_CASE("V-measure edge cases") {
  std::vector<int> labels{0, 0, 1, 1, 2, 2};
  VMeasure perfect = v_measure(labels, {5, 5, 3, 3, 9, 9});
  CHECK(perfect.v == doctest::Approx(1.0));
  CHECK(perfect.homogeneity == doctest::Approx(1.0));

  // Every cluster holds the same label mix.
  VMeasure flat = v_measure({0, 1, 0, 1}, {0, 0, 1, 1});
  CHECK(flat.v == 0.0);

  VMeasure one = v_measure({0, 1, 2}, {0, 0, 0});
  CHECK(one.homogeneity == 0.0);
  CHECK(one.completeness == doctest::Approx(1.0));
  CHECK(one.v == 0.0);
  CHECK_THROWS_AS(v_measure({0}, {0, 1}), UsageError);
}

TEST_CASE("V-measure matches the contingency oracle") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> lab(0, 2), clu(0, 3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> l(60), c(60);
    for (auto& x : l) x = lab(rng);
    for (std::size_t i = 0; i < 60; ++i) c[i] = trial % 2 ? clu(rng) : (l[i] + (clu(rng) == 0)) % 3;
    CHECK(std::abs(v_measure(l, c).v - oracle::v_measure(l, c)) < 1e-9);
    std::vector<int> relabeled = c;
    for (auto& x : relabeled) x = 10 - x;
    CHECK(std::abs(v_measure(l, relabeled).v - v_measure(l, c).v) < 1e-12);
  }
}

TEST_CASE("k-means recovers separated clusters") {
  std::mt19937_64 rng(9);
  LabeledMatrix d = synth::labeled_gaussians({axis(3, 0, 5), axis(3, 0, -5)}, 100, 1.0, rng);
  ClusterReport r = kmeans_vmeasure(d.x, d.y, 2, 1);
  CHECK(r.score.v > 0.99);
  KMeansResult a = kmeans(d.x, 2, 4), b = kmeans(d.x, 2, 4);
  CHECK(a.assignment == b.assignment);
  CHECK(a.inertia == b.inertia);

  // Half-overlapping: strictly between 0 and 1, and equal to the oracle.
  LabeledMatrix h = synth::labeled_gaussians({axis(3, 0, 1), axis(3, 0, -1)}, 200, 1.0, rng);
  ClusterReport hr = kmeans_vmeasure(h.x, h.y, 2, 2);
  KMeansResult hk = kmeans(h.x, 2, 2);
  CHECK(hr.score.v > 0.0);
  CHECK(hr.score.v < 1.0);
  CHECK(std::abs(hr.score.v - oracle::v_measure(h.y, hk.assignment)) < 1e-9);

  CHECK_THROWS_AS(kmeans(d.x, 0, 1), UsageError);
  CHECK_THROWS_AS(kmeans(d.x, 1000, 1), UsageError);
}
