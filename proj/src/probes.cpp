#include "mproj/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mproj/debias.hpp"
#include "mproj/error.hpp"

namespace mproj {

double majority_rate(const std::vector<int>& labels) {
  if (labels.empty()) return 0.0;
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  std::size_t best = 0;
  for (const auto& [_, c] : counts) best = std::max(best, c);
  return static_cast<double>(best) / static_cast<double>(labels.size());
}

ProbeReport evaluate_predictions(const std::vector<int>& predicted, const std::vector<int>& truth, std::string split) {
  if (predicted.size() != truth.size()) throw UsageError("evaluate_predictions: size mismatch");
  ProbeReport r;
  r.split = std::move(split);
  if (truth.empty()) return r;
  std::map<int, std::pair<std::size_t, std::size_t>> per;  // correct, total
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    auto& [c, t] = per[truth[i]];
    ++t;
    if (predicted[i] == truth[i]) {
      ++c;
      ++correct;
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  r.majority_rate = majority_rate(truth);
  for (const auto& [label, ct] : per) {
    r.per_class_accuracy[label] = static_cast<double>(ct.first) / static_cast<double>(ct.second);
  }
  return r;
}

ProbeReport evaluate_probe(const LinearProbe& probe, const Matrix& x, const std::vector<int>& labels,
                           std::string split) {
  return evaluate_predictions(probe.predict(x), labels, std::move(split));
}

std::vector<std::pair<std::size_t, double>> guarding_curve(const LabeledMatrix& train, const LabeledMatrix& eval,
                                                           const ProjectionPipeline& pipeline,
                                                           const TrainerParams& params) {
  std::vector<std::pair<std::size_t, double>> curve;
  Matrix tr = train.x, ev = eval.x;
  for (std::size_t i = 0; i <= pipeline.size(); ++i) {
    if (i > 0) {
      const UnitVector& w = pipeline.steps()[i - 1].w;
      tr = project_along(tr, w);
      ev = project_along(ev, w);
    }
    LinearProbe probe = train_linear(tr, train.y, params);
    curve.emplace_back(i, evaluate_probe(probe, ev, eval.y, "dev").accuracy);
  }
  return curve;
}

namespace {

int num_classes_of(const std::vector<int>& a, const std::vector<int>& b) {
  int k = 0;
  for (int l : a) k = std::max(k, l + 1);
  for (int l : b) k = std::max(k, l + 1);
  return k;
}

struct Adam {
  Matrix m, v;
  explicit Adam(Eigen::Index rows, Eigen::Index cols) : m(Matrix::Zero(rows, cols)), v(Matrix::Zero(rows, cols)) {}

  void step(Matrix& param, const Matrix& grad, double lr, std::size_t t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

}  // namespace

MlpReport train_mlp_probe(const LabeledMatrix& train, const LabeledMatrix& test, const MlpParams& params) {
  if (train.x.rows() == 0) throw DataError("train_mlp_probe: empty training split");
  if (train.x.cols() != test.x.cols()) throw UsageError("train_mlp_probe: split dimensions differ");
  if (params.hidden_width == 0 || params.batch_size == 0) throw UsageError("train_mlp_probe: bad hyperparameters");
  if (!(params.validation_fraction >= 0.0 && params.validation_fraction <= 0.5)) {
    throw UsageError("train_mlp_probe: validation_fraction must be in [0, 0.5]");
  }
  const Eigen::Index n = train.x.rows(), d = train.x.cols();
  const Eigen::Index h = static_cast<Eigen::Index>(params.hidden_width);
  const int k = std::max(2, num_classes_of(train.y, test.y));

  // Standardize with training statistics.
  Vector mean = train.x.colwise().mean().transpose();
  Vector scale = ((train.x.rowwise() - mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (scale[j] < 1e-12) scale[j] = 1.0;
  }
  auto standardize = [&](const Matrix& x) {
    Matrix z = x.rowwise() - mean.transpose();
    return Matrix(z.array().rowwise() / scale.transpose().array());
  };
  Matrix xs = standardize(train.x), xt = standardize(test.x);

  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w1(d, h), w2(h, k);
  for (Eigen::Index i = 0; i < w1.size(); ++i) w1.data()[i] = normal(rng) * std::sqrt(2.0 / static_cast<double>(d));
  for (Eigen::Index i = 0; i < w2.size(); ++i) w2.data()[i] = normal(rng) * std::sqrt(1.0 / static_cast<double>(h));
  Matrix b1 = Matrix::Zero(1, h), b2 = Matrix::Zero(1, k);
  Adam a_w1(d, h), a_b1(1, h), a_w2(h, k), a_b2(1, k);

  auto forward = [&](const Matrix& x, Matrix& hidden) {
    hidden = (x * w1).rowwise() + b1.row(0);
    hidden = hidden.cwiseMax(0.0);
    Matrix logits = (hidden * w2).rowwise() + b2.row(0);
    return logits;
  };
  auto predict = [&](const Matrix& x) {
    Matrix hidden;
    Matrix logits = forward(x, hidden);
    std::vector<int> out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      Eigen::Index best = 0;
      logits.row(i).maxCoeff(&best);
      out[i] = static_cast<int>(best);
    }
    return out;
  };

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Eigen::Index> held;
  {
    std::mt19937_64 split_rng(params.seed ^ 0x5bd1e995ULL);
    std::shuffle(order.begin(), order.end(), split_rng);
    auto hold = static_cast<Eigen::Index>(params.validation_fraction * static_cast<double>(n));
    if (hold > 0 && n - hold >= 2) {
      held.assign(order.end() - hold, order.end());
      order.resize(static_cast<std::size_t>(n - hold));
    }
  }
  const Eigen::Index fit_n = static_cast<Eigen::Index>(order.size());
  Matrix xv(static_cast<Eigen::Index>(held.size()), d);
  std::vector<int> yv;
  for (std::size_t i = 0; i < held.size(); ++i) {
    xv.row(static_cast<Eigen::Index>(i)) = xs.row(held[i]);
    yv.push_back(train.y[static_cast<std::size_t>(held[i])]);
  }
  double best_val = held.empty() ? 0.0 : evaluate_predictions(predict(xv), yv, "dev").accuracy;
  Matrix best_w1 = w1, best_b1 = b1, best_w2 = w2, best_b2 = b2;

  std::size_t t = 0;
  const Eigen::Index bs = static_cast<Eigen::Index>(params.batch_size);
  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    double lr = params.learning_rate / (1.0 + params.lr_decay * static_cast<double>(epoch));
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < fit_n; start += bs) {
      Eigen::Index m = std::min(bs, fit_n - start);
      Matrix xb(m, d);
      Matrix yb = Matrix::Zero(m, k);
      for (Eigen::Index i = 0; i < m; ++i) {
        xb.row(i) = xs.row(order[start + i]);
        yb(i, train.y[order[start + i]]) = 1.0;
      }
      Matrix hidden;
      Matrix logits = forward(xb, hidden);
      // softmax
      Matrix probs(m, k);
      for (Eigen::Index i = 0; i < m; ++i) {
        double mx = logits.row(i).maxCoeff();
        Eigen::RowVectorXd e = (logits.row(i).array() - mx).exp().matrix();
        probs.row(i) = e / e.sum();
      }
      Matrix dlogits = (probs - yb) / static_cast<double>(m);
      Matrix gw2 = hidden.transpose() * dlogits;
      Matrix gb2 = dlogits.colwise().sum();
      Matrix dhidden = dlogits * w2.transpose();
      dhidden = dhidden.cwiseProduct((hidden.array() > 0.0).cast<double>().matrix());
      Matrix gw1 = xb.transpose() * dhidden;
      Matrix gb1 = dhidden.colwise().sum();
      ++t;
      if (params.weight_decay > 0.0) {
        w1 *= 1.0 - lr * params.weight_decay;
        w2 *= 1.0 - lr * params.weight_decay;
      }
      a_w1.step(w1, gw1, lr, t);
      a_b1.step(b1, gb1, lr, t);
      a_w2.step(w2, gw2, lr, t);
      a_b2.step(b2, gb2, lr, t);
    }
    if (!held.empty()) {
      double acc = evaluate_predictions(predict(xv), yv, "dev").accuracy;
      if (acc > best_val) {
        best_val = acc;
        best_w1 = w1;
        best_b1 = b1;
        best_w2 = w2;
        best_b2 = b2;
      }
    }
  }
  if (!held.empty()) {
    w1 = best_w1;
    b1 = best_b1;
    w2 = best_w2;
    b2 = best_b2;
  }

  MlpReport report;
  report.train_accuracy = evaluate_predictions(predict(xs), train.y, "train").accuracy;
  if (test.x.rows() > 0) {
    report.test_accuracy = evaluate_predictions(predict(xt), test.y, "test").accuracy;
    report.majority_rate = majority_rate(test.y);
  }
  return report;
}

namespace {

double entropy(const std::vector<double>& counts, double total) {
  double h = 0.0;
  for (double c : counts) {
    if (c > 0.0) h -= (c / total) * std::log(c / total);
  }
  return h;
}

}  // namespace

VMeasure v_measure(const std::vector<int>& labels, const std::vector<int>& clusters) {
  if (labels.size() != clusters.size()) throw UsageError("v_measure: size mismatch");
  if (labels.empty()) return {1.0, 1.0, 1.0};
  std::map<int, int> lid, cid;
  for (int l : labels) lid.emplace(l, static_cast<int>(lid.size()));
  for (int c : clusters) cid.emplace(c, static_cast<int>(cid.size()));
  const std::size_t nl = lid.size(), nc = cid.size();
  std::vector<double> table(nl * nc, 0.0), lsum(nl, 0.0), csum(nc, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int a = lid[labels[i]], b = cid[clusters[i]];
    table[a * nc + b] += 1.0;
    lsum[a] += 1.0;
    csum[b] += 1.0;
  }
  const double n = static_cast<double>(labels.size());
  double h_c = entropy(lsum, n), h_k = entropy(csum, n);
  double h_c_given_k = 0.0, h_k_given_c = 0.0;
  for (std::size_t a = 0; a < nl; ++a) {
    for (std::size_t b = 0; b < nc; ++b) {
      double x = table[a * nc + b];
      if (x <= 0.0) continue;
      h_c_given_k -= (x / n) * std::log(x / csum[b]);
      h_k_given_c -= (x / n) * std::log(x / lsum[a]);
    }
  }
  VMeasure out;
  out.homogeneity = h_c == 0.0 ? 1.0 : 1.0 - h_c_given_k / h_c;
  out.completeness = h_k == 0.0 ? 1.0 : 1.0 - h_k_given_c / h_k;
  double s = out.homogeneity + out.completeness;
  out.v = s == 0.0 ? 0.0 : 2.0 * out.homogeneity * out.completeness / s;
  return out;
}

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts,
                    std::size_t max_iters) {
  const Eigen::Index n = points.rows(), d = points.cols();
  if (k == 0 || static_cast<Eigen::Index>(k) > n) throw UsageError("kmeans: k must be in [1, n]");
  if (restarts == 0) restarts = 1;
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (std::size_t r = 0; r < restarts; ++r) {
    // k-means++ seeding
    Matrix centers(k, d);
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    centers.row(0) = points.row(pick(rng));
    std::vector<double> dist2(n);
    for (Eigen::Index i = 0; i < n; ++i) dist2[i] = (points.row(i) - centers.row(0)).squaredNorm();
    for (std::size_t c = 1; c < k; ++c) {
      double total = std::accumulate(dist2.begin(), dist2.end(), 0.0);
      Eigen::Index chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng), acc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          acc += dist2[i];
          if (acc >= target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = pick(rng);
      }
      centers.row(c) = points.row(chosen);
      for (Eigen::Index i = 0; i < n; ++i) dist2[i] = std::min(dist2[i], (points.row(i) - centers.row(c)).squaredNorm());
    }

    std::vector<int> assign(n, -1);
    double inertia = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
      bool changed = false;
      inertia = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        int arg = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
          double dd = (points.row(i) - centers.row(c)).squaredNorm();
          if (dd < bd) {
            bd = dd;
            arg = static_cast<int>(c);
          }
        }
        inertia += bd;
        if (assign[i] != arg) {
          assign[i] = arg;
          changed = true;
        }
      }
      if (!changed) break;
      Matrix sums = Matrix::Zero(k, d);
      std::vector<std::size_t> counts(k, 0);
      for (Eigen::Index i = 0; i < n; ++i) {
        sums.row(assign[i]) += points.row(i);
        ++counts[assign[i]];
      }
      for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) centers.row(c) = sums.row(c) / static_cast<double>(counts[c]);
      }
    }
    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.assignment = assign;
      best.centers = centers;
    }
  }
  return best;
}

ClusterReport kmeans_vmeasure(const Matrix& points, const std::vector<int>& labels, std::size_t k, std::uint64_t seed,
                              std::size_t restarts) {
  if (static_cast<std::size_t>(points.rows()) != labels.size()) throw UsageError("kmeans_vmeasure: size mismatch");
  KMeansResult km = kmeans(points, k, seed, restarts);
  return {v_measure(labels, km.assignment), km.inertia};
}

}  // namespace mproj
