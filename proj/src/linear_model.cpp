#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mproj/error.hpp"
#include "mproj/probes.hpp"

namespace mproj {

std::string to_string(Trainer trainer) { return trainer == Trainer::Hinge ? "hinge" : "logistic"; }

Trainer parse_trainer(const std::string& s) {
  if (s == "hinge" || s == "svm") return Trainer::Hinge;
  if (s == "logistic") return Trainer::Logistic;
  throw UsageError("unknown trainer: " + s);
}

Vector LinearProbe::scores(const Vector& x) const { return weights * x + biases; }

int LinearProbe::predict(const Vector& x) const {
  Vector s = scores(x);
  if (weights.rows() == 1) return s[0] >= 0.0 ? 1 : 0;
  Eigen::Index best = 0;
  s.maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<int> LinearProbe::predict(const Matrix& x) const {
  Matrix s = x * weights.transpose();
  s.rowwise() += biases.transpose();
  std::vector<int> out(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (weights.rows() == 1) {
      out[i] = s(i, 0) >= 0.0 ? 1 : 0;
    } else {
      Eigen::Index best = 0;
      s.row(i).maxCoeff(&best);
      out[i] = static_cast<int>(best);
    }
  }
  return out;
}

namespace {

// Averaged stochastic (sub)gradient descent on centered features with an
// appended constant feature. Returns d+1 weights, the last being the bias.
Vector train_binary(const Matrix& xc, const std::vector<double>& y, const TrainerParams& params, std::uint64_t seed) {
  const Eigen::Index n = xc.rows(), d = xc.cols();
  const double lambda = params.l2;
  Vector w = Vector::Zero(d + 1);
  Vector avg = Vector::Zero(d + 1);
  std::size_t averaged = 0;
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  const double eta0 = 1.0;
  std::size_t t = 0;

  for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index i : order) {
      ++t;
      double margin = y[i] * (xc.row(i).dot(w.head(d)) + w[d]);
      if (params.trainer == Trainer::Hinge) {
        // Pegasos step size 1/(lambda t).
        double eta = 1.0 / (lambda * static_cast<double>(t));
        w *= 1.0 - 1.0 / static_cast<double>(t);
        if (margin < 1.0) {
          w.head(d) += eta * y[i] * xc.row(i).transpose();
          w[d] += eta * y[i];
        }
      } else {
        double eta = eta0 / (1.0 + lambda * eta0 * static_cast<double>(t));
        double g = y[i] / (1.0 + std::exp(margin));
        w *= 1.0 - eta * lambda;
        w.head(d) += eta * g * xc.row(i).transpose();
        w[d] += eta * g;
      }
      if (epoch > 0 || params.epochs == 1) {
        avg += w;
        ++averaged;
      }
    }
  }
  if (averaged > 0) avg /= static_cast<double>(averaged);
  return avg;
}

}  // namespace

LinearProbe train_linear(const Matrix& x, const std::vector<int>& labels, const TrainerParams& params) {
  if (static_cast<std::size_t>(x.rows()) != labels.size()) throw UsageError("train_linear: label count mismatch");
  if (params.l2 <= 0.0) throw UsageError("train_linear: l2 must be positive");
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DataError("train_linear: need at least two classes in the training data");
  if (*present.begin() < 0) throw UsageError("train_linear: labels must be non-negative");
  const int k = *present.rbegin() + 1;

  Vector mean = x.colwise().mean().transpose();
  Matrix xc = x.rowwise() - mean.transpose();
  const Eigen::Index d = x.cols();

  LinearProbe probe;
  probe.num_classes = k;
  probe.params = params;
  const int rows = k == 2 ? 1 : k;
  probe.weights = Matrix::Zero(rows, d);
  probe.biases = Vector::Zero(rows);
  for (int r = 0; r < rows; ++r) {
    const int positive = k == 2 ? 1 : r;
    std::vector<double> y(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == positive ? 1.0 : -1.0;
    Vector w = train_binary(xc, y, params, params.seed * 1000003ULL + static_cast<std::uint64_t>(r));
    probe.weights.row(r) = w.head(d).transpose();
    probe.biases[r] = w[d] - w.head(d).dot(mean);
  }
  return probe;
}

}  // namespace mproj
