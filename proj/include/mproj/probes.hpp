#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mproj/types.hpp"

namespace mproj {

class ProjectionPipeline;

enum class Trainer { Hinge, Logistic };

std::string to_string(Trainer trainer);
Trainer parse_trainer(const std::string& s);

struct TrainerParams {
  Trainer trainer = Trainer::Hinge;
  double l2 = 1e-3;  // regularization strength (lambda)
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
};

// Linear classifier. Binary problems carry one weight row (score >= 0 means
// class 1); k > 2 classes carry one one-vs-rest row per class.
struct LinearProbe {
  Matrix weights;
  Vector biases;
  int num_classes = 0;
  TrainerParams params;

  Vector scores(const Vector& x) const;
  int predict(const Vector& x) const;
  std::vector<int> predict(const Matrix& x) const;
};

// Labels are 0-based class ids. Throws DataError when fewer than two classes
// are present.
LinearProbe train_linear(const Matrix& x, const std::vector<int>& labels, const TrainerParams& params);

struct ProbeReport {
  double accuracy = 0.0;
  double majority_rate = 0.0;
  std::map<int, double> per_class_accuracy;
  std::string split;

  bool guarded(double margin) const { return accuracy <= majority_rate + margin; }
};

double majority_rate(const std::vector<int>& labels);

ProbeReport evaluate_predictions(const std::vector<int>& predicted, const std::vector<int>& truth, std::string split);
ProbeReport evaluate_probe(const LinearProbe& probe, const Matrix& x, const std::vector<int>& labels, std::string split);

struct LabeledMatrix {
  Matrix x;
  std::vector<int> y;
};

// Accuracy of a freshly trained probe after each prefix 0..len(pipeline)
// of the pipeline: train on `train`, evaluate on `eval`.
std::vector<std::pair<std::size_t, double>> guarding_curve(const LabeledMatrix& train, const LabeledMatrix& eval,
                                                           const ProjectionPipeline& pipeline,
                                                           const TrainerParams& params);

struct MlpParams {
  std::size_t hidden_width = 128;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  double learning_rate = 0.01;
  double lr_decay = 0.05;  // lr / (1 + decay * epoch)
  double weight_decay = 0.0;  // decoupled, applied to weights only
  // Share of the training split held out for early stopping; the weights of
  // the best epoch on it are kept. 0 trains on everything for all epochs.
  double validation_fraction = 0.15;
  std::uint64_t seed = 0;
};

struct MlpReport {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  double majority_rate = 0.0;  // of the test split
};

// One hidden ReLU layer, softmax output, mini-batch Adam on cross-entropy.
// Throws UsageError for a validation fraction outside [0, 0.5].
MlpReport train_mlp_probe(const LabeledMatrix& train, const LabeledMatrix& test, const MlpParams& params);

struct VMeasure {
  double v = 0.0;
  double homogeneity = 0.0;
  double completeness = 0.0;
};

// Entropy-based V-measure of a clustering against gold labels.
VMeasure v_measure(const std::vector<int>& labels, const std::vector<int>& clusters);

struct KMeansResult {
  std::vector<int> assignment;
  Matrix centers;
  double inertia = 0.0;
};

// Lloyd iterations from k-means++ seeds; best inertia over restarts.
KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t restarts = 10,
                    std::size_t max_iters = 300);

struct ClusterReport {
  VMeasure score;
  double inertia = 0.0;
};

ClusterReport kmeans_vmeasure(const Matrix& points, const std::vector<int>& labels, std::size_t k, std::uint64_t seed,
                              std::size_t restarts = 10);

}  // namespace mproj
