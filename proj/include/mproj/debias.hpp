#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mproj/embeddings.hpp"
#include "mproj/geometry.hpp"
#include "mproj/probes.hpp"

namespace mproj {

enum class Strategy { MP, TMP, INLP, Random };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct ProjectionStep {
  UnitVector w;
  Strategy strategy = Strategy::MP;
  std::size_t iteration = 0;
  std::map<std::string, double> metadata;
};

// Ordered projections; applying the pipeline to a row x is
// x (I - w1 w1^T) (I - w2 w2^T) ... in step order.
class ProjectionPipeline {
 public:
  ProjectionPipeline() = default;
  explicit ProjectionPipeline(std::string source_space) : source_space_(std::move(source_space)) {}

  void push_back(ProjectionStep step);
  void append(const ProjectionPipeline& other);
  void warn(std::string message) { warnings_.push_back(std::move(message)); }

  const std::vector<ProjectionStep>& steps() const { return steps_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t size() const { return steps_.size(); }
  bool empty() const { return steps_.empty(); }
  const std::string& source_space() const { return source_space_; }
  void set_source_space(std::string s) { source_space_ = std::move(s); }

  // First `count` steps.
  ProjectionPipeline prefix(std::size_t count) const;

  // Sequential application, one projection at a time.
  Matrix apply(const Matrix& points) const;
  // d x d product acting on column vectors: (I - wk wk^T) ... (I - w1 w1^T).
  Matrix composed_matrix(Eigen::Index dim) const;

 private:
  std::string source_space_;
  std::vector<ProjectionStep> steps_;
  std::vector<std::string> warnings_;
};

using IndexSet = std::span<const std::size_t>;

Vector class_mean(const Matrix& data, IndexSet rows);

// w = normalize(mean(plus) - mean(minus)). Throws DegenerateDirection when the
// means coincide.
ProjectionStep mp_step(const Matrix& data, IndexSet minus, IndexSet plus);

// k-1 steps, one per non-anchor class, means recomputed on the projected data
// before each step. Degenerate steps are skipped with a pipeline warning.
ProjectionPipeline mp_multiclass(const Matrix& data, const std::vector<std::vector<std::size_t>>& classes,
                                 std::size_t anchor);

enum class MedianMode { Exact2d, Approx };

struct TmpOptions {
  MedianMode mode = MedianMode::Approx;
  ApproxMedianOptions approx;
};

// w = normalize(tau_plus - tau_minus) for Tukey medians of the two classes;
// metadata records both depths.
ProjectionStep tmp_step(const Matrix& data, IndexSet minus, IndexSet plus, const TmpOptions& options = {});

struct InlpOptions {
  TrainerParams trainer;
  std::size_t max_iters = 35;
  double stop_margin = 0.02;
  bool orthogonalize = false;  // Gram-Schmidt each new w against all earlier steps
  bool precheck = false;       // stop before the first projection if already guarded
};

struct InlpResult {
  ProjectionPipeline pipeline;
  // Dev accuracy before any projection and after every round.
  std::vector<double> dev_accuracy;
  double majority = 0.0;
  std::size_t rounds = 0;
};

// Each round trains a linear classifier on the current train split and
// projects along its weight vector(s); k-class problems contribute k-1
// orthogonalized one-vs-rest directions per round. Stops once a freshly
// trained probe on the projected data scores at most majority + stop_margin
// on dev, or after max_iters rounds.
InlpResult inlp_run(const LabeledMatrix& train, const LabeledMatrix& dev, const InlpOptions& options);

// Direction drawn from N(0, cov): normalize(sum_i sqrt(lambda_i) g_i u_i).
Vector random_direction(const Matrix& covariance, std::mt19937_64& rng);
Matrix covariance(const Matrix& data);

ProjectionStep random_step(const Matrix& data, std::uint64_t rng_seed);

EmbeddingSpace apply_pipeline(const EmbeddingSpace& space, const ProjectionPipeline& pipeline);

std::string pipeline_to_json(const ProjectionPipeline& pipeline, Eigen::Index dim);
ProjectionPipeline pipeline_from_json(const std::string& text);
void save_pipeline(const ProjectionPipeline& pipeline, Eigen::Index dim, const std::filesystem::path& path);
ProjectionPipeline load_pipeline(const std::filesystem::path& path);

}  // namespace mproj
