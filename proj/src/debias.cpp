#include "mproj/debias.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mproj/error.hpp"

namespace mproj {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::MP: return "MP";
    case Strategy::TMP: return "TMP";
    case Strategy::INLP: return "INLP";
    case Strategy::Random: return "RANDOM";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "MP") return Strategy::MP;
  if (s == "TMP") return Strategy::TMP;
  if (s == "INLP") return Strategy::INLP;
  if (s == "RANDOM" || s == "R") return Strategy::Random;
  throw UsageError("unknown strategy: " + s);
}

void ProjectionPipeline::push_back(ProjectionStep step) { steps_.push_back(std::move(step)); }

void ProjectionPipeline::append(const ProjectionPipeline& other) {
  for (const auto& s : other.steps_) steps_.push_back(s);
  for (const auto& w : other.warnings_) warnings_.push_back(w);
}

ProjectionPipeline ProjectionPipeline::prefix(std::size_t count) const {
  ProjectionPipeline out(source_space_);
  for (std::size_t i = 0; i < count && i < steps_.size(); ++i) out.steps_.push_back(steps_[i]);
  return out;
}

Matrix ProjectionPipeline::apply(const Matrix& points) const {
  Matrix out = points;
  for (const auto& step : steps_) {
    if (step.w.dim() != out.cols()) throw UsageError("pipeline dimension does not match the data");
    Vector coef = out * step.w.coords();
    out.noalias() -= coef * step.w.coords().transpose();
  }
  return out;
}

Matrix ProjectionPipeline::composed_matrix(Eigen::Index dim) const {
  Matrix m = Matrix::Identity(dim, dim);
  for (const auto& step : steps_) {
    if (step.w.dim() != dim) throw UsageError("pipeline dimension does not match");
    const Vector& w = step.w.coords();
    // (I - w w^T) m
    Vector wm = m.transpose() * w;
    m.noalias() -= w * wm.transpose();
  }
  return m;
}

Vector class_mean(const Matrix& data, IndexSet rows) {
  if (rows.empty()) throw UsageError("class_mean: empty class");
  Vector sum = Vector::Zero(data.cols());
  for (std::size_t r : rows) sum += data.row(static_cast<Eigen::Index>(r)).transpose();
  return sum / static_cast<double>(rows.size());
}

namespace {

UnitVector difference_direction(const Vector& to, const Vector& from, const char* what) {
  Vector diff = to - from;
  double scale = std::max({1.0, to.norm(), from.norm()});
  if (diff.norm() <= 1e-10 * scale) throw DegenerateDirection(std::string(what) + " coincide; no projection direction");
  return UnitVector::normalize(diff);
}

}  // namespace

ProjectionStep mp_step(const Matrix& data, IndexSet minus, IndexSet plus) {
  if (minus.empty() || plus.empty()) throw UsageError("mp_step: both classes must be non-empty");
  Vector mu_minus = class_mean(data, minus);
  Vector mu_plus = class_mean(data, plus);
  ProjectionStep step{difference_direction(mu_plus, mu_minus, "class means"), Strategy::MP, 0, {}};
  step.metadata["mean_distance"] = (mu_plus - mu_minus).norm();
  return step;
}

ProjectionPipeline mp_multiclass(const Matrix& data, const std::vector<std::vector<std::size_t>>& classes,
                                 std::size_t anchor) {
  if (classes.size() < 2) throw UsageError("mp_multiclass: need at least two classes");
  if (anchor >= classes.size()) throw UsageError("mp_multiclass: anchor out of range");
  ProjectionPipeline pipeline;
  Matrix current = data;
  std::size_t iteration = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (c == anchor) continue;
    ++iteration;
    Vector mu_anchor = class_mean(current, classes[anchor]);
    Vector mu_other = class_mean(current, classes[c]);
    try {
      ProjectionStep step{difference_direction(mu_anchor, mu_other, "class means"), Strategy::MP, iteration, {}};
      step.metadata["mean_distance"] = (mu_anchor - mu_other).norm();
      step.metadata["anchor_class"] = static_cast<double>(anchor);
      step.metadata["other_class"] = static_cast<double>(c);
      step.metadata["means_recomputed"] = 1.0;
      current = project_along(current, step.w);
      pipeline.push_back(std::move(step));
    } catch (const DegenerateDirection&) {
      pipeline.warn("MP step for class " + std::to_string(c) + " skipped: mean equals the anchor mean");
    }
  }
  return pipeline;
}

namespace {

Matrix gather(const Matrix& data, IndexSet rows) {
  Matrix out(rows.size(), data.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = data.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

}  // namespace

ProjectionStep tmp_step(const Matrix& data, IndexSet minus, IndexSet plus, const TmpOptions& options) {
  if (minus.empty() || plus.empty()) throw UsageError("tmp_step: both classes must be non-empty");
  Matrix pm = gather(data, minus), pp = gather(data, plus);
  DepthResult tau_minus, tau_plus;
  if (options.mode == MedianMode::Exact2d) {
    if (data.cols() != 2) throw UsageError("tmp_step: exact medians need 2-d data");
    tau_minus = tukey_median_exact_2d(pm);
    tau_plus = tukey_median_exact_2d(pp);
  } else {
    tau_minus = tukey_median_approx(pm, options.approx);
    ApproxMedianOptions plus_opts = options.approx;
    plus_opts.rng_seed += 1;
    tau_plus = tukey_median_approx(pp, plus_opts);
  }
  ProjectionStep step{difference_direction(tau_plus.point, tau_minus.point, "Tukey medians"), Strategy::TMP, 0, {}};
  step.metadata["depth_minus"] = static_cast<double>(tau_minus.depth);
  step.metadata["depth_plus"] = static_cast<double>(tau_plus.depth);
  step.metadata["exact"] = options.mode == MedianMode::Exact2d ? 1.0 : 0.0;
  return step;
}

InlpResult inlp_run(const LabeledMatrix& train, const LabeledMatrix& dev, const InlpOptions& options) {
  if (train.x.rows() == 0 || dev.x.rows() == 0) throw DataError("inlp_run: empty train or dev split");
  if (train.x.cols() != dev.x.cols()) throw UsageError("inlp_run: split dimensions differ");

  InlpResult result;
  result.majority = majority_rate(dev.y);
  const double threshold = result.majority + options.stop_margin;
  Matrix cur_train = train.x, cur_dev = dev.x;

  LinearProbe probe = train_linear(cur_train, train.y, options.trainer);
  double acc = evaluate_probe(probe, cur_dev, dev.y, "dev").accuracy;
  result.dev_accuracy.push_back(acc);
  if (options.precheck && acc <= threshold) return result;

  for (std::size_t round = 1; round <= options.max_iters; ++round) {
    const Eigen::Index rows = probe.weights.rows() == 1 ? 1 : probe.weights.rows() - 1;
    std::vector<Vector> round_dirs;
    for (Eigen::Index r = 0; r < rows; ++r) {
      Vector v = probe.weights.row(r).transpose();
      double raw = v.norm();
      for (const auto& u : round_dirs) v -= v.dot(u) * u;
      if (options.orthogonalize) {
        for (const auto& s : result.pipeline.steps()) v -= v.dot(s.w.coords()) * s.w.coords();
      }
      if (!(raw > 0.0) || v.norm() <= 1e-10 * raw) {
        result.pipeline.warn("INLP round " + std::to_string(round) + ": degenerate direction skipped");
        continue;
      }
      UnitVector w = UnitVector::normalize(v);
      round_dirs.push_back(w.coords());
      cur_train = project_along(cur_train, w);
      cur_dev = project_along(cur_dev, w);
      ProjectionStep step{w, Strategy::INLP, round, {}};
      step.metadata["dev_accuracy"] = acc;
      step.metadata["round"] = static_cast<double>(round);
      result.pipeline.push_back(std::move(step));
    }
    result.rounds = round;

    probe = train_linear(cur_train, train.y, options.trainer);
    acc = evaluate_probe(probe, cur_dev, dev.y, "dev").accuracy;
    result.dev_accuracy.push_back(acc);
    if (acc <= threshold) break;
  }
  return result;
}

Matrix covariance(const Matrix& data) {
  if (data.rows() < 2) throw DataError("covariance needs at least two points");
  Matrix centered = data.rowwise() - data.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(data.rows() - 1);
}

Vector random_direction(const Matrix& cov, std::mt19937_64& rng) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DataError("covariance eigendecomposition failed");
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = cov.rows();
  Vector w = Vector::Zero(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    double lambda = std::max(0.0, eig.eigenvalues()[i]);
    double g = normal(rng);
    w += std::sqrt(lambda) * g * eig.eigenvectors().col(i);
  }
  return w;
}

ProjectionStep random_step(const Matrix& data, std::uint64_t rng_seed) {
  std::mt19937_64 rng(rng_seed);
  Vector w = random_direction(covariance(data), rng);
  return ProjectionStep{UnitVector::normalize(w), Strategy::Random, 0, {}};
}

EmbeddingSpace apply_pipeline(const EmbeddingSpace& space, const ProjectionPipeline& pipeline) {
  std::string name = space.name();
  if (!pipeline.empty()) name += "+" + std::to_string(pipeline.size()) + "proj";
  return space.with_matrix(pipeline.apply(space.matrix()), name);
}

std::string pipeline_to_json(const ProjectionPipeline& pipeline, Eigen::Index dim) {
  nlohmann::json j;
  j["source_space"] = pipeline.source_space();
  j["dim"] = dim;
  j["steps"] = nlohmann::json::array();
  for (const auto& s : pipeline.steps()) {
    std::vector<double> w(s.w.coords().data(), s.w.coords().data() + s.w.dim());
    j["steps"].push_back({{"strategy", to_string(s.strategy)},
                          {"iteration", s.iteration},
                          {"w", w},
                          {"metadata", s.metadata}});
  }
  j["warnings"] = pipeline.warnings();
  return j.dump(2);
}

ProjectionPipeline pipeline_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("pipeline JSON: ") + e.what());
  }
  ProjectionPipeline p(j.value("source_space", std::string{}));
  const auto dim = j.value("dim", static_cast<Eigen::Index>(-1));
  for (const auto& s : j.at("steps")) {
    auto w = s.at("w").get<std::vector<double>>();
    if (dim >= 0 && static_cast<Eigen::Index>(w.size()) != dim) throw DataError("pipeline step has wrong dimension");
    Vector v = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    // Stored decimals round-trip exactly; renormalize only hand-edited files.
    UnitVector u = std::abs(v.norm() - 1.0) <= 1e-12 ? UnitVector::from_unit(v) : UnitVector::normalize(v);
    ProjectionStep step{u, parse_strategy(s.at("strategy").get<std::string>()),
                        s.value("iteration", std::size_t{0}), {}};
    if (s.contains("metadata")) step.metadata = s.at("metadata").get<std::map<std::string, double>>();
    p.push_back(std::move(step));
  }
  if (j.contains("warnings")) {
    for (const auto& w : j.at("warnings")) p.warn(w.get<std::string>());
  }
  return p;
}

void save_pipeline(const ProjectionPipeline& pipeline, Eigen::Index dim, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << pipeline_to_json(pipeline, dim) << '\n';
}

ProjectionPipeline load_pipeline(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open pipeline: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return pipeline_from_json(ss.str());
}

}  // namespace mproj
