#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mproj {

// Outcome of one randomized bound check.
struct SuiteResult {
  std::string name;
  std::size_t instances = 0;
  std::size_t passed = 0;
  double seconds = 0.0;
  std::map<std::string, double> detail;

  bool ok() const { return instances > 0 && passed == instances; }
};

struct TukeySuiteParams {
  std::size_t instances = 500;
  std::size_t max_per_class = 30;
  std::uint64_t rng_seed = 1;
};

// Random planar instances: after projecting along the difference of the exact
// class medians, the best linear classifier still errs on at least the
// smaller of the two median depths.
SuiteResult check_tukey_bound(const TukeySuiteParams& params);

// Exact planar median depth >= ceil(n/3).
SuiteResult check_median_depth(const TukeySuiteParams& params);

struct AdversarialSuiteParams {
  std::vector<std::size_t> dims{2, 3};   // simplex dimension; ambient is one more
  std::vector<std::size_t> sizes{6, 9, 12};  // m = n
  std::size_t directions = 2000;
  std::uint64_t rng_seed = 1;
};

// Every sampled projection leaves a classifier with at most ceil(m/d) errors,
// where d is the simplex dimension. detail["tight"] counts cases also within
// ceil(m/(d+1)).
SuiteResult check_adversarial_upper(const AdversarialSuiteParams& params);

struct ApproxSuiteParams {
  std::size_t instances = 200;
  std::size_t max_points = 40;
  std::size_t directions = 256;
  std::uint64_t rng_seed = 1;
};

// Sampled depth never undercuts the exact depth.
SuiteResult check_approx_depth(const ApproxSuiteParams& params);
// Share of instances where the approximate median's exact depth is within
// one of the exact median depth; passes per instance, target rate 0.9.
SuiteResult check_approx_median(const ApproxSuiteParams& params);

}  // namespace mproj
