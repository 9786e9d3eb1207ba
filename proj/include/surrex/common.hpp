#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace surrex {

inline constexpr const char* kVersion = "0.1.0";

// Error categories map onto CLI exit codes: validation 2, numeric 3, I/O 4.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --------------------------- RNG --------------------------------------------

std::uint64_t mix64(std::uint64_t x);

// Independent stream seed from (base seed, domain tag, index). Streams for
// different tags/indices are decorrelated, so adding a scenario or fold never
// perturbs the draws of another.
std::uint64_t derive_seed(std::uint64_t base, const std::string& tag,
                          std::uint64_t index);

// xoshiro256++ with self-contained uniform/normal transforms. Draw sequences
// depend only on the seed, not on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform();  // [0,1)
  double uniform(double lo, double hi);
  double normal();  // standard normal (Box-Muller, cached spare)
  double normal(double mean, double sd);
  double exponential(double rate);
  // integer in [0, n)
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t s_[4];
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// --------------------------- small numeric helpers --------------------------

double mean_of(std::span<const double> xs);
double sd_of(std::span<const double> xs);  // sample sd (n-1)
double skewness_of(std::span<const double> xs);
// Type-7 (linear interpolation) quantile on an already sorted vector.
double quantile_sorted(std::span<const double> sorted, double p);
double median_of(std::vector<double> xs);  // copies and sorts

// Deterministic float formatting used by every writer ("%.10g").
std::string format_double(double v);

}  // namespace surrex
