#pragma once

#include <random>
#include <vector>

#include "kanreg/types.hpp"

namespace kanreg {

// Sparse set of Chebyshev polynomial degrees active in a layer. Stored sorted
// ascending so coefficient layout is deterministic across runs.
struct DegreeSet {
  std::vector<int> degrees;

  int size() const { return static_cast<int>(degrees.size()); }
  bool empty() const { return degrees.empty(); }
  int max_degree() const { return degrees.empty() ? -1 : degrees.back(); }
  bool contains(int d) const;
};

struct BasisConfig {
  enum class Mode { Fixed, Randomized, Adaptive };

  Mode mode = Mode::Fixed;
  int max_degree = 28;   // D, fixed mode
  int sample_count = 12; // k, randomized / adaptive
  int sample_max = 84;   // K, randomized / adaptive

  void validate() const;  // throws std::invalid_argument
};

// {0, 1, ..., D}
DegreeSet full_degree_set(int max_degree);

// {0} union a simple random sample without replacement of size k from {1..K}.
DegreeSet sample_degree_set(int k, int K, std::mt19937_64& rng);

// T_d(x) = cos(d * arccos(x)) for every d in the set, input clamped to the
// open unit interval first.
std::vector<double> eval_basis(double x, const DegreeSet& degrees);

}  // namespace kanreg
