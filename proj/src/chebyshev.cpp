#include "kanreg/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kanreg {

bool DegreeSet::contains(int d) const {
  return std::binary_search(degrees.begin(), degrees.end(), d);
}

void BasisConfig::validate() const {
  switch (mode) {
    case Mode::Fixed:
      if (max_degree < 0) throw std::invalid_argument("basis: max degree D must be >= 0");
      break;
    case Mode::Randomized:
    case Mode::Adaptive:
      if (sample_count < 1 || sample_count > sample_max)
        throw std::invalid_argument("basis: need 1 <= k <= K");
      break;
  }
}

DegreeSet full_degree_set(int max_degree) {
  if (max_degree < 0) throw std::invalid_argument("full_degree_set: D must be >= 0");
  DegreeSet out;
  out.degrees.resize(max_degree + 1);
  std::iota(out.degrees.begin(), out.degrees.end(), 0);
  return out;
}

DegreeSet sample_degree_set(int k, int K, std::mt19937_64& rng) {
  if (k < 1 || k > K) throw std::invalid_argument("sample_degree_set: need 1 <= k <= K");
  std::vector<int> pool(K);
  std::iota(pool.begin(), pool.end(), 1);
  // Partial Fisher-Yates: the first k entries are the sample.
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, K - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  DegreeSet out;
  out.degrees.assign(pool.begin(), pool.begin() + k);
  out.degrees.push_back(0);
  std::sort(out.degrees.begin(), out.degrees.end());
  return out;
}

std::vector<double> eval_basis(double x, const DegreeSet& degrees) {
  if (degrees.empty()) throw std::invalid_argument("eval_basis: empty degree set");
  const double xc = std::clamp(x, -1.0 + kUnitClamp, 1.0 - kUnitClamp);
  const double theta = std::acos(xc);
  std::vector<double> out(degrees.degrees.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::cos(degrees.degrees[i] * theta);
  return out;
}

}  // namespace kanreg
