#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace raouu {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Bad input: wrong sizes, non-finite values, empty meshes, malformed config.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure ran out of budget or lost definiteness.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double residual = NAN,
                   std::vector<double> history = {})
      : std::runtime_error(what), residual_(residual), history_(std::move(history)) {}

  double residual() const { return residual_; }
  const std::vector<double>& history() const { return history_; }

 private:
  double residual_;
  std::vector<double> history_;
};

/// An internal consistency check failed (e.g. a variance came out negative).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Deterministic engine for draw `index` of stream `seed`. Parallel batches
/// partition work by index, so results never depend on the thread count.
inline std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    0x5eedu};
  return std::mt19937_64(seq);
}

inline Vector standard_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

}  // namespace raouu
