#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fedfac/matrix.hpp"

namespace fedfac {

/// One (tag, index) step in an RNG derivation path, e.g. ("round", 3).
using RngLabel = std::pair<std::string, std::int64_t>;

/// Deterministic random stream addressed by (master_seed, labels...).
/// Two streams with identical lineage produce identical sequences; the
/// distribution transforms are implemented here rather than taken from
/// <random> so that sequences do not depend on the standard library build.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, const std::vector<RngLabel>& labels);

  /// Child stream with one more label appended to the lineage.
  RngStream child(const std::string& tag, std::int64_t index) const;

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double a, double b);
  /// Standard normal via Box-Muller (second value of each pair is cached).
  double normal();
  /// -1.0 or +1.0 with equal probability.
  double sign();
  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  std::vector<double> dirichlet(double concentration, std::size_t k);
  std::vector<std::size_t> permutation(std::size_t n);

  void fill_normal(DenseMatrix& m, double scale = 1.0);
  std::vector<double> normal_vector(std::size_t n, double scale = 1.0);

  std::uint64_t master_seed() const { return master_seed_; }
  const std::vector<RngLabel>& lineage() const { return lineage_; }

 private:
  double gamma(double shape);

  std::uint64_t master_seed_ = 0;
  std::vector<RngLabel> lineage_;
  std::mt19937_64 gen_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

/// Stream addressed by the given lineage; a pure function of its inputs.
RngStream derive_rng_stream(std::uint64_t master_seed,
                            const std::vector<RngLabel>& labels);

}  // namespace fedfac
