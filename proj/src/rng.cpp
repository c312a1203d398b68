#include "fedfac/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fedfac {
namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

std::uint64_t fnv1a_bytes(std::uint64_t h, const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
  return h;
}

std::uint64_t fnv1a_u64(std::uint64_t h, std::uint64_t v) {
  return fnv1a_bytes(h, &v, sizeof(v));
}

// Finalizer from splitmix64; spreads the lineage hash over all 64 bits.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t lineage_seed(std::uint64_t master_seed,
                           const std::vector<RngLabel>& labels) {
  std::uint64_t h = fnv1a_u64(kFnvOffset, master_seed);
  for (const auto& [tag, index] : labels) {
    h = fnv1a_bytes(h, tag.data(), tag.size());
    h = fnv1a_u64(h, 0xFFULL);  // separator so ("ab",1) != ("a",...) collisions
    h = fnv1a_u64(h, static_cast<std::uint64_t>(index));
  }
  return mix(h);
}

}  // namespace

RngStream::RngStream(std::uint64_t master_seed, const std::vector<RngLabel>& labels)
    : master_seed_(master_seed), lineage_(labels), gen_(lineage_seed(master_seed, labels)) {}

RngStream RngStream::child(const std::string& tag, std::int64_t index) const {
  std::vector<RngLabel> labels = lineage_;
  labels.emplace_back(tag, index);
  return RngStream(master_seed_, labels);
}

std::uint64_t RngStream::next_u64() { return gen_(); }

double RngStream::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double a, double b) { return a + (b - a) * uniform01(); }

double RngStream::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u1 = uniform01();
  while (u1 <= 0.0) u1 = uniform01();
  const double u2 = uniform01();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

double RngStream::sign() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

std::size_t RngStream::uniform_index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t draw = next_u64();
  while (draw >= limit) draw = next_u64();
  return static_cast<std::size_t>(draw % n);
}

double RngStream::gamma(double shape) {
  if (shape <= 0.0) throw std::invalid_argument("gamma: shape must be positive");
  if (shape < 1.0) {
    // Boost the shape above 1 and correct with u^(1/shape).
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze method.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

std::vector<double> RngStream::dirichlet(double concentration, std::size_t k) {
  if (concentration <= 0.0) {
    throw std::invalid_argument("dirichlet: concentration must be positive");
  }
  std::vector<double> draws(k);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    draws[i] = gamma(concentration);
    total += draws[i];
  }
  if (total <= 0.0) {
    // All gammas underflowed (tiny concentration); fall back to one-hot.
    draws.assign(k, 0.0);
    draws[uniform_index(k)] = 1.0;
    return draws;
  }
  for (double& v : draws) v /= total;
  return draws;
}

std::vector<std::size_t> RngStream::permutation(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = uniform_index(i);
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

void RngStream::fill_normal(DenseMatrix& m, double scale) {
  for (double& v : m.values()) v = scale * normal();
}

std::vector<double> RngStream::normal_vector(std::size_t n, double scale) {
  std::vector<double> out(n);
  for (double& v : out) v = scale * normal();
  return out;
}

RngStream derive_rng_stream(std::uint64_t master_seed,
                            const std::vector<RngLabel>& labels) {
  return RngStream(master_seed, labels);
}

}  // namespace fedfac
