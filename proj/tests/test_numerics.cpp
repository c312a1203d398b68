#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedfac/eig.hpp"
#include "fedfac/matrix.hpp"
#include "fedfac/rng.hpp"
#include "fedfac/stats.hpp"

using namespace fedfac;

namespace {

// Independent spectrum oracle: shifted power iteration with deflation.
// Shares no code with the Jacobi path under test.
std::vector<double> power_iteration_spectrum(const DenseMatrix& m, RngStream& rng) {
  const std::size_t n = m.rows();
  const double shift = m.max_abs() * static_cast<double>(n) + 1.0;
  DenseMatrix work = m;
  for (std::size_t i = 0; i < n; ++i) work(i, i) += shift;

  std::vector<double> spectrum;
  for (std::size_t round = 0; round < n; ++round) {
    std::vector<double> v = rng.normal_vector(n);
    double lambda = 0.0;
    for (int iter = 0; iter < 40000; ++iter) {
      std::vector<double> w = work.multiply_vector(v);
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm == 0.0) break;
      for (double& x : w) x /= norm;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += w[i] * v[i];
      v = w;
      const double next = norm * (dot >= 0 ? 1.0 : -1.0);
      if (iter > 50 && std::abs(next - lambda) < 1e-13 * std::max(1.0, std::abs(next))) {
        lambda = next;
        break;
      }
      lambda = next;
    }
    spectrum.push_back(lambda - shift);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) work(i, j) -= lambda * v[i] * v[j];
    }
  }
  std::sort(spectrum.begin(), spectrum.end(), std::greater<>());
  return spectrum;
}

DenseMatrix random_symmetric(std::size_t n, RngStream& rng) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = rng.normal();
      m(i, j) = v;
      m(j, i) = v;
    }
  }
  return m;
}

}  // namespace

TEST_CASE("sym_eig on diagonal matrix") {
  const auto m = DenseMatrix::from_rows({{2, 0}, {0, 1}});
  const auto res = sym_eig(m);
  CHECK(res.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(res.eigenvalues[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("sym_eig on rank-1 all-ones matrix") {
  const auto m = DenseMatrix::from_rows({{1, 1}, {1, 1}});
  const auto res = sym_eig(m);
  CHECK(res.eigenvalues[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(res.eigenvalues[1] == doctest::Approx(0.0).epsilon(1e-12));
  const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  const double sign = res.eigenvectors(0, 0) >= 0 ? 1.0 : -1.0;
  CHECK(sign * res.eigenvectors(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
  CHECK(sign * res.eigenvectors(1, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
}

TEST_CASE("sym_eig matches shifted power-iteration oracle on random 20x20") {
  auto rng = derive_rng_stream(11, {{"eig-oracle", 0}});
  const auto m = random_symmetric(20, rng);
  const auto res = sym_eig(m);
  auto oracle_rng = derive_rng_stream(11, {{"eig-oracle", 1}});
  const auto oracle = power_iteration_spectrum(m, oracle_rng);
  REQUIRE(oracle.size() == res.eigenvalues.size());
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    CHECK(std::abs(res.eigenvalues[i] - oracle[i]) < 1e-6);
  }
}

TEST_CASE("sym_eig reconstruction, residual, orthonormality, trace") {
  auto rng = derive_rng_stream(23, {{"eig-props", 0}});
  for (int rep = 0; rep < 5; ++rep) {
    const std::size_t n = 4 + 7 * static_cast<std::size_t>(rep);
    const auto m = random_symmetric(n, rng);
    const auto res = sym_eig(m);
    const double scale = std::max(1.0, m.max_abs());

    for (std::size_t j = 1; j < n; ++j) {
      CHECK(res.eigenvalues[j - 1] >= res.eigenvalues[j]);
    }

    // ||M v_j - lambda_j v_j|| <= 1e-8 ||M||
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = res.eigenvectors(i, j);
      const auto mv = m.multiply_vector(v);
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = mv[i] - res.eigenvalues[j] * v[i];
        err += r * r;
      }
      CHECK(std::sqrt(err) <= 1e-8 * scale);
    }

    // Columns orthonormal to 1e-8.
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          dot += res.eigenvectors(i, a) * res.eigenvectors(i, b);
        }
        CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-8);
      }
    }

    // max |sum_j lambda_j u_j u_j^T - M| <= 1e-8 ||M||_max
    DenseMatrix recon(n, n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          recon(r, c) += res.eigenvalues[j] * res.eigenvectors(r, j) * res.eigenvectors(c, j);
        }
      }
    }
    double max_err = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        max_err = std::max(max_err, std::abs(recon(r, c) - m(r, c)));
      }
    }
    CHECK(max_err <= 1e-8 * scale);

    double trace = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      trace += m(i, i);
      sum += res.eigenvalues[i];
    }
    CHECK(std::abs(trace - sum) <= 1e-8 * std::max(1.0, std::abs(trace)));
  }
}

TEST_CASE("sym_eig input contract") {
  CHECK_THROWS_AS(sym_eig(DenseMatrix(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(sym_eig(DenseMatrix::from_rows({{1, 2}, {3, 4}})), std::invalid_argument);
  DenseMatrix bad(2, 2);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(sym_eig(bad), std::invalid_argument);
}

TEST_CASE("cholesky_lower factors an AR(1) covariance") {
  const std::size_t n = 8;
  DenseMatrix cov(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      cov(i, j) = std::pow(0.5, std::abs(static_cast<double>(i) - static_cast<double>(j)));
    }
  }
  const auto lower = cholesky_lower(cov);
  const auto recon = lower.multiply(lower.transposed());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(recon(i, j) == doctest::Approx(cov(i, j)).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(cholesky_lower(DenseMatrix::from_rows({{0, 0}, {0, 0}})),
                  std::runtime_error);
}

TEST_CASE("column_standardize basic examples") {
  const auto z = DenseMatrix::from_rows({{1}, {2}, {3}});
  const auto out = column_standardize(z);
  CHECK(out.values(0, 0) == doctest::Approx(-1.0));
  CHECK(out.values(1, 0) == doctest::Approx(0.0));
  CHECK(out.values(2, 0) == doctest::Approx(1.0));
  CHECK(out.zero_variance[0] == 0);

  const auto flat = column_standardize(DenseMatrix::from_rows({{5}, {5}, {5}}));
  CHECK(flat.zero_variance[0] == 1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(flat.values(i, 0) == 0.0);

  CHECK_THROWS_AS(column_standardize(DenseMatrix(1, 3)), std::invalid_argument);
}

TEST_CASE("column_standardize random matrix has unit moments") {
  auto rng = derive_rng_stream(3, {{"standardize", 0}});
  DenseMatrix z(100, 8);
  for (double& v : z.values()) v = 5.0 * rng.normal() + 2.0;
  const auto out = column_standardize(z);
  const std::size_t n = z.rows();
  for (std::size_t j = 0; j < z.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += out.values(i, j);
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) <= 1e-12);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      ss += (out.values(i, j) - mean) * (out.values(i, j) - mean);
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    CHECK(std::abs(sd - 1.0) <= 1e-10);
  }
}

TEST_CASE("correlation_matrix trivial cases") {
  DenseMatrix z(4, 2);
  for (std::size_t i = 0; i < 4; ++i) {
    z(i, 0) = static_cast<double>(i);
    z(i, 1) = static_cast<double>(i);
  }
  const auto r = correlation_matrix(column_standardize(z).values);
  for (double v : r.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  // Orthogonal standardized columns -> off-diagonal 0.
  const auto orth = DenseMatrix::from_rows({{1, 1}, {-1, 1}, {1, -1}, {-1, -1}});
  const auto std_orth = column_standardize(orth);
  const auto r2 = correlation_matrix(std_orth.values);
  CHECK(r2(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r2(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlation_matrix matches pairwise Pearson oracle") {
  auto rng = derive_rng_stream(7, {{"pearson", 0}});
  DenseMatrix z(200, 5);
  for (double& v : z.values()) v = rng.uniform(-3.0, 4.0);
  const auto r = correlation_matrix(column_standardize(z).values);

  const std::size_t n = z.rows();
  for (std::size_t a = 0; a < z.cols(); ++a) {
    for (std::size_t b = 0; b < z.cols(); ++b) {
      double ma = 0.0;
      double mb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        ma += z(i, a);
        mb += z(i, b);
      }
      ma /= static_cast<double>(n);
      mb /= static_cast<double>(n);
      double cov = 0.0;
      double va = 0.0;
      double vb = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        cov += (z(i, a) - ma) * (z(i, b) - mb);
        va += (z(i, a) - ma) * (z(i, a) - ma);
        vb += (z(i, b) - mb) * (z(i, b) - mb);
      }
      const double pearson = cov / std::sqrt(va * vb);
      CHECK(std::abs(r(a, b) - pearson) <= 1e-10);
      CHECK(r(a, b) >= -1.0 - 1e-10);
      CHECK(r(a, b) <= 1.0 + 1e-10);
    }
  }

  // Positive semi-definite up to -1e-8.
  const auto eig = sym_eig(r);
  CHECK(eig.eigenvalues.back() >= -1e-8);
}

TEST_CASE("rng streams are pure functions of lineage") {
  auto a = derive_rng_stream(7, {{"round", 3}, {"client", 12}});
  auto b = derive_rng_stream(7, {{"round", 3}, {"client", 12}});
  auto c = derive_rng_stream(7, {{"round", 3}, {"client", 13}});
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 1000; ++i) {
    const double va = a.normal();
    if (va != b.normal()) all_equal = false;
    if (va != c.normal()) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("rng child lineage equals explicit lineage") {
  auto parent = derive_rng_stream(9, {{"round", 1}});
  auto child = parent.child("client", 4);
  auto direct = derive_rng_stream(9, {{"round", 1}, {"client", 4}});
  for (int i = 0; i < 100; ++i) CHECK(child.next_u64() == direct.next_u64());
}

TEST_CASE("rng normal draws satisfy the CLT bound") {
  auto rng = derive_rng_stream(123, {{"clt", 0}});
  const int n = 1000000;
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += rng.normal();
  mean /= n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("rng uniform, sign, dirichlet, permutation sanity") {
  auto rng = derive_rng_stream(5, {{"misc", 0}});
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform(2.0, 3.0);
    CHECK(u >= 2.0);
    CHECK(u < 3.0);
    const double s = rng.sign();
    CHECK((s == 1.0 || s == -1.0));
  }
  const auto w = rng.dirichlet(0.5, 6);
  double total = 0.0;
  for (double v : w) {
    CHECK(v >= 0.0);
    total += v;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  const auto p = rng.permutation(50);
  std::vector<bool> seen(50, false);
  for (std::size_t v : p) {
    REQUIRE(v < 50);
    CHECK(!seen[v]);
    seen[v] = true;
  }
}
