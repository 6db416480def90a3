#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "ceegcn/entmax.hpp"

using namespace ceegcn;

namespace {

// Sort-based sparsemax (Martins & Astudillo closed form).
std::vector<double> sparsemax_oracle(const std::vector<double>& z) {
  std::vector<double> s = z;
  std::sort(s.begin(), s.end(), std::greater<>());
  double cum = 0.0, tau = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    cum += s[k];
    const double t = (cum - 1.0) / static_cast<double>(k + 1);
    if (s[k] > t) tau = t;
  }
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = std::max(z[i] - tau, 0.0);
  return p;
}

std::vector<double> softmax_oracle(const std::vector<double>& z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += p[i] = std::exp(z[i] - m);
  for (double& x : p) x /= s;
  return p;
}

// Bisection on τ run until the bracket stops shrinking.
std::vector<double> exact_entmax(const std::vector<double>& z, double alpha) {
  const double inv = 1.0 / (alpha - 1.0);
  std::vector<double> s(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) s[i] = (alpha - 1.0) * z[i];
  const double top = *std::max_element(s.begin(), s.end());
  double lo = top - 1.0, hi = top;
  auto mass = [&](double tau) {
    double m = 0.0;
    for (double x : s) m += std::pow(std::max(x - tau, 0.0), inv);
    return m;
  };
  while (true) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (mass(mid) >= 1.0 ? lo : hi) = mid;
  }
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) total += p[i] = std::pow(std::max(s[i] - lo, 0.0), inv);
  for (double& x : p) x /= total;
  return p;
}

double linf(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double scale = 2.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> z(n);
  for (double& x : z) x = d(rng);
  return z;
}

}  // namespace

TEST_CASE("entmax examples") {
  SUBCASE("equal scores split evenly") {
    for (double t : {-3.0, 0.0, 7.5}) {
      const auto r = entmax(std::vector<double>{t, t}, 1.5);
      CHECK(r.p[0] == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(r.p[1] == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
  SUBCASE("sparsemax closed form on two elements") {
    const auto r = entmax(std::vector<double>{0.6, 0.2}, 2.0);
    CHECK(r.tau == doctest::Approx(-0.1).epsilon(1e-9));
    CHECK(r.p[0] == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(r.p[1] == doctest::Approx(0.3).epsilon(1e-9));
  }
  SUBCASE("support collapses") {
    const auto r = entmax(std::vector<double>{10.0, 0.0}, 1.5);
    CHECK(r.p[0] == 1.0);
    CHECK(r.p[1] == 0.0);
    CHECK(r.support == std::vector<std::size_t>{0});
  }
  SUBCASE("single element") {
    for (double a : {1.2, 1.55, 2.0}) CHECK(entmax(std::vector<double>{3.3}, a).p[0] == 1.0);
  }
  SUBCASE("alpha <= 1 is rejected") { CHECK_THROWS(entmax_tau(std::vector<double>{1, 2}, 1.0)); }
}

TEST_CASE("entmax postconditions and invariants") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 1 + rep % 20;
    const auto z = random_vector(rng, n);
    const double alpha = 1.1 + 0.9 * (rep % 10) / 9.0;
    const auto r = entmax(z, alpha);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(r.p[i] >= 0.0);
      sum += r.p[i];
      const bool in_support = std::find(r.support.begin(), r.support.end(), i) != r.support.end();
      CHECK(in_support == (r.p[i] > 0.0));
    }
    CHECK(std::abs(sum - 1.0) < 1e-8);

    // Shift invariance.
    std::vector<double> shifted = z;
    for (double& x : shifted) x += 3.25;
    CHECK(linf(entmax(shifted, alpha).p, r.p) < 1e-8);

    // Permutation equivariance.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pz(n);
    for (std::size_t i = 0; i < n; ++i) pz[i] = z[perm[i]];
    const auto pr = entmax(pz, alpha);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(pr.p[i] - r.p[perm[i]]) < 1e-10);

    // Monotonicity in one coordinate.
    std::vector<double> raised = z;
    raised[0] += 0.3;
    CHECK(entmax(raised, alpha).p[0] >= r.p[0] - 1e-12);
  }
}

TEST_CASE("entmax at alpha = 2 matches sort-based sparsemax") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 300; ++rep) {
    const auto z = random_vector(rng, 2 + rep % 7);
    CHECK(linf(entmax(z, 2.0).p, sparsemax_oracle(z)) < 1e-8);
  }
}

// The exact 1.001-entmax itself differs from softmax by O((α - 1) spread^2),
// so the softmax comparison uses scores in [-1, 1]; the solver is checked
// against an exact threshold on wider scores.
TEST_CASE("entmax near alpha = 1 approaches softmax") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> z(2 + rep % 63);
    for (double& x : z) x = u(rng);
    CHECK(linf(entmax(z, 1.001).p, softmax_oracle(z)) < 1e-3);
  }
  for (int rep = 0; rep < 100; ++rep) {
    const auto z = random_vector(rng, 2 + rep % 63);
    CHECK(linf(entmax(z, 1.001).p, exact_entmax(z, 1.001)) < 1e-8);
  }
}

TEST_CASE("entmax sparsity at alpha = 1.55 with spread >= 4") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> z(4 + rep % 12);
    for (double& x : z) x = u(rng);
    z[0] = 0.0;
    z[1] = 4.0;
    const auto r = entmax(z, 1.55);
    CHECK(std::count(r.p.begin(), r.p.end(), 0.0) >= 1);
  }
}

TEST_CASE("entmax_jvp") {
  std::mt19937_64 rng(5);
  SUBCASE("constant upstream gives zero gradient") {
    const auto z = random_vector(rng, 7);
    const auto r = entmax(z, 1.55);
    const auto g = entmax_jvp(r, 1.55, std::vector<double>(7, 2.5));
    for (double x : g) CHECK(std::abs(x) < 1e-14);
  }
  SUBCASE("zero off the support") {
    const std::vector<double> z = {5.0, 0.0, 4.5, -3.0};
    const auto r = entmax(z, 1.55);
    const auto g = entmax_jvp(r, 1.55, std::vector<double>{1.0, -2.0, 0.5, 3.0});
    for (std::size_t i = 0; i < z.size(); ++i) {
      if (r.p[i] == 0.0) CHECK(g[i] == 0.0);
    }
  }
  SUBCASE("matches central finite differences") {
    const double h = 1e-5;
    double worst = 0.0;
    for (int rep = 0; rep < 50; ++rep) {
      const auto z = random_vector(rng, 6, 1.0);
      const auto u = random_vector(rng, 6, 1.0);
      const auto g = entmax_jvp(entmax(z, 1.55), 1.55, u);
      for (std::size_t i = 0; i < 6; ++i) {
        auto zp = z, zm = z;
        zp[i] += h;
        zm[i] -= h;
        const auto pp = entmax(zp, 1.55).p;
        const auto pm = entmax(zm, 1.55).p;
        double fd = 0.0;
        for (std::size_t k = 0; k < 6; ++k) fd += u[k] * (pp[k] - pm[k]) / (2 * h);
        worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("softmax helpers") {
  const std::vector<double> z = {1.0, 2.0, -0.5};
  std::vector<double> p(3), g(3);
  softmax_into(z, p);
  CHECK(linf(p, softmax_oracle(z)) < 1e-15);
  const std::vector<double> u = {0.3, -1.0, 2.0};
  softmax_jvp_into(p, u, g);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    auto zp = z, zm = z;
    zp[i] += h;
    zm[i] -= h;
    const auto pp = softmax_oracle(zp), pm = softmax_oracle(zm);
    double fd = 0.0;
    for (std::size_t k = 0; k < 3; ++k) fd += u[k] * (pp[k] - pm[k]) / (2 * h);
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}
