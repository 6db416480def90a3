#include "ceegcn/entmax.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ceegcn {

namespace {

// x^k for x > 0, with the common exponents of α = 1.5 and α = 2 inlined.
inline double power(double x, double k) {
  if (k == 2.0) return x * x;
  if (k == 1.0) return x;
  return std::pow(x, k);
}

}  // namespace

double entmax_into(std::span<const double> z, double alpha, std::span<double> p,
                   const BisectionOptions& options) {
  if (!(alpha > 1.0)) throw std::invalid_argument("entmax: alpha must be > 1 (use softmax for alpha = 1)");
  const std::size_t d = z.size();
  if (d == 0) throw std::invalid_argument("entmax: empty input");
  if (p.size() != d) throw std::invalid_argument("entmax: output size mismatch");

  const double scale = alpha - 1.0;
  const double k = 1.0 / scale;
  double top = -std::numeric_limits<double>::infinity();
  for (double v : z) top = std::max(top, scale * v);

  double lo = top - 1.0;
  double hi = top - std::pow(static_cast<double>(d), -scale);

  // Entries at or below `lo` stay zero for every candidate τ, so they leave
  // the active set as the bracket tightens.
  thread_local std::vector<double> active;
  active.clear();
  for (double v : z) {
    const double s = scale * v;
    if (s > lo) active.push_back(s);
  }

  double tau = 0.5 * (lo + hi);
  for (int it = 0; it < options.max_iterations; ++it) {
    tau = 0.5 * (lo + hi);
    double sum = 0.0;
    for (double s : active) {
      if (s > tau) sum += power(s - tau, k);
    }
    if (std::abs(sum - 1.0) <= options.tolerance) break;
    if (sum < 1.0) {
      hi = tau;
    } else {
      lo = tau;
      std::erase_if(active, [lo](double s) { return s <= lo; });
    }
  }

  // Newton polish on the final support: drives |Σ - 1| to rounding level so
  // that p is a smooth function of z to the precision finite differences see.
  for (int step = 0; step < 2; ++step) {
    double sum = 0.0;
    double slope = 0.0;
    for (double s : active) {
      if (s > tau) {
        const double gap = s - tau;
        const double term = power(gap, k);
        sum += term;
        slope += k * term / gap;
      }
    }
    if (slope <= 0.0) break;
    const double next = tau + (sum - 1.0) / slope;
    if (!(next >= lo && next <= hi)) break;
    tau = next;
  }

  double total = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double s = scale * z[i] - tau;
    p[i] = s > 0.0 ? power(s, k) : 0.0;
    total += p[i];
  }
  for (double& v : p) v /= total;
  return tau;
}

double entmax_tau(std::span<const double> z, double alpha, const BisectionOptions& options) {
  std::vector<double> p(z.size());
  return entmax_into(z, alpha, p, options);
}

EntmaxResult entmax(std::span<const double> z, double alpha, const BisectionOptions& options) {
  EntmaxResult r;
  r.p.resize(z.size());
  r.tau = entmax_into(z, alpha, r.p, options);
  for (std::size_t i = 0; i < r.p.size(); ++i) {
    if (r.p[i] > 0.0) r.support.push_back(i);
  }
  return r;
}

void entmax_jvp_into(std::span<const double> p, double alpha, std::span<const double> upstream,
                     std::span<double> grad) {
  const std::size_t d = p.size();
  if (upstream.size() != d || grad.size() != d) throw std::invalid_argument("entmax_jvp: size mismatch");
  const double e = 2.0 - alpha;
  double s_sum = 0.0;
  double su = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double s = p[i] > 0.0 ? (e == 0.0 ? 1.0 : std::pow(p[i], e)) : 0.0;
    grad[i] = s;
    s_sum += s;
    su += s * upstream[i];
  }
  const double mean = s_sum > 0.0 ? su / s_sum : 0.0;
  for (std::size_t i = 0; i < d; ++i) grad[i] = grad[i] * (upstream[i] - mean);
}

std::vector<double> entmax_jvp(std::span<const double> p, double alpha, std::span<const double> upstream) {
  std::vector<double> grad(p.size());
  entmax_jvp_into(p, alpha, upstream, grad);
  return grad;
}

void softmax_into(std::span<const double> z, std::span<double> p) {
  if (z.empty() || p.size() != z.size()) throw std::invalid_argument("softmax: size mismatch");
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - top);
    total += p[i];
  }
  for (double& v : p) v /= total;
}

void softmax_jvp_into(std::span<const double> p, std::span<const double> upstream, std::span<double> grad) {
  double dot = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * upstream[i];
  for (std::size_t i = 0; i < p.size(); ++i) grad[i] = p[i] * (upstream[i] - dot);
}

}  // namespace ceegcn
