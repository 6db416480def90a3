#pragma once

#include <span>
#include <vector>

namespace ceegcn {

/// Output of the α-entmax transform of one score vector.
struct EntmaxResult {
  std::vector<double> p;
  /// Threshold in the scaled domain (α - 1)·z.
  double tau = 0.0;
  /// Indices with p > 0, ascending.
  std::vector<std::size_t> support;
};

struct BisectionOptions {
  double tolerance = 1e-10;
  int max_iterations = 100;
};

/// Threshold τ with Σ_i [(α-1) z_i - τ]_+^{1/(α-1)} = 1, found by bisection
/// on [max z' - 1, max z' - d^{1-α}] with z' = (α-1) z. Requires α > 1.
double entmax_tau(std::span<const double> z, double alpha, const BisectionOptions& options = {});

/// p_i = [(α-1) z_i - τ]_+^{1/(α-1)}, renormalized to sum to exactly 1.
EntmaxResult entmax(std::span<const double> z, double alpha, const BisectionOptions& options = {});

/// Writes entmax(z) into `p` without allocating; returns τ. `p` must have the
/// same length as `z`.
double entmax_into(std::span<const double> z, double alpha, std::span<double> p,
                   const BisectionOptions& options = {});

/// Vector-Jacobian product of entmax at its output `p`: with s = p^{2-α} on
/// the support, returns s ⊙ u - s (sᵀu) / Σ s.
std::vector<double> entmax_jvp(std::span<const double> p, double alpha, std::span<const double> upstream);
inline std::vector<double> entmax_jvp(const EntmaxResult& r, double alpha, std::span<const double> upstream) {
  return entmax_jvp(r.p, alpha, upstream);
}

/// In-place variant used by the attention backward pass.
void entmax_jvp_into(std::span<const double> p, double alpha, std::span<const double> upstream,
                     std::span<double> grad);

/// Numerically stable softmax (the α → 1 limit).
void softmax_into(std::span<const double> z, std::span<double> p);
void softmax_jvp_into(std::span<const double> p, std::span<const double> upstream, std::span<double> grad);

}  // namespace ceegcn
