#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "ceegcn/ewsgat.hpp"

namespace ceegcn {

enum class FcmMode {
  /// Y_ik = d_ik / Σ_j d_ij
  kSimilarityProportional,
  /// Y_ik = [Σ_j d_ik / d_ij]^{-1}
  kLiteral,
};

struct ClusterAssignment {
  Matrix Y;        ///< n x K memberships, rows sum to 1
  Matrix centers;  ///< K x d
  std::vector<int> labels;
  int iterations = 0;
};

struct FcmOptions {
  int max_iterations = 30;
  double tolerance = 1e-6;
  FcmMode mode = FcmMode::kSimilarityProportional;
  /// Floor applied to inner products before the membership ratios.
  double similarity_floor = 1e-8;
};

/// Inner-product fuzzy C-means. Centers start at K distinct rows of H chosen
/// by seeded D^2 sampling unless `initial_centers` is given.
ClusterAssignment fcm_fit(const Matrix& H, int K, std::uint64_t seed, const FcmOptions& options = {},
                          const std::optional<Matrix>& initial_centers = std::nullopt);

/// Membership rows for fixed centers.
Matrix fcm_memberships(const Matrix& H, const Matrix& centers, const FcmOptions& options = {});

/// Argmax per row, lowest index on ties.
std::vector<int> hard_labels(const Matrix& Y);

}  // namespace ceegcn
