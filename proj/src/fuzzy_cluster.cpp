#include "ceegcn/fuzzy_cluster.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace ceegcn {

Matrix fcm_memberships(const Matrix& H, const Matrix& centers, const FcmOptions& options) {
  const Eigen::Index n = H.rows();
  const Eigen::Index K = centers.rows();
  Matrix sim = (H * centers.transpose()).cwiseMax(options.similarity_floor);
  Matrix Y(n, K);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (options.mode == FcmMode::kSimilarityProportional) {
      Y.row(i) = sim.row(i) / sim.row(i).sum();
    } else {
      for (Eigen::Index k = 0; k < K; ++k) {
        double ratio_sum = 0.0;
        for (Eigen::Index j = 0; j < K; ++j) ratio_sum += sim(i, k) / sim(i, j);
        Y(i, k) = 1.0 / ratio_sum;
      }
    }
  }
  return Y;
}

std::vector<int> hard_labels(const Matrix& Y) {
  std::vector<int> labels(static_cast<std::size_t>(Y.rows()));
  for (Eigen::Index i = 0; i < Y.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index k = 1; k < Y.cols(); ++k) {
      if (Y(i, k) > Y(i, best)) best = k;
    }
    labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return labels;
}

namespace {

// D^2 seeding: the first row is uniform, each further row is drawn with
// probability proportional to its squared distance from the nearest chosen
// row. Rows already chosen (and duplicates of them) have zero weight, so the
// picks are distinct whenever H has K distinct rows.
Matrix seed_centers(const Matrix& H, int K, std::uint64_t seed) {
  const Eigen::Index n = H.rows();
  std::mt19937_64 rng(seed);
  Matrix centers(K, H.cols());
  std::vector<double> nearest(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  Eigen::Index pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
  for (int k = 0; k < K; ++k) {
    if (k > 0) {
      double total = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) total += nearest[static_cast<std::size_t>(i)];
      if (total > 0.0) {
        double target = std::uniform_real_distribution<double>(0.0, total)(rng);
        pick = -1;
        for (Eigen::Index i = 0; i < n; ++i) {
          const double w = nearest[static_cast<std::size_t>(i)];
          if (w <= 0.0) continue;
          pick = i;
          target -= w;
          if (target < 0.0) break;
        }
      } else {
        // Fewer distinct rows than K: take the first unused row.
        pick = 0;
        while (taken[static_cast<std::size_t>(pick)]) ++pick;
      }
    }
    taken[static_cast<std::size_t>(pick)] = 1;
    centers.row(k) = H.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = (H.row(i) - H.row(pick)).squaredNorm();
      nearest[static_cast<std::size_t>(i)] = taken[static_cast<std::size_t>(i)] ? 0.0 : std::min(nearest[static_cast<std::size_t>(i)], d);
    }
  }
  return centers;
}

}  // namespace

ClusterAssignment fcm_fit(const Matrix& H, int K, std::uint64_t seed, const FcmOptions& options,
                          const std::optional<Matrix>& initial_centers) {
  const Eigen::Index n = H.rows();
  if (K < 1) throw std::invalid_argument("fcm_fit: K must be >= 1");
  if (K > n) throw std::invalid_argument("fcm_fit: K = " + std::to_string(K) + " exceeds node count " + std::to_string(n));
  if (H.size() == 0 || H.cwiseAbs().maxCoeff() == 0.0) throw std::invalid_argument("fcm_fit: representation matrix is all zero");

  ClusterAssignment out;
  if (initial_centers) {
    if (initial_centers->rows() != K || initial_centers->cols() != H.cols()) {
      throw std::invalid_argument("fcm_fit: initial centers have the wrong shape");
    }
    out.centers = *initial_centers;
  } else {
    out.centers = seed_centers(H, K, seed);
  }

  out.Y = fcm_memberships(H, out.centers, options);
  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    const Vector mass = out.Y.colwise().sum().transpose();
    out.centers = out.Y.transpose() * H;
    for (int k = 0; k < K; ++k) out.centers.row(k) /= mass[k];
    Matrix next = fcm_memberships(H, out.centers, options);
    const double change = (next - out.Y).cwiseAbs().maxCoeff();
    out.Y = std::move(next);
    if (change < options.tolerance) break;
  }
  out.labels = hard_labels(out.Y);
  return out;
}

}  // namespace ceegcn
