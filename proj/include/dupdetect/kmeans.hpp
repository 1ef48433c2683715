#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "dupdetect/error.hpp"
#include "dupdetect/rng.hpp"

namespace dupdetect {

template <typename Scalar>
struct KMeansModel {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  int k = 0;
  Matrix centroids;          // k x dim
  std::vector<int> assignments;  // one per input row
  Scalar inertia = 0;
  int iterations = 0;
  std::uint64_t seed = 0;    // seed of the winning restart
  int restarts = 1;
};

struct KMeansOptions {
  int k = 10;
  std::uint64_t seed = 42;
  int restarts = 5;
  int max_iters = 300;
  double tol = 1e-6;
};

// Called with the inertia after every assignment step of every restart.
template <typename Scalar>
using InertiaObserver = std::function<void(int restart, int iteration, Scalar inertia)>;

namespace detail {

// Assigns each row to its nearest centroid (lowest index on ties); returns inertia.
template <typename Scalar, typename Points>
Scalar assign_nearest(const Eigen::MatrixBase<Points>& points,
                      const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& centroids,
                      std::vector<int>& assignments) {
  Scalar inertia = 0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    Scalar best = std::numeric_limits<Scalar>::infinity();
    int best_c = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const Scalar d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        best_c = static_cast<int>(c);
      }
    }
    assignments[static_cast<std::size_t>(i)] = best_c;
    inertia += best;
  }
  return inertia;
}

}  // namespace detail

// Sum of squared distances to the mean (the k = 1 inertia).
template <typename Points>
typename Points::Scalar single_cluster_inertia(const Eigen::MatrixBase<Points>& points) {
  const auto mean = points.colwise().mean().eval();
  return (points.rowwise() - mean).squaredNorm();
}

// Lloyd's algorithm. Each restart r starts from k distinct rows sampled with
// seed + r; the lowest-inertia run wins. Throws TooFewPoints.
template <typename Points>
KMeansModel<typename Points::Scalar> kmeans_fit(const Eigen::MatrixBase<Points>& points, const KMeansOptions& options,
                                                const InertiaObserver<typename Points::Scalar>& observer = {}) {
  using Scalar = typename Points::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = points.rows();
  if (options.k < 1) throw ConfigError("k-means needs k >= 1");
  if (n < options.k) throw TooFewPoints(static_cast<std::size_t>(n), static_cast<std::size_t>(options.k));

  KMeansModel<Scalar> best;
  best.inertia = std::numeric_limits<Scalar>::infinity();
  const int restarts = std::max(1, options.restarts);
  for (int run = 0; run < restarts; ++run) {
    const std::uint64_t seed = options.seed + static_cast<std::uint64_t>(run);
    Rng rng(seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    // Partial Fisher-Yates: the first k entries are a uniform k-subset.
    for (int c = 0; c < options.k; ++c) {
      const auto j = static_cast<std::size_t>(c) + rng.below(static_cast<std::uint64_t>(n - c));
      std::swap(order[static_cast<std::size_t>(c)], order[j]);
    }
    Matrix centroids(options.k, points.cols());
    for (int c = 0; c < options.k; ++c) centroids.row(c) = points.row(order[static_cast<std::size_t>(c)]);

    std::vector<int> assignments(static_cast<std::size_t>(n), 0);
    Scalar inertia = detail::assign_nearest<Scalar>(points, centroids, assignments);
    if (observer) observer(run, 0, inertia);
    int iter = 0;
    while (iter < options.max_iters) {
      ++iter;
      Matrix sums = Matrix::Zero(options.k, points.cols());
      Eigen::VectorXi counts = Eigen::VectorXi::Zero(options.k);
      for (Eigen::Index i = 0; i < n; ++i) {
        const int c = assignments[static_cast<std::size_t>(i)];
        sums.row(c) += points.row(i);
        ++counts[c];
      }
      Scalar max_shift = 0;
      for (int c = 0; c < options.k; ++c) {
        // An emptied cluster keeps its previous centroid.
        if (counts[c] == 0) continue;
        const auto updated = (sums.row(c) / static_cast<Scalar>(counts[c])).eval();
        max_shift = std::max(max_shift, (updated - centroids.row(c)).norm());
        centroids.row(c) = updated;
      }
      const Scalar previous = inertia;
      inertia = detail::assign_nearest<Scalar>(points, centroids, assignments);
      if (observer) observer(run, iter, inertia);
      // Lloyd steps never increase inertia (up to rounding).
      if (inertia > previous + static_cast<Scalar>(1e-9) * std::max(previous, Scalar(1)))
        throw InvariantError("k-means inertia increased at iteration " + std::to_string(iter));
      if (max_shift < static_cast<Scalar>(options.tol)) break;
    }
    if (inertia < best.inertia) {
      best.k = options.k;
      best.centroids = std::move(centroids);
      best.assignments = std::move(assignments);
      best.inertia = inertia;
      best.iterations = iter;
      best.seed = seed;
    }
  }
  best.restarts = restarts;
  return best;
}

struct ElbowPoint {
  int k = 0;
  double inertia = 0.0;
};

// Even k values 2, 4, ..., max_k by default.
inline std::vector<int> even_ks(int max_k = 20) {
  std::vector<int> ks;
  for (int k = 2; k <= max_k; k += 2) ks.push_back(k);
  return ks;
}

template <typename Points>
std::vector<ElbowPoint> elbow_scan(const Eigen::MatrixBase<Points>& points, const std::vector<int>& ks,
                                   std::uint64_t seed, int restarts) {
  int max_k = 0;
  for (int k : ks) max_k = std::max(max_k, k);
  if (points.rows() < max_k) throw TooFewPoints(static_cast<std::size_t>(points.rows()), static_cast<std::size_t>(max_k));
  std::vector<ElbowPoint> table;
  table.reserve(ks.size());
  for (int k : ks) {
    KMeansOptions opts;
    opts.k = k;
    opts.seed = seed;
    opts.restarts = restarts;
    table.push_back({k, static_cast<double>(kmeans_fit(points, opts).inertia)});
  }
  return table;
}

}  // namespace dupdetect
