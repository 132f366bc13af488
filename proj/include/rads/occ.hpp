#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "rads/errors.hpp"
#include "rads/rng.hpp"
#include "rads/wtsa.hpp"

namespace rads {

// Probability clamp for the class-probability estimator.
inline constexpr double kProbEps = 1e-9;
// Covariance regularization floor.
inline constexpr double kCovEps = 1e-6;

// Multivariate Gaussian fitted to the positive instances; acts as the
// reference density the artificial class is drawn from.
struct GaussianDensity {
  std::vector<double> mean;
  std::vector<double> cov;  // row-major dim x dim, diagonally regularized

  std::size_t dim() const { return mean.size(); }

  // Lower-triangular Cholesky factor. Dimensions here are 1 or 2, so a
  // plain loop is fine.
  std::vector<double> cholesky() const {
    std::size_t d = dim();
    std::vector<double> L(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j <= i; ++j) {
        double s = cov[i * d + j];
        for (std::size_t k = 0; k < j; ++k) s -= L[i * d + k] * L[j * d + k];
        if (i == j) {
          L[i * d + i] = std::sqrt(std::max(s, kCovEps * 1e-3));
        } else {
          L[i * d + j] = s / L[j * d + j];
        }
      }
    }
    return L;
  }

  double log_pdf(const std::vector<double>& x) const {
    std::size_t d = dim();
    std::vector<double> L = cholesky();
    // Solve L y = (x - mean), accumulate the quadratic form and log-det.
    std::vector<double> y(d, 0.0);
    double logdet = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      double s = x[i] - mean[i];
      for (std::size_t k = 0; k < i; ++k) s -= L[i * d + k] * y[k];
      y[i] = s / L[i * d + i];
      logdet += std::log(L[i * d + i]);
    }
    double quad = 0.0;
    for (double v : y) quad += v * v;
    constexpr double log2pi = 1.8378770664093454835606594728112;
    return -0.5 * (static_cast<double>(d) * log2pi + quad) - logdet;
  }
};

inline GaussianDensity fit_reference(const std::vector<std::vector<double>>& points) {
  if (points.size() < 2)
    throw InsufficientDataError("fit_reference: need at least 2 points");
  std::size_t d = points.front().size();
  for (const auto& p : points)
    if (p.size() != d) throw ConfigError("fit_reference: inconsistent dimensions");

  GaussianDensity g;
  g.mean.assign(d, 0.0);
  for (const auto& p : points)
    for (std::size_t i = 0; i < d; ++i) g.mean[i] += p[i];
  double n = static_cast<double>(points.size());
  for (double& m : g.mean) m /= n;

  g.cov.assign(d * d, 0.0);
  for (const auto& p : points)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        g.cov[i * d + j] += (p[i] - g.mean[i]) * (p[j] - g.mean[j]);
  for (double& c : g.cov) c /= (n - 1.0);
  for (std::size_t i = 0; i < d; ++i) g.cov[i * d + i] += kCovEps;
  return g;
}

// Draws the artificial counter-example class from the reference density.
inline std::vector<std::vector<double>> sample_artificial(const GaussianDensity& density,
                                                          std::size_t n, std::uint64_t seed) {
  std::size_t d = density.dim();
  std::vector<double> L = density.cholesky();
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::vector<double> z(d);
    for (double& v : z) v = rng.normal01();
    std::vector<double> x(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      double s = density.mean[i];
      for (std::size_t j = 0; j <= i; ++j) s += L[i * d + j] * z[j];
      x[i] = s;
    }
    out.push_back(std::move(x));
  }
  return out;
}

// Axis-aligned binary classification tree discriminating target instances
// from artificial draws. Leaves hold Laplace-smoothed target probabilities.
// The splits land at the edges of the target sample's support, which is what
// separates sustained out-of-range load from the trained-in spike corner.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double p_target = 0.5;
};

// Bagged ensemble: the published probability is the mean leaf estimate over
// bootstrap-resampled trees, which keeps single-tree overfit on small
// training sets from carving in-support regions into rejection pockets.
struct ClassProbabilityEstimator {
  std::vector<std::vector<TreeNode>> trees;
  double target_prior = 0.5;
  double artificial_prior = 0.5;

  static double tree_leaf(const std::vector<TreeNode>& nodes, const std::vector<double>& x) {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(nd.feature)] < nd.threshold ? nd.left : nd.right;
    }
    return nodes[static_cast<std::size_t>(i)].p_target;
  }

  double predict(const std::vector<double>& x) const {
    if (trees.empty()) return 0.5;
    double sum = 0.0;
    for (const auto& t : trees) sum += tree_leaf(t, x);
    return std::clamp(sum / static_cast<double>(trees.size()), kProbEps, 1.0 - kProbEps);
  }
};

struct FitOptions {
  int max_depth = 5;
  std::size_t min_split = 4;
  std::size_t min_leaf = 2;
  double min_gain = 1e-12;
  // Heavy smoothing on purpose: leaves hold a handful of points when models
  // retrain on short histories, and raw leaf odds whipsaw at that scale.
  double laplace = 1.0;
  // Accept margin below the worst in-sample combined score; larger values
  // trade detection sharpness for fewer false alarms on held-out data.
  double score_margin = 1.25;
  double artificial_per_positive = 1.0;
  // Bootstrap trees in the ensemble; 1 fits a single tree on the full sample.
  std::size_t bag_count = 25;
};

namespace detail {

struct LabeledPoint {
  const std::vector<double>* x;
  int label;  // 1 target, 0 artificial
};

inline double gini_weighted(double nt, double na) {
  double n = nt + na;
  if (n <= 0.0) return 0.0;
  double pt = nt / n, pa = na / n;
  return (1.0 - pt * pt - pa * pa) * n;
}

inline int build_tree(std::vector<TreeNode>& nodes, const std::vector<LabeledPoint>& pts,
                      std::vector<std::size_t> idx, int depth, const FitOptions& opt) {
  std::size_t nt = 0;
  for (std::size_t i : idx) nt += static_cast<std::size_t>(pts[i].label);
  std::size_t na = idx.size() - nt;

  auto make_leaf = [&]() {
    TreeNode leaf;
    leaf.p_target = (static_cast<double>(nt) + opt.laplace) /
                    (static_cast<double>(idx.size()) + 2.0 * opt.laplace);
    nodes.push_back(leaf);
    return static_cast<int>(nodes.size() - 1);
  };

  if (depth >= opt.max_depth || idx.size() < opt.min_split || nt == 0 || na == 0)
    return make_leaf();

  std::size_t dim = pts.front().x->size();
  double parent = gini_weighted(static_cast<double>(nt), static_cast<double>(na));
  double best_gain = opt.min_gain;
  int best_dim = -1;
  double best_thr = 0.0;

  std::vector<std::size_t> order(idx);
  for (std::size_t d = 0; d < dim; ++d) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return (*pts[a].x)[d] < (*pts[b].x)[d];
    });
    double lt = 0.0, la = 0.0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      if (pts[order[i]].label) ++lt; else ++la;
      double v = (*pts[order[i]].x)[d];
      double nv = (*pts[order[i + 1]].x)[d];
      if (!(nv > v)) continue;
      std::size_t left_n = i + 1;
      std::size_t right_n = order.size() - left_n;
      if (left_n < opt.min_leaf || right_n < opt.min_leaf) continue;
      double child = gini_weighted(lt, la) +
                     gini_weighted(static_cast<double>(nt) - lt, static_cast<double>(na) - la);
      double gain = (parent - child) / static_cast<double>(order.size());
      if (gain > best_gain + 1e-15) {
        best_gain = gain;
        best_dim = static_cast<int>(d);
        best_thr = v + 0.5 * (nv - v);
      }
    }
  }

  if (best_dim < 0) return make_leaf();

  std::vector<std::size_t> left_idx, right_idx;
  for (std::size_t i : idx) {
    if ((*pts[i].x)[static_cast<std::size_t>(best_dim)] < best_thr)
      left_idx.push_back(i);
    else
      right_idx.push_back(i);
  }
  TreeNode split;
  split.feature = best_dim;
  split.threshold = best_thr;
  nodes.push_back(split);
  auto self = static_cast<int>(nodes.size() - 1);
  int l = build_tree(nodes, pts, std::move(left_idx), depth + 1, opt);
  int r = build_tree(nodes, pts, std::move(right_idx), depth + 1, opt);
  nodes[static_cast<std::size_t>(self)].left = l;
  nodes[static_cast<std::size_t>(self)].right = r;
  return self;
}

}  // namespace detail

inline ClassProbabilityEstimator fit_class_probability(
    const std::vector<std::vector<double>>& target,
    const std::vector<std::vector<double>>& artificial, const FitOptions& opt = {},
    std::uint64_t seed = 0) {
  if (target.empty() || artificial.empty())
    throw InsufficientDataError("fit_class_probability: both classes need instances");
  std::size_t d = target.front().size();
  for (const auto& p : target)
    if (p.size() != d) throw ConfigError("fit_class_probability: inconsistent dimensions");
  for (const auto& p : artificial)
    if (p.size() != d) throw ConfigError("fit_class_probability: inconsistent dimensions");

  std::vector<detail::LabeledPoint> pts;
  pts.reserve(target.size() + artificial.size());
  for (const auto& p : target) pts.push_back({&p, 1});
  for (const auto& p : artificial) pts.push_back({&p, 0});

  ClassProbabilityEstimator est;
  double total = static_cast<double>(pts.size());
  est.target_prior = static_cast<double>(target.size()) / total;
  est.artificial_prior = static_cast<double>(artificial.size()) / total;

  std::size_t bags = std::max<std::size_t>(1, opt.bag_count);
  est.trees.reserve(bags);
  for (std::size_t b = 0; b < bags; ++b) {
    std::vector<std::size_t> idx;
    if (bags == 1) {
      idx.resize(pts.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    } else {
      // Stratified bootstrap: class sizes (and so the empirical prior) are
      // preserved in every bag.
      Rng rng(derive_seed(seed, "bag", "", b));
      idx.reserve(pts.size());
      for (std::size_t i = 0; i < target.size(); ++i)
        idx.push_back(rng.below(target.size()));
      for (std::size_t i = 0; i < artificial.size(); ++i)
        idx.push_back(target.size() + rng.below(artificial.size()));
    }
    std::vector<TreeNode> nodes;
    detail::build_tree(nodes, pts, std::move(idx), 0, opt);
    est.trees.push_back(std::move(nodes));
  }
  return est;
}

enum class Classification { positive, negative };

struct OccModel {
  GaussianDensity reference;
  ClassProbabilityEstimator estimator;
  double target_prior = 0.5;  // P(C)
  double score_margin = 0.5;
  double score_cutoff = -std::numeric_limits<double>::infinity();
  FeatureMode mode = FeatureMode::avg_sd;
  NormalizationBounds bounds;
  std::uint64_t seed = 0;
};

// log P(X|C) = log[ ((1-P(C))/P(C)) * (P(C|X)/(1-P(C|X))) * P(X|A) ].
// With P(C) = 0.5 the prior factor vanishes and the score reduces to the
// class-probability odds times the reference density.
inline double combine_log_score(double target_prior, double p_target_given_x,
                                double log_reference) {
  double p = std::clamp(p_target_given_x, kProbEps, 1.0 - kProbEps);
  double prior = std::clamp(target_prior, kProbEps, 1.0 - kProbEps);
  return std::log1p(-prior) - std::log(prior) + std::log(p) - std::log1p(-p) + log_reference;
}

inline double occ_p_target(const OccModel& model, const std::vector<double>& x) {
  return model.estimator.predict(x);
}

// Natural log of the combined target-density estimate.
inline double occ_score(const OccModel& model, const std::vector<double>& x) {
  return combine_log_score(model.target_prior, model.estimator.predict(x),
                           model.reference.log_pdf(x));
}

// Positive (normal) iff the combined density is no more than score_margin
// below the least dense training positive. Every training instance therefore
// classifies positive by construction.
inline Classification occ_classify(const OccModel& model, const std::vector<double>& x) {
  return occ_score(model, x) >= model.score_cutoff ? Classification::positive
                                                   : Classification::negative;
}

// Occ-layer training: reference fit, 1:1 artificial draw, tree fit, cutoff
// calibration on the in-sample scores.
inline OccModel fit_occ(const std::vector<std::vector<double>>& positives, std::uint64_t seed,
                        const FitOptions& opt = {}) {
  if (positives.size() < 2)
    throw InsufficientDataError("fit_occ: need at least 2 positive instances");
  OccModel model;
  model.seed = seed;
  model.score_margin = opt.score_margin;
  model.reference = fit_reference(positives);
  auto n_art = static_cast<std::size_t>(
      std::llround(opt.artificial_per_positive * static_cast<double>(positives.size())));
  if (n_art == 0) n_art = 1;
  std::vector<std::vector<double>> artificial =
      sample_artificial(model.reference, n_art, derive_seed(seed, "artificial"));
  model.estimator =
      fit_class_probability(positives, artificial, opt, derive_seed(seed, "estimator"));
  model.target_prior =
      static_cast<double>(positives.size()) / static_cast<double>(positives.size() + n_art);

  double worst = std::numeric_limits<double>::infinity();
  for (const auto& p : positives) worst = std::min(worst, occ_score(model, p));
  model.score_cutoff = worst - opt.score_margin;
  return model;
}

inline OccModel train_occ(const TrainingMatrix& matrix, std::uint64_t seed,
                          const FitOptions& opt = {}) {
  std::vector<std::vector<double>> pts;
  pts.reserve(matrix.instances.size());
  for (const auto& inst : matrix.instances) pts.push_back(inst.features);
  OccModel model = fit_occ(pts, seed, opt);
  model.mode = matrix.mode;
  model.bounds = matrix.bounds;
  return model;
}

}  // namespace rads
