// Copyright 2026 The ClickSeg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Full-covariance Gaussian mixtures over RGB, fit by EM.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "clickseg/core/random.hpp"
#include "clickseg/core/raster.hpp"

namespace clickseg::graphcut {

inline constexpr double kCovarianceRidge = 1e-3;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline Vec3 to_vec(const Rgb& c) { return Vec3(c.r, c.g, c.b); }

struct GmmComponent {
  double weight = 0.0;
  Vec3 mean = Vec3::Zero();
  Mat3 covariance = Mat3::Identity();
};

class Gmm {
 public:
  Gmm() = default;
  explicit Gmm(std::vector<GmmComponent> components) : components_(std::move(components)) { prepare(); }

  std::size_t size() const { return components_.size(); }
  const std::vector<GmmComponent>& components() const { return components_; }

  /// log sum_k w_k N(x; mu_k, Sigma_k)
  double log_density(const Vec3& x) const {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < components_.size(); ++k) {
      terms_[k] = component_log_density(k, x);
      best = std::max(best, terms_[k]);
    }
    if (!std::isfinite(best)) return best;
    double s = 0.0;
    for (std::size_t k = 0; k < components_.size(); ++k) s += std::exp(terms_[k] - best);
    return best + std::log(s);
  }
  double log_density(const Rgb& c) const { return log_density(to_vec(c)); }

  /// log w_k + log N(x; mu_k, Sigma_k)
  double component_log_density(std::size_t k, const Vec3& x) const {
    const auto& c = components_[k];
    if (c.weight <= 0.0) return -std::numeric_limits<double>::infinity();
    const Vec3 d = x - c.mean;
    const double maha = d.dot(precision_[k] * d);
    return std::log(c.weight) - 0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + log_det_[k] + maha);
  }

 private:
  void prepare() {
    precision_.resize(components_.size());
    log_det_.resize(components_.size());
    terms_.resize(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
      const Eigen::LLT<Mat3> llt(components_[k].covariance);
      require(llt.info() == Eigen::Success, "gmm: covariance is not positive definite");
      precision_[k] = llt.solve(Mat3::Identity());
      const Mat3 l = llt.matrixL();
      log_det_[k] = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)) + std::log(l(2, 2)));
    }
  }

  std::vector<GmmComponent> components_;
  std::vector<Mat3> precision_;
  std::vector<double> log_det_;
  mutable std::vector<double> terms_;
};

struct GmmFit {
  Gmm model;
  std::vector<double> log_likelihood;  // total data log-likelihood after init and after each iteration
};

namespace detail {

// k-means++: first center uniform, the rest with probability proportional to squared distance.
inline std::vector<Vec3> kmeanspp_seeds(std::span<const Vec3> x, std::size_t k, Rng& rng) {
  std::vector<Vec3> centers;
  centers.push_back(x[uniform_index(rng, x.size())]);
  std::vector<double> d2(x.size(), std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      d2[i] = std::min(d2[i], (x[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = uniform_index(rng, x.size());
    } else {
      double r = uniform_real(rng) * total;
      for (pick = 0; pick + 1 < x.size(); ++pick) {
        r -= d2[pick];
        if (r < 0.0) break;
      }
    }
    centers.push_back(x[pick]);
  }
  return centers;
}

inline double total_log_likelihood(const Gmm& g, std::span<const Vec3> x) {
  double s = 0.0;
  for (const Vec3& v : x) s += g.log_density(v);
  return s;
}

// Expected complete-data log-likelihood of one Gaussian, up to constants.
inline double gaussian_q(const Mat3& cov, const Mat3& scatter, double n) {
  const Eigen::LLT<Mat3> llt(cov);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Mat3 l = llt.matrixL();
  const double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)) + std::log(l(2, 2)));
  return -0.5 * (n * log_det + llt.solve(scatter).trace());
}

}  // namespace detail

/// EM with k-means++ hard-assignment initialization. Every M-step adds kCovarianceRidge * I to
/// the covariance and keeps the previous covariance when that scores lower in the expected
/// log-likelihood, so the data log-likelihood never decreases.
inline GmmFit fit_gmm(std::span<const Rgb> pixels, std::size_t k, int iterations, std::uint64_t seed) {
  require(k >= 1, "fit_gmm: need at least one component");
  require(pixels.size() >= k, "fit_gmm: fewer pixels than components");
  require(iterations >= 0, "fit_gmm: iterations must be >= 0");
  std::vector<Vec3> x(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) x[i] = to_vec(pixels[i]);
  const double n = static_cast<double>(x.size());

  Rng rng(seed);
  const std::vector<Vec3> centers = detail::kmeanspp_seeds(x, k, rng);
  std::vector<double> resp(x.size() * k, 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if ((x[i] - centers[c]).squaredNorm() < (x[i] - centers[best]).squaredNorm()) best = c;
    resp[i * k + best] = 1.0;
  }

  std::vector<GmmComponent> comps(k);
  const auto m_step = [&](bool first) {
    for (std::size_t c = 0; c < k; ++c) {
      double nk = 0.0;
      Vec3 mean = Vec3::Zero();
      for (std::size_t i = 0; i < x.size(); ++i) {
        nk += resp[i * k + c];
        mean += resp[i * k + c] * x[i];
      }
      if (nk <= 0.0) {
        comps[c].weight = 0.0;
        if (first) {
          comps[c].mean = centers[c];
          comps[c].covariance = kCovarianceRidge * Mat3::Identity();
        }
        continue;
      }
      mean /= nk;
      Mat3 scatter = Mat3::Zero();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const Vec3 d = x[i] - mean;
        scatter += resp[i * k + c] * d * d.transpose();
      }
      const Mat3 candidate = scatter / nk + kCovarianceRidge * Mat3::Identity();
      comps[c].weight = nk / n;
      comps[c].mean = mean;
      if (first || detail::gaussian_q(candidate, scatter, nk) >= detail::gaussian_q(comps[c].covariance, scatter, nk))
        comps[c].covariance = candidate;
    }
  };

  m_step(true);
  Gmm g(comps);
  GmmFit fit;
  fit.log_likelihood.push_back(detail::total_log_likelihood(g, x));
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        resp[i * k + c] = g.component_log_density(c, x[i]);
        best = std::max(best, resp[i * k + c]);
      }
      double s = 0.0;
      for (std::size_t c = 0; c < k; ++c) s += resp[i * k + c] = std::exp(resp[i * k + c] - best);
      for (std::size_t c = 0; c < k; ++c) resp[i * k + c] /= s;
    }
    m_step(false);
    g = Gmm(comps);
    fit.log_likelihood.push_back(detail::total_log_likelihood(g, x));
  }
  fit.model = std::move(g);
  return fit;
}

}  // namespace clickseg::graphcut
