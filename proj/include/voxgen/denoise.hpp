// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/grid.hpp"
#include "voxgen/random.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace voxgen {

/// Standard deviation of the isotropic Gaussian corruption Y = X + N(0, sigma^2 I).
class NoiseLevel {
 public:
  explicit NoiseLevel(double sigma = 0.9);
  double sigma() const noexcept { return sigma_; }
  double variance() const noexcept { return sigma_ * sigma_; }

 private:
  double sigma_;
};

/// Bayes estimator xhat(y) = E[X | Y = y] over flat tensors.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual std::size_t dim() const = 0;
  virtual NoiseLevel noise() const = 0;
  /// Same length as `y`. Must be deterministic and safe to call concurrently.
  virtual std::vector<double> apply(std::span<const double> y) const = 0;
};

class IdentityDenoiser final : public Denoiser {
 public:
  IdentityDenoiser(std::size_t dim, NoiseLevel noise) : dim_(dim), noise_(noise) {}
  std::size_t dim() const override { return dim_; }
  NoiseLevel noise() const override { return noise_; }
  std::vector<double> apply(std::span<const double> y) const override;

 private:
  std::size_t dim_;
  NoiseLevel noise_;
};

/// Smoothed score g(y) = (xhat(y) - y) / sigma^2.
std::vector<double> score_from_denoiser(const Denoiser& den, std::span<const double> y);

struct GmmComponent {
  double weight;
  std::vector<double> mean;
  double tau;  // isotropic standard deviation, may be 0 (point mass)
};

/// Isotropic Gaussian mixture p(x) = sum_i w_i N(x; mu_i, tau_i^2 I).
class GmmModel {
 public:
  GmmModel() = default;
  explicit GmmModel(std::vector<GmmComponent> components);

  std::size_t dim() const { return components_.front().mean.size(); }
  const std::vector<GmmComponent>& components() const noexcept { return components_; }

  /// log p(y) of the smoothed density Y = X + N(0, sigma^2 I).
  double smoothed_log_density(std::span<const double> y, NoiseLevel noise) const;
  /// Posterior component probabilities P(i | y).
  std::vector<double> responsibilities(std::span<const double> y, NoiseLevel noise) const;

 private:
  std::vector<double> log_terms(std::span<const double> y, NoiseLevel noise) const;
  std::vector<GmmComponent> components_;
};

/// Exact posterior mean E[X | Y = y] under the mixture prior.
std::vector<double> gmm_oracle_denoise(const GmmModel& gmm, std::span<const double> y,
                                       NoiseLevel noise);

class GmmDenoiser final : public Denoiser {
 public:
  GmmDenoiser(GmmModel model, NoiseLevel noise) : model_(std::move(model)), noise_(noise) {}
  std::size_t dim() const override { return model_.dim(); }
  NoiseLevel noise() const override { return noise_; }
  std::vector<double> apply(std::span<const double> y) const override {
    return gmm_oracle_denoise(model_, y, noise_);
  }
  const GmmModel& model() const noexcept { return model_; }

 private:
  GmmModel model_;
  NoiseLevel noise_;
};

/// Mean over the batch of |x - den(x + N(0, sigma^2 I))|^2.
double denoising_loss(const Denoiser& den, std::span<const std::vector<double>> batch, Rng& rng);
double denoising_loss(const Denoiser& den, std::span<const VoxelGrid> batch, Rng& rng);

}  // namespace voxgen
