// SPDX-License-Identifier: Apache-2.0
#include "voxgen/denoise.hpp"

#include "voxgen/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace voxgen {

NoiseLevel::NoiseLevel(double sigma) : sigma_(sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("noise level must be positive and finite");
  }
}

std::vector<double> IdentityDenoiser::apply(std::span<const double> y) const {
  return {y.begin(), y.end()};
}

std::vector<double> score_from_denoiser(const Denoiser& den, std::span<const double> y) {
  if (y.size() != den.dim()) {
    throw InvalidArgument("score input has " + std::to_string(y.size()) +
                          " entries, denoiser expects " + std::to_string(den.dim()));
  }
  const double var = den.noise().variance();
  std::vector<double> g = den.apply(y);
  if (g.size() != y.size()) throw InvalidArgument("denoiser changed the tensor shape");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - y[i]) / var;
  return g;
}

GmmModel::GmmModel(std::vector<GmmComponent> components) : components_(std::move(components)) {
  if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
  const std::size_t d = components_.front().mean.size();
  if (d == 0) throw InvalidArgument("mixture dimension must be >= 1");
  double total = 0.0;
  for (const auto& c : components_) {
    if (c.mean.size() != d) throw InvalidArgument("mixture components disagree on dimension");
    if (!(c.weight > 0.0)) throw InvalidArgument("mixture weights must be positive");
    if (!(c.tau >= 0.0) || !std::isfinite(c.tau)) {
      throw InvalidArgument("component std must be finite and >= 0");
    }
    for (double m : c.mean) {
      if (!std::isfinite(m)) throw InvalidArgument("component mean is not finite");
    }
    total += c.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("mixture weights must sum to 1");
}

std::vector<double> GmmModel::log_terms(std::span<const double> y, NoiseLevel noise) const {
  if (y.size() != dim()) throw InvalidArgument("input dimension does not match the mixture");
  const double d = static_cast<double>(dim());
  std::vector<double> out;
  out.reserve(components_.size());
  for (const auto& c : components_) {
    const double s2 = c.tau * c.tau + noise.variance();
    double r2 = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double diff = y[k] - c.mean[k];
      r2 += diff * diff;
    }
    out.push_back(std::log(c.weight) - 0.5 * d * std::log(2.0 * std::numbers::pi * s2) -
                  0.5 * r2 / s2);
  }
  return out;
}

double GmmModel::smoothed_log_density(std::span<const double> y, NoiseLevel noise) const {
  const auto t = log_terms(y, noise);
  const double m = *std::max_element(t.begin(), t.end());
  double s = 0.0;
  for (double v : t) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> GmmModel::responsibilities(std::span<const double> y,
                                               NoiseLevel noise) const {
  auto t = log_terms(y, noise);
  const double m = *std::max_element(t.begin(), t.end());
  double s = 0.0;
  for (auto& v : t) {
    v = std::exp(v - m);
    s += v;
  }
  for (auto& v : t) v /= s;
  return t;
}

std::vector<double> gmm_oracle_denoise(const GmmModel& gmm, std::span<const double> y,
                                       NoiseLevel noise) {
  const auto r = gmm.responsibilities(y, noise);
  const double var = noise.variance();
  std::vector<double> out(y.size(), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) {
    const auto& c = gmm.components()[i];
    const double t2 = c.tau * c.tau;
    const double denom = t2 + var;
    for (std::size_t k = 0; k < y.size(); ++k) {
      out[k] += r[i] * (t2 * y[k] + var * c.mean[k]) / denom;
    }
  }
  return out;
}

double denoising_loss(const Denoiser& den, std::span<const std::vector<double>> batch,
                      Rng& rng) {
  if (batch.empty()) throw InvalidArgument("denoising loss needs a non-empty batch");
  std::normal_distribution<double> n(0.0, den.noise().sigma());
  double total = 0.0;
  std::vector<double> y;
  for (const auto& x : batch) {
    if (x.size() != den.dim()) throw InvalidArgument("batch item has the wrong size");
    y.resize(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) y[k] = x[k] + n(rng);
    const auto xhat = den.apply(y);
    double err = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double e = x[k] - xhat[k];
      err += e * e;
    }
    total += err;
  }
  return total / static_cast<double>(batch.size());
}

double denoising_loss(const Denoiser& den, std::span<const VoxelGrid> batch, Rng& rng) {
  std::vector<std::vector<double>> flat;
  flat.reserve(batch.size());
  for (const auto& g : batch) flat.push_back(g.values);
  return denoising_loss(den, std::span<const std::vector<double>>(flat), rng);
}

}  // namespace voxgen
