// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "voxgen/denoise.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace voxgen {

/// Layer stack of the volumetric denoiser:
///
///   h0      = stem(y)                       3x3x3 conv, channels -> width
///   h{b+1}  = h{b} + block_b(silu(h{b}))    3x3x3 conv, width -> width
///   xhat    = sigmoid(head(silu(h{B})))     3x3x3 conv, width -> channels
///
/// All convolutions use stride 1 and zero padding 1, so the output grid has
/// the input's shape for any edge length. The sigmoid keeps every prediction
/// inside the occupancy range [0, 1].
struct ConvArchitecture {
  int channels = 1;
  int length = 12;  // grid edge the model is bound to through Denoiser::dim()
  int width = 8;
  int residual_blocks = 2;
  double sigma = 0.9;
  double ema_decay = 0.999;

  void validate() const;
  /// Parameter tensor sizes in declaration order.
  std::vector<std::size_t> tensor_sizes() const;
  std::vector<std::string> tensor_names() const;

  /// key=value lines, stable across versions of the format.
  std::string to_text() const;
  static ConvArchitecture from_text(std::string_view text);

  bool operator==(const ConvArchitecture&) const = default;
};

using ParamTensors = std::vector<std::vector<double>>;

struct ConvDenoiserParams {
  ConvArchitecture arch;
  ParamTensors weights;  // trained parameters
  ParamTensors ema;      // exponential-moving-average shadow, same shapes

  void validate() const;
};

class ConvDenoiser final : public Denoiser {
 public:
  /// Random initialisation. The head starts with small weights and a negative
  /// bias so the untrained model predicts an almost empty grid.
  ConvDenoiser(const ConvArchitecture& arch, Rng& rng);
  explicit ConvDenoiser(ConvDenoiserParams params);

  std::size_t dim() const override;
  NoiseLevel noise() const override { return NoiseLevel(params_.arch.sigma); }
  /// Uses the EMA shadow unless set_use_ema(false).
  std::vector<double> apply(std::span<const double> y) const override;

  /// Forward pass on a grid of any edge length.
  std::vector<double> apply_grid(std::span<const double> y, int length) const;
  std::vector<double> apply_grid(std::span<const double> y, int length,
                                 const ParamTensors& weights) const;

  /// Mean over the batch of |clean - f(noisy)|^2 using the trained (non-EMA)
  /// weights, with its gradient written to `grad` (resized to match).
  double loss_and_gradient(std::span<const std::vector<double>> noisy,
                           std::span<const std::vector<double>> clean, int length,
                           ParamTensors& grad) const;

  /// shadow <- decay * shadow + (1 - decay) * weights
  void update_ema();

  void set_use_ema(bool on) noexcept { use_ema_ = on; }
  bool use_ema() const noexcept { return use_ema_; }

  const ConvDenoiserParams& params() const noexcept { return params_; }
  ConvDenoiserParams& mutable_params() noexcept { return params_; }

 private:
  ConvDenoiserParams params_;
  bool use_ema_ = true;
};

/// Binary checkpoint:
///   "VXCK" | u32 version | u32 n + n bytes architecture text |
///   weights (f32 LE, declaration order) | EMA shadow (f32 LE)
/// Parameters are held in double precision in memory and stored rounded to
/// float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void write_checkpoint(std::ostream& os, const ConvDenoiserParams& params);
ConvDenoiserParams read_checkpoint(std::istream& is);
void save_checkpoint(const std::string& path, const ConvDenoiserParams& params);
ConvDenoiserParams load_checkpoint(const std::string& path);

}  // namespace voxgen
