// SPDX-License-Identifier: Apache-2.0
#include "voxgen/conv_denoiser.hpp"
#include "voxgen/errors.hpp"
#include "voxgen/io.hpp"
#include "voxgen/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

using namespace voxgen;

namespace {

ConvArchitecture micro_arch() {
  ConvArchitecture a;
  a.channels = 2;
  a.length = 4;
  a.width = 3;
  a.residual_blocks = 2;
  return a;
}

// Randomises every parameter so no gradient entry is trivially zero.
ConvDenoiser random_model(const ConvArchitecture& arch, std::uint64_t seed) {
  Rng rng(seed);
  ConvDenoiser model(arch, rng);
  std::normal_distribution<double> n(0.0, 0.3);
  auto& p = model.mutable_params();
  for (auto& t : p.weights) {
    for (auto& v : t) v = n(rng);
  }
  p.ema = p.weights;
  for (auto& t : p.ema) {
    for (auto& v : t) v += n(rng);
  }
  return model;
}

std::vector<std::vector<double>> random_batch(std::size_t n, std::size_t size, Rng& rng,
                                              double scale) {
  std::normal_distribution<double> g(0.0, scale);
  std::vector<std::vector<double>> out(n, std::vector<double>(size));
  for (auto& b : out) {
    for (auto& v : b) v = g(rng);
  }
  return out;
}

}  // namespace

TEST(ConvArchitecture, TextRoundTrip) {
  ConvArchitecture a = micro_arch();
  a.sigma = 0.75;
  a.ema_decay = 0.99;
  EXPECT_EQ(ConvArchitecture::from_text(a.to_text()), a);
  EXPECT_THROW(ConvArchitecture::from_text("model=unet\n"), FormatError);
}

TEST(ConvArchitecture, TensorSizes) {
  const auto sizes = micro_arch().tensor_sizes();
  ASSERT_EQ(sizes.size(), 8u);
  EXPECT_EQ(sizes[0], 3u * 2 * 27);  // stem weights
  EXPECT_EQ(sizes[1], 3u);           // stem bias
  EXPECT_EQ(sizes[2], 3u * 3 * 27);
  EXPECT_EQ(sizes[6], 2u * 3 * 27);  // head weights
  EXPECT_EQ(sizes[7], 2u);
}

TEST(ConvDenoiser, OutputShapeMatchesInput) {
  for (int len : {4, 5, 8, 12, 16}) {
    ConvArchitecture a = micro_arch();
    a.length = len;
    const ConvDenoiser model = random_model(a, 1);
    Rng rng(2);
    const auto y = random_batch(1, 2 * static_cast<std::size_t>(len * len * len), rng, 1.0)[0];
    EXPECT_EQ(model.apply(y).size(), y.size());
    EXPECT_EQ(model.apply_grid(y, len).size(), y.size());
  }
}

TEST(ConvDenoiser, ApplyRejectsWrongShape) {
  const ConvDenoiser model = random_model(micro_arch(), 1);
  const std::vector<double> y(10, 0.0);
  EXPECT_THROW(model.apply(y), InvalidArgument);
}

TEST(ConvDenoiser, ApplyIsDeterministic) {
  const ConvDenoiser model = random_model(micro_arch(), 3);
  Rng rng(4);
  const auto y = random_batch(1, model.dim(), rng, 1.0)[0];
  EXPECT_EQ(model.apply(y), model.apply(y));
}

TEST(ConvDenoiser, GradientMatchesFiniteDifferences) {
  const ConvArchitecture arch = micro_arch();
  ConvDenoiser model = random_model(arch, 5);
  Rng rng(6);
  const auto noisy = random_batch(2, model.dim(), rng, 1.0);
  const auto clean = random_batch(2, model.dim(), rng, 0.5);

  ParamTensors grad;
  model.loss_and_gradient(noisy, clean, arch.length, grad);

  const double h = 1e-4;
  ParamTensors scratch;
  auto& w = model.mutable_params().weights;
  double worst = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t) {
    for (std::size_t i = 0; i < w[t].size(); ++i) {
      const double keep = w[t][i];
      w[t][i] = keep + h;
      const double up = model.loss_and_gradient(noisy, clean, arch.length, scratch);
      w[t][i] = keep - h;
      const double down = model.loss_and_gradient(noisy, clean, arch.length, scratch);
      w[t][i] = keep;
      const double fd = (up - down) / (2 * h);
      const double rel = std::abs(fd - grad[t][i]) / std::max({std::abs(fd), std::abs(grad[t][i]), 1e-3});
      worst = std::max(worst, rel);
    }
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(ConvDenoiser, EmaConvergesGeometrically) {
  ConvDenoiser model = random_model(micro_arch(), 7);
  auto& p = model.mutable_params();
  p.ema = p.weights;
  for (auto& t : p.ema) {
    for (auto& v : t) v += 1.0;  // shadow starts one unit away everywhere
  }
  const double decay = p.arch.ema_decay;
  ASSERT_DOUBLE_EQ(decay, 0.999);
  for (int k = 1; k <= 3000; ++k) {
    model.update_ema();
    if (k % 1000 == 0) {
      for (std::size_t t = 0; t < p.ema.size(); ++t) {
        for (std::size_t i = 0; i < p.ema[t].size(); ++i) {
          ASSERT_NEAR(p.ema[t][i] - p.weights[t][i], std::pow(decay, k), 1e-9);
        }
      }
    }
  }
}

TEST(ConvDenoiser, EmaUsedForApplyByDefault) {
  ConvDenoiser model = random_model(micro_arch(), 8);
  Rng rng(9);
  const auto y = random_batch(1, model.dim(), rng, 1.0)[0];
  const auto raw = model.apply_grid(y, 4, model.params().weights);
  const auto shadow = model.apply_grid(y, 4, model.params().ema);
  EXPECT_NE(raw, shadow);
  EXPECT_EQ(model.apply(y), shadow);
  model.set_use_ema(false);
  EXPECT_EQ(model.apply(y), raw);
}

TEST(Checkpoint, RoundTripIsStableAfterFloatRounding) {
  const ConvDenoiser model = random_model(micro_arch(), 10);
  std::stringstream first;
  write_checkpoint(first, model.params());
  const std::string bytes = first.str();
  const ConvDenoiserParams loaded = read_checkpoint(first);
  EXPECT_EQ(loaded.arch, model.params().arch);
  for (std::size_t t = 0; t < loaded.weights.size(); ++t) {
    for (std::size_t i = 0; i < loaded.weights[t].size(); ++i) {
      EXPECT_EQ(loaded.weights[t][i],
                static_cast<double>(static_cast<float>(model.params().weights[t][i])));
    }
  }
  std::stringstream second;
  write_checkpoint(second, loaded);
  EXPECT_EQ(second.str(), bytes);
}

TEST(Checkpoint, RejectsBadInput) {
  const ConvDenoiser model = random_model(micro_arch(), 11);
  std::stringstream ss;
  write_checkpoint(ss, model.params());
  std::string bytes = ss.str();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  std::stringstream a(bad_magic);
  EXPECT_THROW(read_checkpoint(a), FormatError);

  std::string bad_version = bytes;
  bad_version[4] = 9;
  std::stringstream b(bad_version);
  EXPECT_THROW(read_checkpoint(b), FormatError);

  std::stringstream c(bytes.substr(0, bytes.size() - 3));
  EXPECT_THROW(read_checkpoint(c), FormatError);
}

TEST(Train, EmaDecayZeroTracksWeights) {
  Rng rng(12);
  const std::vector<Molecule> data{water()};
  GridSpec spec;
  spec.length = 8;
  spec.resolution = 0.4;
  spec.channels = 2;
  TrainHyper h;
  h.steps = 5;
  h.ema_decay = 0.0;
  h.width = 4;
  h.validation_size = 2;
  const auto r = train_denoiser(data, spec, ElementSet::parse("O,H"), NoiseLevel(0.9), h, rng);
  EXPECT_EQ(r.model.params().ema, r.model.params().weights);
  EXPECT_EQ(r.loss_trace.size(), 5u);
}

TEST(Train, RejectsBadInput) {
  Rng rng(13);
  GridSpec spec;
  spec.length = 8;
  spec.channels = 2;
  const auto els = ElementSet::parse("O,H");
  TrainHyper h;
  EXPECT_THROW(train_denoiser(std::vector<Molecule>{}, spec, els, NoiseLevel(0.9), h, rng),
               InvalidArgument);
  // water spans more than the 2 A grid once shifted
  EXPECT_THROW(train_denoiser(std::vector<Molecule>{water()}, spec, els, NoiseLevel(0.9), h, rng),
               InvalidArgument);
  h.steps = 0;
  spec.length = 16;
  EXPECT_THROW(train_denoiser(std::vector<Molecule>{water()}, spec, els, NoiseLevel(0.9), h, rng),
               InvalidArgument);
}

TEST(Train, DivergenceReportsStep) {
  Rng rng(14);
  GridSpec spec;
  spec.length = 8;
  spec.resolution = 0.4;
  spec.channels = 2;
  TrainHyper h;
  h.steps = 200;
  h.learning_rate = std::numeric_limits<double>::infinity();  // poisons the weights at once
  h.width = 4;
  h.validation_size = 1;
  try {
    train_denoiser(std::vector<Molecule>{water()}, spec, ElementSet::parse("O,H"), NoiseLevel(0.9),
                   h, rng);
    FAIL() << "expected TrainingFailure";
  } catch (const TrainingFailure& e) {
    EXPECT_GE(e.step(), 0);
    EXPECT_LT(e.step(), 200);
  }
}

TEST(Train, SingleMoleculeBeatsHalfIdentityBaseline) {
  Rng rng(15);
  GridSpec spec;
  spec.length = 12;
  spec.channels = 2;
  const auto els = ElementSet::parse("O,H");
  Molecule m{{Atom{Element::O, {0, 0, 0}}, Atom{Element::H, {0.6, 0.3, 0}}}};
  TrainHyper h;
  h.steps = 2000;
  h.validate_every = 1000;
  const auto r = train_denoiser(std::vector<Molecule>{m}, spec, els, NoiseLevel(0.9), h, rng);
  EXPECT_DOUBLE_EQ(r.identity_baseline, 0.81 * 2 * 12 * 12 * 12);
  EXPECT_LT(r.validation_loss, 0.5 * r.identity_baseline);
  // the network learns more than predicting an empty grid
  EXPECT_LT(r.validation_trace.back().second, r.validation_trace.front().second);
}
