// SPDX-License-Identifier: Apache-2.0
#include "voxgen/errors.hpp"
#include "voxgen/sampler.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace voxgen;

namespace {

ScoreFn zero_score() {
  return [](std::span<const double> y) { return std::vector<double>(y.size(), 0.0); };
}

ScoreFn quadratic_score(double s2) {
  return [s2](std::span<const double> y) {
    std::vector<double> g(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) g[i] = -y[i] / s2;
    return g;
  };
}

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(std::span<const double> x) {
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= static_cast<double>(x.size());
  for (double v : x) m.var += (v - m.mean) * (v - m.mean);
  m.var /= static_cast<double>(x.size() - 1);
  return m;
}

}  // namespace

TEST(SamplerParams, DefaultsAndValidation) {
  const SamplerParams p;
  EXPECT_DOUBLE_EQ(p.delta, 0.5);
  EXPECT_DOUBLE_EQ(p.gamma, 1.0);
  EXPECT_DOUBLE_EQ(p.u, 1.0);
  EXPECT_EQ(p.warmup_steps, 1000);
  EXPECT_EQ(p.steps_between_jumps, 500);
  EXPECT_EQ(p.max_steps_after_warmup, 1000);
  SamplerParams bad;
  bad.delta = 0.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = {};
  bad.u = -1.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = {};
  bad.warmup_steps = -1;
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(InitChain, ZeroVelocityAndMoments) {
  Rng rng(1);
  const auto s = init_chain(100000, NoiseLevel(0.9), rng);
  EXPECT_EQ(s.step, 0);
  for (double v : s.v) ASSERT_EQ(v, 0.0);
  const auto m = moments(s.y);
  EXPECT_NEAR(m.mean, 0.5, 0.02);
  EXPECT_NEAR(m.var, 0.81 + 1.0 / 12.0, 0.03 * (0.81 + 1.0 / 12.0));
}

TEST(LangevinStep, NoScoreNoNoiseLeavesStateFixed) {
  Rng rng(2);
  ChainState s = init_chain(16, NoiseLevel(0.9), rng);
  const auto y0 = s.y;
  const std::vector<double> eps(16, 0.0);
  for (int k = 0; k < 10; ++k) langevin_step(s, zero_score(), SamplerParams{}, eps);
  EXPECT_EQ(s.y, y0);
  for (double v : s.v) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(s.step, 10);
}

TEST(LangevinStep, MatchesHandWrittenUpdate) {
  const SamplerParams p;
  ChainState s{{0.3, -1.0}, {0.2, 0.5}, 7};
  const std::vector<double> eps{0.7, -0.4};
  const double s2 = 0.8;
  langevin_step(s, quadratic_score(s2), p, eps);

  const double d = p.delta, f = std::exp(-p.gamma * d);
  const double c = std::sqrt(p.u * (1 - std::exp(-2 * p.gamma * d)));
  for (int i = 0; i < 2; ++i) {
    double y = std::array{0.3, -1.0}[i], v = std::array{0.2, 0.5}[i];
    y = y + d / 2 * v;
    const double g = -y / s2;
    v = v + p.u * d / 2 * g;
    v = f * v + p.u * d / 2 * g + c * eps[i];
    y = y + d / 2 * v;
    EXPECT_NEAR(s.y[i], y, 1e-15);
    EXPECT_NEAR(s.v[i], v, 1e-15);
  }
  EXPECT_EQ(s.step, 8);
}

TEST(LangevinStep, OneScoreEvaluationPerStep) {
  int calls = 0;
  const ScoreFn counted = [&calls](std::span<const double> y) {
    ++calls;
    return std::vector<double>(y.size(), 0.0);
  };
  Rng rng(3);
  ChainState s = init_chain(8, NoiseLevel(0.9), rng);
  for (int k = 0; k < 250; ++k) langevin_step(s, counted, SamplerParams{}, rng);
  EXPECT_EQ(calls, 250);
}

TEST(LangevinStep, ZeroScoreVelocityVarianceIsU) {
  Rng rng(4);
  ChainState s = init_chain(1, NoiseLevel(0.9), rng);
  std::vector<double> vs;
  for (int k = 0; k < 100000; ++k) {
    langevin_step(s, zero_score(), SamplerParams{}, rng);
    vs.push_back(s.v[0]);
  }
  EXPECT_NEAR(moments(vs).var, 1.0, 0.05);
}

TEST(LangevinStep, GaussianTargetPositionVariance) {
  Rng rng(5);
  ChainState s = init_chain(1, NoiseLevel(0.9), rng);
  std::vector<double> ys;
  for (int k = 0; k < 100000; ++k) {
    langevin_step(s, quadratic_score(1.0), SamplerParams{}, rng);
    ys.push_back(s.y[0]);
  }
  EXPECT_NEAR(moments(ys).var, 1.0, 0.1);
}

TEST(LangevinStep, VelocityDecorrelatesUnderStrongFriction) {
  SamplerParams p;
  p.gamma = 8.0;  // exp(-gamma * delta) = exp(-4) < 0.05
  ASSERT_LT(std::exp(-p.gamma * p.delta), 0.05);
  Rng rng(6);
  ChainState s = init_chain(1, NoiseLevel(0.9), rng);
  std::vector<double> vs;
  for (int k = 0; k < 50000; ++k) {
    langevin_step(s, zero_score(), p, rng);
    vs.push_back(s.v[0]);
  }
  const auto m = moments(vs);
  double c = 0.0;
  for (std::size_t k = 1; k < vs.size(); ++k) c += (vs[k] - m.mean) * (vs[k - 1] - m.mean);
  c /= static_cast<double>(vs.size() - 1) * m.var;
  EXPECT_LT(std::abs(c), 0.05);
}

TEST(LangevinStep, ConservesEnergyWithoutFrictionOrNoise) {
  SamplerParams p;
  p.gamma = 0.0;
  p.delta = 0.01;
  ChainState s{{1.0, -0.5}, {0.3, 0.8}, 0};
  const std::vector<double> eps(2, 0.0);
  auto energy = [&] {
    double e = 0.0;
    for (int i = 0; i < 2; ++i) e += 0.5 * s.y[i] * s.y[i] + 0.5 * s.v[i] * s.v[i] / p.u;
    return e;
  };
  const double e0 = energy();
  for (int k = 0; k < 1000; ++k) {
    langevin_step(s, quadratic_score(1.0), p, eps);
    ASSERT_LT(std::abs(energy() - e0) / e0, 0.01);
  }
}

TEST(LangevinStep, NonFiniteStateIsDivergence) {
  const ScoreFn bad = [](std::span<const double> y) {
    return std::vector<double>(y.size(), std::numeric_limits<double>::infinity());
  };
  ChainState s{{0.0}, {0.0}, 41};
  const std::vector<double> eps{0.0};
  try {
    langevin_step(s, bad, SamplerParams{}, eps);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.step(), 42);
  }
}

TEST(Jump, IdentityAndPointMass) {
  const std::vector<double> y{0.3, -2.0, 5.0};
  IdentityDenoiser id(3, NoiseLevel(0.9));
  EXPECT_EQ(jump(y, id), y);
  const std::vector<double> mu{1.0, 2.0, 3.0};
  GmmDenoiser pm(GmmModel({{1.0, mu, 0.0}}), NoiseLevel(0.9));
  EXPECT_EQ(jump(y, pm), mu);
  EXPECT_THROW(jump(std::vector<double>(2, 0.0), id), InvalidArgument);
}

TEST(WalkJump, SingleSampleIsCompositionOfPrimitives) {
  GmmDenoiser den(GmmModel({{0.5, {1.0, 0.0}, 0.3}, {0.5, {-1.0, 1.0}, 0.2}}), NoiseLevel(0.9));
  SamplerParams p;
  p.warmup_steps = 0;
  p.steps_between_jumps = 1;
  p.max_steps_after_warmup = 1;
  const auto run = walk_jump_sample(den, p, 1, 77);

  Rng rng = chain_rng(77, 0);
  ChainState s = init_chain(2, den.noise(), rng);
  langevin_step(s, denoiser_score(den), p, rng);
  ASSERT_EQ(run.samples.size(), 1u);
  EXPECT_EQ(run.samples[0], jump(s.y, den));
  EXPECT_EQ(run.jumps[0].step, 1);
}

TEST(WalkJump, DeterministicAcrossThreadCounts) {
  GmmDenoiser den(GmmModel({{0.3, {3.0, 0.0, 0.0}, 0.1}, {0.7, {-3.0, 0.0, 0.0}, 0.1}}),
                  NoiseLevel(1.0));
  SamplerParams p;
  p.warmup_steps = 50;
  p.steps_between_jumps = 10;
  p.max_steps_after_warmup = 40;
  p.n_chains = 5;
  const auto a = walk_jump_sample(den, p, 23, 9, {.threads = 1});
  const auto b = walk_jump_sample(den, p, 23, 9, {.threads = 4});
  const auto c = walk_jump_sample(den, p, 23, 10, {.threads = 1});
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  ASSERT_EQ(a.samples.size(), 23u);
  ASSERT_EQ(a.chains.size(), 5u);
  // 23 over 5 chains: quotas 5,5,5,4,4; four jumps per chain before a restart
  EXPECT_EQ(a.chains[0].restarts, 1);
  EXPECT_EQ(a.chains[4].restarts, 0);
  EXPECT_EQ(a.chains[0].score_norm_trace.size(), 5u);
}

TEST(WalkJump, SingleGaussianMean) {
  const std::vector<double> mu{0.7, -0.3};
  GmmDenoiser den(GmmModel({{1.0, mu, 0.5}}), NoiseLevel(0.5));
  SamplerParams p;
  p.warmup_steps = 200;
  p.steps_between_jumps = 20;
  p.max_steps_after_warmup = 2000;
  p.n_chains = 10;
  const auto run = walk_jump_sample(den, p, 1000, 3);
  // jumps are 20 steps apart, long enough to treat them as independent draws
  for (int a = 0; a < 2; ++a) {
    std::vector<double> xs;
    for (const auto& s : run.samples) xs.push_back(s[a]);
    const auto m = moments(xs);
    EXPECT_NEAR(m.mean, mu[a], 3.0 * std::sqrt(m.var / static_cast<double>(xs.size())));
  }
}

TEST(WalkJump, DivergencePolicies) {
  class Exploding final : public Denoiser {
   public:
    std::size_t dim() const override { return 2; }
    NoiseLevel noise() const override { return NoiseLevel(1.0); }
    std::vector<double> apply(std::span<const double> y) const override {
      return {y[0] * 1e300, y[1] * 1e300};
    }
  } den;
  SamplerParams p;
  p.warmup_steps = 5;
  p.steps_between_jumps = 1;
  p.max_steps_after_warmup = 1;
  p.n_chains = 2;
  try {
    walk_jump_sample(den, p, 2, 1);
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.chain(), 0);
    EXPECT_GE(e.step(), 1);
    EXPECT_NE(std::string(e.what()).find("chain 0"), std::string::npos);
  }
}

TEST(WalkJump, ReseedSkipsDivergedChains) {
  // Diverges whenever the chain starts with y[0] < 0.5, which happens for
  // roughly half of the fresh inits.
  class Flaky final : public Denoiser {
   public:
    std::size_t dim() const override { return 1; }
    NoiseLevel noise() const override { return NoiseLevel(0.5); }
    std::vector<double> apply(std::span<const double> y) const override {
      return {y[0] < 0.5 ? std::numeric_limits<double>::quiet_NaN() : 1.0};
    }
  } den;
  SamplerParams p;
  p.warmup_steps = 0;
  p.steps_between_jumps = 1;
  p.max_steps_after_warmup = 1;
  p.n_chains = 1;
  const auto run = walk_jump_sample(den, p, 20, 5, {.on_divergence = DivergencePolicy::Reseed});
  EXPECT_EQ(run.samples.size(), 20u);
  EXPECT_GT(run.chains[0].divergences, 0);
  EXPECT_THROW(walk_jump_sample(den, p, 20, 5), DivergenceError);
}

TEST(WalkJump, RejectsBadSchedules) {
  IdentityDenoiser den(2, NoiseLevel(1.0));
  SamplerParams p;
  EXPECT_THROW(walk_jump_sample(den, p, 0, 1), InvalidArgument);
  p.steps_between_jumps = 0;
  EXPECT_THROW(walk_jump_sample(den, p, 1, 1), InvalidArgument);
  p.steps_between_jumps = 600;
  p.max_steps_after_warmup = 500;
  EXPECT_THROW(walk_jump_sample(den, p, 1, 1), InvalidArgument);
}

TEST(WalkJump, JumpLogIsOneRecordPerLine) {
  const std::vector<JumpRecord> jumps{{0, 500, 1.5}, {3, 1000, 0.25}};
  std::ostringstream os;
  write_jump_log(os, jumps);
  EXPECT_EQ(os.str(),
            "{\"chain\":0,\"mean_score_norm\":1.5,\"step\":500}\n"
            "{\"chain\":3,\"mean_score_norm\":0.25,\"step\":1000}\n");
}
