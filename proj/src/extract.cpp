// SPDX-License-Identifier: Apache-2.0
#include "voxgen/extract.hpp"

#include "voxgen/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace voxgen {

void RefineConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidArgument("threshold must lie in (0, 1)");
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(tolerance >= 0.0)) throw InvalidArgument("tolerance must be >= 0");
  if (!(merge_distance_voxels >= 0.0)) throw InvalidArgument("merge distance must be >= 0");
}

PeakSet detect_peaks(const VoxelGrid& grid, const RefineConfig& cfg) {
  cfg.validate();
  const GridSpec& spec = grid.spec;
  const int len = spec.length;
  std::vector<double> t(grid.values.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = grid.values[i] >= cfg.threshold ? grid.values[i] : 0.0;
  }

  std::vector<char> candidate(t.size(), 0);
  for (int c = 0; c < spec.channels; ++c) {
    for (int i = 0; i < len; ++i) {
      for (int j = 0; j < len; ++j) {
        for (int k = 0; k < len; ++k) {
          const double v = t[spec.index(c, i, j, k)];
          if (v == 0.0) continue;
          bool is_max = true;
          for (int a = std::max(i - 1, 0); is_max && a <= std::min(i + 1, len - 1); ++a) {
            for (int b = std::max(j - 1, 0); is_max && b <= std::min(j + 1, len - 1); ++b) {
              for (int e = std::max(k - 1, 0); e <= std::min(k + 1, len - 1); ++e) {
                if (t[spec.index(c, a, b, e)] > v) {
                  is_max = false;
                  break;
                }
              }
            }
          }
          candidate[spec.index(c, i, j, k)] = is_max;
        }
      }
    }
  }

  // Adjacent maxima necessarily share a value, so each 26-connected
  // component of candidates is one plateau. The scan visits its smallest
  // voxel first.
  PeakSet out;
  std::vector<char> seen(t.size(), 0);
  std::deque<std::array<int, 3>> queue;
  for (int c = 0; c < spec.channels; ++c) {
    for (int i = 0; i < len; ++i) {
      for (int j = 0; j < len; ++j) {
        for (int k = 0; k < len; ++k) {
          const auto idx = spec.index(c, i, j, k);
          if (!candidate[idx] || seen[idx]) continue;
          out.peaks.push_back({c, {i, j, k}, grid.values[idx]});
          seen[idx] = 1;
          queue.push_back({i, j, k});
          while (!queue.empty()) {
            const auto [x, y, z] = queue.front();
            queue.pop_front();
            for (int a = std::max(x - 1, 0); a <= std::min(x + 1, len - 1); ++a) {
              for (int b = std::max(y - 1, 0); b <= std::min(y + 1, len - 1); ++b) {
                for (int e = std::max(z - 1, 0); e <= std::min(z + 1, len - 1); ++e) {
                  const auto n = spec.index(c, a, b, e);
                  if (candidate[n] && !seen[n]) {
                    seen[n] = 1;
                    queue.push_back({a, b, e});
                  }
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ReconstructionObjective::ReconstructionObjective(const VoxelGrid& target, std::vector<int> channels,
                                                 KernelCutoff cutoff)
    : target_(target), channels_(std::move(channels)), cutoff_(cutoff) {
  target.spec.validate();
  for (int c : channels_) {
    if (c < 0 || c >= target.spec.channels) throw InvalidArgument("atom channel out of range");
  }
  for (double v : target.values) target_sq_ += v * v;
  q_.assign(target.values.size(), 1.0);
  mark_.assign(target.values.size(), 0);
}

namespace {

struct AtomBox {
  int lo[3];
  int hi[3];
  // Per-axis offsets (voxel centre - atom) and 1D Gaussian factors.
  std::vector<double> off[3];
  std::vector<double> fac[3];
};

AtomBox atom_box(const GridSpec& spec, const double* p, bool exact, double cutoff, double w2) {
  AtomBox box;
  for (int a = 0; a < 3; ++a) {
    int lo = 0, hi = spec.length - 1;
    if (!exact) {
      lo = std::max(lo, static_cast<int>(std::ceil((p[a] - cutoff - spec.origin()) / spec.resolution - 0.5)));
      hi = std::min(hi, static_cast<int>(std::floor((p[a] + cutoff - spec.origin()) / spec.resolution - 0.5)));
    }
    box.lo[a] = lo;
    box.hi[a] = hi;
    for (int i = lo; i <= hi; ++i) {
      const double d = spec.origin() + (i + 0.5) * spec.resolution - p[a];
      box.off[a].push_back(d);
      box.fac[a].push_back(std::exp(-d * d / w2));
    }
  }
  return box;
}

}  // namespace

double ReconstructionObjective::evaluate(std::span<const double> coords,
                                         std::span<double> grad) const {
  const std::size_t n_atoms = channels_.size();
  if (coords.size() != 3 * n_atoms) throw InvalidArgument("coordinate vector has the wrong size");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != coords.size()) throw InvalidArgument("gradient has the wrong size");

  const GridSpec& spec = target_.spec;
  const double w2 = kernel_width_sq(spec.atom_radius);
  const bool exact = cutoff_ == KernelCutoff::Exact;
  const double cutoff = kKernelCutoffRadii * spec.atom_radius;
  const double cutoff2 = cutoff * cutoff;

  if (++epoch_ == 0) {
    std::fill(mark_.begin(), mark_.end(), 0u);
    epoch_ = 1;
  }
  std::vector<std::size_t> touched;
  std::vector<AtomBox> boxes;
  boxes.reserve(n_atoms);

  auto for_each_voxel = [&](const AtomBox& box, int channel, auto&& fn) {
    for (int i = box.lo[0]; i <= box.hi[0]; ++i) {
      const int ii = i - box.lo[0];
      for (int j = box.lo[1]; j <= box.hi[1]; ++j) {
        const int jj = j - box.lo[1];
        const double dxy2 = box.off[0][ii] * box.off[0][ii] + box.off[1][jj] * box.off[1][jj];
        const double fxy = box.fac[0][ii] * box.fac[1][jj];
        for (int k = box.lo[2]; k <= box.hi[2]; ++k) {
          const int kk = k - box.lo[2];
          if (!exact && dxy2 + box.off[2][kk] * box.off[2][kk] > cutoff2) continue;
          fn(spec.index(channel, i, j, k), fxy * box.fac[2][kk], ii, jj, kk);
        }
      }
    }
  };

  for (std::size_t n = 0; n < n_atoms; ++n) {
    boxes.push_back(atom_box(spec, coords.data() + 3 * n, exact, cutoff, w2));
    for_each_voxel(boxes.back(), channels_[n], [&](std::size_t idx, double v, int, int, int) {
      if (mark_[idx] != epoch_) {
        mark_[idx] = epoch_;
        q_[idx] = 1.0;
        touched.push_back(idx);
      }
      q_[idx] *= 1.0 - v;
    });
  }

  double err = target_sq_;
  for (std::size_t idx : touched) {
    const double t = target_.values[idx];
    const double r = 1.0 - q_[idx] - t;
    err += r * r - t * t;
  }

  if (want_grad) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t n = 0; n < n_atoms; ++n) {
      const AtomBox& box = boxes[n];
      double g[3] = {0.0, 0.0, 0.0};
      for_each_voxel(box, channels_[n], [&](std::size_t idx, double v, int ii, int jj, int kk) {
        const double keep = 1.0 - v;
        double q_others;
        if (keep > 1e-12) {
          q_others = q_[idx] / keep;
        } else {
          // Atom sits on the voxel centre; rebuild the product without it.
          q_others = 1.0;
          for (std::size_t m = 0; m < n_atoms; ++m) {
            if (m == n || channels_[m] != channels_[n]) continue;
            const AtomBox& other = boxes[m];
            const int c = static_cast<int>(idx % spec.length);
            const int b = static_cast<int>((idx / spec.length) % spec.length);
            const int a = static_cast<int>((idx / spec.length / spec.length) % spec.length);
            if (a < other.lo[0] || a > other.hi[0] || b < other.lo[1] || b > other.hi[1] ||
                c < other.lo[2] || c > other.hi[2]) {
              continue;
            }
            const double ox = other.off[0][a - other.lo[0]];
            const double oy = other.off[1][b - other.lo[1]];
            const double oz = other.off[2][c - other.lo[2]];
            if (!exact && ox * ox + oy * oy + oz * oz > cutoff2) continue;
            q_others *= 1.0 - other.fac[0][a - other.lo[0]] * other.fac[1][b - other.lo[1]] *
                                  other.fac[2][c - other.lo[2]];
          }
        }
        const double r = 1.0 - q_[idx] - target_.values[idx];
        // d occ / d x = q_others * v * 2 (C - x) / w2
        const double s = 2.0 * r * q_others * v * 2.0 / w2;
        g[0] += s * box.off[0][ii];
        g[1] += s * box.off[1][jj];
        g[2] += s * box.off[2][kk];
      });
      grad[3 * n + 0] = g[0];
      grad[3 * n + 1] = g[1];
      grad[3 * n + 2] = g[2];
    }
  }
  return err;
}

namespace {

using VecX = Eigen::VectorXd;

double eval(const ReconstructionObjective& f, const VecX& x, VecX& g) {
  g.resize(x.size());
  return f.evaluate({x.data(), static_cast<std::size_t>(x.size())},
                    {g.data(), static_cast<std::size_t>(g.size())});
}

void check_finite(const VecX& x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      const auto peak = static_cast<std::size_t>(i / 3);
      throw RefinementFailure(peak, "refinement produced non-finite coordinates for peak " +
                                        std::to_string(peak));
    }
  }
}

bool converged(double before, double after, double tol) {
  if (after <= 0.0) return true;
  return (before - after) <= tol * std::max(before, 1e-300);
}

// Armijo backtracking along `dir`, starting at step `alpha`. On success
// updates x, err, g and returns the accepted step; returns 0 on failure.
double backtrack(const ReconstructionObjective& f, VecX& x, double& err, VecX& g,
                 const VecX& dir, double alpha) {
  const double slope = g.dot(dir);
  check_finite(x + alpha * dir);
  if (!(slope < 0.0)) return 0.0;
  VecX trial_g;
  for (int tries = 0; tries < 60; ++tries) {
    const VecX trial = x + alpha * dir;
    check_finite(trial);
    const double e = eval(f, trial, trial_g);
    if (std::isfinite(e) && e <= err + 1e-4 * alpha * slope) {
      x = trial;
      err = e;
      g = trial_g;
      return alpha;
    }
    alpha *= 0.5;
  }
  return 0.0;
}

void gradient_descent(const ReconstructionObjective& f, VecX& x, const RefineConfig& cfg,
                      RefineResult& res) {
  VecX g;
  double err = eval(f, x, g);
  res.initial_error = err;
  res.error_trace.push_back(err);
  double alpha = 1e-3;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (err <= 0.0 || g.squaredNorm() == 0.0) break;
    const double before = err;
    const double step = backtrack(f, x, err, g, -g, alpha);
    if (step == 0.0) break;
    ++res.iterations;
    res.error_trace.push_back(err);
    alpha = std::min(step * 2.0, 1.0);
    if (converged(before, err, cfg.tolerance)) break;
  }
  res.final_error = err;
}

void lbfgs(const ReconstructionObjective& f, VecX& x, const RefineConfig& cfg, RefineResult& res) {
  constexpr int kMemory = 8;
  VecX g;
  double err = eval(f, x, g);
  res.initial_error = err;
  res.error_trace.push_back(err);
  std::deque<VecX> s_hist, y_hist;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    if (err <= 0.0 || g.squaredNorm() == 0.0) break;
    VecX dir = -g;
    double alpha = 1.0;
    if (s_hist.empty()) {
      alpha = 0.1 / g.norm();  // first step moves at most 0.1 A
    } else {
      const int m = static_cast<int>(s_hist.size());
      std::vector<double> rho(m), a(m);
      VecX q = g;
      for (int i = m - 1; i >= 0; --i) {
        rho[i] = 1.0 / y_hist[i].dot(s_hist[i]);
        a[i] = rho[i] * s_hist[i].dot(q);
        q -= a[i] * y_hist[i];
      }
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
      for (int i = 0; i < m; ++i) {
        const double b = rho[i] * y_hist[i].dot(q);
        q += s_hist[i] * (a[i] - b);
      }
      dir = -q;
      if (!(g.dot(dir) < 0.0)) {
        s_hist.clear();
        y_hist.clear();
        dir = -g;
        alpha = 0.1 / g.norm();
      }
    }
    const VecX x_old = x;
    const VecX g_old = g;
    const double before = err;
    if (backtrack(f, x, err, g, dir, alpha) == 0.0) break;
    ++res.iterations;
    res.error_trace.push_back(err);
    const VecX s = x - x_old;
    const VecX y = g - g_old;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      if (static_cast<int>(s_hist.size()) > kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    if (converged(before, err, cfg.tolerance)) break;
  }
  res.final_error = err;
}

}  // namespace

RefineResult refine_coordinates(const PeakSet& peaks, const VoxelGrid& target,
                                const ElementSet& elements, const RefineConfig& cfg) {
  cfg.validate();
  if (static_cast<std::size_t>(target.spec.channels) != elements.size()) {
    throw InvalidArgument("element set does not match the grid channels");
  }
  RefineResult res;
  if (peaks.empty()) return res;

  std::vector<int> channels;
  VecX x(3 * static_cast<Eigen::Index>(peaks.size()));
  for (std::size_t n = 0; n < peaks.size(); ++n) {
    const auto& p = peaks.peaks[n];
    channels.push_back(p.channel);
    const Vec3 c = target.spec.voxel_center(p.voxel[0], p.voxel[1], p.voxel[2]);
    x.segment<3>(3 * static_cast<Eigen::Index>(n)) = c;
  }
  ReconstructionObjective f(target, channels, cfg.cutoff);
  if (cfg.optimizer == RefineOptimizer::Lbfgs) {
    lbfgs(f, x, cfg, res);
  } else {
    gradient_descent(f, x, cfg, res);
  }
  check_finite(x);

  struct Placed {
    int channel;
    Vec3 pos;
  };
  std::vector<Placed> atoms;
  for (std::size_t n = 0; n < peaks.size(); ++n) {
    atoms.push_back({channels[n], x.segment<3>(3 * static_cast<Eigen::Index>(n))});
  }
  const double merge = cfg.merge_distance_voxels * target.spec.resolution;
  for (bool merged = true; merged;) {
    merged = false;
    for (std::size_t i = 0; i < atoms.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < atoms.size(); ++j) {
        if (atoms[i].channel == atoms[j].channel && (atoms[i].pos - atoms[j].pos).norm() < merge) {
          atoms[i].pos = 0.5 * (atoms[i].pos + atoms[j].pos);
          atoms.erase(atoms.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }
  }
  for (const auto& a : atoms) res.molecule.atoms.push_back({elements.at(a.channel), a.pos});
  return res;
}

Molecule extract_molecule(const VoxelGrid& grid, const ElementSet& elements,
                          const RefineConfig& cfg) {
  return refine_coordinates(detect_peaks(grid, cfg), grid, elements, cfg).molecule;
}

}  // namespace voxgen
