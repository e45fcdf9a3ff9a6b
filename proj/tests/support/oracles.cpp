// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace semvfi::testing {

using torch::Tensor;

double tent_sample(const Tensor& plane, double x, double y) {
  const auto a = plane.accessor<double, 2>();
  const int64_t h = plane.size(0);
  const int64_t w = plane.size(1);
  const double cx = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const double cy = std::clamp(y, 0.0, static_cast<double>(h - 1));
  double acc = 0.0;
  for (int64_t j = 0; j < h; ++j) {
    const double wy = std::max(0.0, 1.0 - std::abs(cy - static_cast<double>(j)));
    if (wy == 0.0) continue;
    for (int64_t i = 0; i < w; ++i) {
      const double wx = std::max(0.0, 1.0 - std::abs(cx - static_cast<double>(i)));
      acc += a[j][i] * wx * wy;
    }
  }
  return acc;
}

Tensor warp_oracle(const Tensor& x, const Tensor& flow) {
  const Tensor xd = x.to(torch::kDouble).contiguous();
  const Tensor fd = flow.to(torch::kDouble).contiguous();
  Tensor out = torch::zeros_like(xd);
  auto o = out.accessor<double, 4>();
  const auto f = fd.accessor<double, 4>();
  for (int64_t b = 0; b < xd.size(0); ++b) {
    for (int64_t c = 0; c < xd.size(1); ++c) {
      const Tensor plane = xd[b][c];
      for (int64_t py = 0; py < xd.size(2); ++py) {
        for (int64_t px = 0; px < xd.size(3); ++px) {
          o[b][c][py][px] = tent_sample(plane, static_cast<double>(px) + f[b][0][py][px],
                                        static_cast<double>(py) + f[b][1][py][px]);
        }
      }
    }
  }
  return out;
}

Tensor deform_oracle(const Tensor& value, const Tensor& offsets, const Tensor& modulation,
                     const Tensor& weight, int64_t groups, double gate) {
  const Tensor v = value.to(torch::kDouble).contiguous();
  const auto off = offsets.to(torch::kDouble).contiguous();
  const auto mod = modulation.to(torch::kDouble).contiguous();
  const auto wt = weight.to(torch::kDouble).contiguous();
  const int64_t batch = v.size(0), channels = v.size(1), h = v.size(2), w = v.size(3);
  const int64_t c_out = wt.size(0);
  const int64_t in_per_group = channels / groups;
  const int64_t out_per_group = c_out / groups;
  const auto oa = off.accessor<double, 4>();
  const auto ma = mod.accessor<double, 4>();
  const auto wa = wt.accessor<double, 4>();

  Tensor out = torch::zeros({batch, c_out, h, w}, torch::kDouble);
  auto out_a = out.accessor<double, 4>();
  for (int64_t b = 0; b < batch; ++b) {
    for (int64_t o = 0; o < c_out; ++o) {
      const int64_t g = o / out_per_group;
      for (int64_t py = 0; py < h; ++py) {
        for (int64_t px = 0; px < w; ++px) {
          double acc = 0.0;
          for (int64_t k = 0; k < 9; ++k) {
            const int64_t ky = k / 3, kx = k % 3;
            const double dx = oa[b][(g * 9 + k) * 2][py][px];
            const double dy = oa[b][(g * 9 + k) * 2 + 1][py][px];
            const double m = ma[b][g * 9 + k][py][px];
            const double sx = static_cast<double>(px + kx - 1) + dx;
            const double sy = static_cast<double>(py + ky - 1) + dy;
            for (int64_t cl = 0; cl < in_per_group; ++cl) {
              const double s = tent_sample(v[b][g * in_per_group + cl], sx, sy);
              acc += wa[o][cl][ky][kx] * m * s;
            }
          }
          out_a[b][o][py][px] = gate * acc;
        }
      }
    }
  }
  return out;
}

double ssim_oracle(const Tensor& a, const Tensor& b) {
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  const Tensor ad = (a.dim() == 4 ? a[0] : a).to(torch::kDouble).contiguous();
  const Tensor bd = (b.dim() == 4 ? b[0] : b).to(torch::kDouble).contiguous();
  const Tensor ya = (0.299 * ad[0] + 0.587 * ad[1] + 0.114 * ad[2]).contiguous();
  const Tensor yb = (0.299 * bd[0] + 0.587 * bd[1] + 0.114 * bd[2]).contiguous();
  const auto x = ya.accessor<double, 2>();
  const auto y = yb.accessor<double, 2>();
  std::vector<double> g(kWin);
  double norm = 0.0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    g[i] = std::exp(-d * d / (2 * kSigma * kSigma));
    norm += g[i];
  }
  for (double& v : g) v /= norm;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int64_t h = ya.size(0), w = ya.size(1);
  double total = 0.0;
  int64_t count = 0;
  for (int64_t r = 0; r + kWin <= h; ++r) {
    for (int64_t c = 0; c + kWin <= w; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
          const double wt = g[i] * g[j];
          mx += wt * x[r + i][c + j];
          my += wt * y[r + i][c + j];
        }
      }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < kWin; ++i) {
        for (int j = 0; j < kWin; ++j) {
          const double wt = g[i] * g[j];
          const double dx = x[r + i][c + j] - mx;
          const double dy = y[r + i][c + j] - my;
          vx += wt * dx * dx;
          vy += wt * dy * dy;
          cxy += wt * dx * dy;
        }
      }
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

Tensor numeric_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  torch::NoGradGuard no_grad;
  Tensor base = x.detach().clone().contiguous();
  Tensor grad = torch::zeros_like(base);
  auto flat = base.view({-1});
  auto gflat = grad.view({-1});
  for (int64_t i = 0; i < flat.numel(); ++i) {
    const double orig = flat[i].item<double>();
    flat[i] = orig + eps;
    const double up = f(base).item<double>();
    flat[i] = orig - eps;
    const double down = f(base).item<double>();
    flat[i] = orig;
    gflat[i] = (up - down) / (2 * eps);
  }
  return grad;
}

Tensor analytic_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& x) {
  Tensor leaf = x.detach().clone().set_requires_grad(true);
  Tensor y = f(leaf);
  y.backward();
  return leaf.grad().detach().clone();
}

double relative_error(const Tensor& a, const Tensor& b) {
  const double diff = (a - b).norm().item<double>();
  const double scale = std::max({a.norm().item<double>(), b.norm().item<double>(), 1e-12});
  return diff / scale;
}

Tensor fractional_uniform(at::IntArrayRef sizes, double lo, double hi, torch::Generator& gen) {
  Tensor base = torch::floor(lo + (hi - lo) * torch::rand(sizes, gen, torch::kDouble));
  return base + 0.1 + 0.8 * torch::rand(sizes, gen, torch::kDouble);
}

Tensor randn(at::IntArrayRef sizes, torch::Generator& gen) {
  return torch::randn(sizes, gen, torch::kDouble);
}

Tensor rand(at::IntArrayRef sizes, torch::Generator& gen) {
  return torch::rand(sizes, gen, torch::kDouble);
}

torch::Generator make_generator(uint64_t seed) {
  return at::make_generator<at::CPUGeneratorImpl>(seed);
}

}  // namespace semvfi::testing
