// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/warp.hpp"

#include <atomic>

#include <ATen/Parallel.h>

#include "bilinear.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

using torch::Tensor;
using detail::ClampedBilinear;

template <typename T>
bool warp_forward_kernel(const T* x, const T* flow, T* out, int64_t batch, int64_t channels,
                         int64_t height, int64_t width) {
  const int64_t plane = height * width;
  std::atomic<bool> finite{true};
  at::parallel_for(0, batch * height, 1, [&](int64_t begin, int64_t end) {
    for (int64_t row = begin; row < end; ++row) {
      const int64_t b = row / height;
      const int64_t y = row % height;
      const T* fx = flow + (b * 2) * plane + y * width;
      const T* fy = fx + plane;
      for (int64_t xc = 0; xc < width; ++xc) {
        const T px = static_cast<T>(xc) + fx[xc];
        const T py = static_cast<T>(y) + fy[xc];
        if (!std::isfinite(px) || !std::isfinite(py)) {
          finite = false;
          continue;
        }
        const ClampedBilinear<T> tap(px, py, width, height);
        for (int64_t c = 0; c < channels; ++c) {
          const int64_t base = (b * channels + c) * plane;
          out[base + y * width + xc] = tap.sample(x + base, width);
        }
      }
    }
  });
  return finite;
}

template <typename T>
void warp_backward_kernel(const T* x, const T* flow, const T* grad_out, T* grad_x, T* grad_flow,
                          int64_t batch, int64_t channels, int64_t height, int64_t width) {
  const int64_t plane = height * width;
  // One image per task keeps the scatter-add order fixed.
  at::parallel_for(0, batch, 1, [&](int64_t begin, int64_t end) {
    for (int64_t b = begin; b < end; ++b) {
      const T* fx = flow + (b * 2) * plane;
      const T* fy = fx + plane;
      T* gfx = grad_flow + (b * 2) * plane;
      T* gfy = gfx + plane;
      for (int64_t y = 0; y < height; ++y) {
        for (int64_t xc = 0; xc < width; ++xc) {
          const int64_t p = y * width + xc;
          const ClampedBilinear<T> tap(static_cast<T>(xc) + fx[p], static_cast<T>(y) + fy[p],
                                       width, height);
          T acc_x = 0;
          T acc_y = 0;
          for (int64_t c = 0; c < channels; ++c) {
            const int64_t base = (b * channels + c) * plane;
            const T g = grad_out[base + p];
            if (g == T(0)) continue;
            tap.scatter(grad_x + base, width, g);
            T dx, dy;
            tap.coordinate_grad(x + base, width, dx, dy);
            acc_x += g * dx;
            acc_y += g * dy;
          }
          gfx[p] = acc_x;
          gfy[p] = acc_y;
        }
      }
    }
  });
}

void check_warp_args(const Tensor& x, const Tensor& flow) {
  expects(x.dim() == 4, "backward_warp: x must be (B,C,H,W), got ", x.sizes());
  expects(flow.dim() == 4 && flow.size(1) == 2, "backward_warp: flow must be (B,2,H,W), got ",
          flow.sizes());
  expects(x.size(0) == flow.size(0) && x.size(2) == flow.size(2) && x.size(3) == flow.size(3),
          "backward_warp: spatial/batch mismatch between x ", x.sizes(), " and flow ",
          flow.sizes());
  expects(x.device().is_cpu() && flow.device().is_cpu(), "backward_warp: CPU tensors only");
}

Tensor warp_forward(const Tensor& x, const Tensor& flow) {
  auto out = torch::empty_like(x);
  bool finite = true;
  AT_DISPATCH_FLOATING_TYPES(x.scalar_type(), "backward_warp_forward", [&] {
    finite = warp_forward_kernel<scalar_t>(x.data_ptr<scalar_t>(), flow.data_ptr<scalar_t>(),
                                           out.data_ptr<scalar_t>(), x.size(0), x.size(1),
                                           x.size(2), x.size(3));
  });
  if (!finite) {
    throw NonFiniteError("backward_warp: flow contains non-finite values");
  }
  return out;
}

class BackwardWarpFunction : public torch::autograd::Function<BackwardWarpFunction> {
 public:
  static Tensor forward(torch::autograd::AutogradContext* ctx, const Tensor& x,
                        const Tensor& flow) {
    ctx->save_for_backward({x, flow});
    return warp_forward(x, flow);
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grads) {
    const auto saved = ctx->get_saved_variables();
    const Tensor& x = saved[0];
    const Tensor& flow = saved[1];
    const Tensor grad_out = grads[0].contiguous();
    auto grad_x = torch::zeros_like(x);
    auto grad_flow = torch::zeros_like(flow);
    AT_DISPATCH_FLOATING_TYPES(x.scalar_type(), "backward_warp_backward", [&] {
      warp_backward_kernel<scalar_t>(x.data_ptr<scalar_t>(), flow.data_ptr<scalar_t>(),
                                     grad_out.data_ptr<scalar_t>(), grad_x.data_ptr<scalar_t>(),
                                     grad_flow.data_ptr<scalar_t>(), x.size(0), x.size(1),
                                     x.size(2), x.size(3));
    });
    return {grad_x, grad_flow};
  }
};

}  // namespace

Tensor backward_warp(const Tensor& x, const Tensor& flow) {
  check_warp_args(x, flow);
  auto compute = x.scalar_type();
  if (compute != torch::kFloat && compute != torch::kDouble) {
    compute = torch::kFloat;
  }
  if (flow.scalar_type() == torch::kDouble) {
    compute = torch::kDouble;
  }
  auto out = BackwardWarpFunction::apply(x.to(compute).contiguous(),
                                         flow.to(compute).contiguous());
  return out.scalar_type() == x.scalar_type() ? out : out.to(x.scalar_type());
}

Tensor resize_bilinear(const Tensor& x, int64_t height, int64_t width) {
  if (x.size(-2) == height && x.size(-1) == width) {
    return x;
  }
  namespace F = torch::nn::functional;
  return F::interpolate(x, F::InterpolateFuncOptions()
                               .size(std::vector<int64_t>{height, width})
                               .mode(torch::kBilinear)
                               .align_corners(false));
}

Tensor resize_flow(const Tensor& flow, int64_t height, int64_t width) {
  expects(flow.dim() == 4 && flow.size(1) == 2, "resize_flow: flow must be (B,2,h,w), got ",
          flow.sizes());
  const int64_t h = flow.size(2);
  const int64_t w = flow.size(3);
  if (h == height && w == width) {
    return flow;
  }
  auto resized = resize_bilinear(flow, height, width);
  const auto scale =
      torch::tensor({static_cast<double>(width) / static_cast<double>(w),
                     static_cast<double>(height) / static_cast<double>(h)},
                    resized.options())
          .view({1, 2, 1, 1});
  return resized * scale;
}

}  // namespace semvfi
