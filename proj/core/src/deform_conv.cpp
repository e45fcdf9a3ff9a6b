// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/deform_conv.hpp"

#include <atomic>

#include <ATen/Parallel.h>

#include "bilinear.hpp"
#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

using torch::Tensor;
using detail::ClampedBilinear;

struct SampleShape {
  int64_t batch, channels, groups, height, width;
  int64_t per_group() const { return channels / groups; }
  int64_t plane() const { return height * width; }
};

template <typename T>
bool sample_forward_kernel(const T* value, const T* offsets, const T* modulation, T* cols,
                           const SampleShape& s) {
  const int64_t plane = s.plane();
  const int64_t cpg = s.per_group();
  std::atomic<bool> finite{true};
  at::parallel_for(0, s.batch * s.groups, 1, [&](int64_t begin, int64_t end) {
    for (int64_t bg = begin; bg < end; ++bg) {
      const int64_t b = bg / s.groups;
      const int64_t g = bg % s.groups;
      for (int64_t k = 0; k < kDeformTaps; ++k) {
        const int64_t kx = k % 3 - 1;
        const int64_t ky = k / 3 - 1;
        const T* odx = offsets + ((b * s.groups + g) * kDeformTaps + k) * 2 * plane;
        const T* ody = odx + plane;
        const T* mod = modulation + ((b * s.groups + g) * kDeformTaps + k) * plane;
        for (int64_t y = 0; y < s.height; ++y) {
          for (int64_t x = 0; x < s.width; ++x) {
            const int64_t p = y * s.width + x;
            const T px = static_cast<T>(x + kx) + odx[p];
            const T py = static_cast<T>(y + ky) + ody[p];
            if (!std::isfinite(px) || !std::isfinite(py)) {
              finite = false;
              continue;
            }
            const ClampedBilinear<T> tap(px, py, s.width, s.height);
            for (int64_t ci = 0; ci < cpg; ++ci) {
              const int64_t c = g * cpg + ci;
              const T* src = value + (b * s.channels + c) * plane;
              cols[((b * s.channels + c) * kDeformTaps + k) * plane + p] =
                  mod[p] * tap.sample(src, s.width);
            }
          }
        }
      }
    }
  });
  return finite;
}

template <typename T>
void sample_backward_kernel(const T* value, const T* offsets, const T* modulation,
                            const T* grad_cols, T* grad_value, T* grad_offsets,
                            T* grad_modulation, const SampleShape& s) {
  const int64_t plane = s.plane();
  const int64_t cpg = s.per_group();
  // Each (b, g) task owns its slice of every gradient buffer.
  at::parallel_for(0, s.batch * s.groups, 1, [&](int64_t begin, int64_t end) {
    for (int64_t bg = begin; bg < end; ++bg) {
      const int64_t b = bg / s.groups;
      const int64_t g = bg % s.groups;
      for (int64_t k = 0; k < kDeformTaps; ++k) {
        const int64_t kx = k % 3 - 1;
        const int64_t ky = k / 3 - 1;
        const int64_t oidx = ((b * s.groups + g) * kDeformTaps + k) * 2 * plane;
        const int64_t midx = ((b * s.groups + g) * kDeformTaps + k) * plane;
        for (int64_t y = 0; y < s.height; ++y) {
          for (int64_t x = 0; x < s.width; ++x) {
            const int64_t p = y * s.width + x;
            const ClampedBilinear<T> tap(static_cast<T>(x + kx) + offsets[oidx + p],
                                         static_cast<T>(y + ky) + offsets[oidx + plane + p],
                                         s.width, s.height);
            const T m = modulation[midx + p];
            T acc_dx = 0;
            T acc_dy = 0;
            T acc_m = 0;
            for (int64_t ci = 0; ci < cpg; ++ci) {
              const int64_t c = g * cpg + ci;
              const T gc = grad_cols[((b * s.channels + c) * kDeformTaps + k) * plane + p];
              if (gc == T(0)) continue;
              const T* src = value + (b * s.channels + c) * plane;
              tap.scatter(grad_value + (b * s.channels + c) * plane, s.width, gc * m);
              T dx, dy;
              tap.coordinate_grad(src, s.width, dx, dy);
              acc_dx += gc * m * dx;
              acc_dy += gc * m * dy;
              acc_m += gc * tap.sample(src, s.width);
            }
            grad_offsets[oidx + p] = acc_dx;
            grad_offsets[oidx + plane + p] = acc_dy;
            grad_modulation[midx + p] = acc_m;
          }
        }
      }
    }
  });
}

SampleShape check_sample_args(const Tensor& value, const Tensor& offsets,
                              const Tensor& modulation, int64_t groups) {
  expects(value.dim() == 4, "deform_sample: value must be (B,C,h,w), got ", value.sizes());
  expects(groups > 0 && value.size(1) % groups == 0, "deform_sample: channels ",
          value.size(1), " not divisible by groups ", groups);
  const SampleShape s{value.size(0), value.size(1), groups, value.size(2), value.size(3)};
  expects(offsets.dim() == 4 && offsets.size(0) == s.batch &&
              offsets.size(1) == groups * kDeformTaps * 2 && offsets.size(2) == s.height &&
              offsets.size(3) == s.width,
          "deform_sample: offsets must be (B,", groups * kDeformTaps * 2, ",h,w), got ",
          offsets.sizes());
  expects(modulation.dim() == 4 && modulation.size(0) == s.batch &&
              modulation.size(1) == groups * kDeformTaps && modulation.size(2) == s.height &&
              modulation.size(3) == s.width,
          "deform_sample: modulation must be (B,", groups * kDeformTaps, ",h,w), got ",
          modulation.sizes());
  expects(value.device().is_cpu(), "deform_sample: CPU tensors only");
  return s;
}

class DeformSampleFunction : public torch::autograd::Function<DeformSampleFunction> {
 public:
  static Tensor forward(torch::autograd::AutogradContext* ctx, const Tensor& value,
                        const Tensor& offsets, const Tensor& modulation, int64_t groups) {
    const auto s = check_sample_args(value, offsets, modulation, groups);
    auto cols = torch::empty({s.batch, s.channels, kDeformTaps, s.height, s.width},
                             value.options());
    bool finite = true;
    AT_DISPATCH_FLOATING_TYPES(value.scalar_type(), "deform_sample_forward", [&] {
      finite = sample_forward_kernel<scalar_t>(
          value.data_ptr<scalar_t>(), offsets.data_ptr<scalar_t>(),
          modulation.data_ptr<scalar_t>(), cols.data_ptr<scalar_t>(), s);
    });
    if (!finite) {
      throw NonFiniteError("deform_sample: offsets contain non-finite values");
    }
    ctx->save_for_backward({value, offsets, modulation});
    ctx->saved_data["groups"] = groups;
    return cols;
  }

  static torch::autograd::tensor_list backward(torch::autograd::AutogradContext* ctx,
                                               torch::autograd::tensor_list grads) {
    const auto saved = ctx->get_saved_variables();
    const int64_t groups = ctx->saved_data["groups"].toInt();
    const auto s = check_sample_args(saved[0], saved[1], saved[2], groups);
    const Tensor grad_cols = grads[0].contiguous();
    auto grad_value = torch::zeros_like(saved[0]);
    auto grad_offsets = torch::zeros_like(saved[1]);
    auto grad_modulation = torch::zeros_like(saved[2]);
    AT_DISPATCH_FLOATING_TYPES(saved[0].scalar_type(), "deform_sample_backward", [&] {
      sample_backward_kernel<scalar_t>(
          saved[0].data_ptr<scalar_t>(), saved[1].data_ptr<scalar_t>(),
          saved[2].data_ptr<scalar_t>(), grad_cols.data_ptr<scalar_t>(),
          grad_value.data_ptr<scalar_t>(), grad_offsets.data_ptr<scalar_t>(),
          grad_modulation.data_ptr<scalar_t>(), s);
    });
    return {grad_value, grad_offsets, grad_modulation, Tensor()};
  }
};

}  // namespace

Tensor deform_sample(const Tensor& value, const Tensor& offsets, const Tensor& modulation,
                     int64_t groups) {
  auto compute = value.scalar_type();
  if (compute != torch::kFloat && compute != torch::kDouble) {
    compute = torch::kFloat;
  }
  auto cols = DeformSampleFunction::apply(value.to(compute).contiguous(),
                                          offsets.to(compute).contiguous(),
                                          modulation.to(compute).contiguous(), groups);
  return cols.scalar_type() == value.scalar_type() ? cols : cols.to(value.scalar_type());
}

Tensor modulated_deform_conv(const Tensor& value, const Tensor& offsets,
                             const Tensor& modulation, const Tensor& weight, int64_t groups) {
  expects(weight.dim() == 4 && weight.size(2) == 3 && weight.size(3) == 3,
          "modulated_deform_conv: weight must be (C_out, C/G, 3, 3), got ", weight.sizes());
  expects(groups > 0 && value.dim() == 4 && weight.size(1) * groups == value.size(1),
          "modulated_deform_conv: weight ", weight.sizes(), " incompatible with value ",
          value.sizes(), " and ", groups, " groups");
  expects(weight.size(0) % groups == 0, "modulated_deform_conv: output channels ",
          weight.size(0), " not divisible by groups ", groups);
  const int64_t b = value.size(0);
  const int64_t h = value.size(2);
  const int64_t w = value.size(3);
  const int64_t out_per_group = weight.size(0) / groups;
  const int64_t in_per_group = weight.size(1);

  auto cols = deform_sample(value, offsets, modulation, groups)
                  .view({b, groups, in_per_group * kDeformTaps, h * w});
  auto kernel = weight.to(cols.scalar_type())
                    .reshape({groups, out_per_group, in_per_group * kDeformTaps})
                    .unsqueeze(0);
  return torch::matmul(kernel, cols).view({b, weight.size(0), h, w});
}

}  // namespace semvfi
