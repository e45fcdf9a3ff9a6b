// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <torch/torch.h>

namespace semvfi::detail {

/// He (fan-in, ReLU gain) weights and zero bias.
template <typename Conv>
void he_init(Conv& conv) {
  torch::NoGradGuard no_grad;
  torch::nn::init::kaiming_normal_(conv->weight, 0.0, torch::kFanIn, torch::kReLU);
  if (conv->bias.defined()) conv->bias.zero_();
}

template <typename Conv>
void zero_init(Conv& conv) {
  torch::NoGradGuard no_grad;
  conv->weight.zero_();
  if (conv->bias.defined()) conv->bias.zero_();
}

}  // namespace semvfi::detail
