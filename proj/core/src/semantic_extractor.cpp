// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/semantic_extractor.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#include <ATen/CPUGeneratorImpl.h>

#include "semvfi/checkpoint.hpp"
#include "semvfi/errors.hpp"
#include "semvfi/warp.hpp"

namespace semvfi {

using torch::Tensor;
namespace F = torch::nn::functional;

void ExtractorConfig::validate(int64_t depth) const {
  expects(layer_indices[0] >= 0 && layer_indices[0] < layer_indices[1] &&
              layer_indices[1] < depth,
          "ExtractorConfig: layer indices (", layer_indices[0], ", ", layer_indices[1],
          ") must be strictly increasing and below depth ", depth);
  expects(channels > 0 && patch_stride > 0, "ExtractorConfig: invalid channels/patch stride");
  for (double s : std) {
    expects(s > 0.0, "ExtractorConfig: normalization std must be positive");
  }
}

std::string to_string(ExtractorKind kind) {
  return kind == ExtractorKind::kPretrainedVit ? "pretrained-vit" : "surrogate";
}

ExtractorKind extractor_kind_from_string(const std::string& name) {
  if (name == "pretrained-vit") return ExtractorKind::kPretrainedVit;
  if (name == "surrogate") return ExtractorKind::kSurrogate;
  throw ContractViolation("unknown extractor kind '" + name + "'");
}

std::filesystem::path resolve_weights_path(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_relative()) {
    if (const char* dir = std::getenv(kWeightsDirEnv); dir != nullptr && *dir != '\0') {
      return std::filesystem::path(dir) / p;
    }
  }
  return p;
}

SemanticExtractor::SemanticExtractor(ExtractorConfig config) : config_(std::move(config)) {}

Tensor SemanticExtractor::prepare(const Tensor& image) const {
  expects(image.dim() == 4 && image.size(1) == 3, "extract: image must be (B,3,H,W), got ",
          image.sizes());
  const auto options = image.options();
  const Tensor mean = torch::tensor({config_.mean[0], config_.mean[1], config_.mean[2]}, options)
                          .view({1, 3, 1, 1});
  const Tensor std = torch::tensor({config_.std[0], config_.std[1], config_.std[2]}, options)
                         .view({1, 3, 1, 1});
  const int64_t ps = config_.patch_stride;
  const int64_t h = (image.size(2) + ps - 1) / ps * ps;
  const int64_t w = (image.size(3) + ps - 1) / ps * ps;
  return resize_bilinear((image - mean) / std, h, w);
}

void SemanticExtractor::freeze() {
  for (auto& p : parameters(true)) {
    p.requires_grad_(false);
  }
}

// ---------------------------------------------------------------------------
// Surrogate

namespace {

// [1,4,6,4,1]/16 separable blur with edge replication; operator norm <= 17/16.
constexpr double kBlurNorm = 17.0 / 16.0;
// Bilinear x2 upsampling; operator norm <= 2.
constexpr double kUpsampleNorm = 2.0;

Tensor gaussian_blur(const Tensor& x) {
  const int64_t c = x.size(1);
  const Tensor k1 = torch::tensor({1.0, 4.0, 6.0, 4.0, 1.0}, x.options()) / 16.0;
  const Tensor kh = k1.view({1, 1, 1, 5}).expand({c, 1, 1, 5}).contiguous();
  const Tensor kv = k1.view({1, 1, 5, 1}).expand({c, 1, 5, 1}).contiguous();
  Tensor y = F::pad(x, F::PadFuncOptions({2, 2, 0, 0}).mode(torch::kReplicate));
  y = F::conv2d(y, kh, F::Conv2dFuncOptions().groups(c));
  y = F::pad(y, F::PadFuncOptions({0, 0, 2, 2}).mode(torch::kReplicate));
  return F::conv2d(y, kv, F::Conv2dFuncOptions().groups(c));
}

Tensor box3(const Tensor& x) {
  Tensor y = F::pad(x, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  return F::avg_pool2d(y, F::AvgPool2dFuncOptions(3).stride(1));
}

Tensor pool(const Tensor& x, int64_t k) {
  return k == 1 ? x : F::avg_pool2d(x, F::AvgPool2dFuncOptions(k).stride(k));
}

Tensor orthonormal_columns(int64_t rows, int64_t cols, uint64_t seed) {
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  const Tensor gaussian = torch::randn({rows, cols}, gen, torch::dtype(torch::kDouble));
  auto [q, r] = torch::linalg_qr(gaussian, "reduced");
  // Fix the sign ambiguity of QR so the basis is a pure function of the seed.
  return (q * torch::sign(r.diagonal()).unsqueeze(0)).to(torch::kFloat);
}

Tensor project(const Tensor& projection, const Tensor& encoding) {
  return torch::einsum("oc,bchw->bohw", {projection.to(encoding.dtype()), encoding});
}

}  // namespace

SurrogateExtractor::SurrogateExtractor(ExtractorConfig config) : SemanticExtractor(config) {
  expects(config.channels >= kShallowEncoding,
          "SurrogateExtractor: need at least ", kShallowEncoding, " channels, got ",
          config.channels);
  expects(config.patch_stride == 16, "SurrogateExtractor: patch stride is fixed at 16");
  shallow_projection_ = register_buffer(
      "shallow_projection", orthonormal_columns(config.channels, kShallowEncoding, config.seed));
  deep_projection_ = register_buffer(
      "deep_projection",
      orthonormal_columns(config.channels, kDeepEncoding, config.seed ^ 0x9e3779b97f4a7c15ULL));
}

SemanticFeatures SurrogateExtractor::extract(const Tensor& image) {
  const Tensor x = prepare(image);
  // Gaussian pyramid g[l] at stride 2^l and band-pass residuals b[l].
  std::array<Tensor, 5> g;
  g[0] = x;
  for (size_t l = 1; l < g.size(); ++l) {
    g[l] = gaussian_blur(g[l - 1]).slice(2, 0, std::nullopt, 2).slice(3, 0, std::nullopt, 2);
  }
  auto band = [&](size_t l) {
    return g[l] - resize_bilinear(g[l + 1], g[l].size(2), g[l].size(3));
  };

  const Tensor shallow_enc = torch::cat(
      {F::pixel_unshuffle(g[2], 4), pool(band(1).abs(), 8), pool(band(2).abs(), 4), g[4]}, 1);
  const Tensor deep_enc = torch::cat(
      {F::pixel_unshuffle(g[3], 2), g[4], pool(band(3).abs(), 2), box3(g[4])}, 1);

  SemanticFeatures out;
  out.shallow = project(shallow_projection_, shallow_enc);
  out.deep = project(deep_projection_, deep_enc);
  out.patch_stride = patch_stride();
  return out;
}

double SurrogateExtractor::lipschitz_bound() const {
  const auto& cfg = config();
  const double inv_std = 1.0 / std::min({cfg.std[0], cfg.std[1], cfg.std[2]});
  auto gl = [](int l) { return std::pow(kBlurNorm, l); };
  auto bl = [&](int l) { return gl(l) + kUpsampleNorm * gl(l + 1); };
  const double shallow_sq = std::pow(gl(2), 2) + std::pow(bl(1) / 8.0, 2) +
                            std::pow(bl(2) / 4.0, 2) + std::pow(gl(4), 2);
  const double deep_sq =
      std::pow(gl(3), 2) + std::pow(gl(4), 2) + std::pow(bl(3) / 2.0, 2) + std::pow(gl(4), 2);
  return inv_std * std::sqrt(shallow_sq + deep_sq);
}

// ---------------------------------------------------------------------------
// ViT

namespace {

class LayerScaleImpl : public torch::nn::Module {
 public:
  explicit LayerScaleImpl(int64_t dim)
      : gamma(register_parameter("gamma", torch::full({dim}, 1e-5))) {}
  Tensor forward(const Tensor& x) { return x * gamma; }
  Tensor gamma;
};
TORCH_MODULE(LayerScale);

class AttentionImpl : public torch::nn::Module {
 public:
  AttentionImpl(int64_t dim, int64_t heads)
      : heads_(heads),
        qkv(register_module("qkv", torch::nn::Linear(dim, dim * 3))),
        proj(register_module("proj", torch::nn::Linear(dim, dim))) {}

  Tensor forward(const Tensor& x, const Tensor& sin, const Tensor& cos, int64_t prefix) {
    const int64_t b = x.size(0);
    const int64_t n = x.size(1);
    const int64_t d = x.size(2);
    const int64_t hd = d / heads_;
    const Tensor parts = qkv->forward(x).view({b, n, 3, heads_, hd}).permute({2, 0, 3, 1, 4});
    Tensor q = parts[0];
    Tensor k = parts[1];
    const Tensor v = parts[2];
    q = torch::cat({q.slice(2, 0, prefix), rope(q.slice(2, prefix), sin, cos)}, 2);
    k = torch::cat({k.slice(2, 0, prefix), rope(k.slice(2, prefix), sin, cos)}, 2);
    const Tensor attn =
        torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(static_cast<double>(hd)),
                       -1);
    return proj->forward(torch::matmul(attn, v).transpose(1, 2).reshape({b, n, d}));
  }

 private:
  static Tensor rope(const Tensor& x, const Tensor& sin, const Tensor& cos) {
    const auto halves = x.chunk(2, -1);
    return x * cos + torch::cat({-halves[1], halves[0]}, -1) * sin;
  }

  int64_t heads_;

 public:
  torch::nn::Linear qkv;
  torch::nn::Linear proj;
};
TORCH_MODULE(Attention);

class MlpImpl : public torch::nn::Module {
 public:
  MlpImpl(int64_t dim, int64_t hidden)
      : fc1(register_module("fc1", torch::nn::Linear(dim, hidden))),
        fc2(register_module("fc2", torch::nn::Linear(hidden, dim))) {}
  Tensor forward(const Tensor& x) { return fc2->forward(torch::gelu(fc1->forward(x))); }
  torch::nn::Linear fc1;
  torch::nn::Linear fc2;
};
TORCH_MODULE(Mlp);

class VitBlockImpl : public torch::nn::Module {
 public:
  VitBlockImpl(const VitConfig& c)
      : norm1(register_module(
            "norm1", torch::nn::LayerNorm(
                         torch::nn::LayerNormOptions({c.embed_dim}).eps(c.layer_norm_eps)))),
        attn(register_module("attn", Attention(c.embed_dim, c.heads))),
        ls1(register_module("ls1", LayerScale(c.embed_dim))),
        norm2(register_module(
            "norm2", torch::nn::LayerNorm(
                         torch::nn::LayerNormOptions({c.embed_dim}).eps(c.layer_norm_eps)))),
        mlp(register_module("mlp", Mlp(c.embed_dim, c.embed_dim * c.mlp_ratio))),
        ls2(register_module("ls2", LayerScale(c.embed_dim))) {}

  Tensor forward(const Tensor& x, const Tensor& sin, const Tensor& cos, int64_t prefix) {
    Tensor y = x + ls1->forward(attn->forward(norm1->forward(x), sin, cos, prefix));
    return y + ls2->forward(mlp->forward(norm2->forward(y)));
  }

  torch::nn::LayerNorm norm1;
  Attention attn;
  LayerScale ls1;
  torch::nn::LayerNorm norm2;
  Mlp mlp;
  LayerScale ls2;
};
TORCH_MODULE(VitBlock);

// Axial rotary embedding over a (rows x cols) patch grid with coordinates in [-1, 1].
std::pair<Tensor, Tensor> rope_tables(int64_t rows, int64_t cols, int64_t head_dim, double base,
                                      const torch::TensorOptions& options) {
  const auto dopt = torch::dtype(torch::kDouble);
  const Tensor periods =
      torch::pow(base, 2.0 * torch::arange(head_dim / 4, dopt) / static_cast<double>(head_dim / 2));
  const Tensor ch = (torch::arange(rows, dopt) + 0.5) / static_cast<double>(rows);
  const Tensor cw = (torch::arange(cols, dopt) + 0.5) / static_cast<double>(cols);
  const auto grid = torch::meshgrid({ch, cw}, "ij");
  const Tensor coords = torch::stack({grid[0], grid[1]}, -1).flatten(0, 1) * 2.0 - 1.0;
  Tensor angles = 2.0 * std::numbers::pi * coords.unsqueeze(-1) / periods.view({1, 1, -1});
  angles = angles.flatten(1, 2).repeat({1, 2});
  return {torch::sin(angles).to(options), torch::cos(angles).to(options)};
}

}  // namespace

VitExtractor::VitExtractor(ExtractorConfig config, VitConfig vit)
    : SemanticExtractor(config), vit_(vit) {
  config.validate(vit.depth);
  expects(config.channels == vit.embed_dim && config.patch_stride == vit.patch,
          "VitExtractor: config channels/patch stride must match the ViT (", vit.embed_dim, ", ",
          vit.patch, ")");
  auto patch_embed = std::make_shared<torch::nn::Module>();
  patch_proj_ = patch_embed->register_module(
      "proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(3, vit.embed_dim, vit.patch).stride(vit.patch)));
  register_module("patch_embed", patch_embed);
  cls_token_ = register_parameter("cls_token", torch::zeros({1, 1, vit.embed_dim}));
  storage_tokens_ =
      register_parameter("storage_tokens", torch::zeros({1, vit.storage_tokens, vit.embed_dim}));
  blocks_ = register_module("blocks", torch::nn::ModuleList());
  for (int64_t i = 0; i < vit.depth; ++i) {
    blocks_->push_back(VitBlock(vit));
  }
  norm_ = register_module(
      "norm",
      torch::nn::LayerNorm(torch::nn::LayerNormOptions({vit.embed_dim}).eps(vit.layer_norm_eps)));
  freeze();
}

void VitExtractor::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw LoadError(detail::concat("semantic extractor weights not found: ", path));
  }
  TensorDict weights = read_tensor_dict(path);
  for (auto it = weights.begin(); it != weights.end();) {
    const std::string& key = it->first;
    const bool unused = key == "mask_token" || key.rfind("rope_embed.", 0) == 0 ||
                        key.find("bias_mask") != std::string::npos ||
                        key.rfind("head.", 0) == 0 || key.rfind("local_cls_norm.", 0) == 0;
    it = unused ? weights.erase(it) : std::next(it);
  }
  load_into(*this, weights, /*strict=*/true);
}

SemanticFeatures VitExtractor::extract(const Tensor& image) {
  const Tensor x = prepare(image);
  const int64_t rows = x.size(2) / vit_.patch;
  const int64_t cols = x.size(3) / vit_.patch;
  const int64_t b = x.size(0);
  const int64_t prefix = 1 + vit_.storage_tokens;

  Tensor tokens = patch_proj_->forward(x).flatten(2).transpose(1, 2);
  tokens = torch::cat({cls_token_.expand({b, 1, -1}).to(tokens.dtype()),
                       storage_tokens_.expand({b, -1, -1}).to(tokens.dtype()), tokens},
                      1);
  const auto [sin, cos] =
      rope_tables(rows, cols, vit_.embed_dim / vit_.heads, vit_.rope_base, tokens.options());

  auto to_map = [&](const Tensor& hidden) {
    return norm_->forward(hidden)
        .slice(1, prefix)
        .transpose(1, 2)
        .reshape({b, vit_.embed_dim, rows, cols});
  };

  SemanticFeatures out;
  out.patch_stride = vit_.patch;
  const auto [shallow_index, deep_index] = config().layer_indices;
  for (int64_t i = 0; i <= deep_index; ++i) {
    tokens = blocks_[i]->as<VitBlock>()->forward(tokens, sin, cos, prefix);
    if (i == shallow_index) out.shallow = to_map(tokens);
  }
  out.deep = to_map(tokens);
  return out;
}

std::shared_ptr<SemanticExtractor> make_extractor(const ExtractorConfig& config) {
  if (config.kind == ExtractorKind::kSurrogate) {
    return std::make_shared<SurrogateExtractor>(config);
  }
  auto vit = std::make_shared<VitExtractor>(config);
  if (config.weights_path.empty()) {
    throw LoadError("pretrained-vit extractor requires weights_path");
  }
  vit->load(resolve_weights_path(config.weights_path));
  return vit;
}

// ---------------------------------------------------------------------------
// PCA

namespace {

Tensor tokens_of(const Tensor& features) {
  Tensor f = features;
  if (f.dim() == 4) {
    expects(f.size(0) == 1, "pca_visualize: expected a single frame, got batch ", f.size(0));
    f = f[0];
  }
  expects(f.dim() == 3, "pca_visualize: features must be (C,h,w) or (1,C,h,w), got ",
          features.sizes());
  return f.flatten(1).transpose(0, 1).to(torch::kDouble);  // (h*w, C)
}

}  // namespace

PcaMaps pca_visualize(const Tensor& features_a, const Tensor& features_b, int64_t k) {
  const Tensor ta = tokens_of(features_a);
  const Tensor tb = tokens_of(features_b);
  expects(ta.size(1) == tb.size(1), "pca_visualize: channel counts differ");
  expects(k >= 1 && k <= ta.size(1), "pca_visualize: k = ", k, " exceeds channel count ",
          ta.size(1));
  const Tensor all = torch::cat({ta, tb}, 0);
  expects(k <= all.size(0), "pca_visualize: k = ", k, " exceeds token count ", all.size(0));
  const Tensor mean = all.mean(0, true);
  const auto [u, s, vh] = torch::linalg_svd(all - mean, false);
  Tensor basis = vh.slice(0, 0, k);  // (k, C)
  // Orient each component so its largest loading is positive.
  const Tensor pivot = basis.abs().argmax(1);
  basis = basis * torch::sign(basis.gather(1, pivot.unsqueeze(1)) + 1e-300);

  const Tensor proj = torch::matmul(all - mean, basis.transpose(0, 1));  // (Na+Nb, k)
  const Tensor lo = std::get<0>(proj.min(0, true));
  const Tensor hi = std::get<0>(proj.max(0, true));
  const Tensor scaled = (proj - lo) / torch::clamp_min(hi - lo, 1e-12);

  auto reshape = [&](const Tensor& rows, const Tensor& like) {
    const Tensor f = like.dim() == 4 ? like[0] : like;
    return rows.transpose(0, 1).reshape({k, f.size(1), f.size(2)}).to(torch::kFloat);
  };
  PcaMaps maps;
  maps.map_a = reshape(scaled.slice(0, 0, ta.size(0)), features_a);
  maps.map_b = reshape(scaled.slice(0, ta.size(0)), features_b);
  const Tensor energy = s.square();
  const double total = energy.sum().item<double>();
  for (int64_t i = 0; i < k; ++i) {
    maps.explained_variance_ratio.push_back(total > 0 ? energy[i].item<double>() / total : 0.0);
  }
  return maps;
}

double high_frequency_energy(const Tensor& map) {
  const Tensor m = map.to(torch::kDouble);
  expects(m.dim() == 3, "high_frequency_energy: map must be (k,h,w)");
  const double variance = m.var().item<double>();
  if (variance <= 0) return 0.0;
  double acc = 0.0;
  if (m.size(2) > 1) acc += (m.slice(2, 1) - m.slice(2, 0, -1)).square().mean().item<double>();
  if (m.size(1) > 1) acc += (m.slice(1, 1) - m.slice(1, 0, -1)).square().mean().item<double>();
  return acc / variance;
}

}  // namespace semvfi
