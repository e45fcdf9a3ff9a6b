// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/model.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "semvfi/errors.hpp"
#include "semvfi/hash.hpp"
#include "semvfi/warp.hpp"

namespace semvfi {

using torch::Tensor;

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.ifnet = IFNetConfig{{240, 150, 90}, {4, 2, 1}, 90};
  c.context_width = 16;
  c.fusion = FusionConfig{{64, 128, 256, 512}, 32};
  c.fapm = FapmConfig{384, 256, 128, 256, 8};
  c.extractor.kind = ExtractorKind::kPretrainedVit;
  c.extractor.weights_path = "dinov3_vits16_pretrain.pth";
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.ifnet = IFNetConfig{{64, 48, 32}, {4, 2, 1}, 32};
  c.context_width = 8;
  c.fusion = FusionConfig{{16, 32, 64, 128}, 8};
  c.fapm = FapmConfig{384, 64, 32, 64, 8};
  c.extractor.kind = ExtractorKind::kSurrogate;
  return c;
}

void ModelConfig::validate() const {
  expects(fapm.s2_channels == fusion.widths[1] && fapm.s3_channels == fusion.widths[2],
          "ModelConfig: refiner widths (", fapm.s2_channels, ", ", fapm.s3_channels,
          ") must match the FusionNet S2/S3 widths (", fusion.widths[1], ", ", fusion.widths[2],
          ")");
  expects(fapm.in_channels == extractor.channels, "ModelConfig: compressor input (",
          fapm.in_channels, ") must match extractor channels (", extractor.channels, ")");
  expects(context_width > 0, "ModelConfig: context width must be positive");
  DSFConfig::for_site(Site::kS2, fapm.s2_channels);
  DSFConfig::for_site(Site::kS3, fapm.s3_channels);
}

namespace {

bool any_requires_grad(const torch::nn::Module& module) {
  const auto params = module.parameters(true);
  return std::any_of(params.begin(), params.end(),
                     [](const Tensor& p) { return p.requires_grad(); });
}

int64_t site_stride(Site site) { return site == Site::kS2 ? 4 : 8; }
size_t site_context_level(Site site) { return site == Site::kS2 ? 1 : 2; }

}  // namespace

SemanticVfiModelImpl::SemanticVfiModelImpl(const ModelConfig& config,
                                           std::shared_ptr<SemanticExtractor> extractor)
    : config_(config), extractor_(std::move(extractor)) {
  config.validate();
  ifnet = register_module("ifnet", IFNet(config.ifnet));
  teacher = register_module("teacher", Teacher(config.ifnet.teacher_width));
  contextnet = register_module("contextnet", ContextNet(config.context_width));
  fusionnet = register_module("fusionnet", FusionNet(config.fusion, contextnet->widths()));
  fapm = register_module("fapm", SplitFapm(config.fapm));
  const auto ctx_widths = contextnet->widths();
  auto dsf = std::make_shared<torch::nn::Module>();
  dsf_s2 = dsf->register_module(
      "s2", DsfSite(DSFConfig::for_site(Site::kS2, config.fapm.s2_channels),
                    ctx_widths[site_context_level(Site::kS2)]));
  dsf_s3 = dsf->register_module(
      "s3", DsfSite(DSFConfig::for_site(Site::kS3, config.fapm.s3_channels),
                    ctx_widths[site_context_level(Site::kS3)]));
  register_module("dsf", dsf);
}

SiteTrace SemanticVfiModelImpl::semantic_site(Site site, const Tensor& features0,
                                              const Tensor& features1, const FlowBundle& bundle,
                                              const ContextPyramid& ctx0,
                                              const ContextPyramid& ctx1) {
  const int64_t h = bundle.flow_t0.size(2) / site_stride(site);
  const int64_t w = bundle.flow_t0.size(3) / site_stride(site);
  auto prepare = [&](const Tensor& features, const Tensor& flow) {
    const Tensor compressed = site == Site::kS2 ? fapm->compress_shallow(features)
                                                : fapm->compress_deep(features);
    return backward_warp(resize_bilinear(compressed, h, w), resize_flow(flow, h, w));
  };
  SiteTrace trace;
  trace.warped0 = prepare(features0, bundle.flow_t0);
  trace.warped1 = prepare(features1, bundle.flow_t1);
  trace.d_hat0 = fapm->refine(trace.warped0, site);
  trace.d_hat1 = fapm->refine(trace.warped1, site);
  const size_t level = site_context_level(site);
  DsfSite& module = site == Site::kS2 ? dsf_s2 : dsf_s3;
  trace.dsf = module->forward(ctx0[level], ctx1[level], trace.d_hat0, trace.d_hat1);
  return trace;
}

ModelOutput SemanticVfiModelImpl::forward(const Tensor& i0, const Tensor& i1, double t,
                                          InferenceMode mode, const Tensor& igt,
                                          bool with_teacher) {
  expects(i0.dim() == 4 && i0.size(1) == 3 && i0.sizes() == i1.sizes(),
          "model: frames must be equal (B,3,H,W) tensors, got ", i0.sizes(), " and ",
          i1.sizes());
  expects(t > 0.0 && t < 1.0, "model: t must lie in (0,1), got ", t);
  const Padding padding = Padding::to_multiple(i0.size(2), i0.size(3));
  const Tensor p0 = padding.pad(i0);
  const Tensor p1 = padding.pad(i1);

  ModelOutput out;
  FlowBundle bundle;
  {
    std::optional<torch::NoGradGuard> frozen;
    if (!any_requires_grad(*ifnet)) frozen.emplace();
    bundle = ifnet->forward(p0, p1, t);
  }
  ContextPyramid ctx0;
  ContextPyramid ctx1;
  {
    std::optional<torch::NoGradGuard> frozen;
    if (!any_requires_grad(*contextnet)) frozen.emplace();
    ctx0 = contextnet->forward(p0, bundle.flow_t0);
    ctx1 = contextnet->forward(p1, bundle.flow_t1);
  }

  InjectionPorts ports;
  if (mode == InferenceMode::kSemantic) {
    if (!extractor_) throw LoadError("semantic mode requires a semantic extractor");
    SemanticFeatures f0;
    SemanticFeatures f1;
    {
      torch::NoGradGuard frozen;
      f0 = extractor_->extract(p0);
      f1 = extractor_->extract(p1);
    }
    out.s2 = semantic_site(Site::kS2, f0.shallow, f1.shallow, bundle, ctx0, ctx1);
    out.s3 = semantic_site(Site::kS3, f0.deep, f1.deep, bundle, ctx0, ctx1);
    ports.s2 = out.s2->dsf.injection;
    ports.s3 = out.s3->dsf.injection;
  }
  FusionOutput fusion = fusionnet->forward(p0, p1, bundle, ctx0, ctx1, ports);

  if (with_teacher && is_training() && igt.defined()) {
    std::optional<torch::NoGradGuard> frozen;
    if (!any_requires_grad(*teacher)) frozen.emplace();
    TeacherOutput teach = teacher->refine(p0, p1, padding.pad(igt), bundle, t);
    teach.flow_t0 = padding.crop(teach.flow_t0);
    teach.flow_t1 = padding.crop(teach.flow_t1);
    teach.mask = padding.crop(teach.mask);
    teach.frame = padding.crop(teach.frame);
    out.teacher = std::move(teach);
  }
  out.bundle = bundle.cropped(padding);
  out.fusion.residual = padding.crop(fusion.residual);
  out.fusion.final = padding.crop(fusion.final);
  return out;
}

Tensor SemanticVfiModelImpl::baseline(const Tensor& i0, const Tensor& i1, double t) {
  return forward(i0, i1, t, InferenceMode::kBaseline).fusion.final;
}

std::vector<std::pair<std::string, Tensor>> SemanticVfiModelImpl::group_parameters(
    const std::string& group) const {
  expects(std::find(parameter_groups().begin(), parameter_groups().end(), group) !=
              parameter_groups().end(),
          "unknown parameter group '", group, "'");
  std::vector<std::pair<std::string, Tensor>> out;
  const std::string prefix = group + ".";
  for (const auto& item : named_parameters(true)) {
    if (item.key().rfind(prefix, 0) == 0) out.emplace_back(item.key(), item.value());
  }
  return out;
}

void SemanticVfiModelImpl::set_trainable(const std::string& group, bool trainable) {
  for (auto& [name, p] : group_parameters(group)) {
    p.requires_grad_(trainable);
    if (!trainable) p.mutable_grad() = Tensor();
  }
}

bool SemanticVfiModelImpl::group_trainable(const std::string& group) const {
  const auto params = group_parameters(group);
  return !params.empty() && std::all_of(params.begin(), params.end(), [](const auto& item) {
    return item.second.requires_grad();
  });
}

void reset_gates(SemanticVfiModelImpl& model) {
  torch::NoGradGuard no_grad;
  model.dsf_s2->gate.zero_();
  model.dsf_s3->gate.zero_();
}

std::string tensor_hash(const std::vector<std::pair<std::string, Tensor>>& tensors) {
  Sha256 sha;
  for (const auto& [name, tensor] : tensors) {
    const Tensor t = tensor.detach().cpu().contiguous();
    std::ostringstream header;
    header << name << '|' << t.scalar_type() << '|' << t.sizes() << '|';
    sha.update(header.str());
    sha.update(t.data_ptr(), t.nbytes());
  }
  return sha.hex();
}

std::string group_hash(const SemanticVfiModelImpl& model, const std::string& group) {
  if (group == "extractor") {
    std::vector<std::pair<std::string, Tensor>> tensors;
    if (auto ex = model.extractor_ptr()) {
      for (const auto& item : ex->named_parameters(true)) tensors.emplace_back(item.key(), item.value());
      for (const auto& item : ex->named_buffers(true)) tensors.emplace_back(item.key(), item.value());
    }
    return tensor_hash(tensors);
  }
  return tensor_hash(model.group_parameters(group));
}

int64_t count_parameters(const std::vector<std::pair<std::string, Tensor>>& tensors) {
  int64_t n = 0;
  for (const auto& item : tensors) n += item.second.numel();
  return n;
}

ParameterReport parameter_report(const SemanticVfiModelImpl& model) {
  ParameterReport report;
  auto prefixed = [&](const std::string& prefix) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (const auto& item : model.named_parameters(true)) {
      if (item.key().rfind(prefix, 0) == 0) out.emplace_back(item.key(), item.value());
    }
    return count_parameters(out);
  };

  int64_t extractor_params = 0;
  const ExtractorConfig& ec = model.config().extractor;
  if (ec.kind == ExtractorKind::kPretrainedVit) {
    VitExtractor unloaded(ec);
    for (const auto& p : unloaded.parameters(true)) extractor_params += p.numel();
  }
  const std::string extractor_name =
      ec.kind == ExtractorKind::kPretrainedVit ? "Semantic ViT-S/16" : "Semantic surrogate";

  report.rows = {
      {extractor_name, "Frozen", extractor_params, true, false},
      {"IFBlocks (0-2)", "Frozen", prefixed("ifnet."), true, false},
      {"ContextNet", "Frozen", prefixed("contextnet."), true, false},
      {"Split-FAPM (Compressor)", "Trained", prefixed("fapm.compress."), true, true},
      {"Split-FAPM (Refiner)", "Trained", prefixed("fapm.refine."), true, true},
      {"FusionNet (Base)", "Fine-tuned", prefixed("fusionnet."), true, true},
      {"FusionNet (Injection, DSF)", "Trained", prefixed("dsf."), true, true},
      {"Teacher IFBlock", "Training only", prefixed("teacher."), false, false},
  };
  for (const auto& row : report.rows) {
    if (!row.inference) continue;
    (row.trainable ? report.total_trainable : report.total_frozen) += row.params;
    report.total_inference += row.params;
  }
  return report;
}

std::string ParameterReport::format() const {
  std::ostringstream os;
  auto millions = [](int64_t n) {
    std::ostringstream m;
    m << std::fixed << std::setprecision(3) << static_cast<double>(n) / 1e6;
    return m.str();
  };
  auto line = [&](const std::string& a, const std::string& b, const std::string& c,
                  const std::string& d) {
    os << std::left << std::setw(30) << a << std::setw(15) << b << std::right << std::setw(12)
       << c << std::setw(12) << d << '\n';
  };
  line("Module", "Status", "Params (M)", "Params");
  os << std::string(69, '-') << '\n';
  for (const auto& row : rows) {
    line(row.module, row.status, millions(row.params), std::to_string(row.params));
  }
  os << std::string(69, '-') << '\n';
  line("Total Frozen", "", millions(total_frozen), std::to_string(total_frozen));
  line("Total Trainable", "", millions(total_trainable), std::to_string(total_trainable));
  line("Total Inference (no teacher)", "", millions(total_inference),
       std::to_string(total_inference));
  std::ostringstream pct;
  pct << std::fixed << std::setprecision(1) << 100.0 * trainable_fraction() << "%";
  line("Trainable fraction", "", pct.str(), "");
  return os.str();
}

}  // namespace semvfi
