// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/config.hpp"

#include <fstream>
#include <set>

#include "semvfi/errors.hpp"
#include "semvfi/hash.hpp"

namespace semvfi {

using nlohmann::json;

void TrainConfig::validate() const {
  expects(batch_size > 0, "train.batch_size must be positive");
  expects(lr > 0 && bootstrap_lr > 0, "train.lr must be positive");
  expects(lr_min >= 0 && lr_min <= lr, "train.lr_min must lie in [0, lr]");
  expects(grad_clip_norm > 0, "train.grad_clip_norm must be positive");
  expects(weight_decay >= 0, "train.weight_decay must be non-negative");
  expects(crop >= kModelStride && crop % kModelStride == 0, "train.crop must be a multiple of ",
          kModelStride);
  for (int s = 0; s < 3; ++s) {
    expects(epochs[s] >= 0 && steps[s] >= 0, "train: stage lengths must be non-negative");
  }
}

void DataConfig::validate() const {
  expects(kind == "synthetic" || kind == "vimeo", "data.kind must be 'synthetic' or 'vimeo'");
  if (kind == "vimeo") expects(!root.empty(), "data.root is required for vimeo data");
  expects(synthetic_size >= 32, "data.synthetic_size must be >= 32");
  expects(motion_min >= 0 && motion_min <= motion_max, "data motion range is invalid");
  expects(synthetic_count > 0 && holdout_count >= 0, "data counts are invalid");
}

RunConfig RunConfig::desk() {
  RunConfig c;
  c.profile = "desk";
  c.output_dir = "runs/desk";
  c.model = ModelConfig::desk();
  c.train.batch_size = 8;
  c.train.crop = 128;
  c.train.steps = {1500, 200, 800};
  return c;
}

RunConfig RunConfig::paper() {
  RunConfig c;
  c.profile = "paper";
  c.output_dir = "runs/paper";
  c.model = ModelConfig::paper();
  c.train.batch_size = 64;
  c.train.crop = 224;
  c.train.epochs = {0, 5, 25};
  c.train.steps = {0, 0, 0};
  c.data.kind = "vimeo";
  c.data.root = "vimeo_triplet";
  c.data.list = "tri_trainlist.txt";
  return c;
}

RunConfig RunConfig::from_profile(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ContractViolation("unknown profile '" + name + "' (expected desk or paper)");
}

namespace {

class Reader {
 public:
  Reader(const json& j, std::string scope) : j_(j), scope_(std::move(scope)) {
    expects(j.is_object(), "config: '", scope_, "' must be an object");
  }
  /// Rejects keys that were never requested.
  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      expects(seen_.count(key) > 0, "config: unknown key '", scope_.empty() ? "" : scope_ + ".",
              key, "'");
    }
  }

  template <typename T>
  void get(const char* key, T& field) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      field = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ContractViolation(detail::concat("config: bad value for '", scope_, ".", key,
                                             "': ", e.what()));
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string scope_;
  std::set<std::string> seen_;
};

json model_json(const ModelConfig& m) {
  return {
      {"ifnet_widths", m.ifnet.widths},
      {"ifnet_scales", m.ifnet.scales},
      {"teacher_width", m.ifnet.teacher_width},
      {"context_width", m.context_width},
      {"fusion_widths", m.fusion.widths},
      {"fusion_out_width", m.fusion.out_width},
      {"semantic_channels", m.fapm.in_channels},
      {"compressed_channels", m.fapm.compressed_channels},
      {"se_ratio", m.fapm.se_ratio},
      {"extractor",
       {{"kind", to_string(m.extractor.kind)},
        {"weights_path", m.extractor.weights_path},
        {"layer_indices", m.extractor.layer_indices},
        {"mean", m.extractor.mean},
        {"std", m.extractor.std},
        {"patch_stride", m.extractor.patch_stride},
        {"seed", m.extractor.seed}}},
  };
}

void read_model(const json& j, ModelConfig& m) {
  Reader r(j, "model");
  r.get("ifnet_widths", m.ifnet.widths);
  r.get("ifnet_scales", m.ifnet.scales);
  r.get("teacher_width", m.ifnet.teacher_width);
  r.get("context_width", m.context_width);
  r.get("fusion_widths", m.fusion.widths);
  r.get("fusion_out_width", m.fusion.out_width);
  r.get("semantic_channels", m.fapm.in_channels);
  r.get("compressed_channels", m.fapm.compressed_channels);
  r.get("se_ratio", m.fapm.se_ratio);
  m.fapm.s2_channels = m.fusion.widths[1];
  m.fapm.s3_channels = m.fusion.widths[2];
  if (const json* e = r.child("extractor")) {
    Reader er(*e, "model.extractor");
    std::string kind = to_string(m.extractor.kind);
    er.get("kind", kind);
    m.extractor.kind = extractor_kind_from_string(kind);
    er.get("weights_path", m.extractor.weights_path);
    er.get("layer_indices", m.extractor.layer_indices);
    er.get("mean", m.extractor.mean);
    er.get("std", m.extractor.std);
    er.get("patch_stride", m.extractor.patch_stride);
    er.get("seed", m.extractor.seed);
    er.finish();
  }
  m.extractor.channels = m.fapm.in_channels;
  r.finish();
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const std::string& profile_override) {
  expects(j.is_object(), "config: top level must be a JSON object");
  std::string profile = profile_override;
  if (profile.empty()) profile = j.value("profile", std::string("desk"));
  RunConfig c = from_profile(profile);

  Reader r(j, "");
  std::string file_profile;
  r.get("profile", file_profile);
  r.get("seed", c.seed);
  r.get("threads", c.threads);
  r.get("output_dir", c.output_dir);
  r.get("backbone_checkpoint", c.backbone_checkpoint);
  if (const json* m = r.child("model")) read_model(*m, c.model);
  if (const json* t = r.child("train")) {
    Reader tr(*t, "train");
    tr.get("batch_size", c.train.batch_size);
    tr.get("lr", c.train.lr);
    tr.get("lr_min", c.train.lr_min);
    tr.get("weight_decay", c.train.weight_decay);
    tr.get("beta1", c.train.beta1);
    tr.get("beta2", c.train.beta2);
    tr.get("eps", c.train.eps);
    tr.get("grad_clip_norm", c.train.grad_clip_norm);
    tr.get("crop", c.train.crop);
    tr.get("epochs", c.train.epochs);
    tr.get("steps", c.train.steps);
    tr.get("bootstrap_lr", c.train.bootstrap_lr);
    tr.finish();
  }
  if (const json* d = r.child("data")) {
    Reader dr(*d, "data");
    dr.get("kind", c.data.kind);
    dr.get("root", c.data.root);
    dr.get("list", c.data.list);
    dr.get("skip_missing", c.data.skip_missing);
    dr.get("synthetic_count", c.data.synthetic_count);
    dr.get("synthetic_size", c.data.synthetic_size);
    dr.get("motion_min", c.data.motion_min);
    dr.get("motion_max", c.data.motion_max);
    dr.get("synthetic_seed", c.data.synthetic_seed);
    dr.get("holdout_count", c.data.holdout_count);
    dr.finish();
  }
  if (const json* w = r.child("loss_weights")) {
    Reader wr(*w, "loss_weights");
    wr.get("rec", c.weights.rec);
    wr.get("dis", c.weights.dis);
    wr.get("tea", c.weights.tea);
    wr.get("sem", c.weights.sem);
    wr.get("reg", c.weights.reg);
    wr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path, const std::string& profile_override) {
  std::ifstream in(path);
  if (!in) throw ContractViolation(detail::concat("cannot open config file ", path));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ContractViolation(detail::concat("config ", path, ": ", e.what()));
  }
  return from_json(j, profile_override);
}

json RunConfig::to_json() const {
  return {
      {"profile", profile},
      {"seed", seed},
      {"threads", threads},
      {"output_dir", output_dir},
      {"backbone_checkpoint", backbone_checkpoint},
      {"model", model_json(model)},
      {"train",
       {{"batch_size", train.batch_size},
        {"lr", train.lr},
        {"lr_min", train.lr_min},
        {"weight_decay", train.weight_decay},
        {"beta1", train.beta1},
        {"beta2", train.beta2},
        {"eps", train.eps},
        {"grad_clip_norm", train.grad_clip_norm},
        {"crop", train.crop},
        {"epochs", train.epochs},
        {"steps", train.steps},
        {"bootstrap_lr", train.bootstrap_lr}}},
      {"data",
       {{"kind", data.kind},
        {"root", data.root},
        {"list", data.list},
        {"skip_missing", data.skip_missing},
        {"synthetic_count", data.synthetic_count},
        {"synthetic_size", data.synthetic_size},
        {"motion_min", data.motion_min},
        {"motion_max", data.motion_max},
        {"synthetic_seed", data.synthetic_seed},
        {"holdout_count", data.holdout_count}}},
      {"loss_weights",
       {{"rec", weights.rec},
        {"dis", weights.dis},
        {"tea", weights.tea},
        {"sem", weights.sem},
        {"reg", weights.reg}}},
  };
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

void RunConfig::validate() const {
  expects(threads > 0, "threads must be positive");
  model.validate();
  model.extractor.validate(model.extractor.kind == ExtractorKind::kPretrainedVit ? VitConfig{}.depth
                                                                                 : 12);
  train.validate();
  data.validate();
  weights.validate();
}

}  // namespace semvfi
