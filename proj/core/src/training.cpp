// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/training.hpp"

#include <cmath>
#include <numbers>
#include <tuple>

#include "semvfi/errors.hpp"

namespace semvfi {

using torch::Tensor;
namespace fs = std::filesystem;

StageSpec StageSpec::for_stage(int stage) {
  switch (stage) {
    case 0:
      return {0, {"ifnet", "teacher", "contextnet", "fusionnet"}};
    case 1:
      return {1, {"fapm", "dsf"}};
    case 2:
      return {2, {"fapm", "dsf", "fusionnet"}};
    default:
      throw ContractViolation(detail::concat("unknown training stage ", stage));
  }
}

std::string StageSpec::name() const {
  static const char* names[] = {"bootstrap", "alignment", "fusion"};
  return names[stage];
}

StagePartition build_stage(const StageSpec& spec, SemanticVfiModelImpl& model) {
  const auto& groups = parameter_groups();
  for (const auto& name : spec.trainable) {
    expects(std::find(groups.begin(), groups.end(), name) != groups.end(),
            "build_stage: unknown module '", name, "'");
  }
  StagePartition partition;
  for (const auto& group : groups) {
    const bool trainable = spec.trainable.count(group) > 0;
    model.set_trainable(group, trainable);
    for (auto& [name, p] : model.group_parameters(group)) {
      (trainable ? partition.trainable : partition.frozen).push_back(name);
      if (trainable) partition.parameters.push_back(p);
    }
  }
  return partition;
}

double cosine_lr(int64_t step, int64_t total, double lr, double lr_min) {
  if (total <= 1) return lr;
  const double progress = static_cast<double>(step) / static_cast<double>(total - 1);
  return lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

nlohmann::json StepRecord::to_json() const {
  return {{"stage", stage},
          {"step", step},
          {"lr", lr},
          {"rec", loss.rec},
          {"dis", loss.dis},
          {"tea", loss.tea},
          {"sem", loss.sem},
          {"reg", loss.reg},
          {"total", loss.total},
          {"grad_norm", grad_norm},
          {"grad_norm_clipped", grad_norm_clipped},
          {"gate_s2", gate_s2},
          {"gate_s3", gate_s3}};
}

std::pair<Tensor, LossBreakdown> stage_loss(int stage, SemanticVfiModelImpl& model,
                                            const FrameTriplet& batch,
                                            const LossWeights& weights) {
  const InferenceMode mode = stage == 0 ? InferenceMode::kBaseline : InferenceMode::kSemantic;
  const ModelOutput out = model.forward(batch.i0, batch.i1, batch.t, mode, batch.igt, true);
  expects(out.teacher.has_value(), "stage_loss: teacher output missing (model in eval mode?)");

  LossTerms terms;
  terms.rec = laplacian_loss(out.frame(), batch.igt);
  terms.tea = laplacian_loss(out.teacher->frame, batch.igt);
  std::vector<Tensor> flows;
  std::vector<Tensor> masks;
  for (const FlowLevel& level : out.bundle.pyramid) {
    flows.push_back(level.flow);
    masks.push_back(privileged_mask(level.coarse, out.teacher->frame, batch.igt));
  }
  terms.dis = distillation_loss(flows, out.teacher->flow(), masks);
  if (mode == InferenceMode::kSemantic) {
    terms.sem = semantic_consistency(out.frame(), batch.igt, model.extractor());
    auto both = [](const SiteTrace& s) {
      return torch::cat({s.dsf.past.offsets, s.dsf.future.offsets}, 1);
    };
    terms.reg = offset_reg(both(*out.s2), both(*out.s3));
  }
  return combine(terms, weights);
}

Trainer::Trainer(RunConfig config, SemanticVfiModel model, std::vector<TripletRecord> records)
    : config_(std::move(config)), model_(std::move(model)), records_(std::move(records)) {
  expects(!records_.empty(), "Trainer: no training records");
  at::set_num_threads(static_cast<int>(config_.threads));
}

void Trainer::set_log(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  log_ = std::make_unique<std::ofstream>(path, std::ios::app);
  if (!*log_) throw DataError(detail::concat("cannot open training log ", path));
}

int64_t Trainer::steps_per_epoch() const {
  return std::max<int64_t>(1, static_cast<int64_t>(records_.size()) / config_.train.batch_size);
}

int64_t Trainer::stage_steps(int stage) const {
  const auto s = static_cast<size_t>(stage);
  if (config_.train.steps[s] > 0) return config_.train.steps[s];
  return config_.train.epochs[s] * steps_per_epoch();
}

FrameTriplet Trainer::batch(int stage, int64_t step) const {
  const int64_t per_epoch = steps_per_epoch();
  const int64_t epoch = step / per_epoch;
  const int64_t offset = (step % per_epoch) * config_.train.batch_size;
  const uint64_t stream = mix_seed(config_.seed, static_cast<uint64_t>(stage));
  const auto order = epoch_permutation(static_cast<int64_t>(records_.size()), stream, epoch);
  AugmentOptions aug;
  aug.crop = config_.train.crop;
  std::vector<FrameTriplet> items;
  for (int64_t i = 0; i < config_.train.batch_size; ++i) {
    const int64_t position = (offset + i) % static_cast<int64_t>(order.size());
    const int64_t index = order[static_cast<size_t>(position)];
    items.push_back(augment(records_[static_cast<size_t>(index)], aug,
                            mix_seed(stream, static_cast<uint64_t>(epoch),
                                     static_cast<uint64_t>(position))));
  }
  return collate(items);
}

void Trainer::begin_stage(int stage) {
  const StageSpec spec = StageSpec::for_stage(stage);
  partition_ = build_stage(spec, *model_);
  model_->train();
  stage_ = stage;
  step_ = 0;
  total_steps_ = stage_steps(stage);
  const double lr = stage == 0 ? config_.train.bootstrap_lr : config_.train.lr;
  optimizer_ = std::make_unique<torch::optim::AdamW>(
      partition_.parameters, torch::optim::AdamWOptions(lr)
                                 .betas({config_.train.beta1, config_.train.beta2})
                                 .eps(config_.train.eps)
                                 .weight_decay(config_.train.weight_decay));
}

namespace {

double global_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (p.grad().defined()) sq += p.grad().to(torch::kDouble).square().sum().item<double>();
  }
  return std::sqrt(sq);
}

void dump_nonfinite(const fs::path& dir, const StepRecord& record, const FrameTriplet& batch) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  const std::string stem = "nonfinite_stage" + std::to_string(record.stage) + "_step" +
                           std::to_string(record.step);
  CheckpointArchive dump;
  dump.model = {{"i0", batch.i0}, {"i1", batch.i1}, {"igt", batch.igt}};
  dump.stage = record.stage;
  dump.step = record.step;
  write_checkpoint(dir / (stem + ".pt"), dump);
  std::ofstream(dir / (stem + ".json")) << record.to_json().dump(2) << '\n';
}

}  // namespace

StepRecord Trainer::train_step(const FrameTriplet& batch) {
  expects(optimizer_ != nullptr, "train_step: call begin_stage first");
  StepRecord record;
  record.stage = stage_;
  record.step = step_;
  const double base_lr = stage_ == 0 ? config_.train.bootstrap_lr : config_.train.lr;
  record.lr = cosine_lr(step_, total_steps_, base_lr, config_.train.lr_min);
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamWOptions&>(group.options()).lr(record.lr);
  }

  optimizer_->zero_grad(true);
  Tensor total;
  LossBreakdown breakdown;
  try {
    std::tie(total, breakdown) = stage_loss(stage_, *model_, batch, config_.weights);
  } catch (const NonFiniteError&) {
    // A kernel rejected non-finite inputs before the loss was formed.
    dump_nonfinite(checkpoint_dir_, record, batch);
    throw;
  }
  record.loss = breakdown;
  if (!std::isfinite(breakdown.total)) {
    dump_nonfinite(checkpoint_dir_, record, batch);
    throw NonFiniteError(detail::concat("non-finite loss at stage ", stage_, " step ", step_,
                                        " (lr=", record.lr, ", rec=", breakdown.rec,
                                        ", dis=", breakdown.dis, ", tea=", breakdown.tea,
                                        ", sem=", breakdown.sem, ", reg=", breakdown.reg, ")"));
  }
  total.backward();
  record.grad_norm =
      torch::nn::utils::clip_grad_norm_(partition_.parameters, config_.train.grad_clip_norm);
  record.grad_norm_clipped = global_norm(partition_.parameters);
  optimizer_->step();

  const auto g2 = model_->dsf_s2->gate.detach();
  const auto g3 = model_->dsf_s3->gate.detach();
  record.gate_s2 = {g2[0].item<double>(), g2[1].item<double>()};
  record.gate_s3 = {g3[0].item<double>(), g3[1].item<double>()};
  if (log_) {
    *log_ << record.to_json().dump() << '\n';
    log_->flush();
  }
  ++step_;
  return record;
}

TensorDict Trainer::optimizer_state() const {
  TensorDict out;
  if (!optimizer_) return out;
  auto& state = const_cast<torch::optim::AdamW&>(*optimizer_).state();
  for (const auto& item : model_->named_parameters(true)) {
    const auto it = state.find(item.value().unsafeGetTensorImpl());
    if (it == state.end()) continue;
    const auto& s = static_cast<const torch::optim::AdamWParamState&>(*it->second);
    out.emplace(item.key() + ".exp_avg", s.exp_avg());
    out.emplace(item.key() + ".exp_avg_sq", s.exp_avg_sq());
    out.emplace(item.key() + ".step", torch::tensor(s.step()));
  }
  return out;
}

void Trainer::save_checkpoint(const fs::path& path) const {
  CheckpointArchive archive;
  archive.model = state_dict(*model_);
  archive.optimizer = optimizer_state();
  archive.stage = stage_;
  archive.step = step_;
  archive.config_hash = config_.hash();
  write_checkpoint(path, archive);
}

std::vector<StepRecord> Trainer::run_stage(int stage) {
  begin_stage(stage);
  std::vector<StepRecord> records;
  const int64_t per_epoch = steps_per_epoch();
  for (int64_t s = 0; s < total_steps_; ++s) {
    records.push_back(train_step(batch(stage, s)));
    const bool epoch_end = (s + 1) % per_epoch == 0 || s + 1 == total_steps_;
    if (epoch_end && !checkpoint_dir_.empty()) {
      const int64_t epoch = s / per_epoch;
      save_checkpoint(checkpoint_dir_ / ("stage" + std::to_string(stage) + "_epoch" +
                                         std::to_string(epoch) + ".ckpt"));
    }
  }
  return records;
}

std::vector<TripletRecord> training_records(const RunConfig& config) {
  if (config.data.kind == "vimeo") {
    const fs::path list = config.data.list.empty() ? fs::path("tri_trainlist.txt")
                                                   : fs::path(config.data.list);
    return load_vimeo_triplets(config.data.root, list.is_absolute() ? list : config.data.root / list,
                               config.data.skip_missing ? MissingPolicy::kSkip
                                                        : MissingPolicy::kFail);
  }
  SynthOptions o;
  o.seed = config.data.synthetic_seed;
  o.count = config.data.synthetic_count;
  o.size = config.data.synthetic_size;
  o.motion_min = config.data.motion_min;
  o.motion_max = config.data.motion_max;
  return synth_triplets(o);
}

std::vector<TripletRecord> holdout_records(const RunConfig& config) {
  SynthOptions o;
  o.seed = mix_seed(config.data.synthetic_seed, 0x401d);
  o.count = config.data.holdout_count;
  o.size = config.data.synthetic_size;
  o.motion_min = config.data.motion_min;
  o.motion_max = config.data.motion_max;
  return synth_triplets(o);
}

void load_model_checkpoint(SemanticVfiModelImpl& model, const fs::path& path) {
  TensorDict weights = read_checkpoint(path).model;
  const bool rife_layout = std::any_of(weights.begin(), weights.end(), [](const auto& item) {
    return item.first.rfind("module.", 0) == 0 || item.first.rfind("block0.", 0) == 0 ||
           item.first.rfind("unet.", 0) == 0;
  });
  if (rife_layout) weights = map_rife_keys(weights);
  if (weights.count("fapm.compress.shallow.feature.weight") > 0) {
    load_into(model, weights, /*strict=*/true);
    return;
  }
  // Backbone-only archive: each present group must load completely.
  std::map<std::string, TensorDict> by_group;
  for (auto& [name, tensor] : weights) {
    const auto dot = name.find('.');
    const std::string group = name.substr(0, dot);
    if (group != "ifnet" && group != "contextnet" && group != "fusionnet" && group != "teacher") {
      throw LoadError(detail::concat("checkpoint ", path, ": unmapped key '", name, "'"));
    }
    by_group[group].emplace(name.substr(dot + 1), tensor);
  }
  if (by_group.count("ifnet") == 0) {
    throw LoadError(detail::concat("checkpoint ", path, " holds no ifnet weights"));
  }
  for (const auto& [group, dict] : by_group) {
    torch::nn::Module* target = nullptr;
    if (group == "ifnet") target = model.ifnet.get();
    if (group == "contextnet") target = model.contextnet.get();
    if (group == "fusionnet") target = model.fusionnet.get();
    if (group == "teacher") target = model.teacher.get();
    load_into(*target, dict, /*strict=*/true);
  }
}

TrainingSummary run_training(const RunConfig& config) {
  config.validate();
  auto extractor = make_extractor(config.model.extractor);
  torch::manual_seed(config.seed);
  SemanticVfiModel model(config.model, extractor);
  if (!config.backbone_checkpoint.empty()) {
    load_model_checkpoint(*model, config.backbone_checkpoint);
  }

  const fs::path out_dir = config.output_dir;
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "config.json") << config.to_json().dump(2) << '\n';
  const fs::path log_path = out_dir / "train_log.jsonl";
  fs::remove(log_path);

  Trainer trainer(config, model, training_records(config));
  trainer.set_log(log_path);
  trainer.set_checkpoint_dir(out_dir / "checkpoints");

  TrainingSummary summary;
  const bool bootstrap = config.backbone_checkpoint.empty() && trainer.stage_steps(0) > 0;
  if (bootstrap) {
    auto records = trainer.run_stage(0);
    summary.records.insert(summary.records.end(), records.begin(), records.end());
  }
  for (const std::string group : {"ifnet", "contextnet", "extractor"}) {
    summary.frozen_hashes_before[group] = group_hash(*model, group);
  }
  for (int stage : {1, 2}) {
    auto records = trainer.run_stage(stage);
    summary.records.insert(summary.records.end(), records.begin(), records.end());
  }
  for (const std::string group : {"ifnet", "contextnet", "extractor"}) {
    summary.frozen_hashes_after[group] = group_hash(*model, group);
  }
  summary.final_checkpoint = out_dir / "final.ckpt";
  trainer.save_checkpoint(summary.final_checkpoint);
  return summary;
}

}  // namespace semvfi
