// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/checkpoint.hpp"

#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "semvfi/errors.hpp"

namespace semvfi {
namespace {

namespace fs = std::filesystem;

c10::Dict<std::string, torch::Tensor> to_ivalue_dict(const TensorDict& dict) {
  c10::Dict<std::string, torch::Tensor> out;
  for (const auto& [name, tensor] : dict) {
    out.insert(name, tensor.detach().cpu().contiguous());
  }
  return out;
}

TensorDict from_ivalue_dict(const c10::IValue& value, const fs::path& path) {
  if (!value.isGenericDict()) {
    throw LoadError(detail::concat("checkpoint ", path, ": expected a dictionary"));
  }
  TensorDict out;
  for (const auto& entry : value.toGenericDict()) {
    if (!entry.key().isString() || !entry.value().isTensor()) {
      throw LoadError(detail::concat("checkpoint ", path,
                                     ": expected {str: tensor}, found a non-tensor entry"));
    }
    out.emplace(entry.key().toStringRef(), entry.value().toTensor());
  }
  return out;
}

c10::IValue read_pickle(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw LoadError(detail::concat("cannot open checkpoint ", path));
  }
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return torch::pickle_load(bytes);
  } catch (const c10::Error& e) {
    throw LoadError(detail::concat("cannot parse checkpoint ", path, ": ", e.what_without_backtrace()));
  }
}

std::string join(const std::vector<std::string>& names, size_t limit = 8) {
  std::ostringstream os;
  for (size_t i = 0; i < names.size() && i < limit; ++i) {
    os << (i ? ", " : "") << names[i];
  }
  if (names.size() > limit) os << ", ... (" << names.size() << " total)";
  return os.str();
}

}  // namespace

void write_checkpoint(const fs::path& path, const CheckpointArchive& archive) {
  c10::impl::GenericDict root(c10::StringType::get(), c10::AnyType::get());
  root.insert("model", to_ivalue_dict(archive.model));
  root.insert("optimizer", to_ivalue_dict(archive.optimizer));
  root.insert("stage", archive.stage);
  root.insert("step", archive.step);
  root.insert("config_hash", archive.config_hash);
  const std::vector<char> bytes = torch::pickle_save(root);
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw LoadError(detail::concat("failed to write checkpoint ", path));
  }
}

CheckpointArchive read_checkpoint(const fs::path& path) {
  const c10::IValue root = read_pickle(path);
  if (!root.isGenericDict()) {
    throw LoadError(detail::concat("checkpoint ", path, ": expected a dictionary"));
  }
  const auto dict = root.toGenericDict();
  CheckpointArchive archive;
  if (!dict.contains("model")) {
    archive.model = from_ivalue_dict(root, path);
    return archive;
  }
  archive.model = from_ivalue_dict(dict.at("model"), path);
  if (dict.contains("optimizer")) archive.optimizer = from_ivalue_dict(dict.at("optimizer"), path);
  if (dict.contains("stage")) archive.stage = dict.at("stage").toInt();
  if (dict.contains("step")) archive.step = dict.at("step").toInt();
  if (dict.contains("config_hash")) archive.config_hash = dict.at("config_hash").toStringRef();
  return archive;
}

TensorDict read_tensor_dict(const fs::path& path) { return read_checkpoint(path).model; }

TensorDict state_dict(const torch::nn::Module& module) {
  TensorDict out;
  for (const auto& item : module.named_parameters(true)) {
    out.emplace(item.key(), item.value().detach().cpu().clone());
  }
  for (const auto& item : module.named_buffers(true)) {
    out.emplace(item.key(), item.value().detach().cpu().clone());
  }
  return out;
}

std::vector<std::string> load_into(torch::nn::Module& module, const TensorDict& weights,
                                   bool strict) {
  torch::NoGradGuard no_grad;
  std::vector<std::string> loaded;
  std::vector<std::string> missing;
  std::set<std::string> targets;
  auto assign = [&](const std::string& name, torch::Tensor& target) {
    targets.insert(name);
    const auto it = weights.find(name);
    if (it == weights.end()) {
      missing.push_back(name);
      return;
    }
    if (it->second.sizes() != target.sizes()) {
      throw LoadError(detail::concat("weight ", name, " has shape ", it->second.sizes(),
                                     ", expected ", target.sizes()));
    }
    target.copy_(it->second.to(target.dtype()));
    loaded.push_back(name);
  };
  for (auto& item : module.named_parameters(true)) assign(item.key(), item.value());
  for (auto& item : module.named_buffers(true)) assign(item.key(), item.value());

  if (strict) {
    std::vector<std::string> unmapped;
    for (const auto& [name, _] : weights) {
      if (!targets.count(name)) unmapped.push_back(name);
    }
    if (!missing.empty() || !unmapped.empty()) {
      throw LoadError(detail::concat("strict load failed; missing [", join(missing),
                                     "], unmapped [", join(unmapped), "]"));
    }
  }
  return loaded;
}

TensorDict map_rife_keys(const TensorDict& upstream) {
  static const std::vector<std::pair<std::string, std::string>> rules = {
      {"block0.", "ifnet.block0."},   {"block1.", "ifnet.block1."},
      {"block2.", "ifnet.block2."},   {"block_tea.", "teacher."},
      {"contextnet.", "contextnet."}, {"unet.", "fusionnet."},
  };
  TensorDict out;
  for (const auto& [key, tensor] : upstream) {
    std::string name = key;
    if (name.rfind("module.", 0) == 0) name = name.substr(7);
    for (const auto& [from, to] : rules) {
      if (name.rfind(from, 0) == 0) {
        name = to + name.substr(from.size());
        break;
      }
    }
    out.emplace(std::move(name), tensor);
  }
  return out;
}

}  // namespace semvfi
