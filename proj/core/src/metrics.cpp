// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <mutex>
#include <sstream>

#include "semvfi/errors.hpp"

namespace semvfi {

using torch::Tensor;
namespace F = torch::nn::functional;

namespace {

Tensor single(const Tensor& x, const char* who) {
  Tensor t = x.detach().to(torch::kDouble);
  if (t.dim() == 4) {
    expects(t.size(0) == 1, who, ": expected one sample, got batch ", t.size(0));
    t = t[0];
  }
  return t;
}

Tensor luminance(const Tensor& rgb) {
  expects(rgb.dim() == 3 && rgb.size(0) == 3, "ssim: expected (3,H,W), got ", rgb.sizes());
  return (0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2]).unsqueeze(0).unsqueeze(0);
}

Tensor gaussian_window(int64_t size, double sigma) {
  const Tensor x = torch::arange(size, torch::kDouble) - static_cast<double>(size - 1) / 2.0;
  Tensor g = torch::exp(-x.square() / (2.0 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g).view({1, 1, size, size});
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, MetricPlugin> plugins;

  Registry() {
    MetricPlugin l1;
    l1.name = "l1";
    l1.direction = MetricDirection::kLowerBetter;
    l1.evaluate = [](const Tensor& pred, const Tensor& gt) {
      const Tensor per = (pred.to(torch::kDouble) - gt.to(torch::kDouble)).abs().flatten(1).mean(1);
      std::vector<double> out(static_cast<size_t>(per.size(0)));
      for (int64_t i = 0; i < per.size(0); ++i) out[static_cast<size_t>(i)] = per[i].item<double>();
      return out;
    };
    plugins.emplace(l1.name, std::move(l1));
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

double psnr(const Tensor& pred, const Tensor& gt) {
  expects(pred.sizes() == gt.sizes(), "psnr: shapes differ: ", pred.sizes(), " vs ", gt.sizes());
  const double mse = (single(pred, "psnr") - single(gt, "psnr")).square().mean().item<double>();
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Tensor& pred, const Tensor& gt) {
  expects(pred.sizes() == gt.sizes(), "ssim: shapes differ: ", pred.sizes(), " vs ", gt.sizes());
  constexpr int64_t kWindow = 11;
  const Tensor x = luminance(single(pred, "ssim"));
  const Tensor y = luminance(single(gt, "ssim"));
  expects(x.size(2) >= kWindow && x.size(3) >= kWindow, "ssim: image ", x.size(2), "x",
          x.size(3), " is smaller than the ", kWindow, "x", kWindow, " window");
  const Tensor w = gaussian_window(kWindow, 1.5);
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const Tensor mx = F::conv2d(x, w);
  const Tensor my = F::conv2d(y, w);
  const Tensor sxx = F::conv2d(x * x, w) - mx.square();
  const Tensor syy = F::conv2d(y * y, w) - my.square();
  const Tensor sxy = F::conv2d(x * y, w) - mx * my;
  const Tensor map = ((2 * mx * my + c1) * (2 * sxy + c2)) /
                     ((mx.square() + my.square() + c1) * (sxx + syy + c2));
  return map.mean().item<double>();
}

void register_metric_plugin(MetricPlugin plugin) {
  expects(!plugin.name.empty() && static_cast<bool>(plugin.evaluate),
          "register_metric_plugin: plugin needs a name and a callable");
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.plugins[plugin.name] = std::move(plugin);
}

const MetricPlugin& find_metric_plugin(const std::string& name) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  const auto it = r.plugins.find(name);
  expects(it != r.plugins.end(), "unknown metric plugin '", name, "'");
  return it->second;
}

std::vector<std::string> metric_plugin_names() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.plugins) names.push_back(name);
  return names;
}

double stable_mean(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  double compensation = 0.0;
  for (double v : values) {
    const double t = sum + v;
    compensation += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return (sum + compensation) / static_cast<double>(values.size());
}

double stable_std(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double mean = stable_mean(values);
  std::vector<double> sq;
  sq.reserve(values.size());
  for (double v : values) sq.push_back((v - mean) * (v - mean));
  return std::sqrt(stable_mean(sq) * static_cast<double>(values.size()) /
                   static_cast<double>(values.size() - 1));
}

double MetricReport::mean_psnr() const {
  std::vector<double> v;
  for (const auto& s : samples) v.push_back(s.psnr);
  return stable_mean(v);
}

double MetricReport::mean_ssim() const {
  std::vector<double> v;
  for (const auto& s : samples) v.push_back(s.ssim);
  return stable_mean(v);
}

double MetricReport::mean_plugin(const std::string& name) const {
  std::vector<double> v;
  for (const auto& s : samples) v.push_back(s.plugins.at(name));
  return stable_mean(v);
}

std::string metrics_csv(const std::vector<MetricReport>& reports) {
  std::vector<std::string> plugins = reports.empty() ? std::vector<std::string>{}
                                                     : reports.front().plugin_names;
  for (const auto& r : reports) {
    expects(r.plugin_names == plugins, "metrics_csv: reports disagree on plugin columns");
  }
  std::ostringstream os;
  os << "method,split,sample,psnr,ssim";
  for (const auto& p : plugins) os << ',' << p;
  os << '\n';
  for (const auto& r : reports) {
    for (const auto& s : r.samples) {
      os << r.method << ',' << r.split << ',' << s.id << ',' << fixed(s.psnr) << ','
         << fixed(s.ssim);
      for (const auto& p : plugins) os << ',' << fixed(s.plugins.at(p));
      os << '\n';
    }
    os << r.method << ',' << r.split << ",mean," << fixed(r.mean_psnr()) << ','
       << fixed(r.mean_ssim());
    for (const auto& p : plugins) os << ',' << fixed(r.mean_plugin(p));
    os << '\n';
  }
  return os.str();
}

std::string timing_csv(const std::vector<MetricReport>& reports) {
  std::ostringstream os;
  os << "method,split,precision,device,frames,mean_seconds,std_seconds\n";
  for (const auto& r : reports) {
    for (const auto& t : r.timings) {
      os << r.method << ',' << r.split << ',' << t.precision << ',' << t.device << ','
         << t.frames << ',' << fixed(t.mean_seconds, 6) << ',' << fixed(t.std_seconds, 6)
         << '\n';
    }
  }
  return os.str();
}

std::string metrics_table(const std::vector<MetricReport>& reports) {
  std::vector<std::string> methods;
  std::vector<std::string> splits;
  for (const auto& r : reports) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
      methods.push_back(r.method);
    }
    if (std::find(splits.begin(), splits.end(), r.split) == splits.end()) {
      splits.push_back(r.split);
    }
  }
  const std::vector<std::string> plugins =
      reports.empty() ? std::vector<std::string>{} : reports.front().plugin_names;
  auto find = [&](const std::string& m, const std::string& s) -> const MetricReport* {
    for (const auto& r : reports) {
      if (r.method == m && r.split == s) return &r;
    }
    return nullptr;
  };

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"Method"};
  for (const auto& s : splits) {
    header.push_back(s + " PSNR↑/SSIM↑");
    for (const auto& p : plugins) {
      const bool higher = find_metric_plugin(p).direction == MetricDirection::kHigherBetter;
      header.push_back(s + " " + p + (higher ? "↑" : "↓"));
    }
  }
  rows.push_back(header);
  for (const auto& m : methods) {
    std::vector<std::string> row{m};
    for (const auto& s : splits) {
      const MetricReport* r = find(m, s);
      row.push_back(r ? fixed(r->mean_psnr(), 3) + "/" + fixed(r->mean_ssim(), 4) : "-");
      for (const auto& p : plugins) row.push_back(r ? fixed(r->mean_plugin(p), 4) : "-");
    }
    rows.push_back(row);
  }

  // Pad by display width (arrows are one column but three bytes).
  auto width = [](const std::string& s) {
    size_t n = 0;
    for (unsigned char c : s) n += (c & 0xC0) != 0x80;
    return n;
  };
  std::vector<size_t> widths(header.size(), 0);
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], width(row[i]));
  }
  std::ostringstream os;
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t i = 0; i < rows[r].size(); ++i) {
      os << (i ? " | " : "") << rows[r][i] << std::string(widths[i] - width(rows[r][i]), ' ');
    }
    os << '\n';
    if (r == 0) {
      for (size_t i = 0; i < widths.size(); ++i) os << (i ? "-+-" : "") << std::string(widths[i], '-');
      os << '\n';
    }
  }
  return os.str();
}

}  // namespace semvfi
