// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "semvfi/errors.hpp"

namespace semvfi {

using torch::Tensor;

Tensor read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError(detail::concat("image not found: ", path));
  }
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR | cv::IMREAD_ANYDEPTH);
  if (bgr.empty()) throw DataError(detail::concat("cannot decode image: ", path));
  const double scale = bgr.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, scale);
  return torch::from_blob(f.data, {f.rows, f.cols, 3}, torch::kFloat)
      .permute({2, 0, 1})
      .contiguous()
      .clone();
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  Tensor x = image.detach().cpu().to(torch::kFloat);
  if (x.dim() == 4) {
    expects(x.size(0) == 1, "write_png: batch must be 1, got ", x.size(0));
    x = x[0];
  }
  if (x.dim() == 2) x = x.unsqueeze(0);
  expects(x.dim() == 3 && (x.size(0) == 1 || x.size(0) == 3),
          "write_png: expected (3,H,W) or (1,H,W), got ", image.sizes());
  const Tensor bytes =
      (x.clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  const int channels = static_cast<int>(bytes.size(2));
  cv::Mat mat(static_cast<int>(bytes.size(0)), static_cast<int>(bytes.size(1)),
              channels == 3 ? CV_8UC3 : CV_8UC1, bytes.data_ptr());
  cv::Mat out;
  if (channels == 3) {
    cv::cvtColor(mat, out, cv::COLOR_RGB2BGR);
  } else {
    out = mat.clone();
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), out)) {
    throw DataError(detail::concat("cannot write image: ", path));
  }
}

Tensor apply_colormap(const Tensor& map) {
  Tensor m = map.detach().cpu().to(torch::kFloat);
  if (m.dim() == 3) m = m[0];
  expects(m.dim() == 2, "apply_colormap: expected (H,W), got ", map.sizes());
  const Tensor bytes = (m.clamp(0.0, 1.0) * 255.0).round().to(torch::kUInt8).contiguous();
  cv::Mat gray(static_cast<int>(m.size(0)), static_cast<int>(m.size(1)), CV_8UC1,
               bytes.data_ptr());
  cv::Mat bgr;
  cv::applyColorMap(gray, bgr, cv::COLORMAP_TURBO);
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return torch::from_blob(rgb.data, {rgb.rows, rgb.cols, 3}, torch::kUInt8)
             .permute({2, 0, 1})
             .to(torch::kFloat)
             .div(255.0)
             .contiguous();
}

}  // namespace semvfi
