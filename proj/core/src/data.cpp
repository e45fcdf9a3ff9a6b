// Copyright 2026 The semvfi Authors
// SPDX-License-Identifier: Apache-2.0

#include "semvfi/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <regex>
#include <sstream>

#include "semvfi/errors.hpp"
#include "semvfi/image_io.hpp"

namespace semvfi {

using torch::Tensor;
namespace fs = std::filesystem;

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  // splitmix64 over the combined words.
  auto mix = [](uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  uint64_t h = mix(seed);
  h = mix(h ^ a);
  h = mix(h ^ b);
  return mix(h ^ c);
}

TripletRecord TripletRecord::materialized() const {
  if (in_memory()) return *this;
  TripletRecord r = *this;
  r.i0 = read_image(path0);
  r.igt = read_image(path_gt);
  r.i1 = read_image(path1);
  if (r.i0.sizes() != r.igt.sizes() || r.i0.sizes() != r.i1.sizes()) {
    throw DataError(detail::concat("triplet ", source, ": frame sizes differ"));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

struct Grating {
  double wx, wy, phase;
  std::array<double, 3> amplitude;
};

struct Shape {
  int kind;  // 0 ellipse, 1 box
  double cx, cy, rx, ry;
  double angle, spin;  // radians at t = 0.5, total rotation over [0,1]
  double vx, vy;       // px over [0,1]
  std::array<double, 3> color;
  std::array<double, 3> stripe;
  double stripe_freq, stripe_phase;
};

struct Scene {
  std::array<double, 3> base;
  std::vector<Grating> gratings;
  double bg_vx, bg_vy;
  std::vector<Shape> shapes;
};

Scene sample_scene(std::mt19937_64& rng, const SynthOptions& o) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
  auto direction = [&](double magnitude) {
    const double a = range(0.0, 2.0 * std::numbers::pi);
    return std::pair{magnitude * std::cos(a), magnitude * std::sin(a)};
  };
  const double size = static_cast<double>(o.size);
  const double scale = size / 128.0;

  Scene s;
  s.base = {range(0.3, 0.7), range(0.3, 0.7), range(0.3, 0.7)};
  for (int k = 0; k < 3; ++k) {
    auto [wx, wy] = direction(range(0.05, 0.35));
    s.gratings.push_back(
        {wx, wy, range(0.0, 2.0 * std::numbers::pi), {range(0.03, 0.1), range(0.03, 0.1), range(0.03, 0.1)}});
  }
  std::tie(s.bg_vx, s.bg_vy) = direction(0.5 * range(o.motion_min, o.motion_max));

  const int n = 2 + static_cast<int>(u(rng) * 3.0);
  for (int k = 0; k < n; ++k) {
    Shape sh{};
    sh.kind = u(rng) < 0.5 ? 0 : 1;
    sh.cx = range(0.2, 0.8) * size;
    sh.cy = range(0.2, 0.8) * size;
    sh.rx = range(8.0, 24.0) * scale;
    sh.ry = range(8.0, 24.0) * scale;
    sh.angle = range(0.0, std::numbers::pi);
    sh.spin = range(-1.0, 1.0) * o.motion_max / (2.0 * std::max(sh.rx, sh.ry));
    std::tie(sh.vx, sh.vy) = direction(range(o.motion_min, o.motion_max));
    sh.color = {range(0.05, 0.95), range(0.05, 0.95), range(0.05, 0.95)};
    sh.stripe = {range(-0.25, 0.25), range(-0.25, 0.25), range(-0.25, 0.25)};
    sh.stripe_freq = range(0.3, 0.9);
    sh.stripe_phase = range(0.0, 2.0 * std::numbers::pi);
    s.shapes.push_back(sh);
  }
  return s;
}

Tensor render(const Scene& s, int64_t size, double tau) {
  const auto dopt = torch::dtype(torch::kDouble);
  const Tensor coords = torch::arange(size, dopt) + 0.5;
  const Tensor y = coords.view({size, 1}).expand({size, size});
  const Tensor x = coords.view({1, size}).expand({size, size});

  std::array<Tensor, 3> rgb;
  const double dt = tau - 0.5;
  const Tensor bx = x - s.bg_vx * dt;
  const Tensor by = y - s.bg_vy * dt;
  for (int c = 0; c < 3; ++c) {
    rgb[c] = torch::full({size, size}, s.base[c], dopt);
    for (const auto& g : s.gratings) {
      rgb[c] = rgb[c] + g.amplitude[c] * torch::sin(g.wx * bx + g.wy * by + g.phase);
    }
  }
  for (const auto& sh : s.shapes) {
    const double cx = sh.cx + sh.vx * dt;
    const double cy = sh.cy + sh.vy * dt;
    const double a = sh.angle + sh.spin * dt;
    const double ca = std::cos(a);
    const double sa = std::sin(a);
    const Tensor qx = ca * (x - cx) + sa * (y - cy);
    const Tensor qy = -sa * (x - cx) + ca * (y - cy);
    Tensor sd;
    if (sh.kind == 0) {
      const Tensor rho = torch::sqrt((qx / sh.rx).square() + (qy / sh.ry).square());
      sd = (rho - 1.0) * std::min(sh.rx, sh.ry);
    } else {
      const Tensor dx = qx.abs() - sh.rx;
      const Tensor dy = qy.abs() - sh.ry;
      sd = torch::sqrt(dx.clamp_min(0).square() + dy.clamp_min(0).square()) +
           torch::maximum(dx, dy).clamp_max(0.0);
    }
    const Tensor alpha = (0.5 - sd).clamp(0.0, 1.0);
    const Tensor stripes = torch::sin(sh.stripe_freq * qx + sh.stripe_phase) *
                           torch::cos(0.5 * sh.stripe_freq * qy);
    for (int c = 0; c < 3; ++c) {
      const Tensor fg = sh.color[c] + sh.stripe[c] * stripes;
      rgb[c] = rgb[c] * (1.0 - alpha) + fg * alpha;
    }
  }
  return torch::stack({rgb[0], rgb[1], rgb[2]}).clamp(0.0, 1.0).to(torch::kFloat);
}

}  // namespace

std::vector<TripletRecord> synth_triplets(const SynthOptions& o) {
  expects(o.size >= 32, "synth_triplets: size must be >= 32, got ", o.size);
  expects(o.motion_min >= 0 && o.motion_min <= o.motion_max,
          "synth_triplets: invalid motion range");
  std::vector<TripletRecord> out;
  out.reserve(static_cast<size_t>(o.count));
  for (int64_t k = 0; k < o.count; ++k) {
    std::mt19937_64 rng(mix_seed(o.seed, static_cast<uint64_t>(k)));
    const Scene scene = sample_scene(rng, o);
    TripletRecord r;
    r.source = "synthetic/" + std::to_string(o.seed) + "/" + std::to_string(k);
    r.i0 = render(scene, o.size, 0.0);
    r.igt = render(scene, o.size, 0.5);
    r.i1 = render(scene, o.size, 1.0);
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset layouts

namespace {

std::vector<std::string> read_lines(const fs::path& list_file) {
  std::ifstream in(list_file);
  if (!in) throw DataError(detail::concat("cannot open list file ", list_file));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool keep_record(const TripletRecord& r, MissingPolicy policy) {
  for (const fs::path* p : {&r.path0, &r.path_gt, &r.path1}) {
    if (!fs::exists(*p)) {
      if (policy == MissingPolicy::kSkip) return false;
      throw DataError(detail::concat("triplet ", r.source, ": missing frame ", *p));
    }
  }
  return true;
}

}  // namespace

std::vector<TripletRecord> load_vimeo_triplets(const fs::path& root, const fs::path& list_file,
                                               MissingPolicy policy) {
  static const std::regex entry(R"(^[A-Za-z0-9_.\-]+/[A-Za-z0-9_.\-]+$)");
  const auto lines = read_lines(list_file);
  std::vector<TripletRecord> out;
  for (size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::string name = trim(lines[i]);
    if (!std::regex_match(name, entry)) {
      throw DataError(detail::concat(list_file.string(), ":", i + 1,
                                     ": malformed entry '", lines[i], "' (expected <a>/<b>)"));
    }
    TripletRecord r;
    r.source = name;
    const fs::path dir = root / "sequences" / name;
    r.path0 = dir / "im1.png";
    r.path_gt = dir / "im2.png";
    r.path1 = dir / "im3.png";
    if (keep_record(r, policy)) out.push_back(std::move(r));
  }
  return out;
}

std::vector<TripletRecord> load_snufilm_triplets(const fs::path& root, const fs::path& list_file,
                                                 MissingPolicy policy) {
  const auto lines = read_lines(list_file);
  std::vector<TripletRecord> out;
  auto resolve = [&](const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : root / path;
  };
  for (size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    std::istringstream fields(lines[i]);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (parts.size() != 3) {
      throw DataError(detail::concat(list_file.string(), ":", i + 1, ": expected 3 paths, got ",
                                     parts.size()));
    }
    TripletRecord r;
    r.source = parts[1];
    r.path0 = resolve(parts[0]);
    r.path_gt = resolve(parts[1]);
    r.path1 = resolve(parts[2]);
    if (keep_record(r, policy)) out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Augmentation and batching

FrameTriplet augment(const TripletRecord& record, const AugmentOptions& o, uint64_t seed) {
  const TripletRecord r = record.materialized();
  const int64_t h = r.i0.size(1);
  const int64_t w = r.i0.size(2);
  expects(h >= o.crop && w >= o.crop, "augment: frame ", h, "x", w, " is smaller than crop ",
          o.crop);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Draw every variate so the stream layout is independent of the options.
  const double uy = u(rng);
  const double ux = u(rng);
  const double uh = u(rng);
  const double uv = u(rng);
  const double ur = u(rng);

  const int64_t y0 = o.random_crop ? std::min<int64_t>(static_cast<int64_t>(uy * (h - o.crop + 1)), h - o.crop)
                                   : (h - o.crop) / 2;
  const int64_t x0 = o.random_crop ? std::min<int64_t>(static_cast<int64_t>(ux * (w - o.crop + 1)), w - o.crop)
                                   : (w - o.crop) / 2;
  auto transform = [&](const Tensor& img) {
    Tensor x = img.slice(1, y0, y0 + o.crop).slice(2, x0, x0 + o.crop);
    if (uh < o.p_hflip) x = x.flip({2});
    if (uv < o.p_vflip) x = x.flip({1});
    return x.unsqueeze(0).contiguous();
  };
  FrameTriplet t;
  t.i0 = transform(r.i0);
  t.igt = transform(r.igt);
  t.i1 = transform(r.i1);
  if (ur < o.p_reverse) std::swap(t.i0, t.i1);
  return t;
}

FrameTriplet stack_records(const std::vector<TripletRecord>& records) {
  expects(!records.empty(), "stack_records: no records");
  std::vector<Tensor> a, g, b;
  for (const auto& rec : records) {
    const TripletRecord r = rec.materialized();
    a.push_back(r.i0);
    g.push_back(r.igt);
    b.push_back(r.i1);
  }
  FrameTriplet t;
  t.i0 = torch::stack(a);
  t.igt = torch::stack(g);
  t.i1 = torch::stack(b);
  return t;
}

FrameTriplet collate(const std::vector<FrameTriplet>& items) {
  expects(!items.empty(), "collate: empty batch");
  std::vector<Tensor> a, g, b;
  for (const auto& it : items) {
    a.push_back(it.i0);
    g.push_back(it.igt);
    b.push_back(it.i1);
  }
  FrameTriplet t;
  t.i0 = torch::cat(a);
  t.igt = torch::cat(g);
  t.i1 = torch::cat(b);
  t.t = items.front().t;
  return t;
}

std::vector<int64_t> epoch_permutation(int64_t n, uint64_t seed, int64_t epoch) {
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  std::mt19937_64 rng(mix_seed(seed, 0x5eed, static_cast<uint64_t>(epoch)));
  // Fisher-Yates with an explicit bounded draw, so the order does not depend
  // on the standard library's distribution implementation.
  for (int64_t i = n - 1; i > 0; --i) {
    const auto j = static_cast<int64_t>(rng() % static_cast<uint64_t>(i + 1));
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  return order;
}

}  // namespace semvfi
