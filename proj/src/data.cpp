#include "senh/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "senh/png_io.hpp"

namespace senh {
namespace {

namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

void check_image(const std::string& id, const char* name, const Tensor& t) {
  if (!t.defined() || t.rank() != 3 || t.extent(0) != 3)
    fail("stereo pair '" + id + "': " + name + " must be a [3,H,W] tensor, got " +
         (t.defined() ? shape_str(t.shape()) : std::string("none")));
  for (double v : t.data())
    if (!(v >= 0.0 && v <= 1.0))
      fail("stereo pair '" + id + "': " + name + " has values outside [0,1]");
}

Tensor crop3(const Tensor& t, int64_t y0, int64_t x0, int64_t ch, int64_t cw) {
  const int64_t c = t.extent(0), h = t.extent(1), w = t.extent(2);
  (void)h;
  Tensor out({c, ch, cw});
  const double* src = t.ptr();
  double* dst = out.ptr();
  for (int64_t ci = 0; ci < c; ++ci)
    for (int64_t y = 0; y < ch; ++y)
      std::copy_n(src + (ci * t.extent(1) + y0 + y) * w + x0, cw, dst + (ci * ch + y) * cw);
  return out;
}

StereoPair crop_pair(const StereoPair& p, int64_t y0, int64_t x0, int64_t ch, int64_t cw) {
  StereoPair out;
  out.id = p.id;
  out.left = crop3(p.left, y0, x0, ch, cw);
  out.right = crop3(p.right, y0, x0, ch, cw);
  if (p.gt_left) out.gt_left = crop3(*p.gt_left, y0, x0, ch, cw);
  if (p.gt_right) out.gt_right = crop3(*p.gt_right, y0, x0, ch, cw);
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

std::string row_label(size_t index, const std::string& id) {
  std::string s = "manifest row " + std::to_string(index + 1);
  if (!id.empty()) s += " (id '" + id + "')";
  return s;
}

}  // namespace

void validate(const StereoPair& p) {
  check_image(p.id, "left", p.left);
  check_image(p.id, "right", p.right);
  if (p.left.shape() != p.right.shape())
    fail("stereo pair '" + p.id + "': left and right shapes differ, " +
         shape_str(p.left.shape()) + " vs " + shape_str(p.right.shape()));
  if (p.gt_left.has_value() != p.gt_right.has_value())
    fail("stereo pair '" + p.id + "': ground truth must cover both views or neither");
  if (p.gt_left) {
    check_image(p.id, "gt_left", *p.gt_left);
    check_image(p.id, "gt_right", *p.gt_right);
    if (p.gt_left->shape() != p.left.shape() || p.gt_right->shape() != p.right.shape())
      fail("stereo pair '" + p.id + "': ground truth shape differs from the inputs");
  }
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("manifest: cannot open '" + path + "'");

  Manifest m;
  m.dir = fs::path(path).parent_path().string();

  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("manifest: '" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,left,right,gt_left,gt_right")
    throw std::runtime_error("manifest: bad header '" + line +
                             "' (expected 'id,left,right,gt_left,gt_right')");

  size_t index = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f = split_csv(line);
    if (f.size() != 5)
      throw std::runtime_error(row_label(index, "") + ": expected 5 fields, got " +
                               std::to_string(f.size()));
    ManifestRow row{f[0], f[1], f[2], f[3], f[4]};
    if (row.id.empty()) throw std::runtime_error(row_label(index, "") + ": empty id");
    if (row.left.empty() || row.right.empty())
      throw std::runtime_error(row_label(index, row.id) + ": left and right paths are required");
    if (row.gt_left.empty() != row.gt_right.empty())
      throw std::runtime_error(row_label(index, row.id) +
                               ": gt_left and gt_right must be set together");
    for (const ManifestRow& seen : m.rows)
      if (seen.id == row.id)
        throw std::runtime_error(row_label(index, row.id) + ": duplicate id");
    for (const std::string& rel : {row.left, row.right, row.gt_left, row.gt_right}) {
      if (rel.empty()) continue;
      const fs::path p = fs::path(m.dir) / rel;
      if (!fs::exists(p))
        throw std::runtime_error(row_label(index, row.id) + ": missing file '" + p.string() +
                                 "'");
    }
    m.rows.push_back(std::move(row));
    ++index;
  }
  return m;
}

StereoPair load_pair(const Manifest& m, size_t row) {
  if (row >= m.rows.size())
    throw std::out_of_range("manifest: row " + std::to_string(row) + " out of range");
  const ManifestRow& r = m.rows[row];
  const fs::path dir(m.dir);

  StereoPair p;
  p.id = r.id;
  try {
    p.left = load_png_rgb((dir / r.left).string());
    p.right = load_png_rgb((dir / r.right).string());
    if (r.has_gt()) {
      p.gt_left = load_png_rgb((dir / r.gt_left).string());
      p.gt_right = load_png_rgb((dir / r.gt_right).string());
    }
    validate(p);
  } catch (const std::exception& e) {
    throw std::runtime_error(row_label(row, r.id) + ": " + e.what());
  }
  return p;
}

StereoPair synthesize_lowlight(const StereoPair& gt, uint64_t seed, const SynthParams& params,
                               SynthRecipe* recipe) {
  if (!gt.gt_left || !gt.gt_right)
    fail("synthesize_lowlight: pair '" + gt.id + "' has no ground truth");
  auto check_range = [](const char* name, double lo, double hi, double min_lo) {
    if (!(lo >= min_lo) || !(hi >= lo))
      fail(std::string("synthesize_lowlight: bad ") + name + " range [" +
           std::to_string(lo) + ", " + std::to_string(hi) + "]");
  };
  check_range("gamma", params.gamma_lo, params.gamma_hi, 1e-6);
  check_range("scale", params.scale_lo, params.scale_hi, 0.0);
  check_range("sigma", params.sigma_lo, params.sigma_hi, 0.0);

  Rng rng(seed);
  SynthRecipe rec;
  rec.gamma = rng.uniform(params.gamma_lo, params.gamma_hi);
  rec.scale = rng.uniform(params.scale_lo, params.scale_hi);
  rec.sigma = rng.uniform(params.sigma_lo, params.sigma_hi);
  if (recipe) *recipe = rec;

  auto degrade = [&](const Tensor& src) {
    Tensor out(src.shape());
    const double* s = src.ptr();
    double* o = out.ptr();
    for (int64_t i = 0; i < src.numel(); ++i) {
      const double base = rec.gamma == 1.0 ? s[i] : std::pow(s[i], rec.gamma);
      double v = rec.scale * base;
      if (rec.sigma > 0.0) v += rec.sigma * rng.normal();
      o[i] = std::clamp(v, 0.0, 1.0);
    }
    return out;
  };

  StereoPair out;
  out.id = gt.id;
  out.left = degrade(*gt.gt_left);
  out.right = degrade(*gt.gt_right);
  out.gt_left = gt.gt_left;
  out.gt_right = gt.gt_right;
  return out;
}

StereoPair random_crop(const StereoPair& p, int64_t size, uint64_t seed) {
  validate(p);
  const int64_t h = p.left.extent(1), w = p.left.extent(2);
  if (size < 4 || size % 4 != 0)
    fail("random_crop: size " + std::to_string(size) + " must be a positive multiple of 4");
  if (size > h || size > w)
    fail("random_crop: size " + std::to_string(size) + " exceeds the " + std::to_string(h) +
         "x" + std::to_string(w) + " image");
  Rng rng(seed);
  const int64_t y0 = rng.uniform_int(h - size + 1);
  const int64_t x0 = rng.uniform_int(w - size + 1);
  return crop_pair(p, y0, x0, size, size);
}

StereoPair center_crop_div4(const StereoPair& p) {
  validate(p);
  const int64_t h = p.left.extent(1), w = p.left.extent(2);
  const int64_t ch = h - h % 4, cw = w - w % 4;
  if (ch < 4 || cw < 4)
    fail("center_crop_div4: " + std::to_string(h) + "x" + std::to_string(w) +
         " image is too small for a multiple-of-4 crop");
  return crop_pair(p, (h - ch) / 2, (w - cw) / 2, ch, cw);
}

Batch stack_pairs(const std::vector<StereoPair>& ps) {
  if (ps.empty()) fail("stack_pairs: empty batch");
  const Shape base = ps.front().left.shape();
  const bool with_gt = ps.front().gt_left.has_value();
  for (const StereoPair& p : ps) {
    validate(p);
    if (p.left.shape() != base)
      fail("stack_pairs: pair '" + p.id + "' has shape " + shape_str(p.left.shape()) +
           ", batch expects " + shape_str(base));
    if (p.gt_left.has_value() != with_gt)
      fail("stack_pairs: ground truth present for only part of the batch");
  }

  const int64_t b = static_cast<int64_t>(ps.size());
  const int64_t plane = base[0] * base[1] * base[2];
  Batch out;
  out.left = Tensor({b, base[0], base[1], base[2]});
  out.right = Tensor({b, base[0], base[1], base[2]});
  if (with_gt) {
    out.gt_left = Tensor({b, base[0], base[1], base[2]});
    out.gt_right = Tensor({b, base[0], base[1], base[2]});
  }
  for (int64_t i = 0; i < b; ++i) {
    const StereoPair& p = ps[static_cast<size_t>(i)];
    out.ids.push_back(p.id);
    std::copy_n(p.left.ptr(), plane, out.left.ptr() + i * plane);
    std::copy_n(p.right.ptr(), plane, out.right.ptr() + i * plane);
    if (with_gt) {
      std::copy_n(p.gt_left->ptr(), plane, out.gt_left.ptr() + i * plane);
      std::copy_n(p.gt_right->ptr(), plane, out.gt_right.ptr() + i * plane);
    }
  }
  return out;
}

std::vector<std::vector<size_t>> epoch_order(size_t rows, int64_t batch, uint64_t shuffle_seed) {
  if (batch < 1) fail("epoch_order: batch must be >= 1");
  std::vector<size_t> idx(rows);
  for (size_t i = 0; i < rows; ++i) idx[i] = i;
  Rng rng(shuffle_seed);
  rng.shuffle(idx);

  std::vector<std::vector<size_t>> out;
  for (size_t at = 0; at < rows; at += static_cast<size_t>(batch)) {
    const size_t end = std::min(rows, at + static_cast<size_t>(batch));
    out.emplace_back(idx.begin() + static_cast<int64_t>(at),
                     idx.begin() + static_cast<int64_t>(end));
  }
  return out;
}

BatchStream::BatchStream(const Manifest& m, std::vector<size_t> rows, const IterateOptions& opt)
    : manifest_(&m), rows_(std::move(rows)), opt_(opt) {
  for (size_t r : rows_)
    if (r >= m.rows.size())
      fail("batch stream: row " + std::to_string(r) + " out of range");
  order_ = epoch_order(rows_.size(), opt_.batch,
                       Rng::keyed(opt_.seed, 4, opt_.epoch).next_u64());
}

std::optional<Batch> BatchStream::next() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::vector<size_t>& group = order_[cursor_++];

  std::vector<StereoPair> pairs;
  pairs.reserve(group.size());
  for (size_t pos : group) {
    StereoPair p = load_pair(*manifest_, rows_[pos]);
    const uint64_t serial = opt_.epoch * rows_.size() + pos;
    if (opt_.synthesize)
      p = synthesize_lowlight(p, Rng::keyed(opt_.seed, 2, serial).next_u64(), opt_.synth);
    if (opt_.crop > 0)
      p = random_crop(p, opt_.crop, Rng::keyed(opt_.seed, 3, serial).next_u64());
    else
      p = center_crop_div4(p);
    pairs.push_back(std::move(p));
  }
  return stack_pairs(pairs);
}

StereoPair make_scene(uint64_t seed, int64_t h, int64_t w, int64_t max_disparity) {
  if (h < 4 || w < 4) fail("make_scene: extents must be at least 4");
  if (max_disparity < 1 || max_disparity >= w)
    fail("make_scene: max_disparity must lie in [1, width)");

  Rng rng(seed);
  const int64_t d = 1 + rng.uniform_int(max_disparity);

  Tensor left({3, h, w});
  double* lp = left.ptr();
  for (int64_t c = 0; c < 3; ++c) {
    struct Wave {
      double amp, fy, fx, phase;
    };
    Wave waves[6];
    for (Wave& v : waves)
      v = {rng.uniform(0.3, 1.0), static_cast<double>(rng.uniform_int(4)),
           static_cast<double>(1 + rng.uniform_int(3)), rng.uniform(0.0, 2.0 * std::numbers::pi)};
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x) {
        double v = 0.0;
        for (const Wave& wv : waves)
          v += wv.amp * std::sin(2.0 * std::numbers::pi *
                                     (wv.fy * static_cast<double>(y) / static_cast<double>(h) +
                                      wv.fx * static_cast<double>(x) / static_cast<double>(w)) +
                                 wv.phase);
        lp[(c * h + y) * w + x] = v;
      }
  }
  const auto [mn, mx] = std::minmax_element(left.data().begin(), left.data().end());
  const double lo = *mn, span = std::max(*mx - lo, 1e-12);
  for (double& v : left.data()) v = 0.08 + 0.84 * (v - lo) / span;

  Tensor right({3, h, w});
  double* rp = right.ptr();
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        rp[(c * h + y) * w + x] = lp[(c * h + y) * w + (x + d) % w];

  StereoPair out;
  out.id = "scene" + std::to_string(seed);
  out.left = left;
  out.right = right;
  out.gt_left = left;
  out.gt_right = right;
  return out;
}

}  // namespace senh
