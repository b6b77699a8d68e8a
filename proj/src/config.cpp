#include "senh/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>

namespace senh {
namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("config: " + msg); }

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  size_t e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

int64_t to_int(const std::string& key, const std::string& v) {
  int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    fail("key '" + key + "': invalid integer '" + v + "'");
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  try {
    size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    fail("key '" + key + "': invalid number '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  fail("key '" + key + "': expected true or false, got '" + v + "'");
}

std::array<int, 5> to_depths(const std::string& key, const std::string& v) {
  std::array<int, 5> out{};
  std::stringstream ss(v);
  std::string cell;
  size_t i = 0;
  while (std::getline(ss, cell, ',')) {
    if (i >= 5) fail("key '" + key + "': expected five comma-separated ints, got '" + v + "'");
    out[i++] = static_cast<int>(to_int(key, trim(cell)));
  }
  if (i != 5) fail("key '" + key + "': expected five comma-separated ints, got '" + v + "'");
  return out;
}

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct KeySpec {
  std::string key, def, help;
  std::function<void(CliConfig&, const std::string&)> set;
};

std::vector<KeySpec> make_table() {
  const CliConfig d;  // defaults
  std::vector<KeySpec> t;
  auto add = [&](std::string key, std::string def, std::string help,
                 std::function<void(CliConfig&, const std::string&)> set) {
    t.push_back({std::move(key), std::move(def), std::move(help), std::move(set)});
  };

  add("base_channels", std::to_string(d.model.base_channels), "feature width C of the first scale",
      [](CliConfig& c, const std::string& v) {
        c.model.base_channels = to_int("base_channels", v);
      });
  add("depths", "4,4,2,2,4", "blocks per stage: enc1,enc2,mid,dec2,dec1",
      [](CliConfig& c, const std::string& v) { c.model.depths = to_depths("depths", v); });
  add("kernel", std::to_string(d.model.kernel), "depthwise mixing kernel size (odd)",
      [](CliConfig& c, const std::string& v) {
        c.model.kernel = static_cast<int>(to_int("kernel", v));
      });
  add("expansion", std::to_string(d.model.expansion), "channel-mixer expansion factor",
      [](CliConfig& c, const std::string& v) {
        c.model.expansion = static_cast<int>(to_int("expansion", v));
      });
  add("ca_reduction", std::to_string(d.model.ca_reduction), "channel-attention bottleneck ratio",
      [](CliConfig& c, const std::string& v) {
        c.model.ca_reduction = static_cast<int>(to_int("ca_reduction", v));
      });
  add("no_cross_view", "false", "disable the cross-view attention stage",
      [](CliConfig& c, const std::string& v) { c.model.no_cross_view = to_bool("no_cross_view", v); });
  add("no_cross_scale", "false", "disable the cross-scale fusion stage",
      [](CliConfig& c, const std::string& v) {
        c.model.no_cross_scale = to_bool("no_cross_scale", v);
      });
  add("no_spatial", "false", "drop the spatial mixer from every block",
      [](CliConfig& c, const std::string& v) { c.model.no_spatial = to_bool("no_spatial", v); });
  add("no_channel", "false", "drop the gated channel mixer from every block",
      [](CliConfig& c, const std::string& v) { c.model.no_channel = to_bool("no_channel", v); });
  add("softmax_attention", "true", "normalize cross-view correlation rows with softmax",
      [](CliConfig& c, const std::string& v) {
        c.model.softmax_attention = to_bool("softmax_attention", v);
      });
  add("seed", "0", "seed for init, shuffling, synthesis and crops",
      [](CliConfig& c, const std::string& v) {
        const int64_t s = to_int("seed", v);
        c.model.seed = static_cast<uint64_t>(s);
        c.train.seed = static_cast<uint64_t>(s);
      });
  add("batch_size", std::to_string(d.train.batch_size), "training pairs per step",
      [](CliConfig& c, const std::string& v) { c.train.batch_size = to_int("batch_size", v); });
  add("crop", std::to_string(d.train.crop), "training crop size (multiple of 4)",
      [](CliConfig& c, const std::string& v) { c.train.crop = to_int("crop", v); });
  add("lr0", fmt_real(d.train.lr0), "initial learning rate",
      [](CliConfig& c, const std::string& v) { c.train.lr0 = to_real("lr0", v); });
  add("decay_epochs", std::to_string(d.train.decay_epochs), "halve the learning rate every N epochs",
      [](CliConfig& c, const std::string& v) {
        c.train.decay_epochs = to_int("decay_epochs", v);
      });
  add("epochs", std::to_string(d.train.epochs), "training epochs",
      [](CliConfig& c, const std::string& v) { c.train.epochs = to_int("epochs", v); });
  add("lambda", fmt_real(d.train.lambda), "smoothness term weight in the total loss",
      [](CliConfig& c, const std::string& v) { c.train.lambda = to_real("lambda", v); });
  add("loss", "fre", "reconstruction loss: fre, l1, l2 or ssim",
      [](CliConfig& c, const std::string& v) { c.train.recon = recon_loss_from_string(v); });
  add("synthesize", "true", "derive low-light inputs from the GT images while training",
      [](CliConfig& c, const std::string& v) { c.train.synthesize = to_bool("synthesize", v); });
  add("gamma_lo", fmt_real(d.train.synth.gamma_lo), "synthesis darkening exponent, lower bound",
      [](CliConfig& c, const std::string& v) { c.train.synth.gamma_lo = to_real("gamma_lo", v); });
  add("gamma_hi", fmt_real(d.train.synth.gamma_hi), "synthesis darkening exponent, upper bound",
      [](CliConfig& c, const std::string& v) { c.train.synth.gamma_hi = to_real("gamma_hi", v); });
  add("scale_lo", fmt_real(d.train.synth.scale_lo), "synthesis brightness scale, lower bound",
      [](CliConfig& c, const std::string& v) { c.train.synth.scale_lo = to_real("scale_lo", v); });
  add("scale_hi", fmt_real(d.train.synth.scale_hi), "synthesis brightness scale, upper bound",
      [](CliConfig& c, const std::string& v) { c.train.synth.scale_hi = to_real("scale_hi", v); });
  add("sigma_lo", fmt_real(d.train.synth.sigma_lo), "synthesis noise std, lower bound",
      [](CliConfig& c, const std::string& v) { c.train.synth.sigma_lo = to_real("sigma_lo", v); });
  add("sigma_hi", fmt_real(d.train.synth.sigma_hi), "synthesis noise std, upper bound",
      [](CliConfig& c, const std::string& v) { c.train.synth.sigma_hi = to_real("sigma_hi", v); });
  add("checkpoint_every", "0", "epochs between periodic checkpoints (0 = final only)",
      [](CliConfig& c, const std::string& v) {
        c.train.checkpoint_every = to_int("checkpoint_every", v);
      });
  add("out_dir", ".", "directory for checkpoints and logs",
      [](CliConfig& c, const std::string& v) { c.train.out_dir = v; });
  add("manifest", "", "training/eval manifest CSV",
      [](CliConfig& c, const std::string& v) { c.manifest = v; });
  return t;
}

const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> t = make_table();
  return t;
}

const KeySpec* find_key(const std::string& key) {
  for (const KeySpec& k : key_table())
    if (k.key == key) return &k;
  return nullptr;
}

}  // namespace

CliConfig parse_config_text(const std::string& text, const std::string& origin) {
  CliConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    // Strip comments, respecting double quotes.
    std::string body;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') quoted = !quoted;
      if (c == '#' && !quoted) break;
      body.push_back(c);
    }
    body = trim(body);
    if (body.empty()) continue;

    const size_t eq = body.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) fail(where + ": expected 'key = value', got '" + body + "'");
    const std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);

    const KeySpec* spec = find_key(key);
    if (!spec) fail(where + ": unknown key '" + key + "'");
    if (!seen.insert(key).second) fail(where + ": duplicate key '" + key + "'");
    spec->set(cfg, value);
  }
  return cfg;
}

CliConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

void apply_override(CliConfig& cfg, const std::string& key, const std::string& value) {
  const KeySpec* spec = find_key(key);
  if (!spec) fail("unknown key '" + key + "'");
  spec->set(cfg, value);
}

std::vector<ConfigKeyDoc> config_key_docs() {
  std::vector<ConfigKeyDoc> out;
  for (const KeySpec& k : key_table()) out.push_back({k.key, k.def, k.help});
  return out;
}

}  // namespace senh
