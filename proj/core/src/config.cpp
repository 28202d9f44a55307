#include "relic/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "relic/errors.hpp"

namespace relic {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const unsigned long long u = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return u;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config: key '" + key + "' expects true/false, got '" + v + "'");
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("config: key '" + key + "' has an empty width");
    out.push_back(parse_u64(key, item));
  }
  if (out.empty()) throw ConfigError("config: key '" + key + "' needs at least one width");
  return out;
}

std::string widths_to_string(const std::vector<std::size_t>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(w[i]);
  }
  return s;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const std::map<std::string, SolarizeMode> kSolarizeNames = {
    {"paper_text", SolarizeMode::paper_text},
    {"standard", SolarizeMode::standard},
};
const std::map<std::string, MaskTransform> kMaskTransformNames = {
    {"none", MaskTransform::none},
    {"random_pixels", MaskTransform::random_pixels},
    {"random_rectangle", MaskTransform::random_rectangle},
    {"centered_rectangle", MaskTransform::centered_rectangle},
    {"add_rectangle", MaskTransform::add_rectangle},
    {"remove_rectangle", MaskTransform::remove_rectangle},
    {"bounding_box", MaskTransform::bounding_box},
};

template <class T>
std::string enum_name(const std::map<std::string, T>& names, T v) {
  for (const auto& [k, t] : names)
    if (t == v) return k;
  throw ContractError("config: unnamed enum value");
}

template <class T>
T enum_value(const std::map<std::string, T>& names, const std::string& key,
             const std::string& v) {
  auto it = names.find(v);
  if (it == names.end()) throw ConfigError("config: key '" + key + "' has unknown value '" + v + "'");
  return it->second;
}

// One row per key: how to print it and how to apply a parsed value.
struct KeyDef {
  std::string name;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define RELIC_DKEY(name, expr)                                                       \
  KeyDef {                                                                           \
    name, [](const RunConfig& c) { return fmt_double(c.expr); },                     \
        [](RunConfig& c, const std::string& v) { c.expr = parse_double(name, v); }   \
  }
#define RELIC_UKEY(name, expr)                                                       \
  KeyDef {                                                                           \
    name, [](const RunConfig& c) { return std::to_string(c.expr); },                 \
        [](RunConfig& c, const std::string& v) {                                     \
          c.expr = static_cast<decltype(c.expr)>(parse_u64(name, v));                \
        }                                                                            \
  }
#define RELIC_BKEY(name, expr)                                                       \
  KeyDef {                                                                           \
    name, [](const RunConfig& c) { return c.expr ? "true" : "false"; },              \
        [](RunConfig& c, const std::string& v) { c.expr = parse_bool(name, v); }     \
  }
#define RELIC_SKEY(name, expr)                                                       \
  KeyDef {                                                                           \
    name, [](const RunConfig& c) { return c.expr; },                                 \
        [](RunConfig& c, const std::string& v) { c.expr = v; }                       \
  }

std::vector<KeyDef> parity_keys(const std::string& prefix, bool odd) {
  auto side = [odd](RunConfig& c) -> PhotometricParams& { return odd ? c.augment.odd : c.augment.even; };
  auto cside = [odd](const RunConfig& c) -> const PhotometricParams& {
    return odd ? c.augment.odd : c.augment.even;
  };
  struct Field {
    const char* suffix;
    double PhotometricParams::*member;
  };
  static const Field fields[] = {
      {"p_flip", &PhotometricParams::p_flip},
      {"p_jitter", &PhotometricParams::p_jitter},
      {"jitter_brightness", &PhotometricParams::jitter_brightness},
      {"jitter_contrast", &PhotometricParams::jitter_contrast},
      {"jitter_saturation", &PhotometricParams::jitter_saturation},
      {"jitter_hue", &PhotometricParams::jitter_hue},
      {"p_gray", &PhotometricParams::p_gray},
      {"p_blur", &PhotometricParams::p_blur},
      {"blur_sigma_min", &PhotometricParams::blur_sigma_min},
      {"blur_sigma_max", &PhotometricParams::blur_sigma_max},
      {"p_solarize", &PhotometricParams::p_solarize},
      {"crop_area_min", &PhotometricParams::crop_area_min},
      {"crop_area_max", &PhotometricParams::crop_area_max},
  };
  std::vector<KeyDef> out;
  for (const auto& f : fields) {
    const std::string name = prefix + f.suffix;
    out.push_back(KeyDef{
        name,
        [cside, m = f.member](const RunConfig& c) { return fmt_double(cside(c).*m); },
        [side, m = f.member, name](RunConfig& c, const std::string& v) {
          side(c).*m = parse_double(name, v);
        }});
  }
  return out;
}

const std::vector<KeyDef>& key_table() {
  static const std::vector<KeyDef> table = [] {
    std::vector<KeyDef> t;
    t.push_back(KeyDef{"preset", [](const RunConfig& c) { return c.preset; },
                       [](RunConfig& c, const std::string& v) { c = preset_config(v); }});
    t.push_back(RELIC_UKEY("seed", seed));
    t.push_back(KeyDef{"batch_size",
                       [](const RunConfig& c) { return std::to_string(c.batch_size); },
                       [](RunConfig& c, const std::string& v) {
                         c.batch_size = static_cast<std::size_t>(parse_u64("batch_size", v));
                         c.schedule.batch_size = c.batch_size;
                       }});
    t.push_back(RELIC_SKEY("dataset", dataset));
    t.push_back(RELIC_SKEY("mask_file", mask_file));
    t.push_back(RELIC_DKEY("train_fraction", train_fraction));
    t.push_back(RELIC_UKEY("checkpoint_every", checkpoint_every));
    t.push_back(RELIC_SKEY("checkpoint_path", checkpoint_path));
    t.push_back(RELIC_SKEY("metrics_path", metrics_path));

    t.push_back(KeyDef{"encoder_widths",
                       [](const RunConfig& c) { return widths_to_string(c.network.encoder.widths); },
                       [](RunConfig& c, const std::string& v) {
                         c.network.encoder.widths = parse_widths("encoder_widths", v);
                       }});
    t.push_back(KeyDef{"projector_widths",
                       [](const RunConfig& c) { return widths_to_string(c.network.projector.widths); },
                       [](RunConfig& c, const std::string& v) {
                         c.network.projector.widths = parse_widths("projector_widths", v);
                       }});
    t.push_back(RELIC_BKEY("normalize_embeddings", network.normalize_embeddings));
    t.push_back(RELIC_DKEY("ema_gamma", network.ema_gamma));

    t.push_back(RELIC_DKEY("alpha", loss.alpha));
    t.push_back(RELIC_DKEY("beta", loss.beta));
    t.push_back(RELIC_DKEY("tau", loss.tau));
    t.push_back(RELIC_UKEY("n_negatives", loss.n_negatives));

    t.push_back(RELIC_UKEY("num_large", augment.num_large));
    t.push_back(RELIC_UKEY("num_small", augment.num_small));
    t.push_back(RELIC_UKEY("large_size", augment.large_size));
    t.push_back(RELIC_UKEY("small_size", augment.small_size));
    t.push_back(RELIC_DKEY("small_area_min", augment.small_area_min));
    t.push_back(RELIC_DKEY("small_area_max", augment.small_area_max));
    t.push_back(RELIC_DKEY("p_mask", augment.p_mask));
    t.push_back(RELIC_DKEY("min_foreground", augment.min_foreground));
    t.push_back(KeyDef{"solarize_mode",
                       [](const RunConfig& c) { return enum_name(kSolarizeNames, c.augment.solarize_mode); },
                       [](RunConfig& c, const std::string& v) {
                         c.augment.solarize_mode = enum_value(kSolarizeNames, "solarize_mode", v);
                       }});
    t.push_back(KeyDef{"mask_transform",
                       [](const RunConfig& c) { return enum_name(kMaskTransformNames, c.augment.mask_transform); },
                       [](RunConfig& c, const std::string& v) {
                         c.augment.mask_transform = enum_value(kMaskTransformNames, "mask_transform", v);
                       }});
    t.push_back(RELIC_DKEY("mask_transform_area", augment.mask_transform_area));
    t.push_back(RELIC_BKEY("geometric", augment.geometric));

    for (auto& k : parity_keys("odd_", true)) t.push_back(std::move(k));
    for (auto& k : parity_keys("even_", false)) t.push_back(std::move(k));

    t.push_back(RELIC_DKEY("base_lr", schedule.base_lr));
    t.push_back(RELIC_UKEY("total_steps", schedule.total_steps));
    t.push_back(RELIC_UKEY("warmup_steps", schedule.warmup_steps));
    t.push_back(RELIC_DKEY("lars_momentum", lars.momentum));
    t.push_back(RELIC_DKEY("weight_decay", lars.weight_decay));
    t.push_back(RELIC_DKEY("trust_coefficient", lars.trust_coefficient));
    return t;
  }();
  return table;
}

#undef RELIC_DKEY
#undef RELIC_UKEY
#undef RELIC_BKEY
#undef RELIC_SKEY

const KeyDef* find_key(const std::string& name) {
  for (const auto& k : key_table())
    if (name == k.name) return &k;
  return nullptr;
}

void check_prob(const char* key, double v) {
  if (!(v >= 0.0 && v <= 1.0))
    throw ConfigError(std::string("config: '") + key + "' must lie in [0, 1]");
}

void check_parity(const char* prefix, const PhotometricParams& p) {
  auto key = [&](const char* s) { return std::string(prefix) + s; };
  check_prob(key("p_flip").c_str(), p.p_flip);
  check_prob(key("p_jitter").c_str(), p.p_jitter);
  check_prob(key("p_gray").c_str(), p.p_gray);
  check_prob(key("p_blur").c_str(), p.p_blur);
  check_prob(key("p_solarize").c_str(), p.p_solarize);
  if (!(p.jitter_brightness >= 0.0 && p.jitter_contrast >= 0.0 && p.jitter_saturation >= 0.0 &&
        p.jitter_hue >= 0.0))
    throw ConfigError(std::string("config: '") + prefix + "jitter_*' strengths must be >= 0");
  if (!(p.blur_sigma_min > 0.0 && p.blur_sigma_min <= p.blur_sigma_max))
    throw ConfigError(std::string("config: '") + prefix + "blur_sigma_*' must satisfy 0 < min <= max");
  if (!(p.crop_area_min > 0.0 && p.crop_area_min <= p.crop_area_max && p.crop_area_max <= 1.0))
    throw ConfigError(std::string("config: '") + prefix + "crop_area_*' must satisfy 0 < min <= max <= 1");
}

}  // namespace

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "synth") {
    c.batch_size = 64;
    c.network.encoder.widths = {64, 128, 128, 64};
    c.network.projector.widths = {64, 64, 32};
    c.augment.num_large = 2;
    c.augment.num_small = 1;
    c.augment.large_size = 8;  // grid points are 4x8; crops stretch to 8x8
    c.augment.small_size = 4;
    c.augment.p_mask = 0.0;  // abstract vectors carry no salient region
    c.augment.solarize_mode = SolarizeMode::standard;
    c.augment.odd.p_solarize = 0.0;  // solarize inverts cluster geometry
    c.schedule.base_lr = 0.6;
    c.schedule.total_steps = 3000;
    c.schedule.warmup_steps = 30;
    c.checkpoint_every = 1000;
    c.dataset = "synth:8x500x4x8:0.11";
  } else if (name == "cifar-small") {
    c.batch_size = 128;
    c.network.encoder.widths = {3072, 512, 256, 128};
    c.network.projector.widths = {128, 128, 64};
    c.schedule.base_lr = 0.15;  // 0.3 * 128/256
    c.schedule.total_steps = 20000;
    c.schedule.warmup_steps = 200;
    c.dataset = "cifar:data/cifar10/data_batch_1.bin";
  } else if (name == "imagenet" || name == "jft") {
    c.batch_size = 4096;
    c.network.encoder.widths = {150528, 4096, 256};
    c.network.projector.widths = {256, 4096, 256};
    c.augment.large_size = 224;
    c.augment.small_size = 96;
    c.schedule.base_lr = 4.8;  // 0.3 * 4096/256
    c.schedule.total_steps = 312500;  // 1000 epochs of 1.28M images at batch 4096
    c.schedule.warmup_steps = 3125;
    c.checkpoint_every = 5000;
    c.dataset = "cifar:data/imagenet-stand-in.bin";
    if (name == "jft") {
      c.loss.alpha = 0.3;
      c.loss.beta = 2.0;
      c.loss.tau = 0.2;
      c.network.ema_gamma = 0.996;
      c.augment.p_mask = 0.15;
      c.schedule.base_lr = 0.3 * 4096.0 / 256.0;
    }
  } else {
    throw ConfigError("config: unknown preset '" + name + "'");
  }
  c.schedule.batch_size = c.batch_size;
  return c;
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg = preset_config("synth");
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const KeyDef* def = find_key(key);
    if (def == nullptr)
      throw ConfigError("config: unknown key '" + key + "' on line " + std::to_string(lineno));
    def->set(cfg, value);
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : key_table()) {
    out += k.name;
    out += " = ";
    out += k.get(cfg);
    out += '\n';
  }
  return out;
}

void validate(const RunConfig& cfg) {
  if (cfg.batch_size < 2) throw ConfigError("config: 'batch_size' must be at least 2");
  if (cfg.seed == 0) throw ConfigError("config: 'seed' must be nonzero");

  if (!(cfg.loss.tau > 0.0)) throw ConfigError("config: 'tau' must be positive");
  if (!(cfg.loss.alpha >= 0.0 && cfg.loss.beta >= 0.0))
    throw ConfigError("config: 'alpha' and 'beta' must be non-negative");
  if (cfg.loss.n_negatives < 1) throw ConfigError("config: 'n_negatives' must be at least 1");
  if (cfg.loss.n_negatives >= cfg.batch_size)
    throw ConfigError("config: 'n_negatives' must be smaller than 'batch_size'");

  if (cfg.network.encoder.widths.size() < 2 || cfg.network.projector.widths.size() < 2)
    throw ConfigError("config: 'encoder_widths' and 'projector_widths' need >= 2 entries");
  for (auto w : cfg.network.encoder.widths)
    if (w == 0) throw ConfigError("config: 'encoder_widths' entries must be positive");
  for (auto w : cfg.network.projector.widths)
    if (w == 0) throw ConfigError("config: 'projector_widths' entries must be positive");
  if (cfg.network.projector.widths.front() != cfg.network.encoder.widths.back())
    throw ConfigError("config: 'projector_widths' must start at the encoder output width");
  if (!(cfg.network.ema_gamma >= 0.0 && cfg.network.ema_gamma <= 1.0))
    throw ConfigError("config: 'ema_gamma' must lie in [0, 1]");

  if (cfg.augment.num_large < 1) throw ConfigError("config: 'num_large' must be at least 1");
  if (cfg.augment.large_size < 1 || cfg.augment.small_size < 1)
    throw ConfigError("config: crop sizes must be positive");
  check_prob("p_mask", cfg.augment.p_mask);
  check_prob("min_foreground", cfg.augment.min_foreground);
  check_prob("mask_transform_area", cfg.augment.mask_transform_area);
  if (!(cfg.augment.small_area_min > 0.0 && cfg.augment.small_area_min <= cfg.augment.small_area_max &&
        cfg.augment.small_area_max <= 1.0))
    throw ConfigError("config: 'small_area_*' must satisfy 0 < min <= max <= 1");
  check_parity("odd_", cfg.augment.odd);
  check_parity("even_", cfg.augment.even);

  if (cfg.schedule.warmup_steps > cfg.schedule.total_steps)
    throw ConfigError("config: 'warmup_steps' must not exceed 'total_steps'");
  if (!(cfg.schedule.base_lr >= 0.0)) throw ConfigError("config: 'base_lr' must be non-negative");
  if (cfg.schedule.batch_size != cfg.batch_size)
    throw ConfigError("config: schedule batch size drifted from 'batch_size'");

  if (!(cfg.lars.momentum >= 0.0 && cfg.lars.momentum < 1.0))
    throw ConfigError("config: 'lars_momentum' must lie in [0, 1)");
  if (!(cfg.lars.weight_decay >= 0.0)) throw ConfigError("config: 'weight_decay' must be >= 0");
  if (!(cfg.lars.trust_coefficient > 0.0))
    throw ConfigError("config: 'trust_coefficient' must be positive");

  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw ConfigError("config: 'train_fraction' must lie strictly inside (0, 1)");
  if (cfg.checkpoint_every == 0) throw ConfigError("config: 'checkpoint_every' must be positive");
  if (cfg.dataset.empty()) throw ConfigError("config: 'dataset' must not be empty");
  if (cfg.checkpoint_path.empty() || cfg.metrics_path.empty())
    throw ConfigError("config: output paths must not be empty");
}

}  // namespace relic
