#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <string>

#include "retrocap/errors.hpp"
#include "retrocap/pipeline.hpp"

namespace retrocap {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string show(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

double read_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "' expects a real number, got '" + text + "'");
  }
  return v;
}

template <typename T>
T read_integer(const std::string& key, const std::string& text) {
  T v{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer, got '" + text + "'");
  }
  return v;
}

struct Field {
  const char* key;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

template <typename Member>
Field size_field(const char* key, Member member) {
  return {key, [member](const PipelineConfig& c) { return std::to_string(member(const_cast<PipelineConfig&>(c))); },
          [member](PipelineConfig& c, const std::string& k, const std::string& v) {
            member(c) = read_integer<std::size_t>(k, v);
          }};
}

template <typename Member>
Field real_field(const char* key, Member member) {
  return {key, [member](const PipelineConfig& c) { return show(member(const_cast<PipelineConfig&>(c))); },
          [member](PipelineConfig& c, const std::string& k, const std::string& v) { member(c) = read_real(k, v); }};
}

std::string to_string(FusionSource s) { return s == FusionSource::top_k ? "k" : "l"; }

FusionSource parse_fusion_source(const std::string& text) {
  if (text == "k") return FusionSource::top_k;
  if (text == "l") return FusionSource::all_l;
  throw ConfigError("fusion_source must be 'k' or 'l', got '" + text + "'");
}

std::string to_string(DecodeStrategy s) { return s == DecodeStrategy::greedy ? "greedy" : "beam"; }

DecodeStrategy parse_decode(const std::string& text) {
  if (text == "greedy") return DecodeStrategy::greedy;
  if (text == "beam") return DecodeStrategy::beam;
  throw ConfigError("decode must be 'greedy' or 'beam', got '" + text + "'");
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      real_field("ilr.sigma_r", [](PipelineConfig& c) -> double& { return c.ilr.sigma_r; }),
      size_field("ilr.k", [](PipelineConfig& c) -> std::size_t& { return c.ilr.k; }),
      {"ilr.seed", [](const PipelineConfig& c) { return std::to_string(c.ilr.seed); },
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.ilr.seed = read_integer<std::uint64_t>(k, v); }},
      {"ilr.injection_mode", [](const PipelineConfig& c) { return to_string(c.ilr.injection_mode); },
       [](PipelineConfig& c, const std::string&, const std::string& v) { c.ilr.injection_mode = parse_injection_mode(v); }},
      size_field("dims.d", [](PipelineConfig& c) -> std::size_t& { return c.dims.d; }),
      size_field("dims.d_dec", [](PipelineConfig& c) -> std::size_t& { return c.dims.d_dec; }),
      size_field("dims.q", [](PipelineConfig& c) -> std::size_t& { return c.dims.q; }),
      size_field("dims.map_layers", [](PipelineConfig& c) -> std::size_t& { return c.dims.map_layers; }),
      size_field("dims.attn_layers", [](PipelineConfig& c) -> std::size_t& { return c.dims.attn_layers; }),
      size_field("dims.dec_layers", [](PipelineConfig& c) -> std::size_t& { return c.dims.dec_layers; }),
      size_field("dims.heads", [](PipelineConfig& c) -> std::size_t& { return c.dims.heads; }),
      size_field("dims.max_len", [](PipelineConfig& c) -> std::size_t& { return c.dims.max_len; }),
      real_field("sigma_train", [](PipelineConfig& c) -> double& { return c.sigma_train; }),
      size_field("l", [](PipelineConfig& c) -> std::size_t& { return c.l; }),
      {"threshold.mode", [](const PipelineConfig& c) { return to_string(c.threshold.mode); },
       [](PipelineConfig& c, const std::string&, const std::string& v) { c.threshold.mode = parse_threshold_mode(v); }},
      size_field("threshold.tau", [](PipelineConfig& c) -> std::size_t& { return c.threshold.tau; }),
      {"threshold.distribution", [](const PipelineConfig& c) { return to_string(c.threshold.distribution); },
       [](PipelineConfig& c, const std::string&, const std::string& v) { c.threshold.distribution = parse_distribution(v); }},
      {"threshold.n_sigma", [](const PipelineConfig& c) { return std::to_string(c.threshold.n_sigma); },
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.threshold.n_sigma = read_integer<int>(k, v); }},
      size_field("epochs", [](PipelineConfig& c) -> std::size_t& { return c.epochs; }),
      size_field("batch_size", [](PipelineConfig& c) -> std::size_t& { return c.batch_size; }),
      real_field("lr", [](PipelineConfig& c) -> double& { return c.lr; }),
      real_field("weight_decay", [](PipelineConfig& c) -> double& { return c.weight_decay; }),
      {"seed", [](const PipelineConfig& c) { return std::to_string(c.seed); },
       [](PipelineConfig& c, const std::string& k, const std::string& v) { c.seed = read_integer<std::uint64_t>(k, v); }},
      size_field("frames_per_video", [](PipelineConfig& c) -> std::size_t& { return c.frames_per_video; }),
      size_field("sentences_per_frame", [](PipelineConfig& c) -> std::size_t& { return c.sentences_per_frame; }),
      {"fusion_source", [](const PipelineConfig& c) { return to_string(c.fusion_source); },
       [](PipelineConfig& c, const std::string&, const std::string& v) { c.fusion_source = parse_fusion_source(v); }},
      {"decode", [](const PipelineConfig& c) { return to_string(c.decode); },
       [](PipelineConfig& c, const std::string&, const std::string& v) { c.decode = parse_decode(v); }},
      size_field("beam_width", [](PipelineConfig& c) -> std::size_t& { return c.beam_width; }),
      size_field("max_new", [](PipelineConfig& c) -> std::size_t& { return c.max_new; }),
  };
  return table;
}

}  // namespace

void InferenceConfig::validate() const {
  if (l == 0) throw ConfigError("l must be at least 1");
  if (k == 0) throw ConfigError("k must be at least 1");
  if (frames_per_video == 0 || sentences_per_frame == 0) {
    throw ConfigError("frames_per_video and sentences_per_frame must be positive");
  }
  if (decode.strategy == DecodeStrategy::beam && decode.beam_width == 0) throw ConfigError("beam_width must be positive");
  threshold.validate();
}

void PipelineConfig::validate() const {
  ilr.validate();
  if (!(sigma_train >= 0.0)) throw ConfigError("sigma_train must be non-negative");
  if (epochs == 0) throw ConfigError("epochs must be at least 1");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  FusionDims check = dims;
  check.k = ilr.k;
  check.vocab_size = std::max<std::size_t>(check.vocab_size, 2);
  check.validate();
  inference().validate();
}

InferenceConfig PipelineConfig::inference() const {
  InferenceConfig out;
  out.l = l;
  out.k = ilr.k;
  out.threshold = threshold;
  out.fusion_source = fusion_source;
  out.frames_per_video = frames_per_video;
  out.sentences_per_frame = sentences_per_frame;
  out.decode = {decode, beam_width, max_new};
  return out;
}

bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  for (const auto& f : fields()) {
    if (f.get(a) != f.get(b)) return false;
  }
  return true;
}

PipelineConfig preset_config(const std::string& dataset) {
  PipelineConfig cfg;
  if (dataset == "coco") {
    cfg.l = 9, cfg.threshold.tau = 5, cfg.epochs = 5;
  } else if (dataset == "flickr30k" || dataset == "flickr") {
    cfg.l = 7, cfg.threshold.tau = 3, cfg.epochs = 30;
  } else if (dataset == "nocaps") {
    cfg.l = 7, cfg.threshold.tau = 3;
  } else if (dataset == "msvd") {
    cfg.l = 7, cfg.threshold.tau = 5, cfg.epochs = 10;
  } else if (dataset == "msrvtt" || dataset == "msr-vtt") {
    cfg.l = 7, cfg.threshold.tau = 6, cfg.epochs = 10;
  } else {
    throw ConfigError("unknown dataset preset '" + dataset + "'");
  }
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void set_config_value(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (key == f.key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

PipelineConfig parse_config(std::istream& in, PipelineConfig base) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string body = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + " is not 'key = value'");
    }
    set_config_value(base, trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  return parse_config(in, std::move(base));
}

void write_config(std::ostream& out, const PipelineConfig& cfg) {
  for (const auto& f : fields()) out << f.key << " = " << f.get(cfg) << '\n';
}

}  // namespace retrocap
