#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "retrocap/binary_io.hpp"
#include "retrocap/errors.hpp"
#include "retrocap/pipeline.hpp"

namespace retrocap {

namespace {

constexpr std::array<char, 4> kCheckpointMagic = {'I', 'F', 'C', 'K'};
constexpr std::uint16_t kCheckpointVersion = 1;
constexpr std::uint64_t kManifestLimit = std::uint64_t{1} << 32;

std::string show(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string manifest_text(const ModelCheckpoint& ckpt) {
  std::ostringstream out;
  const auto& d = ckpt.model.dims();
  out << "dims.d = " << d.d << '\n'
      << "dims.d_dec = " << d.d_dec << '\n'
      << "dims.k = " << d.k << '\n'
      << "dims.q = " << d.q << '\n'
      << "dims.map_layers = " << d.map_layers << '\n'
      << "dims.attn_layers = " << d.attn_layers << '\n'
      << "dims.dec_layers = " << d.dec_layers << '\n'
      << "dims.heads = " << d.heads << '\n'
      << "dims.vocab_size = " << d.vocab_size << '\n'
      << "dims.max_len = " << d.max_len << '\n';
  std::ostringstream cfg;
  write_config(cfg, ckpt.config);
  std::istringstream lines(cfg.str());
  for (std::string line; std::getline(lines, line);) out << "config." << line << '\n';
  out << "losses = " << ckpt.epoch_losses.size() << '\n';
  for (double loss : ckpt.epoch_losses) out << "loss = " << show(loss) << '\n';
  out << "tensors = " << ckpt.model.parameters().size() << '\n';
  for (const auto& p : ckpt.model.parameters()) {
    out << "tensor = " << p.name << ' ' << p.value.rows << ' ' << p.value.cols << '\n';
  }
  out << "vocab = " << ckpt.vocab.size() << '\n';
  for (const auto& token : ckpt.vocab.tokens()) out << token << '\n';
  return out.str();
}

std::size_t parse_size(const std::string& text) {
  std::size_t v = 0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) throw FormatError("bad integer '" + text + "' in manifest");
  return v;
}

double parse_real(const std::string& text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) throw FormatError("bad number '" + text + "' in manifest");
  return v;
}

// Splits "key = value"; returns false for lines without the separator.
bool split_entry(const std::string& line, std::string& key, std::string& value) {
  const auto eq = line.find(" = ");
  if (eq == std::string::npos) return false;
  key = line.substr(0, eq);
  value = line.substr(eq + 3);
  return true;
}

struct TensorHeader {
  std::string name;
  std::size_t rows = 0, cols = 0;
};

}  // namespace

void write_checkpoint(std::ostream& out, const ModelCheckpoint& ckpt) {
  const std::string manifest = manifest_text(ckpt);
  out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  binary::write_le<std::uint16_t>(out, kCheckpointVersion);
  binary::write_le<std::uint64_t>(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  std::vector<float> buffer;
  for (const auto& p : ckpt.model.parameters()) {
    buffer.assign(p.value.data.begin(), p.value.data.end());
    binary::write_f32_array(out, buffer);
  }
  if (!out) throw FormatError("failed writing checkpoint stream");
}

void save_checkpoint(const std::filesystem::path& path, const ModelCheckpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

ModelCheckpoint read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kCheckpointMagic) throw FormatError("bad checkpoint magic (expected IFCK)");
  const auto version = binary::read_le<std::uint16_t>(in);
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto length = binary::read_le<std::uint64_t>(in);
  if (length > kManifestLimit) throw FormatError("checkpoint manifest too large");
  std::string manifest(length, '\0');
  in.read(manifest.data(), static_cast<std::streamsize>(length));
  if (!in) throw FormatError("truncated checkpoint manifest");

  FusionDims dims;
  std::map<std::string, std::size_t*> dim_fields = {
      {"dims.d", &dims.d},           {"dims.d_dec", &dims.d_dec},           {"dims.k", &dims.k},
      {"dims.q", &dims.q},           {"dims.map_layers", &dims.map_layers}, {"dims.attn_layers", &dims.attn_layers},
      {"dims.dec_layers", &dims.dec_layers}, {"dims.heads", &dims.heads}, {"dims.vocab_size", &dims.vocab_size},
      {"dims.max_len", &dims.max_len}};
  std::ostringstream config_text;
  std::vector<double> losses;
  std::vector<TensorHeader> tensors;
  std::vector<std::string> vocab;
  std::size_t vocab_expected = 0;
  bool in_vocab = false;

  std::istringstream lines(manifest);
  std::string line, key, value;
  while (std::getline(lines, line)) {
    if (in_vocab) {
      vocab.push_back(line);
      continue;
    }
    if (!split_entry(line, key, value)) throw FormatError("malformed manifest line '" + line + "'");
    if (auto it = dim_fields.find(key); it != dim_fields.end()) {
      *it->second = parse_size(value);
    } else if (key.rfind("config.", 0) == 0) {
      config_text << key.substr(7) << " = " << value << '\n';
    } else if (key == "losses") {
      losses.reserve(parse_size(value));
    } else if (key == "loss") {
      losses.push_back(parse_real(value));
    } else if (key == "tensors") {
      tensors.reserve(parse_size(value));
    } else if (key == "tensor") {
      std::istringstream fields(value);
      TensorHeader t;
      if (!(fields >> t.name >> t.rows >> t.cols)) throw FormatError("malformed tensor entry '" + value + "'");
      tensors.push_back(std::move(t));
    } else if (key == "vocab") {
      vocab_expected = parse_size(value);
      in_vocab = true;
    } else {
      throw FormatError("unknown manifest key '" + key + "'");
    }
  }
  if (vocab.size() != vocab_expected) throw FormatError("vocabulary length does not match manifest");

  std::vector<Parameter> params;
  params.reserve(tensors.size());
  for (const auto& t : tensors) {
    auto values = binary::read_f32_array(in, t.rows * t.cols);
    nn::Matrix m(t.rows, t.cols);
    std::copy(values.begin(), values.end(), m.data.begin());
    params.push_back({t.name, std::move(m)});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after checkpoint tensors");

  std::istringstream cfg_in(config_text.str());
  PipelineConfig config;
  try {
    config = parse_config(cfg_in);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint config snapshot: ") + e.what());
  }
  auto v = Vocabulary::from_tokens(std::move(vocab));
  if (v.size() != dims.vocab_size) throw FormatError("vocabulary size differs from dims.vocab_size");
  return ModelCheckpoint{FusionModel::from_parameters(dims, std::move(params)), std::move(v), config,
                         std::move(losses)};
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace retrocap
