#include "nncomp/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "nncomp/error.hpp"

namespace nncomp {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

int parse_int(std::string_view s, const std::string& what) {
  s = trim(s);
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("expected an integer for " + what + ", got '" + std::string(s) + "'");
  return v;
}

bool parse_bool(std::string_view s, const ConfigEntry& e) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("line " + std::to_string(e.line) + ": expected true/false for '" + e.key + "'");
}

std::string with_line(const ConfigEntry& e, const std::string& msg) {
  return "line " + std::to_string(e.line) + ": " + msg;
}

}  // namespace

std::vector<ConfigEntry> parse_config(std::string_view text) {
  std::vector<ConfigEntry> out;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    ConfigEntry e{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))), line_no};
    if (e.key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint32_t QuantMode::codewords() const {
  switch (kind) {
    case QuantKind::Scalar: return 1U << bits;
    case QuantKind::Vector: return static_cast<std::uint32_t>(k);
    case QuantKind::Exempt: break;
  }
  return 0;
}

int QuantMode::index_bits() const {
  if (kind == QuantKind::Scalar) return bits;
  if (kind == QuantKind::Vector) {
    int b = 1;
    while ((1U << b) < static_cast<std::uint32_t>(k)) ++b;
    return b;
  }
  return 0;
}

void validate(const QuantMode& mode) {
  switch (mode.kind) {
    case QuantKind::Exempt: return;
    case QuantKind::Scalar:
      if (mode.bits < 1 || mode.bits > 16)
        throw ConfigError("scalar bit width must lie in [1,16], got " + std::to_string(mode.bits));
      return;
    case QuantKind::Vector:
      if (mode.k < 1 || mode.k > (1 << 16))
        throw ConfigError("vector codeword count must lie in [1,65536], got " + std::to_string(mode.k));
      if (mode.d < 1 || mode.d > 255)
        throw ConfigError("vector block size must lie in [1,255], got " + std::to_string(mode.d));
      return;
  }
}

QuantMode parse_quant_mode(std::string_view text) {
  text = trim(text);
  QuantMode mode;
  if (text == "exempt") {
    mode = QuantMode::exempt();
  } else if (text.starts_with("scalar:")) {
    mode = QuantMode::scalar(parse_int(text.substr(7), "scalar bits"));
  } else if (text.starts_with("vector:")) {
    const auto body = text.substr(7);
    const auto x = body.find('x');
    if (x == std::string_view::npos) throw ConfigError("vector mode must read vector:<k>x<d>");
    mode = QuantMode::vector(parse_int(body.substr(0, x), "codeword count"),
                             parse_int(body.substr(x + 1), "block size"));
  } else {
    throw ConfigError("unknown quantization mode '" + std::string(text) + "'");
  }
  validate(mode);
  return mode;
}

std::string to_string(const QuantMode& mode) {
  switch (mode.kind) {
    case QuantKind::Scalar: return "scalar:" + std::to_string(mode.bits);
    case QuantKind::Vector: return "vector:" + std::to_string(mode.k) + "x" + std::to_string(mode.d);
    case QuantKind::Exempt: break;
  }
  return "exempt";
}

const QuantMode& QuantizationSpec::mode_for(const std::string& layer) const {
  auto it = layers.find(layer);
  return it == layers.end() ? default_mode : it->second;
}

QuantizationSpec QuantizationSpec::uniform_scalar(int bits, bool bn_exempt) {
  QuantizationSpec s;
  s.default_mode = QuantMode::scalar(bits);
  validate(s.default_mode);
  s.bn_exempt = bn_exempt;
  return s;
}

QuantizationSpec parse_quantization_spec(std::string_view text) {
  QuantizationSpec spec;
  for (const auto& e : parse_config(text)) {
    try {
      if (e.key == "default") {
        spec.default_mode = parse_quant_mode(e.value);
      } else if (e.key == "bn_exempt") {
        spec.bn_exempt = parse_bool(e.value, e);
      } else if (e.key == "bias_exempt") {
        spec.bias_exempt = parse_bool(e.value, e);
      } else if (e.key.starts_with("layer.") && e.key.size() > 6) {
        const auto name = e.key.substr(6);
        if (!spec.layers.emplace(name, parse_quant_mode(e.value)).second)
          throw ConfigError("layer '" + name + "' listed twice");
      } else {
        throw ConfigError("unknown key '" + e.key + "'");
      }
    } catch (const ConfigError& err) {
      if (std::string_view(err.what()).starts_with("line ")) throw;
      throw ConfigError(with_line(e, err.what()));
    }
  }
  return spec;
}

std::string to_text(const QuantizationSpec& spec) {
  std::ostringstream os;
  os << "default = " << to_string(spec.default_mode) << '\n';
  os << "bn_exempt = " << (spec.bn_exempt ? "true" : "false") << '\n';
  os << "bias_exempt = " << (spec.bias_exempt ? "true" : "false") << '\n';
  for (const auto& [name, mode] : spec.layers) os << "layer." << name << " = " << to_string(mode) << '\n';
  return os.str();
}

TyingPlan parse_tying_plan(std::string_view text) {
  TyingPlan plan;
  for (const auto& e : parse_config(text)) {
    if (e.key != "group") throw ConfigError(with_line(e, "unknown key '" + e.key + "'"));
    const auto colon = e.value.find(':');
    if (colon == std::string::npos)
      throw ConfigError(with_line(e, "group must read '<repeat> : <layer> ...'"));
    TyingGroup g;
    try {
      g.repeat_count = parse_int(std::string_view(e.value).substr(0, colon), "repeat count");
    } catch (const ConfigError& err) {
      throw ConfigError(with_line(e, err.what()));
    }
    std::istringstream names(e.value.substr(colon + 1));
    for (std::string name; names >> name;) g.template_layers.push_back(name);
    if (g.repeat_count < 1) throw ConfigError(with_line(e, "repeat count must be >= 1"));
    if (g.template_layers.empty()) throw ConfigError(with_line(e, "group lists no layers"));
    plan.groups.push_back(std::move(g));
  }
  return plan;
}

std::string to_text(const TyingPlan& plan) {
  std::ostringstream os;
  for (const auto& g : plan.groups) {
    os << "group = " << g.repeat_count << " :";
    for (const auto& n : g.template_layers) os << ' ' << n;
    os << '\n';
  }
  return os.str();
}

}  // namespace nncomp
