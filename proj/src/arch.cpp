#include "sldcnn/arch.hpp"

#include <algorithm>
#include <charconv>

#include "sldcnn/error.hpp"
#include "sldcnn/layers.hpp"

namespace sldcnn {

const char* layer_kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kPool: return "pool";
    case LayerKind::kFC: return "fc";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

std::string LayerSpec::render() const {
  switch (kind) {
    case LayerKind::kConv: return std::to_string(first) + "C" + std::to_string(second);
    case LayerKind::kPool: return std::to_string(first) + "P" + std::to_string(second);
    case LayerKind::kFC: return std::to_string(first) + "FC";
    case LayerKind::kSoftmax: return std::to_string(first) + "SM";
  }
  return {};
}

std::string render_layers(const std::vector<LayerSpec>& layers) {
  std::string out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (i) out += '-';
    out += layers[i].render();
  }
  return out;
}

std::string ArchSpec::render() const { return render_layers(layers); }

namespace {

[[noreturn]] void token_error(std::size_t pos, std::string_view token, const std::string& why) {
  throw ParseError("token " + std::to_string(pos) + " '" + std::string(token) + "': " + why);
}

// Positive decimal without sign or leading zeros.
std::size_t parse_count(std::string_view digits, std::size_t pos, std::string_view token) {
  if (digits.empty()) token_error(pos, token, "missing count");
  if (digits.size() > 1 && digits[0] == '0') token_error(pos, token, "leading zero in count");
  std::size_t value = 0;
  const auto* end = digits.data() + digits.size();
  auto [ptr, ec] = std::from_chars(digits.data(), end, value);
  if (ec != std::errc{} || ptr != end) token_error(pos, token, "non-numeric count");
  if (value == 0) token_error(pos, token, "count must be >= 1");
  return value;
}

LayerSpec parse_token(std::string_view token, std::size_t pos) {
  if (token.empty()) token_error(pos, token, "empty token");
  auto ends_with = [&](std::string_view suffix) {
    return token.size() > suffix.size() && token.substr(token.size() - suffix.size()) == suffix;
  };
  if (ends_with("FC")) return LayerSpec::fc(parse_count(token.substr(0, token.size() - 2), pos, token));
  if (ends_with("SM")) {
    const std::size_t classes = parse_count(token.substr(0, token.size() - 2), pos, token);
    if (classes < 2) token_error(pos, token, "softmax needs at least 2 classes");
    return LayerSpec::softmax(classes);
  }
  const std::size_t sep = token.find_first_of("CP");
  if (sep == std::string_view::npos) token_error(pos, token, "expected xCy, xPy, xFC or xSM");
  const std::size_t a = parse_count(token.substr(0, sep), pos, token);
  const std::size_t b = parse_count(token.substr(sep + 1), pos, token);
  return token[sep] == 'C' ? LayerSpec::conv(a, b) : LayerSpec::pool(a, b);
}

}  // namespace

std::vector<LayerSpec> parse_arch(std::string_view text) {
  std::vector<LayerSpec> layers;
  std::size_t start = 0;
  std::size_t pos = 1;
  while (true) {
    const std::size_t dash = text.find('-', start);
    const std::string_view token =
        text.substr(start, dash == std::string_view::npos ? std::string_view::npos : dash - start);
    layers.push_back(parse_token(token, pos));
    if (dash == std::string_view::npos) break;
    start = dash + 1;
    ++pos;
  }

  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::kSoftmax && i + 1 != layers.size()) {
      token_error(i + 1, layers[i].render(), "softmax output must be the last layer");
    }
  }
  const LayerSpec& last = layers.back();
  if (last.kind != LayerKind::kSoftmax) {
    token_error(layers.size(), last.render(), "architecture must end with an xSM output layer");
  }
  if (layers.size() < 2 || layers[layers.size() - 2].kind != LayerKind::kFC) {
    token_error(layers.size(), last.render(), "softmax output must follow an xFC layer");
  }
  return layers;
}

Shape layer_output_shape(const Shape& in, const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kConv:
    case LayerKind::kPool: {
      if (in.size() != 3) {
        throw ShapeError(spec.render() + " needs a spatial input, got " + shape_string(in));
      }
      const std::size_t h = spec.kind == LayerKind::kConv
                                ? conv_extent(in[1], spec.second)
                                : pool_extent(in[1], spec.first, spec.second);
      const std::size_t w = spec.kind == LayerKind::kConv
                                ? conv_extent(in[2], spec.second)
                                : pool_extent(in[2], spec.first, spec.second);
      if (h == 0 || w == 0) {
        throw ShapeError(spec.render() + " does not fit input " + shape_string(in));
      }
      return {spec.kind == LayerKind::kConv ? spec.first : in[0], h, w};
    }
    case LayerKind::kFC:
    case LayerKind::kSoftmax:
      return {spec.first};
  }
  return {};
}

std::vector<Shape> infer_shapes(const ArchSpec& spec) {
  std::vector<Shape> shapes;
  Shape current = spec.input.shape();
  if (shape_size(current) == 0) throw ShapeError("input geometry has a zero extent");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      current = layer_output_shape(current, spec.layers[i]);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i + 1) + " (" + spec.layers[i].render() +
                       ") is infeasible: " + e.what());
    }
    shapes.push_back(current);
  }
  return shapes;
}

ArchSpec make_arch(std::string_view text, InputGeometry input) {
  ArchSpec spec{parse_arch(text), input};
  infer_shapes(spec);
  return spec;
}

ArchBlocks split_blocks(const std::vector<LayerSpec>& layers) {
  ArchBlocks out;
  std::vector<LayerSpec> current;
  std::size_t i = 0;
  for (; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.kind == LayerKind::kFC || l.kind == LayerKind::kSoftmax) break;
    current.push_back(l);
    if (l.kind == LayerKind::kPool) {
      out.blocks.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.blocks.push_back(std::move(current));
  out.head.assign(layers.begin() + static_cast<std::ptrdiff_t>(i), layers.end());

  const bool has_conv_block = std::any_of(out.blocks.begin(), out.blocks.end(), [](const auto& b) {
    return std::any_of(b.begin(), b.end(),
                       [](const LayerSpec& l) { return l.kind == LayerKind::kConv; });
  });
  if (!has_conv_block) {
    throw ConfigError("architecture '" + render_layers(layers) +
                      "' has no convolution/pooling block to train layerwise");
  }
  return out;
}

}  // namespace sldcnn
