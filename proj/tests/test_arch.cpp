#include <doctest.h>

#include <string>

#include "sldcnn/arch.hpp"
#include "sldcnn/error.hpp"

using namespace sldcnn;

namespace {
const char* kPaperArch = "64C4-4P2-64C4-4P2-64C4-4P2-1500FC-171SM";

std::string message_of(std::string_view text, InputGeometry in = {}) {
  try {
    make_arch(text, in);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}
}  // namespace

TEST_CASE("parse the benchmark architecture") {
  const std::vector<LayerSpec> layers = parse_arch(kPaperArch);
  const std::vector<LayerSpec> expect{
      LayerSpec::conv(64, 4), LayerSpec::pool(4, 2), LayerSpec::conv(64, 4), LayerSpec::pool(4, 2),
      LayerSpec::conv(64, 4), LayerSpec::pool(4, 2), LayerSpec::fc(1500), LayerSpec::softmax(171)};
  CHECK(layers == expect);
  CHECK(render_layers(layers) == kPaperArch);
}

TEST_CASE("grammar") {
  CHECK(parse_arch("8C3-2P2-16FC-4SM").size() == 4);
  CHECK(parse_arch("8C3-16FC-32FC-4SM").size() == 4);
  for (const char* s : {"8C3-2P2-16FC-4SM", "1C1-1P1-1FC-2SM", "16C3-2P2-16C3-2P2-64FC-10SM"}) {
    CHECK(render_layers(parse_arch(s)) == s);
  }
  CHECK_THROWS_AS(parse_arch("10SM"), ParseError);
  CHECK_THROWS_AS(parse_arch("8C3-2P2-4SM"), ParseError);
  CHECK_THROWS_AS(parse_arch("8C3-16FC-4SM-2P2"), ParseError);
  CHECK_THROWS_AS(parse_arch("8C3-16FC"), ParseError);
  CHECK_THROWS_AS(parse_arch("8c3-16FC-4SM"), ParseError);
  CHECK_THROWS_AS(parse_arch("8C3 - 16FC-4SM"), ParseError);
  CHECK_THROWS_AS(parse_arch("0C3-16FC-4SM"), ParseError);
  CHECK_THROWS_AS(parse_arch("8C3-16FC-1SM"), ParseError);
  CHECK_THROWS_AS(parse_arch("8CX-16FC-4SM"), ParseError);
  CHECK_THROWS_AS(parse_arch("8C3--16FC-4SM"), ParseError);
  CHECK_THROWS_AS(parse_arch(""), ParseError);
  CHECK_THROWS_AS(parse_arch("8X3-16FC-4SM"), ParseError);
}

TEST_CASE("parse errors carry the token position") {
  try {
    parse_arch("8C3-2Q2-16FC-4SM");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("token 2") != std::string::npos);
    CHECK(what.find("2Q2") != std::string::npos);
  }
}

TEST_CASE("shape inference on the benchmark architecture") {
  const ArchSpec spec = make_arch(kPaperArch, {70, 70, 1});
  const std::vector<Shape> shapes = infer_shapes(spec);
  const std::vector<Shape> expect{{64, 67, 67}, {64, 32, 32}, {64, 29, 29}, {64, 13, 13},
                                  {64, 10, 10}, {64, 4, 4},   {1500},       {171}};
  CHECK(shapes == expect);
  CHECK(shape_size(shapes[5]) == 1024);
}

TEST_CASE("boundary and infeasible geometry") {
  const std::vector<Shape> s = infer_shapes(make_arch("8C3-4FC-2SM", {3, 3, 1}));
  CHECK(s[0] == Shape{8, 1, 1});

  CHECK_THROWS_AS(make_arch("4C5-4FC-2SM", {4, 4, 1}), ShapeError);
  const std::string what = message_of("4C5-4FC-2SM", {4, 4, 1});
  CHECK(what.find("layer 1") != std::string::npos);
  CHECK(what.find("4C5") != std::string::npos);

  const std::string deep = message_of(kPaperArch, {28, 28, 1});
  CHECK(deep.find("layer 5") != std::string::npos);
  CHECK(deep.find("64C4") != std::string::npos);
}

TEST_CASE("fc input width is the flattened volume") {
  for (std::size_t n : {20u, 28u, 35u}) {
    const ArchSpec spec = make_arch("6C3-2P2-5C2-3P1-7FC-3SM", {n, n, 1});
    const std::vector<Shape> s = infer_shapes(spec);
    Shape in{1, n, n};
    for (std::size_t i = 0; i + 2 < spec.layers.size(); ++i) in = layer_output_shape(in, spec.layers[i]);
    CHECK(in == s[3]);
  }
}

TEST_CASE("split into blocks and head") {
  const ArchBlocks b = split_blocks(parse_arch(kPaperArch));
  REQUIRE(b.blocks.size() == 3);
  for (const auto& blk : b.blocks) {
    CHECK(blk == std::vector<LayerSpec>{LayerSpec::conv(64, 4), LayerSpec::pool(4, 2)});
  }
  CHECK(b.head == std::vector<LayerSpec>{LayerSpec::fc(1500), LayerSpec::softmax(171)});

  const ArchBlocks two = split_blocks(parse_arch("4C3-4C3-2P2-8C3-2P2-16FC-4SM"));
  CHECK(two.blocks.size() == 2);
  CHECK(two.blocks[0].size() == 3);

  CHECK_THROWS_AS(split_blocks(parse_arch("16FC-4SM")), ConfigError);
}
