#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "sldcnn/error.hpp"
#include "sldcnn/model.hpp"

namespace sldcnn {

namespace {

constexpr char kMagic[4] = {'S', 'L', 'C', 'N'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kPrecisionF64 = 8;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void text(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError("checkpoint: " + why + " at byte offset " + std::to_string(pos_));
  }

  const char* take(std::size_t n) {
    if (data_.size() - pos_ < n) fail("truncated file (need " + std::to_string(n) + " bytes)");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }
  std::uint32_t u32() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(4));
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = reinterpret_cast<const unsigned char*>(take(8));
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string text() {
    const std::uint32_t n = u32();
    const char* p = take(n);
    return std::string(p, n);
  }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  if (!model.trainable()) throw StateError("save_checkpoint: model has no softmax output layer");
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u8(kVersion);
  w.text(model.arch_string());
  w.u8(kPrecisionF64);
  w.u32(static_cast<std::uint32_t>(model.input().height));
  w.u32(static_cast<std::uint32_t>(model.input().width));
  w.u32(static_cast<std::uint32_t>(model.input().channels));
  for (const Layer& layer : model.layers()) {
    for (const Tensor* p : layer.parameters()) {
      w.u8(static_cast<std::uint8_t>(p->rank()));
      for (std::size_t e : p->shape()) w.u32(static_cast<std::uint32_t>(e));
      for (Real v : p->values()) w.f64(v);
    }
  }
  w.text(render_phase_log(model.phase_log()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  Reader r(std::vector<char>(std::istreambuf_iterator<char>(in), {}));

  if (std::memcmp(r.take(4), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic at byte offset 0");
  }
  const std::uint8_t version = r.u8();
  if (version != kVersion) r.fail("unsupported version " + std::to_string(version));
  const std::size_t arch_at = r.offset();
  const std::string arch = r.text();
  std::vector<LayerSpec> specs;
  try {
    specs = parse_arch(arch);
  } catch (const ParseError& e) {
    throw FormatError("checkpoint: bad architecture at byte offset " + std::to_string(arch_at) +
                      ": " + e.what());
  }
  const std::uint8_t precision = r.u8();
  if (precision != kPrecisionF64) r.fail("unsupported precision tag " + std::to_string(precision));
  InputGeometry geom;
  geom.height = r.u32();
  geom.width = r.u32();
  geom.channels = r.u32();

  Model model(geom);
  try {
    for (const LayerSpec& s : specs) model.add_layer(s);
  } catch (const ShapeError& e) {
    r.fail(std::string("architecture does not fit the stored input geometry: ") + e.what());
  }
  for (Layer& layer : model.layers()) {
    for (Tensor* p : layer.parameters()) {
      const std::size_t rank = r.u8();
      Shape shape(rank);
      for (std::size_t& e : shape) e = r.u32();
      if (shape != p->shape()) {
        r.fail("tensor shape " + shape_string(shape) + " does not match layer " +
               layer.spec.render() + " (expected " + shape_string(p->shape()) + ")");
      }
      for (Real& v : p->values()) v = r.f64();
      if (!p->all_finite()) r.fail("non-finite parameter value");
    }
  }
  std::istringstream log(r.text());
  std::string line;
  while (std::getline(log, line)) {
    std::istringstream fields(line);
    PhaseEntry e;
    std::getline(fields, e.phase, '\t');
    std::getline(fields, e.arch, '\t');
    fields >> e.epochs;
    if (!fields && !fields.eof()) r.fail("malformed phase log line '" + line + "'");
    model.log_phase(std::move(e));
  }
  if (!r.at_end()) r.fail("trailing bytes after phase log");
  return model;
}

}  // namespace sldcnn
