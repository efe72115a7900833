#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sldcnn/data.hpp"
#include "sldcnn/error.hpp"

namespace fs = std::filesystem;

namespace sldcnn {

namespace {

// Glyphs live in a unit frame [-1, 1]^2 (y down) and are built from a fixed
// catalogue of stroke primitives.
struct Segment {
  Real x0, y0, x1, y1;
};
struct Arc {
  Real cx, cy, radius, start, sweep;  // radians
};
struct Primitive {
  std::vector<Segment> segments;
  std::vector<Arc> arcs;
};

const std::vector<Primitive>& catalogue() {
  constexpr Real kPi = 3.14159265358979323846;
  static const std::vector<Primitive> prims = {
      {{{-0.7, -0.6, 0.7, -0.6}}, {}},                           // top bar
      {{{-0.7, 0.0, 0.7, 0.0}}, {}},                             // middle bar
      {{{-0.7, 0.6, 0.7, 0.6}}, {}},                             // bottom bar
      {{{-0.6, -0.7, -0.6, 0.7}}, {}},                           // left bar
      {{{0.0, -0.7, 0.0, 0.7}}, {}},                             // centre bar
      {{{0.6, -0.7, 0.6, 0.7}}, {}},                             // right bar
      {{{-0.65, -0.65, 0.65, 0.65}}, {}},                        // falling diagonal
      {{{-0.65, 0.65, 0.65, -0.65}}, {}},                        // rising diagonal
      {{{-0.35, -0.35, 0.35, 0.35}, {-0.35, 0.35, 0.35, -0.35}}, {}},  // small cross
      {{}, {{0.0, 0.0, 0.55, 0.0, 2 * kPi}}},                    // ring
      {{}, {{0.0, -0.3, 0.4, kPi, kPi}}},                        // upper cup
      {{}, {{0.0, 0.3, 0.4, 0.0, kPi}}},                         // lower bowl
      {{}, {{-0.25, 0.0, 0.45, -0.5 * kPi, kPi}}},               // right-opening bracket
      {{}, {{0.25, 0.0, 0.45, 0.5 * kPi, kPi}}},                 // left-opening bracket
  };
  return prims;
}

Real segment_distance(const Segment& s, Real x, Real y) {
  const Real dx = s.x1 - s.x0, dy = s.y1 - s.y0;
  const Real len2 = dx * dx + dy * dy;
  Real t = len2 > 0 ? ((x - s.x0) * dx + (y - s.y0) * dy) / len2 : 0;
  t = std::clamp(t, Real{0}, Real{1});
  return std::hypot(x - (s.x0 + t * dx), y - (s.y0 + t * dy));
}

Real arc_distance(const Arc& a, Real x, Real y) {
  constexpr Real kTwoPi = 6.28318530717958647692;
  const Real dx = x - a.cx, dy = y - a.cy;
  Real angle = std::atan2(dy, dx) - a.start;
  angle -= kTwoPi * std::floor(angle / kTwoPi);
  if (angle <= a.sweep) return std::abs(std::hypot(dx, dy) - a.radius);
  auto end_point = [&](Real theta) {
    return std::hypot(x - (a.cx + a.radius * std::cos(theta)), y - (a.cy + a.radius * std::sin(theta)));
  };
  return std::min(end_point(a.start), end_point(a.start + a.sweep));
}

using Glyph = std::vector<std::size_t>;  // indices into the catalogue

std::size_t shared(const Glyph& a, const Glyph& b) {
  std::size_t n = 0;
  for (std::size_t p : a) n += static_cast<std::size_t>(std::count(b.begin(), b.end(), p));
  return n;
}

// Every 2- and 3-primitive combination, shuffled by the seed, then picked
// greedily so that glyphs share as few primitives as possible.
std::vector<Glyph> choose_glyphs(std::size_t classes, Rng& rng) {
  const std::size_t m = catalogue().size();
  std::vector<Glyph> pool;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      for (std::size_t c = b + 1; c < m; ++c) pool.push_back({a, b, c});
    }
  }
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) pool.push_back({a, b});
  }
  if (classes > pool.size()) {
    throw ConfigError("synthetic generator supports at most " + std::to_string(pool.size()) +
                      " classes");
  }
  const std::vector<std::size_t> order = shuffled_order(pool.size(), rng);

  std::vector<Glyph> chosen;
  std::vector<bool> used(pool.size(), false);
  for (std::size_t overlap = 1; chosen.size() < classes; ++overlap) {
    for (std::size_t i : order) {
      if (chosen.size() == classes) break;
      if (used[i]) continue;
      const bool ok = std::all_of(chosen.begin(), chosen.end(),
                                  [&](const Glyph& g) { return shared(g, pool[i]) <= overlap; });
      if (ok) {
        chosen.push_back(pool[i]);
        used[i] = true;
      }
    }
  }
  return chosen;
}

struct Placement {
  Real scale_x, scale_y, shift_x, shift_y;
};

RawImage render(const Glyph& glyph, const Placement& pl, std::size_t extent, Real noise, Rng& rng) {
  constexpr Real kHalfWidth = 0.11;
  constexpr Real kSoftness = 0.08;
  const auto& prims = catalogue();
  RawImage img{extent, extent, std::vector<Real>(extent * extent)};
  const Real n = static_cast<Real>(extent);
  for (std::size_t py = 0; py < extent; ++py) {
    for (std::size_t px = 0; px < extent; ++px) {
      // pixel centre -> unit frame -> glyph frame
      const Real u = (static_cast<Real>(px) + 0.5) / n * 2 - 1;
      const Real v = (static_cast<Real>(py) + 0.5) / n * 2 - 1;
      const Real gx = (u - pl.shift_x) / pl.scale_x;
      const Real gy = (v - pl.shift_y) / pl.scale_y;
      Real d = 1e9;
      for (std::size_t p : glyph) {
        for (const Segment& s : prims[p].segments) d = std::min(d, segment_distance(s, gx, gy));
        for (const Arc& a : prims[p].arcs) d = std::min(d, arc_distance(a, gx, gy));
      }
      Real ink = std::clamp(1 - (d - kHalfWidth) / kSoftness, Real{0}, Real{1});
      Real value = 255 * ink;
      if (noise > 0) value += 255 * noise * rng.normal();
      img.pixels[py * extent + px] = std::clamp(std::round(value), Real{0}, Real{255});
    }
  }
  return img;
}

std::vector<std::string> class_names(std::size_t classes) {
  const int width = std::max(2, static_cast<int>(std::to_string(classes - 1).size()));
  std::vector<std::string> names;
  char buf[32];
  for (std::size_t c = 0; c < classes; ++c) {
    std::snprintf(buf, sizeof buf, "c%0*zu", width, c);
    names.emplace_back(buf);
  }
  return names;
}

}  // namespace

SynthCorpus synth_corpus(const SynthOptions& o) {
  if (o.classes < 2) throw ConfigError("synth: need at least 2 classes");
  if (o.per_class < 2) throw ConfigError("synth: need at least 2 samples per class");
  if (o.extent < 4) throw ConfigError("synth: image extent must be >= 4");
  if (!(o.noise >= 0)) throw ConfigError("synth: noise must be >= 0");
  if (!(o.test_fraction > 0 && o.test_fraction < 1)) {
    throw ConfigError("synth: test fraction must lie in (0,1)");
  }
  const auto rounded = static_cast<std::size_t>(std::llround(static_cast<Real>(o.per_class) * o.test_fraction));
  const std::size_t n_test = std::clamp<std::size_t>(rounded, 1, o.per_class - 1);

  Rng glyph_rng(derive_seed(o.seed, 1));
  const std::vector<Glyph> glyphs = choose_glyphs(o.classes, glyph_rng);
  Rng place_rng(derive_seed(o.seed, 2));
  Rng noise_rng(derive_seed(o.seed, 3));

  SynthCorpus out;
  out.train.class_names = out.test.class_names = class_names(o.classes);
  for (std::size_t c = 0; c < o.classes; ++c) {
    for (std::size_t i = 0; i < o.per_class; ++i) {
      const Real s = place_rng.uniform(0.75, 1.0);
      Placement pl{s * place_rng.uniform(0.92, 1.08), s * place_rng.uniform(0.92, 1.08),
                   place_rng.uniform(-0.15, 0.15), place_rng.uniform(-0.15, 0.15)};
      RawCorpus& dst = i < o.per_class - n_test ? out.train : out.test;
      dst.images.push_back(render(glyphs[c], pl, o.extent, o.noise, noise_rng));
      dst.labels.push_back(static_cast<int>(c));
    }
  }
  return out;
}

Split synth_dataset(const SynthOptions& options, PreprocessOptions pre) {
  const SynthCorpus corpus = synth_corpus(options);
  pre.size = options.extent;
  return preprocess(corpus.train, corpus.test, pre);
}

void write_corpus(const SynthCorpus& corpus, const fs::path& root) {
  std::error_code ec;
  for (const auto& [split, raw] : {std::pair<const char*, const RawCorpus*>{"train", &corpus.train},
                                   {"test", &corpus.test}}) {
    std::vector<std::size_t> counter(raw->class_names.size(), 0);
    for (const std::string& name : raw->class_names) {
      fs::create_directories(root / split / name, ec);
      if (ec) throw IoError("cannot create '" + (root / split / name).string() + "': " + ec.message());
    }
    for (std::size_t i = 0; i < raw->images.size(); ++i) {
      const auto label = static_cast<std::size_t>(raw->labels[i]);
      char file[32];
      std::snprintf(file, sizeof file, "%05zu.pgm", counter[label]++);
      write_pgm(raw->images[i], root / split / raw->class_names[label] / file);
    }
  }
}

}  // namespace sldcnn
