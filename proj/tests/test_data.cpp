#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "sldcnn/data.hpp"
#include "sldcnn/error.hpp"
#include "test_util.hpp"

using namespace sldcnn;
namespace fs = std::filesystem;

namespace {

RawImage gradient_image(std::size_t h, std::size_t w, Real offset) {
  RawImage img{h, w, std::vector<Real>(h * w)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) img.pixels[y * w + x] = std::fmod(offset + 13 * y + 7 * x, 256);
  return img;
}

// Binary PPM with one RGB pixel per triple.
void write_ppm(const fs::path& p, std::size_t h, std::size_t w, const std::vector<unsigned char>& rgb) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << "P6\n" << w << " " << h << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
}

void put_pgm(const RawImage& img, const fs::path& p) {
  fs::create_directories(p.parent_path());
  write_pgm(img, p);
}

double mean_of(const Tensor& t) { return sum(t) / static_cast<double>(t.size()); }

double std_of(const Tensor& t) {
  const double m = mean_of(t);
  double v = 0;
  for (Real x : t.values()) v += (x - m) * (x - m);
  return std::sqrt(v / static_cast<double>(t.size()));
}

Dataset indexed_dataset(std::size_t n) {
  Dataset d;
  d.images = Tensor({n, 1, 1, 1});
  for (std::size_t i = 0; i < n; ++i) {
    d.images[i] = static_cast<Real>(i);
    d.labels.push_back(static_cast<int>(i % 3));
  }
  d.class_names = {"a", "b", "c"};
  return d;
}

}  // namespace

TEST_CASE("load_corpus reads a class-per-directory tree") {
  testutil::TempDir dir("corpus");
  for (const char* cls : {"gamma", "alpha", "beta"}) {
    for (int i = 0; i < 2; ++i) {
      put_pgm(gradient_image(5, 4, i * 10 + cls[0]), dir / cls / ("img" + std::to_string(i) + ".pgm"));
    }
  }
  testutil::spit(dir / "alpha" / ".hidden", "ignored");
  const RawCorpus c = load_corpus(dir.path());
  CHECK(c.images.size() == 6);
  CHECK(c.class_names == std::vector<std::string>{"alpha", "beta", "gamma"});
  CHECK(c.labels == std::vector<int>{0, 0, 1, 1, 2, 2});
  CHECK(c.images[0] == gradient_image(5, 4, 'a'));
  CHECK(c.images[5] == gradient_image(5, 4, 10 + 'g'));

  const RawCorpus again = load_corpus(dir.path());
  CHECK(again.images == c.images);
  CHECK(again.labels == c.labels);
}

TEST_CASE("colour images become luminance") {
  testutil::TempDir dir("colour");
  // red, green, blue, white
  write_ppm(dir / "k" / "c.ppm", 2, 2, {255, 0, 0, 0, 255, 0, 0, 0, 255, 255, 255, 255});
  const RawImage img = decode_image(dir / "k" / "c.ppm");
  REQUIRE(img.pixels.size() == 4);
  CHECK(img.pixels[0] == doctest::Approx(0.299 * 255));
  CHECK(img.pixels[1] == doctest::Approx(0.587 * 255));
  CHECK(img.pixels[2] == doctest::Approx(0.114 * 255));
  CHECK(img.pixels[3] == doctest::Approx(255));
}

TEST_CASE("ingestion errors") {
  testutil::TempDir dir("bad");
  CHECK_THROWS_AS(load_corpus(dir / "missing"), IoError);

  fs::create_directories(dir / "empty_root");
  CHECK_THROWS_AS(load_corpus(dir / "empty_root"), DataError);

  fs::create_directories(dir / "one" / "a");
  fs::create_directories(dir / "one" / "b");
  put_pgm(gradient_image(3, 3, 0), dir / "one" / "a" / "x.pgm");
  CHECK_THROWS_AS(load_corpus(dir / "one"), DataError);

  put_pgm(gradient_image(3, 3, 0), dir / "two" / "a" / "ok.pgm");
  testutil::spit(dir / "two" / "a" / "junk1.png", "not an image");
  testutil::spit(dir / "two" / "b" / "junk2.pgm", "P5 garbage");
  try {
    load_corpus(dir / "two");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("2 undecodable") != std::string::npos);
    CHECK(what.find("junk1.png") != std::string::npos);
    CHECK(what.find("junk2.pgm") != std::string::npos);
  }
}

TEST_CASE("resize") {
  SUBCASE("same size is the identity") {
    const RawImage img = gradient_image(70, 70, 3);
    const RawImage out = resize(img, 70);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(std::abs(out.pixels[i] - img.pixels[i]) < 1e-9);
  }
  SUBCASE("constant stays constant") {
    const RawImage img{140, 140, std::vector<Real>(140 * 140, 77.0)};
    const RawImage out = resize(img, 70);
    CHECK(out.height == 70);
    CHECK(out.width == 70);
    for (Real v : out.pixels) CHECK(v == doctest::Approx(77.0));
  }
  SUBCASE("checkerboard upsampled by hand") {
    const RawImage img{2, 2, {0, 255, 255, 0}};
    const RawImage out = resize(img, 4);
    // pixel-centre sample positions of a 4-wide target on a 2-wide source,
    // clamped to the source: -0.25 -> 0, 0.25, 0.75, 1.25 -> 1
    const double t[4] = {0, 0.25, 0.75, 1};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        // bilinear blend of 0,255 / 255,0 at (t_i, t_j)
        const double expect = 255 * (t[j] + t[i] - 2 * t[i] * t[j]);
        CHECK(out.pixels[i * 4 + j] == doctest::Approx(expect).epsilon(1e-12));
      }
  }
  SUBCASE("nearest neighbour replicates blocks") {
    const RawImage img{2, 2, {1, 2, 3, 4}};
    const RawImage out = resize(img, 4, ResizeMethod::kNearest);
    const std::vector<Real> expect{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    CHECK(out.pixels == expect);
  }
  SUBCASE("non-square sources are squashed") {
    const RawImage out = resize(gradient_image(10, 30, 0), 20);
    CHECK(out.height == 20);
    CHECK(out.width == 20);
  }
}

TEST_CASE("standardization") {
  RawCorpus train, test;
  train.class_names = test.class_names = {"a", "b"};
  for (int i = 0; i < 6; ++i) {
    train.images.push_back(gradient_image(8, 8, 20 * i));
    train.labels.push_back(i % 2);
  }
  for (int i = 0; i < 3; ++i) {
    test.images.push_back(gradient_image(8, 8, 100 + 50 * i));
    test.labels.push_back(i % 2);
  }
  PreprocessOptions opt;
  opt.size = 8;
  const Split s = preprocess(train, test, opt);
  CHECK(std::abs(mean_of(s.train.images)) < 1e-9);
  CHECK(std::abs(std_of(s.train.images) - 1) < 1e-9);
  CHECK(s.test.stats.mean == s.train.stats.mean);
  CHECK(s.test.stats.std == s.train.stats.std);
  CHECK(std::abs(mean_of(s.test.images)) > 1e-3);

  SUBCASE("test images never influence the statistics") {
    RawCorpus shifted = test;
    for (RawImage& img : shifted.images)
      for (Real& v : img.pixels) v = 255 - v;
    const Split t = preprocess(train, shifted, opt);
    CHECK(t.train.stats.mean == s.train.stats.mean);
    CHECK(t.train.stats.std == s.train.stats.std);
    CHECK(t.train.images == s.train.images);
  }
  SUBCASE("constant corpus") {
    RawCorpus flat = train;
    for (RawImage& img : flat.images) img.pixels.assign(img.pixels.size(), 9.0);
    CHECK_THROWS_AS(preprocess(flat, test, opt), DataError);
  }
  SUBCASE("per-image mode") {
    opt.standardize = StandardizeMode::kPerImage;
    const Split p = preprocess(train, test, opt);
    for (std::size_t i = 0; i < p.test.size(); ++i) {
      const Tensor img = p.test.images.slice_rows(i, i + 1);
      CHECK(std::abs(mean_of(img)) < 1e-9);
      CHECK(std::abs(std_of(img) - 1) < 1e-9);
    }
  }
  SUBCASE("inversion") {
    opt.invert = true;
    const Split inv = preprocess(train, test, opt);
    CHECK(inv.train.stats.mean == doctest::Approx(255 - s.train.stats.mean));
    CHECK(inv.train.images[0] == doctest::Approx(-s.train.images[0]));
  }
  SUBCASE("every class needs training samples") {
    RawCorpus lopsided = train;
    lopsided.class_names.push_back("c");
    CHECK_THROWS_AS(preprocess(lopsided, test, opt), DataError);
  }
}

TEST_CASE("shuffle") {
  const Dataset d = indexed_dataset(40);
  const Dataset a = shuffle(d, 1);
  const Dataset b = shuffle(d, 1);
  const Dataset c = shuffle(d, 2);
  CHECK(a.images == b.images);
  CHECK(a.labels == b.labels);
  CHECK_FALSE(a.labels == c.labels);
  CHECK_FALSE(a.images == d.images);
  std::multiset<int> before(d.labels.begin(), d.labels.end()), after(a.labels.begin(), a.labels.end());
  CHECK(before == after);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.labels[i] == static_cast<int>(static_cast<std::size_t>(a.images[i]) % 3));
  }
}

TEST_CASE("batches") {
  auto sizes = [](const std::vector<Batch>& bs) {
    std::vector<std::size_t> out;
    for (const Batch& b : bs) out.push_back(b.labels.size());
    return out;
  };
  CHECK(sizes(batches(indexed_dataset(250), 100)) == std::vector<std::size_t>{100, 100, 50});
  CHECK(sizes(batches(indexed_dataset(7), 100)) == std::vector<std::size_t>{7});

  const std::vector<Batch> big = batches(indexed_dataset(34439), 100);
  CHECK(big.size() == 345);
  CHECK(big.back().labels.size() == 39);

  const Dataset d = shuffle(indexed_dataset(23), 5);
  std::vector<Real> joined;
  std::vector<int> labels;
  for (const Batch& b : batches(d, 5)) {
    joined.insert(joined.end(), b.images.values().begin(), b.images.values().end());
    labels.insert(labels.end(), b.labels.begin(), b.labels.end());
  }
  CHECK(joined == std::vector<Real>(d.images.values().begin(), d.images.values().end()));
  CHECK(labels == d.labels);
  CHECK_THROWS_AS(batches(d, 0), RangeError);
}

TEST_CASE("synthetic corpus") {
  SynthOptions o;
  const Split s = synth_dataset(o);
  CHECK(s.train.size() == 2000);
  CHECK(s.test.size() == 200);
  CHECK(s.train.images.shape() == Shape{2000, 1, 28, 28});
  std::map<int, int> train_counts, test_counts;
  for (int l : s.train.labels) ++train_counts[l];
  for (int l : s.test.labels) ++test_counts[l];
  for (int c = 0; c < 10; ++c) {
    CHECK(train_counts[c] == 200);
    CHECK(test_counts[c] == 20);
  }

  const Split again = synth_dataset(o);
  CHECK(again.train.images == s.train.images);
  o.seed = 2;
  CHECK_FALSE(synth_dataset(o).train.images == s.train.images);
}

TEST_CASE("noise-free synthetic classes are separable by nearest centroid") {
  SynthOptions o;
  o.noise = 0;
  const SynthCorpus raw = synth_corpus(o);
  const std::size_t px = o.extent * o.extent;
  std::vector<std::vector<double>> centroid(o.classes, std::vector<double>(px, 0));
  std::vector<std::size_t> count(o.classes, 0);
  for (std::size_t i = 0; i < raw.train.images.size(); ++i) {
    const auto c = static_cast<std::size_t>(raw.train.labels[i]);
    for (std::size_t j = 0; j < px; ++j) centroid[c][j] += raw.train.images[i].pixels[j];
    ++count[c];
  }
  for (std::size_t c = 0; c < o.classes; ++c)
    for (double& v : centroid[c]) v /= static_cast<double>(count[c]);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < raw.test.images.size(); ++i) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < o.classes; ++c) {
      double d = 0;
      for (std::size_t j = 0; j < px; ++j) {
        const double e = raw.test.images[i].pixels[j] - centroid[c][j];
        d += e * e;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    hits += best == static_cast<std::size_t>(raw.test.labels[i]);
  }
  CHECK(static_cast<double>(hits) / static_cast<double>(raw.test.images.size()) > 0.9);

  Real lo = 255, hi = 0;
  for (const RawImage& img : raw.train.images)
    for (Real v : img.pixels) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  CHECK(lo >= 0);
  CHECK(hi <= 255);
}

TEST_CASE("synthetic corpus round-trips through disk") {
  testutil::TempDir dir("synth");
  SynthOptions o;
  o.classes = 3;
  o.per_class = 10;
  o.extent = 16;
  write_corpus(synth_corpus(o), dir.path());
  CHECK(fs::exists(dir / "train" / "c00"));
  CHECK(fs::exists(dir / "test" / "c02"));
  PreprocessOptions pre;
  pre.size = 16;
  const Split disk = load_split(dir.path(), pre);
  const Split mem = synth_dataset(o, pre);
  CHECK(disk.train.images == mem.train.images);
  CHECK(disk.test.images == mem.test.images);
  CHECK(disk.train.labels == mem.train.labels);
  CHECK(disk.train.class_names == mem.train.class_names);

  testutil::TempDir other("synth2");
  write_corpus(synth_corpus(o), other.path());
  for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir.path());
    CHECK(testutil::slurp(e.path()) == testutil::slurp(other.path() / rel));
  }
}
