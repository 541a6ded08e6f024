#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "wan/common.hpp"
#include "wan/data.hpp"
#include "wan/dataset.hpp"
#include "wan/kernels.hpp"
#include "wan/pnm.hpp"
#include "wan/synth.hpp"

using namespace wan;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  fs::path p = fs::temp_directory_path() / (std::string("wan_data_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(static_cast<bool>(in));
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

data::RasterTile checker_tile(int64_t side, bool with_mask) {
  data::RasterTile t;
  t.height = side;
  t.width = side;
  t.tile_id = "t0";
  t.pixels.resize(static_cast<size_t>(side * side * 3));
  for (int64_t y = 0; y < side; ++y)
    for (int64_t x = 0; x < side; ++x)
      for (int64_t c = 0; c < 3; ++c)
        t.pixels[static_cast<size_t>((y * side + x) * 3 + c)] =
            static_cast<uint8_t>((x * 7 + y * 13 + c * 31) % 256);
  if (with_mask) {
    t.mask.resize(static_cast<size_t>(side * side));
    for (int64_t y = 0; y < side; ++y)
      for (int64_t x = 0; x < side; ++x)
        t.mask[static_cast<size_t>(y * side + x)] = (x + y) % 3 == 0 ? 1 : 0;
  }
  return t;
}

}  // namespace

TEST_CASE("pnm round-trip preserves bytes for P6 and P5") {
  fs::path dir = temp_dir("pnm");
  Rng rng(301);

  pnm::Image rgb;
  rgb.height = 5;
  rgb.width = 7;
  rgb.channels = 3;
  rgb.data.resize(5 * 7 * 3);
  for (auto& b : rgb.data) b = static_cast<uint8_t>(rng.uniform_int(256));
  pnm::write_pnm((dir / "a.ppm").string(), rgb);
  pnm::Image rgb2 = pnm::read_pnm((dir / "a.ppm").string());
  CHECK(rgb2.height == 5);
  CHECK(rgb2.width == 7);
  CHECK(rgb2.channels == 3);
  CHECK(rgb2.data == rgb.data);

  pnm::Image gray;
  gray.height = 3;
  gray.width = 4;
  gray.channels = 1;
  gray.data = {0, 255, 12, 200, 1, 2, 3, 4, 5, 6, 7, 8};
  pnm::write_pnm((dir / "b.pgm").string(), gray);
  CHECK(pnm::read_pnm((dir / "b.pgm").string()).data == gray.data);
}

TEST_CASE("pnm header comments are skipped and malformed files rejected") {
  fs::path dir = temp_dir("pnm_hdr");
  {
    std::ofstream out(dir / "c.pgm", std::ios::binary);
    out << "P5\n# a comment\n2 # trailing\n# again\n2\n255\n";
    out.write("\x01\x02\x03\x04", 4);
  }
  pnm::Image img = pnm::read_pnm((dir / "c.pgm").string());
  CHECK(img.width == 2);
  CHECK(img.height == 2);
  CHECK(img.data == std::vector<uint8_t>{1, 2, 3, 4});

  {
    std::ofstream out(dir / "bad_maxval.pgm", std::ios::binary);
    out << "P5\n2 2\n65535\n";
    out.write("\x01\x02\x03\x04", 4);
  }
  CHECK_THROWS_AS(pnm::read_pnm((dir / "bad_maxval.pgm").string()), ContractViolation);

  {
    std::ofstream out(dir / "short.ppm", std::ios::binary);
    out << "P6\n2 2\n255\n";
    out.write("\x01\x02", 2);
  }
  CHECK_THROWS_AS(pnm::read_pnm((dir / "short.ppm").string()), ContractViolation);
  CHECK_THROWS_AS(pnm::read_pnm((dir / "missing.ppm").string()), IoError);
}

TEST_CASE("tile_standard: 1500 tile yields 9 crops and 36 patches") {
  data::RasterTile t = checker_tile(1500, true);
  std::vector<data::PatchSample> patches = data::tile_standard(t);
  CHECK(patches.size() == 36);

  // crop grid is {0,500,1000}^2, four patches each, offsets {0,256}^2
  std::set<std::pair<int64_t, int64_t>> crops;
  for (const auto& p : patches) {
    crops.insert({p.crop_y, p.crop_x});
    CHECK((p.patch_y == 0 || p.patch_y == 256));
    CHECK((p.patch_x == 0 || p.patch_x == 256));
    CHECK(p.image.shape() == Shape{3, 256, 256});
    CHECK(p.mask.defined());
    CHECK(p.weak_label == data::derive_weak_label(p.mask));
  }
  CHECK(crops.size() == 9);
  for (int64_t r : {0, 500, 1000})
    for (int64_t c : {0, 500, 1000}) CHECK(crops.count({r, c}) == 1);
}

TEST_CASE("tile_standard: minimal 500 tile yields 4 patches that partition the crop") {
  data::RasterTile t = checker_tile(500, false);
  std::vector<data::PatchSample> patches = data::tile_standard(t);
  REQUIRE(patches.size() == 4);
  for (const auto& p : patches) CHECK_FALSE(p.mask.defined());

  // oracle resize of the whole crop; every patch pixel must come from exactly
  // the region its provenance offsets claim
  std::vector<double> planes(3 * 500 * 500);
  for (int64_t c = 0; c < 3; ++c)
    for (int64_t y = 0; y < 500; ++y)
      for (int64_t x = 0; x < 500; ++x)
        planes[static_cast<size_t>((c * 500 + y) * 500 + x)] =
            t.pixels[static_cast<size_t>((y * 500 + x) * 3 + c)];
  std::vector<double> resized(3 * 512 * 512);
  kernels::ref::bilinear_forward(planes.data(), resized.data(), 1, 3, 500, 500, 512, 512);

  std::vector<uint8_t> covered(512 * 512, 0);
  for (const auto& p : patches) {
    for (int64_t c = 0; c < 3; ++c)
      for (int64_t y = 0; y < 256; ++y)
        for (int64_t x = 0; x < 256; ++x) {
          double want = resized[static_cast<size_t>((c * 512 + p.patch_y + y) * 512 +
                                                    p.patch_x + x)] /
                        255.0;
          double got = p.image.values()[static_cast<size_t>((c * 256 + y) * 256 + x)];
          CHECK(got == doctest::Approx(want).epsilon(1e-12));
        }
    for (int64_t y = 0; y < 256; ++y)
      for (int64_t x = 0; x < 256; ++x)
        covered[static_cast<size_t>((p.patch_y + y) * 512 + p.patch_x + x)] += 1;
  }
  for (uint8_t v : covered) CHECK(v == 1);  // partition: once and only once
}

TEST_CASE("tile_standard rejects tiles smaller than the crop") {
  data::RasterTile t = checker_tile(400, false);
  CHECK_THROWS_AS(data::tile_standard(t), ContractViolation);
}

TEST_CASE("tile_potsdam: 6000 tile yields 64 patches, first sub-image at origin") {
  data::RasterTile t;
  t.height = 6000;
  t.width = 6000;
  t.tile_id = "p0";
  t.pixels.resize(static_cast<size_t>(6000) * 6000 * 3);
  for (size_t i = 0; i < t.pixels.size(); ++i) t.pixels[i] = static_cast<uint8_t>(i % 251);

  std::vector<data::PatchSample> patches = data::tile_potsdam(t);
  CHECK(patches.size() == 64);
  std::set<std::pair<int64_t, int64_t>> crops;
  for (const auto& p : patches) crops.insert({p.crop_y, p.crop_x});
  CHECK(crops.size() == 16);
  CHECK(crops.count({0, 0}) == 1);
  CHECK(crops.count({4500, 4500}) == 1);
  // first four patches come from the sub-image covering [0,1500)^2
  for (int i = 0; i < 4; ++i) {
    CHECK(patches[static_cast<size_t>(i)].crop_y == 0);
    CHECK(patches[static_cast<size_t>(i)].crop_x == 0);
  }

  data::RasterTile wrong = checker_tile(500, false);
  CHECK_THROWS_AS(data::tile_potsdam(wrong), ContractViolation);
}

TEST_CASE("mask resize keeps masks binary and labels consistent") {
  data::RasterTile t = checker_tile(500, true);
  std::vector<data::PatchSample> patches = data::tile_standard(t);
  for (const auto& p : patches) {
    REQUIRE(p.mask.defined());
    CHECK(p.mask.shape() == Shape{1, 256, 256});
    for (double v : p.mask.values()) CHECK((v == 0.0 || v == 1.0));
    int64_t positives = 0;
    for (double v : p.mask.values())
      if (v == 1.0) ++positives;
    double fraction = static_cast<double>(positives) / static_cast<double>(p.mask.numel());
    if (p.weak_label == 0) CHECK(fraction < 0.005);
    if (p.weak_label == 1) CHECK(fraction >= 0.005);
  }
}

TEST_CASE("filter_empty drops flat patches and keeps survivor order") {
  auto flat = [](double value) {
    data::PatchSample p;
    p.image = Tensor::full({3, 8, 8}, value);
    p.tile_id = "flat";
    return p;
  };
  auto textured = [](const char* id) {
    data::PatchSample p;
    p.image = Tensor::zeros({3, 8, 8});
    Rng rng(fnv1a64(id));
    for (double& v : p.image.values()) v = rng.uniform();
    p.tile_id = id;
    return p;
  };

  std::vector<data::PatchSample> mixed;
  mixed.push_back(textured("a"));
  mixed.push_back(flat(0.0));
  mixed.push_back(textured("b"));
  mixed.push_back(flat(0.5));
  mixed.push_back(textured("c"));

  std::vector<data::PatchSample> kept = data::filter_empty(std::move(mixed));
  REQUIRE(kept.size() == 3);
  CHECK(kept[0].tile_id == "a");
  CHECK(kept[1].tile_id == "b");
  CHECK(kept[2].tile_id == "c");
}

TEST_CASE("derive_weak_label boundary cases") {
  Tensor zeros = Tensor::zeros({1, 20, 20});
  CHECK(data::derive_weak_label(zeros) == 0);
  Tensor ones = Tensor::full({1, 20, 20}, 1.0);
  CHECK(data::derive_weak_label(ones) == 1);

  // 200x200 mask: 200 positives is exactly tau = 0.005, inclusive rule says 1
  Tensor edge = Tensor::zeros({1, 200, 200});
  for (int i = 0; i < 200; ++i) edge.values()[static_cast<size_t>(i)] = 1.0;
  CHECK(data::derive_weak_label(edge) == 1);
  edge.values()[0] = 0.0;
  CHECK(data::derive_weak_label(edge) == 0);

  Tensor bad = Tensor::full({1, 4, 4}, 0.25);
  CHECK_THROWS_AS(data::derive_weak_label(bad), ContractViolation);
}

TEST_CASE("normalize endpoints and round-trip") {
  pnm::Image img;
  img.height = 2;
  img.width = 2;
  img.channels = 3;
  img.data = {0, 128, 255, 7, 19, 200, 31, 99, 255, 1, 2, 3};
  Tensor t = data::normalize(img);
  CHECK(t.shape() == Shape{3, 2, 2});
  CHECK(t.values()[0] == 0.0);                       // channel 0, pixel 0
  CHECK(t.values()[4] == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
  CHECK(t.values()[8] == 1.0);
  pnm::Image back = data::denormalize(t);
  CHECK(back.data == img.data);
}

TEST_CASE("manifest round-trip, rejection rules, and split filtering") {
  fs::path dir = temp_dir("manifest");
  std::vector<dataset::ManifestEntry> entries = {
      {"a/x.ppm", "train", 1, "a/x.pgm"},
      {"a/y.ppm", "train", 0, ""},
      {"b/z.ppm", "val", -1, "b/z.pgm"},
  };
  std::string path = (dir / "m.csv").string();
  dataset::write_manifest(path, entries);

  dataset::Manifest m = dataset::read_manifest(path);
  CHECK(m.root == dir.string());
  REQUIRE(m.entries.size() == 3);
  CHECK(m.entries[0].path == "a/x.ppm");
  CHECK(m.entries[0].weak_label == 1);
  CHECK(m.entries[1].mask_path.empty());
  CHECK(m.entries[2].weak_label == -1);
  CHECK(dataset::split_entries(m, "train").size() == 2);
  CHECK(dataset::split_entries(m, "test").empty());

  std::vector<dataset::ManifestEntry> dup = {{"a.ppm", "train", 1, ""},
                                             {"a.ppm", "val", 0, ""}};
  CHECK_THROWS_AS(dataset::write_manifest((dir / "dup.csv").string(), dup), ContractViolation);

  {
    std::ofstream out(dir / "bad_header.csv");
    out << "path,split,label,mask\nx.ppm,train,1,\n";
  }
  CHECK_THROWS_AS(dataset::read_manifest((dir / "bad_header.csv").string()), ContractViolation);
  {
    std::ofstream out(dir / "bad_split.csv");
    out << "path,split,weak_label,mask_path\nx.ppm,holdout,1,\n";
  }
  CHECK_THROWS_AS(dataset::read_manifest((dir / "bad_split.csv").string()), ContractViolation);
  CHECK_THROWS_AS(dataset::read_manifest((dir / "absent.csv").string()), IoError);
}

TEST_CASE("stack batches same-shape samples and rejects ragged input") {
  Tensor a = Tensor::full({3, 2, 2}, 1.0);
  Tensor b = Tensor::full({3, 2, 2}, 2.0);
  Tensor batch = dataset::stack({a, b});
  CHECK(batch.shape() == Shape{2, 3, 2, 2});
  CHECK(batch.values()[0] == 1.0);
  CHECK(batch.values()[12] == 2.0);
  Tensor c = Tensor::full({3, 2, 3}, 0.0);
  CHECK_THROWS_AS(dataset::stack({a, c}), ContractViolation);
}

TEST_CASE("spec files round-trip and reject unknown or malformed keys") {
  synth::SyntheticDomainSpec spec = synth::default_target_spec();
  spec.density = 1.75;
  spec.palette_jitter = 3.25;
  spec.seed = 77;
  spec.patch_size = 64;
  synth::SyntheticDomainSpec back = synth::parse_spec(synth::serialize_spec(spec));
  CHECK(back == spec);

  CHECK_NOTHROW(synth::parse_spec("style=blobs\n# comment\n\ndensity=1.0\n"));
  CHECK_THROWS_WITH_AS(synth::parse_spec("styl=blobs\n"), doctest::Contains("styl"),
                       ContractViolation);
  CHECK_THROWS_WITH_AS(synth::parse_spec("density=fast\n"), doctest::Contains("density"),
                       ContractViolation);
  CHECK_THROWS_AS(synth::parse_spec("style=hexagons\n"), ContractViolation);
  CHECK_THROWS_AS(synth::parse_spec("background=1,2\n"), ContractViolation);
  CHECK_THROWS_AS(synth::parse_spec("density=-1\n"), ContractViolation);
}

TEST_CASE("synth_generate is deterministic and splits stay disjoint") {
  synth::SyntheticDomainSpec src = synth::default_source_spec();
  synth::SyntheticDomainSpec tgt = synth::default_target_spec();
  src.patch_size = tgt.patch_size = 64;
  src.scale_min = tgt.scale_min = 8;
  src.scale_max = tgt.scale_max = 20;
  synth::SplitCounts counts{4, 2, 2};

  fs::path d1 = temp_dir("synth1");
  fs::path d2 = temp_dir("synth2");
  auto [sm1, tm1] = synth::synth_generate(src, tgt, counts, d1.string());
  auto [sm2, tm2] = synth::synth_generate(src, tgt, counts, d2.string());

  CHECK(sm1.entries.size() == 8);
  CHECK(tm1.entries.size() == 8);
  for (const auto& rel : {"source_manifest.csv", "target_manifest.csv",
                          "source/train/patch_00000.ppm", "source/train/patch_00000.pgm",
                          "target/val/patch_00001.ppm", "target/test/patch_00001.pgm"})
    CHECK(slurp(d1 / rel) == slurp(d2 / rel));

  // reread and audit: labels match the stored masks, splits partition entries
  dataset::Manifest m = dataset::read_manifest((d1 / "source_manifest.csv").string());
  size_t split_total = 0;
  for (const char* split : {"train", "val", "test"})
    split_total += dataset::split_entries(m, split).size();
  CHECK(split_total == m.entries.size());
  for (const auto& e : m.entries) {
    Tensor mask = dataset::load_mask(m, e);
    CHECK(data::derive_weak_label(mask) == e.weak_label);
    Tensor img = dataset::load_image(m, e);
    CHECK(img.shape() == Shape{3, 64, 64});
  }

  CHECK_THROWS_AS(synth::synth_generate(src, src, counts, (d1 / "same").string()),
                  ContractViolation);
}

TEST_CASE("synth degenerate density renders no structures anywhere") {
  synth::SyntheticDomainSpec src = synth::default_source_spec();
  synth::SyntheticDomainSpec tgt = synth::default_target_spec();
  src.density = tgt.density = 0.0;
  src.patch_size = tgt.patch_size = 64;
  src.scale_min = tgt.scale_min = 8;
  src.scale_max = tgt.scale_max = 16;
  fs::path dir = temp_dir("synth_empty");
  auto [sm, tm] = synth::synth_generate(src, tgt, {3, 1, 1}, dir.string());
  for (const dataset::Manifest* m : {&sm, &tm})
    for (const auto& e : m->entries) {
      CHECK(e.weak_label == 0);
      Tensor mask = dataset::load_mask(*m, e);
      for (double v : mask.values()) CHECK(v == 0.0);
    }
}

TEST_CASE("synth domains differ by at least half the configured palette gap") {
  synth::SyntheticDomainSpec src = synth::default_source_spec();
  synth::SyntheticDomainSpec tgt = synth::default_target_spec();
  src.patch_size = tgt.patch_size = 64;
  src.density = tgt.density = 0.0;  // isolate the background palettes
  fs::path dir = temp_dir("synth_gap");
  auto [sm, tm] = synth::synth_generate(src, tgt, {6, 0, 0}, dir.string());

  auto channel_means = [](const dataset::Manifest& m) {
    std::array<double, 3> mean{0, 0, 0};
    int64_t n = 0;
    for (const auto& e : m.entries) {
      Tensor img = dataset::load_image(m, e);
      int64_t hw = img.shape()[1] * img.shape()[2];
      for (int64_t c = 0; c < 3; ++c)
        for (int64_t i = 0; i < hw; ++i)
          mean[static_cast<size_t>(c)] +=
              img.values()[static_cast<size_t>(c * hw + i)] * 255.0;
      n += hw;
    }
    for (double& v : mean) v /= static_cast<double>(n);
    return mean;
  };
  std::array<double, 3> ms = channel_means(sm), mt = channel_means(tm);
  for (size_t c = 0; c < 3; ++c) {
    double configured_gap = std::abs(src.background[c] - tgt.background[c]);
    CHECK(std::abs(ms[c] - mt[c]) >= configured_gap / 2.0);
    // sample mean floats within the per-patch palette jitter
    CHECK(std::abs(ms[c] - src.background[c]) < src.palette_jitter);
    CHECK(std::abs(mt[c] - tgt.background[c]) < tgt.palette_jitter);
  }
}

TEST_CASE("about half the target patches are structure-free") {
  synth::SyntheticDomainSpec src = synth::default_source_spec();
  synth::SyntheticDomainSpec tgt = synth::default_target_spec();
  src.patch_size = tgt.patch_size = 64;
  src.scale_min = tgt.scale_min = 8;
  src.scale_max = tgt.scale_max = 20;
  fs::path dir = temp_dir("synth_half");
  auto [sm, tm] = synth::synth_generate(src, tgt, {40, 0, 0}, dir.string());
  int64_t empty = 0;
  for (const auto& e : tm.entries)
    if (e.weak_label == 0) ++empty;
  CHECK(empty >= 10);
  CHECK(empty <= 30);
  // and the source keeps a healthy majority of occupied patches
  int64_t src_occupied = 0;
  for (const auto& e : sm.entries)
    if (e.weak_label == 1) ++src_occupied;
  CHECK(src_occupied >= 30);
}

TEST_CASE("rendered masks are the structure footprints dilated by two pixels") {
  synth::SyntheticDomainSpec spec = synth::default_source_spec();
  spec.patch_size = 48;
  spec.scale_min = 6;
  spec.scale_max = 10;
  spec.density = 2.0;
  spec.palette_jitter = 0.0;  // exact colors expose the footprint
  spec.noise = 0.0;

  Rng rng(Rng::substream(spec.seed, "footprint_probe"));
  synth::RenderedPatch patch = synth::render_patch(spec, rng, false);

  const int64_t s = spec.patch_size;
  const int64_t hw = s * s;
  std::vector<uint8_t> footprint(static_cast<size_t>(hw), 0);
  int64_t footprint_count = 0;
  const double want = std::clamp(std::lround(spec.structure[0]), 0l, 255l) / 255.0;
  for (int64_t i = 0; i < hw; ++i)
    if (patch.image.values()[static_cast<size_t>(i)] == want) {
      footprint[static_cast<size_t>(i)] = 1;
      ++footprint_count;
    }
  REQUIRE(footprint_count > 0);

  int64_t mask_count = 0;
  for (int64_t y = 0; y < s; ++y)
    for (int64_t x = 0; x < s; ++x) {
      bool in_mask = patch.mask.values()[static_cast<size_t>(y * s + x)] == 1.0;
      if (in_mask) ++mask_count;
      bool near_footprint = false;
      for (int64_t dy = -2; dy <= 2 && !near_footprint; ++dy)
        for (int64_t dx = -2; dx <= 2 && !near_footprint; ++dx) {
          int64_t yy = y + dy, xx = x + dx;
          if (yy >= 0 && yy < s && xx >= 0 && xx < s &&
              footprint[static_cast<size_t>(yy * s + xx)])
            near_footprint = true;
        }
      CHECK(in_mask == near_footprint);
    }
  CHECK(mask_count > footprint_count);  // dilation widened the footprint
}
