#include "wan/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "wan/pnm.hpp"

namespace wan::synth {
namespace {

struct Canvas {
  int64_t side;
  std::vector<double> rgb;       // 3 planes, 8-bit scale
  std::vector<uint8_t> footprint;

  explicit Canvas(int64_t s)
      : side(s),
        rgb(static_cast<size_t>(3 * s * s)),
        footprint(static_cast<size_t>(s * s), 0) {}

  void paint(int64_t y, int64_t x, const std::array<double, 3>& color) {
    if (y < 0 || y >= side || x < 0 || x >= side) return;
    for (int64_t c = 0; c < 3; ++c)
      rgb[static_cast<size_t>((c * side + y) * side + x)] = color[c];
    footprint[static_cast<size_t>(y * side + x)] = 1;
  }
};

// per-channel tint, like the background jitter: structure hue varies across
// draws, so only the structure/background contrast is a stable cue
std::array<double, 3> tinted_structure(const SyntheticDomainSpec& spec, Rng& rng) {
  std::array<double, 3> color;
  for (size_t c = 0; c < 3; ++c)
    color[c] = spec.structure[c] + rng.uniform(-spec.palette_jitter, spec.palette_jitter);
  return color;
}

void draw_rectangle(Canvas& cv, const SyntheticDomainSpec& spec, Rng& rng) {
  const int64_t range = spec.scale_max - spec.scale_min + 1;
  const int64_t h = spec.scale_min + rng.uniform_int(range);
  const int64_t w = spec.scale_min + rng.uniform_int(range);
  const int64_t y0 = rng.uniform_int(cv.side - h + 1);
  const int64_t x0 = rng.uniform_int(cv.side - w + 1);
  const std::array<double, 3> color = tinted_structure(spec, rng);
  for (int64_t y = y0; y < y0 + h; ++y)
    for (int64_t x = x0; x < x0 + w; ++x) cv.paint(y, x, color);
}

void draw_blob(Canvas& cv, const SyntheticDomainSpec& spec, Rng& rng) {
  const int64_t range = spec.scale_max - spec.scale_min + 1;
  const double scale = static_cast<double>(spec.scale_min + rng.uniform_int(range));
  const double cy = rng.uniform(0.0, static_cast<double>(cv.side));
  const double cx = rng.uniform(0.0, static_cast<double>(cv.side));
  const std::array<double, 3> color = tinted_structure(spec, rng);
  const int64_t discs = 3 + rng.uniform_int(4);
  for (int64_t d = 0; d < discs; ++d) {
    const double oy = cy + rng.uniform(-scale / 2.0, scale / 2.0);
    const double ox = cx + rng.uniform(-scale / 2.0, scale / 2.0);
    const double r = rng.uniform(scale / 6.0, scale / 3.0);
    const int64_t y_lo = static_cast<int64_t>(std::floor(oy - r));
    const int64_t y_hi = static_cast<int64_t>(std::ceil(oy + r));
    const int64_t x_lo = static_cast<int64_t>(std::floor(ox - r));
    const int64_t x_hi = static_cast<int64_t>(std::ceil(ox + r));
    for (int64_t y = y_lo; y <= y_hi; ++y)
      for (int64_t x = x_lo; x <= x_hi; ++x) {
        const double dy = (y + 0.5) - oy, dx = (x + 0.5) - ox;
        if (dy * dy + dx * dx <= r * r) cv.paint(y, x, color);
      }
  }
}

// 2 px Chebyshev dilation: built-up extends into its immediate surroundings
std::vector<uint8_t> dilate2(const std::vector<uint8_t>& in, int64_t side) {
  std::vector<uint8_t> out(in.size(), 0);
  for (int64_t y = 0; y < side; ++y)
    for (int64_t x = 0; x < side; ++x) {
      if (!in[static_cast<size_t>(y * side + x)]) continue;
      const int64_t y_lo = std::max<int64_t>(0, y - 2), y_hi = std::min(side - 1, y + 2);
      const int64_t x_lo = std::max<int64_t>(0, x - 2), x_hi = std::min(side - 1, x + 2);
      for (int64_t yy = y_lo; yy <= y_hi; ++yy)
        for (int64_t xx = x_lo; xx <= x_hi; ++xx)
          out[static_cast<size_t>(yy * side + xx)] = 1;
    }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::array<double, 3> parse_rgb(const std::string& key, const std::string& value) {
  std::array<double, 3> rgb{};
  size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    size_t comma = value.find(',', pos);
    bool last = i == 2;
    check(last ? comma == std::string::npos : comma != std::string::npos,
          "key `" + key + "` needs r,g,b");
    std::string part = value.substr(pos, last ? std::string::npos : comma - pos);
    try {
      rgb[static_cast<size_t>(i)] = std::stod(part);
    } catch (const std::exception&) {
      throw ContractViolation("key `" + key + "` has a non-numeric component `" + part + "`");
    }
    pos = comma + 1;
  }
  return rgb;
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    double v = std::stod(value, &used);
    check(used == value.size(), "key `" + key + "` has trailing junk");
    return v;
  } catch (const ContractViolation&) {
    throw;
  } catch (const std::exception&) {
    throw ContractViolation("key `" + key + "` must be numeric, got `" + value + "`");
  }
}

int64_t parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    int64_t v = std::stoll(value, &used);
    check(used == value.size(), "key `" + key + "` has trailing junk");
    return v;
  } catch (const ContractViolation&) {
    throw;
  } catch (const std::exception&) {
    throw ContractViolation("key `" + key + "` must be an integer, got `" + value + "`");
  }
}

}  // namespace

SyntheticDomainSpec default_source_spec() {
  return SyntheticDomainSpec{};  // bright regular rectangles on green-gray ground
}

SyntheticDomainSpec default_target_spec() {
  SyntheticDomainSpec s;
  s.style = Style::Blobs;
  s.background = {172.0, 156.0, 128.0};  // sandy terrain
  s.structure = {216.0, 196.0, 158.0};   // low-contrast rooftops
  s.palette_jitter = 8.0;
  s.density = 2.0;
  s.scale_min = 20;
  s.scale_max = 56;
  s.noise = 6.0;
  s.seed = 2;
  return s;
}

SyntheticDomainSpec parse_spec(const std::string& text) {
  SyntheticDomainSpec spec;
  size_t start = 0;
  while (start <= text.size()) {
    size_t end = text.find('\n', start);
    std::string line =
        text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    start = end == std::string::npos ? text.size() + 1 : end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    size_t first = line.find_first_not_of(' ');
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first);

    size_t eq = line.find('=');
    check(eq != std::string::npos, "spec line is not key=value: `" + line + "`");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);

    if (key == "style") {
      if (value == "rectangles")
        spec.style = Style::Rectangles;
      else if (value == "blobs")
        spec.style = Style::Blobs;
      else
        throw ContractViolation("key `style` must be rectangles or blobs, got `" + value + "`");
    } else if (key == "background") {
      spec.background = parse_rgb(key, value);
    } else if (key == "structure") {
      spec.structure = parse_rgb(key, value);
    } else if (key == "jitter") {
      spec.palette_jitter = parse_double(key, value);
    } else if (key == "density") {
      spec.density = parse_double(key, value);
    } else if (key == "scale_min") {
      spec.scale_min = parse_int(key, value);
    } else if (key == "scale_max") {
      spec.scale_max = parse_int(key, value);
    } else if (key == "noise") {
      spec.noise = parse_double(key, value);
    } else if (key == "seed") {
      spec.seed = static_cast<uint64_t>(parse_int(key, value));
    } else if (key == "patch_size") {
      spec.patch_size = parse_int(key, value);
    } else {
      throw ContractViolation("unknown spec key `" + key + "`");
    }
  }
  validate_spec(spec);
  return spec;
}

SyntheticDomainSpec parse_spec_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_spec(text);
}

std::string serialize_spec(const SyntheticDomainSpec& spec) {
  std::string out;
  out += "style=";
  out += spec.style == Style::Rectangles ? "rectangles" : "blobs";
  out += '\n';
  auto rgb = [&](const char* key, const std::array<double, 3>& v) {
    out += key;
    out += '=';
    out += format_double(v[0]) + "," + format_double(v[1]) + "," + format_double(v[2]);
    out += '\n';
  };
  rgb("background", spec.background);
  rgb("structure", spec.structure);
  out += "jitter=" + format_double(spec.palette_jitter) + "\n";
  out += "density=" + format_double(spec.density) + "\n";
  out += "scale_min=" + std::to_string(spec.scale_min) + "\n";
  out += "scale_max=" + std::to_string(spec.scale_max) + "\n";
  out += "noise=" + format_double(spec.noise) + "\n";
  out += "seed=" + std::to_string(spec.seed) + "\n";
  out += "patch_size=" + std::to_string(spec.patch_size) + "\n";
  return out;
}

void validate_spec(const SyntheticDomainSpec& spec) {
  check(spec.density >= 0.0, "density must be non-negative");
  for (double v : spec.background) check(v >= 0.0 && v <= 255.0, "background outside 8-bit range");
  for (double v : spec.structure) check(v >= 0.0 && v <= 255.0, "structure outside 8-bit range");
  check(spec.palette_jitter >= 0.0, "jitter must be non-negative");
  check(spec.noise >= 0.0, "noise must be non-negative");
  check(spec.scale_min >= 1 && spec.scale_min <= spec.scale_max,
        "need 1 <= scale_min <= scale_max");
  check(spec.patch_size >= spec.scale_max, "patch_size must reach scale_max");
}

RenderedPatch render_patch(const SyntheticDomainSpec& spec, Rng& rng, bool force_empty_coin) {
  const int64_t side = spec.patch_size;
  Canvas cv(side);

  // draw order is part of the format: coin, palette, structures, pixel noise
  const bool forced_empty = force_empty_coin && rng.uniform() < 0.5;

  std::array<double, 3> bg;
  for (int c = 0; c < 3; ++c)
    bg[static_cast<size_t>(c)] =
        spec.background[static_cast<size_t>(c)] +
        rng.uniform(-spec.palette_jitter, spec.palette_jitter);
  for (int64_t c = 0; c < 3; ++c)
    std::fill_n(cv.rgb.begin() + static_cast<ptrdiff_t>(c * side * side), side * side,
                bg[static_cast<size_t>(c)]);

  const int64_t count = forced_empty ? 0 : rng.poisson(spec.density);
  for (int64_t i = 0; i < count; ++i) {
    if (spec.style == Style::Rectangles)
      draw_rectangle(cv, spec, rng);
    else
      draw_blob(cv, spec, rng);
  }

  RenderedPatch out;
  out.image = Tensor::zeros({3, side, side});
  for (size_t i = 0; i < cv.rgb.size(); ++i) {
    const double v = cv.rgb[i] + rng.uniform(-spec.noise, spec.noise);
    // quantize now so in-memory values equal a file round-trip exactly
    out.image.values()[i] = std::clamp(std::lround(v), 0l, 255l) / 255.0;
  }

  std::vector<uint8_t> mask = dilate2(cv.footprint, side);
  out.mask = Tensor::zeros({1, side, side});
  for (size_t i = 0; i < mask.size(); ++i) out.mask.values()[i] = mask[i] ? 1.0 : 0.0;
  return out;
}

std::pair<dataset::Manifest, dataset::Manifest> synth_generate(
    const SyntheticDomainSpec& spec_source, const SyntheticDomainSpec& spec_target,
    const SplitCounts& counts, const std::string& out_dir) {
  validate_spec(spec_source);
  validate_spec(spec_target);
  check(!(spec_source == spec_target), "source and target specs must differ somewhere");
  check(counts.train >= 0 && counts.val >= 0 && counts.test >= 0, "counts must be non-negative");

  namespace fs = std::filesystem;
  std::pair<dataset::Manifest, dataset::Manifest> result;

  struct Domain {
    const char* tag;
    const SyntheticDomainSpec* spec;
    bool force_empty;
    dataset::Manifest* manifest;
  };
  const Domain domains[] = {{"source", &spec_source, false, &result.first},
                            {"target", &spec_target, true, &result.second}};
  const std::pair<const char*, int64_t> splits[] = {
      {"train", counts.train}, {"val", counts.val}, {"test", counts.test}};

  for (const Domain& d : domains) {
    d.manifest->root = out_dir;
    std::vector<dataset::ManifestEntry> entries;
    for (const auto& [split, n] : splits) {
      fs::path dir = fs::path(out_dir) / d.tag / split;
      std::error_code ec;
      fs::create_directories(dir, ec);
      if (ec) throw IoError("cannot create " + dir.string());
      for (int64_t i = 0; i < n; ++i) {
        Rng rng(Rng::substream(d.spec->seed, std::string(d.tag) + "/" + split + "/" +
                                                 std::to_string(i)));
        RenderedPatch patch = render_patch(*d.spec, rng, d.force_empty);
        char name[32];
        std::snprintf(name, sizeof name, "patch_%05lld", static_cast<long long>(i));
        std::string rel_img = std::string(d.tag) + "/" + split + "/" + name + ".ppm";
        std::string rel_mask = std::string(d.tag) + "/" + split + "/" + name + ".pgm";
        pnm::write_pnm((fs::path(out_dir) / rel_img).string(), data::denormalize(patch.image));
        pnm::write_pnm((fs::path(out_dir) / rel_mask).string(), data::mask_to_pnm(patch.mask));
        entries.push_back({rel_img, split, data::derive_weak_label(patch.mask), rel_mask});
      }
    }
    d.manifest->entries = entries;
    dataset::write_manifest(
        (fs::path(out_dir) / (std::string(d.tag) + "_manifest.csv")).string(), entries);
  }
  return result;
}

}  // namespace wan::synth
