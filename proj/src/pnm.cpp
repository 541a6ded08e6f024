#include "wan/pnm.hpp"

#include <fstream>
#include <limits>

#include "wan/common.hpp"

namespace wan::pnm {
namespace {

// whitespace and '#'-to-end-of-line comments separate header tokens
void skip_separators(std::istream& in) {
  for (;;) {
    int c = in.peek();
    if (c == '#') {
      in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      in.get();
    } else {
      return;
    }
  }
}

int64_t read_header_int(std::istream& in, const std::string& path) {
  skip_separators(in);
  int64_t v = -1;
  in >> v;
  check(in.good() && v >= 0, "malformed header integer in " + path);
  return v;
}

}  // namespace

Image read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);

  char m0 = 0, m1 = 0;
  in.get(m0).get(m1);
  check(in.good() && m0 == 'P' && (m1 == '5' || m1 == '6'),
        "not a binary P5/P6 file: " + path);

  Image img;
  img.channels = m1 == '6' ? 3 : 1;
  img.width = read_header_int(in, path);
  img.height = read_header_int(in, path);
  int64_t maxval = read_header_int(in, path);
  check(img.width > 0 && img.height > 0, "empty raster in " + path);
  check(maxval == 255, "unsupported maxval " + std::to_string(maxval) + " in " + path);
  in.get();  // single separator byte before the raster

  img.data.resize(static_cast<size_t>(img.height * img.width * img.channels));
  in.read(reinterpret_cast<char*>(img.data.data()),
          static_cast<std::streamsize>(img.data.size()));
  check(in.gcount() == static_cast<std::streamsize>(img.data.size()),
        "truncated raster in " + path);
  return img;
}

void write_pnm(const std::string& path, const Image& img) {
  check(img.channels == 1 || img.channels == 3, "channels must be 1 or 3");
  check(img.height > 0 && img.width > 0, "empty raster");
  check(img.data.size() == static_cast<size_t>(img.height * img.width * img.channels),
        "raster size does not match extents");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << (img.channels == 3 ? "P6\n" : "P5\n")
      << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  if (!out) throw IoError("short write to " + path);
}

}  // namespace wan::pnm
