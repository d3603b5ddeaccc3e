#include "evrecon/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "evrecon/errors.hpp"

namespace evrecon {

Image::Image(int width, int height, double fill)
    : width_(width), height_(height),
      data_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
  if (width < 0 || height < 0) throw ShapeError("negative image size");
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  const auto v = image.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double c = std::clamp(v[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(c * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  int c;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {}
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw DataError(path.string() + ": not a PGM file");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token(in));
    h = std::stoi(next_token(in));
    maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": bad PGM header");
  }
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) {
    throw DataError(path.string() + ": bad PGM header");
  }
  Image img(w, h);
  auto v = img.values();
  const double scale = 1.0 / maxval;
  if (magic == "P2") {
    for (auto& px : v) {
      const std::string tok = next_token(in);
      if (tok.empty()) throw DataError(path.string() + ": truncated PGM");
      px = std::stoi(tok) * scale;
    }
    return img;
  }
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> bytes(v.size() * bpp);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw DataError(path.string() + ": truncated PGM");
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    const unsigned raw = bpp == 1 ? bytes[i] : (unsigned{bytes[2 * i]} << 8) | bytes[2 * i + 1];
    v[i] = raw * scale;
  }
  return img;
}

void write_frame_sequence(const std::filesystem::path& dir, std::span<const Frame> frames) {
  std::filesystem::create_directories(dir / "frames");
  std::ofstream ts(dir / "timestamps.txt");
  if (!ts) throw DataError("cannot write " + (dir / "timestamps.txt").string());
  char name[32];
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::snprintf(name, sizeof name, "frame_%06zu.pgm", i);
    write_pgm(dir / "frames" / name, frames[i].image);
    ts << frames[i].t << '\n';
  }
}

std::vector<Frame> read_frame_sequence(const std::filesystem::path& dir) {
  std::ifstream ts(dir / "timestamps.txt");
  if (!ts) throw DataError("missing " + (dir / "timestamps.txt").string());
  std::vector<Frame> frames;
  std::string line;
  char name[32];
  while (std::getline(ts, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Frame f;
    try {
      f.t = std::stoll(line);
    } catch (const std::exception&) {
      throw DataError("bad timestamp '" + line + "' in " + (dir / "timestamps.txt").string());
    }
    std::snprintf(name, sizeof name, "frame_%06zu.pgm", frames.size());
    f.image = read_pgm(dir / "frames" / name);
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace evrecon
