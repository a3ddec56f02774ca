/*
Copyright 2026 The fcdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

#include "fcdiff/grid_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fcdiff/error.hpp"

namespace fcdiff {

namespace {

constexpr char kMagic[4] = {'F', 'D', 'G', '1'};
constexpr std::size_t kHeaderSize = 16;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t off, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[off + i])) << (8 * i);
  return v;
}

std::uint8_t to_byte(double v) {
  const double c = std::clamp(v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::lround(c * 255.0));
}

}  // namespace

std::string encode_grid(const Grid& g) {
  if (g.empty()) throw ValidationError("cannot encode an empty grid");
  std::string out(kMagic, 4);
  out.reserve(kHeaderSize + 8 * g.size());
  put_u32(out, static_cast<std::uint32_t>(g.height()));
  put_u32(out, static_cast<std::uint32_t>(g.width()));
  put_u32(out, static_cast<std::uint32_t>(g.channels()));
  for (double v : g.values()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  return out;
}

Grid decode_grid(const std::string& bytes) {
  if (bytes.size() < kHeaderSize || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError("not an FDG1 grid (bad magic or truncated header)");
  const Shape shape{get_le(bytes, 4, 4), get_le(bytes, 8, 4), get_le(bytes, 12, 4)};
  require_valid_shape(shape);
  if (bytes.size() != kHeaderSize + 8 * shape.size()) {
    std::ostringstream os;
    os << "FDG1 payload size " << bytes.size() - kHeaderSize << " does not match shape ("
       << shape.height << "," << shape.width << "," << shape.channels << ")";
    throw IoError(os.str());
  }
  std::vector<double> values(shape.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = std::bit_cast<double>(get_le(bytes, kHeaderSize + 8 * i, 8));
  return Grid(shape, std::move(values));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
}

void write_grid(const std::filesystem::path& path, const Grid& g) {
  write_file(path, encode_grid(g));
}

Grid read_grid(const std::filesystem::path& path) { return decode_grid(read_file(path)); }

std::string encode_pnm(const Grid& g) {
  const bool color = g.channels() == 3;
  std::ostringstream header;
  header << (color ? "P6" : "P5") << "\n" << g.width() << " " << g.height() << "\n255\n";
  std::string out = header.str();
  for (std::size_t y = 0; y < g.height(); ++y) {
    for (std::size_t x = 0; x < g.width(); ++x) {
      if (color) {
        for (std::size_t c = 0; c < 3; ++c) out.push_back(static_cast<char>(to_byte(g.at(y, x, c))));
      } else {
        out.push_back(static_cast<char>(to_byte(g.at(y, x, 0))));
      }
    }
  }
  return out;
}

void write_pnm(const std::filesystem::path& path, const Grid& g) {
  write_file(path, encode_pnm(g));
}

Grid read_pnm(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto next_token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw IoError("truncated PNM header in " + path.string());
    return bytes.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic != "P5" && magic != "P6") throw IoError("unsupported PNM type " + magic);
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(next_token());
    height = std::stoul(next_token());
    maxval = std::stoul(next_token());
  } catch (const std::logic_error&) {
    throw IoError("malformed PNM header in " + path.string());
  }
  if (maxval == 0 || maxval > 255) throw IoError("only 8-bit PNM is supported");
  ++pos;  // single whitespace byte before raster
  const std::size_t channels = magic == "P6" ? 3 : 1;
  const Shape shape{height, width, channels};
  require_valid_shape(shape);
  if (bytes.size() < pos + shape.size()) throw IoError("truncated PNM raster in " + path.string());
  std::vector<double> values(shape.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = static_cast<unsigned char>(bytes[pos + i]) / static_cast<double>(maxval);
  return Grid(shape, std::move(values));
}

Grid load_image(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".pgm" || ext == ".ppm") return read_pnm(path);
  return read_grid(path);
}

}  // namespace fcdiff
