// Copyright 2026 The MGD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Image sequences (%06d.pgm / %06d.png), ground-truth and detection CSV.
//
//   ground truth:  frame,id,x,y,w,h
//   detections:    frame,x,y,w,h,confidence,stage
//
// No header line. Malformed input raises ParseError with file and line.

#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "mgd/appearance.hpp"
#include "mgd/error.hpp"
#include "mgd/imgproc.hpp"

namespace mgd {

struct GtObject {
  int id = 0;
  BoundingBox box;

  friend bool operator==(const GtObject&, const GtObject&) = default;
};

using GroundTruth = std::map<std::int64_t, std::vector<GtObject>>;
using DetectionSet = std::map<std::int64_t, std::vector<Detection>>;

// ---------------------------------------------------------------------------
// Images

namespace detail {

inline void skip_pgm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace detail

inline Frame read_pgm(const std::string& path, std::int64_t index = 0) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path, 0, "cannot open image");
  std::string magic;
  in >> magic;
  if (magic != "P5") throw ParseError(path, 1, "expected binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  detail::skip_pgm_space(in);
  in >> w;
  detail::skip_pgm_space(in);
  in >> h;
  detail::skip_pgm_space(in);
  in >> maxval;
  if (!in || w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) throw ParseError(path, 1, "bad PGM header");
  in.get();  // single whitespace before the raster
  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  if (in.gcount() != static_cast<std::streamsize>(px.size())) throw ParseError(path, 1, "truncated PGM raster");
  if (maxval != 255) {
    for (auto& v : px) v = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
  }
  return Frame(w, h, index, std::move(px));
}

inline void write_pgm(const std::string& path, const Frame& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("write_pgm: cannot open " + path);
  out << "P5\n" << f.width() << " " << f.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(f.pixels().data()), static_cast<std::streamsize>(f.pixels().size()));
}

/// 8-bit PNG. Colour images are converted with Rec.601 luma; alpha is dropped.
inline Frame read_png(const std::string& path, std::int64_t index = 0) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw ParseError(path, 0, "cannot open image");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path, 0, "libpng initialisation failed");
  }
  // Declared before setjmp so a longjmp never skips their destructors.
  std::vector<std::uint8_t> rgb;
  std::vector<png_bytep> rows;
  png_uint_32 w = 0, h = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ParseError(path, 0, "corrupt PNG");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  w = png_get_image_width(png, info);
  h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  rgb.resize(static_cast<std::size_t>(w) * h * 3);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = rgb.data() + static_cast<std::size_t>(y) * w * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = luma601(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  return Frame(static_cast<int>(w), static_cast<int>(h), index, std::move(px));
}

inline void write_png(const std::string& path, const Frame& f) {
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw InvalidInput("write_png: cannot open " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw InvalidInput("write_png: libpng failure for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(f.width()), static_cast<png_uint_32>(f.height()), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < f.height(); ++y) {
    png_write_row(png, const_cast<png_bytep>(f.row(y).data()));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Frame read_image(const std::filesystem::path& p, std::int64_t index) {
  return p.extension() == ".png" ? read_png(p.string(), index) : read_pgm(p.string(), index);
}

/// Files named %06d.pgm or %06d.png, sorted, with indices 0..n-1.
inline std::vector<std::filesystem::path> list_sequence(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ParseError(dir, 0, "not a directory");
  static const std::regex name_re(R"((\d{6})\.(pgm|png))");
  std::map<std::int64_t, fs::path> by_index;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    std::smatch m;
    if (!std::regex_match(name, m, name_re)) continue;
    const std::int64_t idx = std::stoll(m[1].str());
    if (!by_index.emplace(idx, entry.path()).second) {
      throw ParseError(entry.path().string(), 0, "duplicate frame index " + std::to_string(idx));
    }
  }
  std::vector<fs::path> out;
  std::int64_t expect = 0;
  for (const auto& [idx, path] : by_index) {
    if (idx != expect) {
      throw ParseError(dir, 0, "frame numbering gap: expected " + std::to_string(expect) + ", found " +
                                   std::to_string(idx));
    }
    out.push_back(path);
    ++expect;
  }
  if (out.empty()) throw ParseError(dir, 0, "no %06d.pgm or %06d.png frames");
  return out;
}

inline std::vector<Frame> load_sequence(const std::string& dir) {
  std::vector<Frame> frames;
  const auto paths = list_sequence(dir);
  frames.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) frames.push_back(read_image(paths[i], static_cast<std::int64_t>(i)));
  return frames;
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class T>
T csv_number(std::string_view s, const std::string& file, std::size_t line, const char* field) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(file, line, std::string("invalid ") + field + " '" + std::string(s) + "'");
  }
  return v;
}

/// Shortest decimal that round-trips.
inline std::string format_number(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

inline std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace detail

inline GroundTruth load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open annotations");
  GroundTruth gt;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::strip_cr(raw);
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 6) throw ParseError(path, line_no, "expected 6 fields: frame,id,x,y,w,h");
    const auto frame = detail::csv_number<std::int64_t>(f[0], path, line_no, "frame");
    GtObject o;
    o.id = detail::csv_number<int>(f[1], path, line_no, "id");
    o.box = {detail::csv_number<double>(f[2], path, line_no, "x"), detail::csv_number<double>(f[3], path, line_no, "y"),
             detail::csv_number<double>(f[4], path, line_no, "w"), detail::csv_number<double>(f[5], path, line_no, "h")};
    if (frame < 0) throw ParseError(path, line_no, "negative frame index");
    if (!(o.box.w > 0 && o.box.h > 0)) throw ParseError(path, line_no, "box extents must be positive");
    gt[frame].push_back(o);
  }
  return gt;
}

inline void save_annotations(const std::string& path, const GroundTruth& gt) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_annotations: cannot open " + path);
  using detail::format_number;
  for (const auto& [frame, objs] : gt) {
    for (const GtObject& o : objs) {
      out << frame << ',' << o.id << ',' << format_number(o.box.x) << ',' << format_number(o.box.y) << ','
          << format_number(o.box.w) << ',' << format_number(o.box.h) << '\n';
    }
  }
}

inline std::string format_detection(std::int64_t frame, const Detection& d) {
  using detail::format_number;
  return std::to_string(frame) + ',' + format_number(d.box.x) + ',' + format_number(d.box.y) + ',' +
         format_number(d.box.w) + ',' + format_number(d.box.h) + ',' + format_number(d.confidence) + ',' +
         std::string(to_string(d.stage));
}

inline void save_detections(const std::string& path, const DetectionSet& dets) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("save_detections: cannot open " + path);
  for (const auto& [frame, list] : dets) {
    for (const Detection& d : list) out << format_detection(frame, d) << '\n';
  }
}

inline DetectionSet load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open detections");
  DetectionSet dets;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = detail::strip_cr(raw);
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 7) throw ParseError(path, line_no, "expected 7 fields: frame,x,y,w,h,confidence,stage");
    const auto frame = detail::csv_number<std::int64_t>(f[0], path, line_no, "frame");
    Detection d;
    d.box = {detail::csv_number<double>(f[1], path, line_no, "x"), detail::csv_number<double>(f[2], path, line_no, "y"),
             detail::csv_number<double>(f[3], path, line_no, "w"), detail::csv_number<double>(f[4], path, line_no, "h")};
    d.confidence = detail::csv_number<double>(f[5], path, line_no, "confidence");
    const auto stage = parse_stage(f[6]);
    if (!stage) throw ParseError(path, line_no, "unknown stage '" + std::string(f[6]) + "'");
    d.stage = *stage;
    if (!(d.confidence >= 0.0 && d.confidence <= 1.0)) throw ParseError(path, line_no, "confidence outside [0,1]");
    dets[frame].push_back(d);
  }
  return dets;
}

// ---------------------------------------------------------------------------
// Annotated output

/// Writes `f` as binary PPM with each box outlined in `rgb`.
inline void write_annotated_ppm(const std::string& path, const Frame& f, const std::vector<BoundingBox>& boxes,
                                std::array<std::uint8_t, 3> rgb = {255, 0, 0}) {
  std::vector<std::uint8_t> px(static_cast<std::size_t>(f.width()) * f.height() * 3);
  for (std::size_t i = 0; i < f.pixels().size(); ++i) px[3 * i] = px[3 * i + 1] = px[3 * i + 2] = f.pixels()[i];
  auto put = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= f.width() || y >= f.height()) return;
    const std::size_t i = (static_cast<std::size_t>(y) * f.width() + x) * 3;
    px[i] = rgb[0];
    px[i + 1] = rgb[1];
    px[i + 2] = rgb[2];
  };
  for (const BoundingBox& b : boxes) {
    const int x0 = static_cast<int>(std::floor(b.x)) - 1;
    const int y0 = static_cast<int>(std::floor(b.y)) - 1;
    const int x1 = static_cast<int>(std::ceil(b.right()));
    const int y1 = static_cast<int>(std::ceil(b.bottom()));
    for (int x = x0; x <= x1; ++x) {
      put(x, y0);
      put(x, y1);
    }
    for (int y = y0; y <= y1; ++y) {
      put(x0, y);
      put(x1, y);
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("write_annotated_ppm: cannot open " + path);
  out << "P6\n" << f.width() << " " << f.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
}

}  // namespace mgd
