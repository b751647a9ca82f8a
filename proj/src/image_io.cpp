#include "gnnseg/image_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>

#include "gnnseg/errors.hpp"
#include "gnnseg/util.hpp"

namespace gnnseg {

namespace {

constexpr unsigned char kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_u32be(std::string& out, std::uint32_t v) {
  out.push_back(char(v >> 24));
  out.push_back(char(v >> 16));
  out.push_back(char(v >> 8));
  out.push_back(char(v));
}

std::uint32_t get_u32be(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void append_chunk(std::string& out, const char type[5], const std::string& data) {
  put_u32be(out, static_cast<std::uint32_t>(data.size()));
  std::string body = std::string(type, 4) + data;
  out += body;
  std::uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(body.data()),
                            static_cast<uInt>(body.size()));
  put_u32be(out, crc);
}

std::string zlib_compress(const std::string& raw) {
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::string out(bound, '\0');
  if (compress2(reinterpret_cast<Bytef*>(out.data()), &bound,
                reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), 6) != Z_OK)
    throw IoError("zlib compression failed");
  out.resize(bound);
  return out;
}

std::string zlib_decompress(const std::string& compressed, std::size_t expected) {
  std::string out(expected, '\0');
  uLongf len = static_cast<uLongf>(expected);
  int rc = uncompress(reinterpret_cast<Bytef*>(out.data()), &len,
                      reinterpret_cast<const Bytef*>(compressed.data()),
                      static_cast<uLong>(compressed.size()));
  if (rc != Z_OK || len != expected) throw IoError("corrupt PNG: inflate failed");
  return out;
}

int paeth(int a, int b, int c) {
  int p = a + b - c;
  int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

// Reverses PNG scanline filtering in place. bpp = bytes per pixel.
void defilter(std::vector<unsigned char>& data, int width, int height, int bpp) {
  const int stride = width * bpp;
  std::vector<unsigned char> prev(stride, 0);
  for (int y = 0; y < height; ++y) {
    unsigned char* row = data.data() + static_cast<std::size_t>(y) * (stride + 1);
    const int filter = row[0];
    unsigned char* cur = row + 1;
    for (int i = 0; i < stride; ++i) {
      const int a = i >= bpp ? cur[i - bpp] : 0;
      const int b = prev[i];
      const int c = i >= bpp ? prev[i - bpp] : 0;
      int x = cur[i];
      switch (filter) {
        case 0: break;
        case 1: x = (x + a) & 0xff; break;
        case 2: x = (x + b) & 0xff; break;
        case 3: x = (x + (a + b) / 2) & 0xff; break;
        case 4: x = (x + paeth(a, b, c)) & 0xff; break;
        default: throw IoError("corrupt PNG: unknown filter type");
      }
      cur[i] = static_cast<unsigned char>(x);
    }
    std::memcpy(prev.data(), cur, stride);
  }
}

std::string encode_png(int width, int height, int bit_depth, int color_type,
                       const std::string& samples) {
  std::string png(reinterpret_cast<const char*>(kPngSignature), 8);
  std::string ihdr;
  put_u32be(ihdr, static_cast<std::uint32_t>(width));
  put_u32be(ihdr, static_cast<std::uint32_t>(height));
  ihdr.push_back(char(bit_depth));
  ihdr.push_back(char(color_type));
  ihdr.push_back(0);  // compression
  ihdr.push_back(0);  // filter method
  ihdr.push_back(0);  // no interlace
  append_chunk(png, "IHDR", ihdr);

  const int channels = color_type == 2 ? 3 : 1;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * (bit_depth / 8);
  std::string raw;
  raw.reserve((stride + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);  // filter: none
    raw.append(samples, static_cast<std::size_t>(y) * stride, stride);
  }
  append_chunk(png, "IDAT", zlib_compress(raw));
  append_chunk(png, "IEND", "");
  return png;
}

GrayImage decode_gray_png(const std::string& bytes, const std::string& path) {
  if (bytes.size() < 8 + 12) throw IoError("corrupt PNG: truncated file: " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::size_t pos = 8;
  GrayImage img;
  int color_type = -1;
  std::string idat;
  bool have_ihdr = false, have_iend = false;
  while (pos + 12 <= bytes.size() && !have_iend) {
    std::uint32_t len = get_u32be(p + pos);
    if (pos + 12 + len > bytes.size()) throw IoError("corrupt PNG: truncated chunk: " + path);
    std::string type(bytes, pos + 4, 4);
    std::uint32_t stored_crc = get_u32be(p + pos + 8 + len);
    std::uint32_t crc = crc32(0L, p + pos + 4, len + 4);
    if (crc != stored_crc) throw IoError("corrupt PNG: bad chunk CRC: " + path);
    if (type == "IHDR") {
      if (len != 13) throw IoError("corrupt PNG: bad IHDR: " + path);
      const unsigned char* d = p + pos + 8;
      img.width = static_cast<int>(get_u32be(d));
      img.height = static_cast<int>(get_u32be(d + 4));
      img.bit_depth = d[8];
      color_type = d[9];
      if (d[12] != 0) throw IoError("unsupported PNG: interlaced: " + path);
      have_ihdr = true;
    } else if (type == "IDAT") {
      idat.append(bytes, pos + 8, len);
    } else if (type == "IEND") {
      have_iend = true;
    }
    pos += 12 + len;
  }
  if (!have_ihdr || !have_iend) throw IoError("corrupt PNG: missing chunks: " + path);
  if (color_type != 0)
    throw IoError("unsupported PNG: expected grayscale (color type 0): " + path);
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw IoError("unsupported PNG: bit depth must be 8 or 16: " + path);
  if (img.width <= 0 || img.height <= 0) throw IoError("corrupt PNG: empty image: " + path);

  const int bpp = img.bit_depth / 8;
  const std::size_t raw_size =
      static_cast<std::size_t>(img.height) * (static_cast<std::size_t>(img.width) * bpp + 1);
  std::string raw = zlib_decompress(idat, raw_size);
  std::vector<unsigned char> buf(raw.begin(), raw.end());
  defilter(buf, img.width, img.height, bpp);

  img.maxval = img.bit_depth == 8 ? 255 : 65535;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (int y = 0; y < img.height; ++y) {
    const unsigned char* row =
        buf.data() + static_cast<std::size_t>(y) * (static_cast<std::size_t>(img.width) * bpp + 1) + 1;
    for (int x = 0; x < img.width; ++x) {
      std::uint16_t v = bpp == 1 ? row[x]
                                 : static_cast<std::uint16_t>((row[2 * x] << 8) | row[2 * x + 1]);
      img.pixels[static_cast<std::size_t>(y) * img.width + x] = v;
    }
  }
  return img;
}

GrayImage decode_pgm(const std::string& bytes, const std::string& path) {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return bytes.substr(start, pos - start);
  };
  if (next_token() != "P5") throw IoError("unsupported format (expected P5 PGM): " + path);
  GrayImage img;
  try {
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    img.maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("corrupt PGM header: " + path);
  }
  if (img.width <= 0 || img.height <= 0) throw IoError("corrupt PGM: bad dimensions: " + path);
  if (img.maxval <= 0 || img.maxval > 65535) throw IoError("corrupt PGM: bad maxval: " + path);
  img.bit_depth = img.maxval < 256 ? 8 : 16;
  ++pos;  // single whitespace after maxval
  const int bpp = img.bit_depth / 8;
  const std::size_t need = static_cast<std::size_t>(img.width) * img.height * bpp;
  if (bytes.size() - pos < need) throw IoError("corrupt PGM: truncated data: " + path);
  const auto* d = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height);
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = bpp == 1 ? d[i] : static_cast<std::uint16_t>((d[2 * i] << 8) | d[2 * i + 1]);
  return img;
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                    "\n" + std::to_string(img.maxval) + "\n";
  const int bpp = img.bit_depth / 8;
  out.reserve(out.size() + img.pixels.size() * bpp);
  for (std::uint16_t v : img.pixels) {
    if (bpp == 2) out.push_back(char(v >> 8));
    out.push_back(char(v & 0xff));
  }
  return out;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::string gray_samples_bigendian(const GrayImage& img) {
  std::string samples;
  const int bpp = img.bit_depth / 8;
  samples.reserve(img.pixels.size() * bpp);
  for (std::uint16_t v : img.pixels) {
    if (bpp == 2) samples.push_back(char(v >> 8));
    samples.push_back(char(v & 0xff));
  }
  return samples;
}

}  // namespace

GrayImage read_gray(const std::string& path) {
  std::string bytes = read_file_bytes(path);
  if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0)
    return decode_gray_png(bytes, path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') return decode_pgm(bytes, path);
  throw IoError("unsupported format (expected PNG or P5 PGM): " + path);
}

void write_gray(const GrayImage& img, const std::string& path) {
  if (img.bit_depth != 8 && img.bit_depth != 16)
    throw ValidationError("bit depth must be 8 or 16");
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height)
    throw ValidationError("pixel buffer size does not match dimensions");
  if (ends_with(path, ".png")) {
    write_file_atomic(path, encode_png(img.width, img.height, img.bit_depth, 0,
                                       gray_samples_bigendian(img)));
  } else if (ends_with(path, ".pgm")) {
    write_file_atomic(path, encode_pgm(img));
  } else {
    throw ValidationError("unsupported image extension (use .png or .pgm): " + path);
  }
}

Slice read_slice(const std::vector<std::string>& modality_paths) {
  if (modality_paths.empty()) throw ValidationError("need at least one modality file");
  Slice slice;
  for (std::size_t m = 0; m < modality_paths.size(); ++m) {
    GrayImage img = read_gray(modality_paths[m]);
    if (m == 0) {
      slice.width = img.width;
      slice.height = img.height;
    } else if (img.width != slice.width || img.height != slice.height) {
      throw ValidationError("dimension mismatch between modality files: " + modality_paths[m]);
    }
    std::vector<double> values(img.pixels.size());
    const double inv = 1.0 / img.maxval;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) values[i] = img.pixels[i] * inv;
    slice.data.push_back(std::move(values));
    slice.modality_names.push_back("m" + std::to_string(m));
  }
  slice.validate();
  return slice;
}

void write_slice(const Slice& slice, const std::vector<std::string>& modality_paths,
                 int bit_depth) {
  slice.validate();
  if (static_cast<int>(modality_paths.size()) != slice.modalities())
    throw ValidationError("one output path per modality required");
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("bit depth must be 8 or 16");
  const int maxval = (1 << bit_depth) - 1;
  for (int m = 0; m < slice.modalities(); ++m) {
    GrayImage img;
    img.width = slice.width;
    img.height = slice.height;
    img.bit_depth = bit_depth;
    img.maxval = maxval;
    img.pixels.resize(slice.pixel_count());
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
      double v = std::clamp(slice.data[m][i], 0.0, 1.0);
      img.pixels[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
    }
    write_gray(img, modality_paths[m]);
  }
}

LabelMask read_mask(const std::string& path) {
  GrayImage img = read_gray(path);
  LabelMask mask;
  mask.width = img.width;
  mask.height = img.height;
  mask.labels.resize(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    if (img.pixels[i] >= kNumClasses)
      throw ValidationError("mask pixel out of class range in " + path);
    mask.labels[i] = static_cast<std::uint8_t>(img.pixels[i]);
  }
  mask.validate();
  return mask;
}

void write_mask(const LabelMask& mask, const std::string& path) {
  mask.validate();
  GrayImage img;
  img.width = mask.width;
  img.height = mask.height;
  img.bit_depth = 8;
  img.maxval = 255;
  img.pixels.assign(mask.labels.begin(), mask.labels.end());
  write_gray(img, path);
}

void write_rgb_png(int width, int height,
                   const std::vector<std::array<std::uint8_t, 3>>& pixels,
                   const std::string& path) {
  if (pixels.size() != static_cast<std::size_t>(width) * height)
    throw ValidationError("pixel buffer size does not match dimensions");
  std::string samples;
  samples.reserve(pixels.size() * 3);
  for (const auto& px : pixels)
    for (std::uint8_t c : px) samples.push_back(char(c));
  write_file_atomic(path, encode_png(width, height, 8, 2, samples));
}

}  // namespace gnnseg
