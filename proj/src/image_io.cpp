#include "spectex/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "spectex/errors.hpp"

namespace spectex {

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::uint16_t quantize16(double v) {
  return static_cast<std::uint16_t>(
      std::lround(std::clamp(v, 0.0, 1.0) * 65535.0));
}

std::uint8_t quantize8(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// ---------------------------------------------------------------- PNM

class PnmReader {
 public:
  explicit PnmReader(std::span<const std::uint8_t> data) : data_(data) {}

  ColorImage read() {
    if (data_.size() < 2 || data_[0] != 'P') throw FormatError("not a PNM file");
    const char kind = static_cast<char>(data_[1]);
    pos_ = 2;
    const bool ascii = kind == '2' || kind == '3';
    const bool color = kind == '3' || kind == '6';
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') {
      throw FormatError(std::string("unsupported PNM variant P") + kind);
    }
    const long width = header_int();
    const long height = header_int();
    const long maxval = header_int();
    if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
      throw FormatError("invalid PNM header");
    }
    // Exactly one whitespace byte separates header and raster.
    ++pos_;
    const int w = static_cast<int>(width);
    const int h = static_cast<int>(height);
    const int channels = color ? 3 : 1;
    const double scale = 1.0 / static_cast<double>(maxval);
    std::vector<ScalarField> planes(channels, ScalarField(w, h));
    const std::size_t n = static_cast<std::size_t>(w) * h;
    for (std::size_t i = 0; i < n; ++i) {
      for (int c = 0; c < channels; ++c) {
        long v = 0;
        if (ascii) {
          v = header_int();
        } else if (maxval < 256) {
          v = byte();
        } else {
          v = static_cast<long>(byte()) << 8;
          v |= byte();
        }
        if (v > maxval) throw FormatError("PNM sample exceeds maxval");
        planes[c][i] = static_cast<double>(v) * scale;
      }
    }
    if (!color) return ColorImage::from_gray(std::move(planes[0]));
    return ColorImage::from_rgb(planes[0], planes[1], planes[2]);
  }

 private:
  std::uint8_t byte() {
    if (pos_ >= data_.size()) throw FormatError("truncated PNM raster");
    return data_[pos_++];
  }

  long header_int() {
    for (;;) {
      if (pos_ >= data_.size()) throw FormatError("truncated PNM header");
      const char c = static_cast<char>(data_[pos_]);
      if (c == '#') {
        while (pos_ < data_.size() && data_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
    long v = 0;
    bool any = false;
    while (pos_ < data_.size() &&
           std::isdigit(static_cast<unsigned char>(data_[pos_]))) {
      v = v * 10 + (data_[pos_] - '0');
      ++pos_;
      any = true;
      if (v > 1'000'000'000) throw FormatError("PNM header value too large");
    }
    if (!any) throw FormatError("malformed PNM header");
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

Bytes encode_pnm16(const std::vector<const ScalarField*>& planes) {
  const int w = planes[0]->width();
  const int h = planes[0]->height();
  const std::string header = std::string(planes.size() == 3 ? "P6" : "P5") +
                             "\n" + std::to_string(w) + " " +
                             std::to_string(h) + "\n65535\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + planes[0]->size() * planes.size() * 2);
  for (std::size_t i = 0; i < planes[0]->size(); ++i) {
    for (const ScalarField* p : planes) {
      const std::uint16_t q = quantize16((*p)[i]);
      out.push_back(static_cast<std::uint8_t>(q >> 8));
      out.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
  }
  return out;
}

// ---------------------------------------------------------------- PNG

struct PngReadSource {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void png_read_callback(png_structp png, png_bytep out, png_size_t count) {
  auto* src = static_cast<PngReadSource*>(png_get_io_ptr(png));
  if (src->pos + count > src->data.size()) png_error(png, "truncated PNG");
  std::memcpy(out, src->data.data() + src->pos, count);
  src->pos += count;
}

void png_write_callback(png_structp png, png_bytep in, png_size_t count) {
  auto* dst = static_cast<Bytes*>(png_get_io_ptr(png));
  dst->insert(dst->end(), in, in + count);
}

void png_flush_callback(png_structp) {}

[[noreturn]] void png_error_callback(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message != nullptr) *message = msg;
  png_longjmp(png, 1);
}

void png_warning_callback(png_structp, png_const_charp) {}

ColorImage decode_png(std::span<const std::uint8_t> data) {
  std::string message = "malformed PNG";
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message,
                                           png_error_callback,
                                           png_warning_callback);
  if (png == nullptr) throw FormatError("cannot allocate PNG reader");
  png_infop info = png_create_info_struct(png);
  PngReadSource source{data};
  std::vector<std::uint8_t> raster;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0, height = 0;
  int channels = 0;
  int depth = 0;

  // No C++ objects with non-trivial destructors are created between setjmp
  // and a possible longjmp; buffers above are sized later.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(message);
  }
  png_set_read_fn(png, &source, png_read_callback);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) {
    png_set_strip_alpha(png);
  }
  if (depth == 16) png_set_swap(png);  // native little-endian uint16
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  raster.resize(rowbytes * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = raster.data() + y * rowbytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) throw FormatError("unsupported PNG layout");
  const int w = static_cast<int>(width);
  const int h = static_cast<int>(height);
  const double scale = depth == 16 ? 1.0 / 65535.0 : 1.0 / 255.0;
  std::vector<ScalarField> planes(channels, ScalarField(w, h));
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = raster.data() + y * rowbytes;
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t s = static_cast<std::size_t>(x) * channels + c;
        double v = 0.0;
        if (depth == 16) {
          std::uint16_t q;
          std::memcpy(&q, row + 2 * s, 2);
          v = q;
        } else {
          v = row[s];
        }
        planes[c](x, y) = v * scale;
      }
    }
  }
  if (channels == 1) return ColorImage::from_gray(std::move(planes[0]));
  return ColorImage::from_rgb(planes[0], planes[1], planes[2]);
}

Bytes encode_png8(const std::vector<const ScalarField*>& planes) {
  const int w = planes[0]->width();
  const int h = planes[0]->height();
  const int channels = static_cast<int>(planes.size());
  std::vector<std::uint8_t> raster(static_cast<std::size_t>(w) * h * channels);
  for (std::size_t i = 0; i < planes[0]->size(); ++i) {
    for (int c = 0; c < channels; ++c) {
      raster[i * channels + c] = quantize8((*planes[c])[i]);
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) {
    rows[y] = raster.data() + static_cast<std::size_t>(y) * w * channels;
  }

  Bytes out;
  std::string message = "PNG encoding failed";
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message,
                                            png_error_callback,
                                            png_warning_callback);
  if (png == nullptr) throw IoError("cannot allocate PNG writer");
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError(message);
  }
  png_set_write_fn(png, &out, png_write_callback, png_flush_callback);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), 8,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

bool is_png(std::span<const std::uint8_t> data) {
  return data.size() >= 8 && png_sig_cmp(data.data(), 0, 8) == 0;
}

}  // namespace

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("error writing " + path.string());
}

ColorImage decode_image(std::span<const std::uint8_t> data) {
  if (is_png(data)) return decode_png(data);
  if (data.size() >= 2 && data[0] == 'P') return PnmReader(data).read();
  throw FormatError("unsupported image format (expected PNG or PGM/PPM)");
}

ColorImage load_image(const std::filesystem::path& path) {
  const Bytes data = read_file(path);
  return decode_image(data);
}

Bytes encode_png(const ColorImage& img) {
  if (img.is_gray()) return encode_png8({&img.luma()});
  const auto rgb = img.to_rgb();
  return encode_png8({&rgb[0], &rgb[1], &rgb[2]});
}

Bytes encode_png(const ScalarField& img) { return encode_png8({&img}); }

Bytes encode_pgm16(const ScalarField& img) { return encode_pnm16({&img}); }

void save_image(const ColorImage& img, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".png") {
    write_file(path, encode_png(img));
  } else if (ext == ".pgm") {
    write_file(path, encode_pnm16({&img.luma()}));
  } else if (ext == ".ppm") {
    const auto rgb = img.to_rgb();
    write_file(path, encode_pnm16({&rgb[0], &rgb[1], &rgb[2]}));
  } else {
    throw FormatError("unsupported output extension '" + ext + "'");
  }
}

void save_image(const ScalarField& img, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  if (ext == ".ppm") {
    save_image(ColorImage::from_gray(img), path);
  } else if (ext == ".png") {
    write_file(path, encode_png8({&img}));
  } else if (ext == ".pgm") {
    write_file(path, encode_pnm16({&img}));
  } else {
    throw FormatError("unsupported output extension '" + ext + "'");
  }
}

Bytes encode_raw_f32(const ScalarField& field) {
  static_assert(std::endian::native == std::endian::little,
                "raw raster writer assumes a little-endian host");
  Bytes out(field.size() * sizeof(float));
  for (std::size_t i = 0; i < field.size(); ++i) {
    const float v = static_cast<float>(field[i]);
    std::memcpy(out.data() + i * sizeof(float), &v, sizeof(float));
  }
  return out;
}

ScalarField decode_raw_f32(std::span<const std::uint8_t> data, int width,
                           int height) {
  ScalarField field(width, height);
  if (data.size() != field.size() * sizeof(float)) {
    throw FormatError("raw raster size does not match dimensions");
  }
  for (std::size_t i = 0; i < field.size(); ++i) {
    float v;
    std::memcpy(&v, data.data() + i * sizeof(float), sizeof(float));
    field[i] = v;
  }
  return field;
}

void write_raw_f32(const ScalarField& field, const std::filesystem::path& path) {
  write_file(path, encode_raw_f32(field));
}

ScalarField read_raw_f32(const std::filesystem::path& path, int width,
                         int height) {
  return decode_raw_f32(read_file(path), width, height);
}

}  // namespace spectex
