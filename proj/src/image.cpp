#include "stereotrace/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace stereotrace {

double ImageGrid::sample(double x, double y, double fill) const {
    const int x0 = int(std::floor(x));
    const int y0 = int(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    auto px = [&](int u, int v) { return in_bounds(u, v) ? at(u, v) : fill; };
    const double top = px(x0, y0) * (1.0 - fx) + px(x0 + 1, y0) * fx;
    const double bot = px(x0, y0 + 1) * (1.0 - fx) + px(x0 + 1, y0 + 1) * fx;
    return top * (1.0 - fy) + bot * fy;
}

double ImageGrid::median_intensity() const {
    std::vector<double> v(values);
    return median(std::move(v));
}

void ImageGrid::validate() const {
    require(width > 0 && height > 0, "image dimensions must be positive");
    require(values.size() == size_t(width) * height, "image buffer size mismatch");
    for (double v : values)
        require(std::isfinite(v) && v >= 0.0 && v <= 1.0, "image value outside [0,1]");
}

void DetectionMap::validate() const {
    require(probs.size() == size_t(width) * height, "detection buffer size mismatch");
    for (double p : probs)
        require(std::isfinite(p) && p >= 0.0 && p <= 1.0, "detection prob outside [0,1]");
}

size_t DisparityMap::valid_count() const {
    size_t n = 0;
    for (uint8_t m : mask) n += m ? 1 : 0;
    return n;
}

void DisparityMap::validate() const {
    require(disp.size() == mask.size() && disp.size() == size_t(width) * height,
            "disparity buffer size mismatch");
    for (size_t i = 0; i < disp.size(); ++i)
        if (mask[i]) require(std::isfinite(disp[i]), "masked disparity not finite");
}

// --- PGM ------------------------------------------------------------------

static uint8_t to_byte(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return uint8_t(std::lround(c * 255.0));
}

void write_pgm(const ImageGrid& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    require(bool(f), "cannot open for writing: " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(size_t(img.width));
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) row[size_t(u)] = to_byte(img.at(u, v));
        f.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    require(bool(f), "write failed: " + path);
}

ImageGrid read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(bool(f), "cannot open: " + path);
    std::string magic;
    f >> magic;
    require(magic == "P5", "not a binary PGM: " + path);
    auto next_int = [&]() {
        // skip whitespace and '#' comments
        for (;;) {
            int c = f.peek();
            if (c == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(c)) {
                f.get();
            } else {
                break;
            }
        }
        int v;
        f >> v;
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    require(w > 0 && h > 0, "bad PGM dimensions: " + path);
    require(maxval > 0 && maxval < 256, "only 8-bit PGM supported: " + path);
    f.get();  // single whitespace before raster
    ImageGrid img(w, h);
    std::vector<uint8_t> row(static_cast<size_t>(w));
    for (int v = 0; v < h; ++v) {
        f.read(reinterpret_cast<char*>(row.data()), w);
        require(bool(f), "truncated PGM: " + path);
        for (int u = 0; u < w; ++u) img.at(u, v) = double(row[size_t(u)]) / maxval;
    }
    return img;
}

// --- PNG (8-bit grayscale) ------------------------------------------------

void write_png(const ImageGrid& img, const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    require(fp != nullptr, "cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        fail("libpng write error: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, png_uint_32(img.width), png_uint_32(img.height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(size_t(img.width));
    for (int v = 0; v < img.height; ++v) {
        for (int u = 0; u < img.width; ++u) row[size_t(u)] = to_byte(img.at(u, v));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

ImageGrid read_png(const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    require(fp != nullptr, "cannot open: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        fail("libpng read error: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int w = int(png_get_image_width(png, info));
    const int h = int(png_get_image_height(png, info));
    // Normalize any color type to 8-bit grayscale.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    const png_byte color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color & PNG_COLOR_MASK_COLOR || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    ImageGrid img(w, h);
    std::vector<uint8_t> row(png_get_rowbytes(png, info));
    for (int v = 0; v < h; ++v) {
        png_read_row(png, row.data(), nullptr);
        for (int u = 0; u < w; ++u) img.at(u, v) = double(row[size_t(u)]) / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return img;
}

static bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void write_image(const ImageGrid& img, const std::string& path) {
    if (ends_with(path, ".png"))
        write_png(img, path);
    else if (ends_with(path, ".pgm"))
        write_pgm(img, path);
    else
        fail("unsupported image extension (use .pgm or .png): " + path);
}

ImageGrid read_image(const std::string& path) {
    if (ends_with(path, ".png")) return read_png(path);
    if (ends_with(path, ".pgm")) return read_pgm(path);
    fail("unsupported image extension (use .pgm or .png): " + path);
}

// --- disparity CSV --------------------------------------------------------

void write_disparity_csv(const DisparityMap& dm, const std::string& path) {
    std::ofstream f(path);
    require(bool(f), "cannot open for writing: " + path);
    f << "u,v,d,valid\n";
    char buf[64];
    for (int v = 0; v < dm.height; ++v) {
        for (int u = 0; u < dm.width; ++u) {
            std::snprintf(buf, sizeof(buf), "%.17g", dm.d(u, v));
            f << u << ',' << v << ',' << buf << ',' << int(dm.valid(u, v)) << '\n';
        }
    }
    require(bool(f), "write failed: " + path);
}

DisparityMap read_disparity_csv(const std::string& path) {
    std::ifstream f(path);
    require(bool(f), "cannot open: " + path);
    std::string line;
    std::getline(f, line);
    require(line.rfind("u,v,d,valid", 0) == 0, "bad disparity CSV header: " + path);
    struct Row {
        int u, v, valid;
        double d;
    };
    std::vector<Row> rows;
    int maxu = -1, maxv = -1;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        Row r;
        char* end = nullptr;
        r.u = int(std::strtol(line.c_str(), &end, 10));
        require(*end == ',', "bad disparity CSV row: " + line);
        r.v = int(std::strtol(end + 1, &end, 10));
        require(*end == ',', "bad disparity CSV row: " + line);
        r.d = std::strtod(end + 1, &end);
        require(*end == ',', "bad disparity CSV row: " + line);
        r.valid = int(std::strtol(end + 1, &end, 10));
        rows.push_back(r);
        maxu = std::max(maxu, r.u);
        maxv = std::max(maxv, r.v);
    }
    require(maxu >= 0 && maxv >= 0, "empty disparity CSV: " + path);
    DisparityMap dm(maxu + 1, maxv + 1);
    for (const Row& r : rows) {
        require(r.u >= 0 && r.v >= 0, "negative pixel index in CSV: " + path);
        dm.d(r.u, r.v) = r.d;
        dm.valid(r.u, r.v) = uint8_t(r.valid != 0);
    }
    return dm;
}

}  // namespace stereotrace
