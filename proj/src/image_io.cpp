#include "ifd/image_io.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ifd {

namespace {

void skip_ws_comments(std::istream& in) {
    int c = in.peek();
    while (c == '#' || c == ' ' || c == '\t' || c == '\n' || c == '\r') {
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else {
            in.get();
        }
        c = in.peek();
    }
}

void read_header(std::istream& in, const char* magic, const std::string& path, int& h,
                 int& w) {
    std::string m;
    in >> m;
    if (m != magic)
        throw std::runtime_error("load error: " + path + ": expected " + magic + " header, got '" + m + "'");
    skip_ws_comments(in);
    int maxval = 0;
    in >> w;
    skip_ws_comments(in);
    in >> h;
    skip_ws_comments(in);
    in >> maxval;
    if (!in || w <= 0 || h <= 0)
        throw std::runtime_error("load error: " + path + ": bad image dimensions");
    if (maxval != 255)
        throw std::runtime_error("load error: " + path + ": only 8-bit images are supported");
    in.get(); // single whitespace before raster
}

} // namespace

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load error: cannot open image " + path);
    int h = 0, w = 0;
    read_header(in, "P6", path, h, w);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * w * 3);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!in) throw std::runtime_error("load error: " + path + ": truncated pixel data");
    Tensor img({3, h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img(c, y, x) = raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] / 255.0f;
    return img;
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.dim(0) != 3)
        throw std::invalid_argument("write_ppm: expected {3,H,W} tensor, got " + image.shape_str());
    const int h = image.dim(1), w = image.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write error: cannot open " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h) * w * 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = image(c, y, x);
                v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                raw[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (!out) throw std::runtime_error("write error: failed writing " + path);
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load error: cannot open image " + path);
    GrayImage img;
    read_header(in, "P5", path, img.height, img.width);
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (!in) throw std::runtime_error("load error: " + path + ": truncated pixel data");
    return img;
}

void write_pgm(const std::string& path, const GrayImage& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write error: cannot open " + path);
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw std::runtime_error("write error: failed writing " + path);
}

void write_pgm_gray(const std::string& path, const Tensor& gray01) {
    if (gray01.rank() != 2)
        throw std::invalid_argument("write_pgm_gray: expected {H,W} tensor, got " + gray01.shape_str());
    GrayImage img;
    img.height = gray01.dim(0);
    img.width = gray01.dim(1);
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            float v = gray01(y, x);
            v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
            img.at(y, x) = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
    write_pgm(path, img);
}

} // namespace ifd
