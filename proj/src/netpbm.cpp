#include "mgca/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace mgca {

namespace {

struct Header {
    std::string magic;
    int width = 0;
    int height = 0;
    int maxval = 0;
};

int next_int(std::istream& in, const std::filesystem::path& path) {
    int ch = in.peek();
    while (ch != EOF) {
        if (std::isspace(ch)) {
            in.get();
        } else if (ch == '#') {
            std::string skip;
            std::getline(in, skip);
        } else {
            break;
        }
        ch = in.peek();
    }
    int v = 0;
    if (!(in >> v)) throw IoError("malformed netpbm header: " + path.string());
    return v;
}

Header read_header(std::istream& in, const std::filesystem::path& path) {
    Header h;
    in >> h.magic;
    h.width = next_int(in, path);
    h.height = next_int(in, path);
    h.maxval = next_int(in, path);
    in.get(); // single whitespace before the raster
    if (h.width <= 0 || h.height <= 0 || h.maxval != 255)
        throw IoError("unsupported netpbm geometry or depth: " + path.string());
    return h;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

} // namespace

Image read_ppm(const std::filesystem::path& path) {
    auto in = open_in(path);
    Header h = read_header(in, path);
    if (h.magic != "P6") throw IoError("expected a P6 image: " + path.string());
    std::string raw(size_t(h.width) * h.height * 3, '\0');
    if (!in.read(raw.data(), std::streamsize(raw.size()))) throw IoError("truncated image: " + path.string());
    Image img(h.height, h.width, 3);
    for (size_t i = 0; i < raw.size(); ++i) img.data[i] = static_cast<unsigned char>(raw[i]) / 255.0;
    return img;
}

void write_ppm(const std::filesystem::path& path, const Image& image) {
    if (image.channels != 3) throw ShapeError("write_ppm: expected 3 channels");
    auto out = open_out(path);
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    std::string raw(image.data.size(), '\0');
    for (size_t i = 0; i < raw.size(); ++i)
        raw[i] = static_cast<char>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * 255.0));
    out.write(raw.data(), std::streamsize(raw.size()));
}

LabelMap read_pgm(const std::filesystem::path& path) {
    auto in = open_in(path);
    Header h = read_header(in, path);
    if (h.magic != "P5") throw IoError("expected a P5 mask: " + path.string());
    std::string raw(size_t(h.width) * h.height, '\0');
    if (!in.read(raw.data(), std::streamsize(raw.size()))) throw IoError("truncated mask: " + path.string());
    LabelMap labels(h.height, h.width);
    for (size_t i = 0; i < raw.size(); ++i) labels.data[i] = static_cast<unsigned char>(raw[i]);
    return labels;
}

void write_pgm(const std::filesystem::path& path, const LabelMap& labels) {
    std::string raw(labels.data.size(), '\0');
    for (size_t i = 0; i < raw.size(); ++i) {
        int v = labels.data[i];
        if (v < 0 || v > 255) throw DataError("write_pgm: label " + std::to_string(v) + " does not fit in 8 bits");
        raw[i] = static_cast<char>(v);
    }
    auto out = open_out(path);
    out << "P5\n" << labels.width << " " << labels.height << "\n255\n";
    out.write(raw.data(), std::streamsize(raw.size()));
}

} // namespace mgca
