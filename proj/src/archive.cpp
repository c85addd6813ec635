#include "mgca/archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace mgca {

namespace {

constexpr const char* kMagic = "MGCA-ARCHIVE 1";

void put_f32(std::string& out, float v) {
    const std::uint32_t u = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
}

float get_f32(const unsigned char* p) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) u |= std::uint32_t(p[b]) << (8 * b);
    return std::bit_cast<float>(u);
}

std::string shape_string(const std::vector<std::int64_t>& shape) {
    std::string s;
    for (size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s.empty() ? "1" : s;
}

bool valid_token(const std::string& s) {
    return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) { return c == ' ' || c == '\n' || c == '\t'; });
}

} // namespace

std::int64_t ArrayEntry::elements() const {
    std::int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

void NamedArrayArchive::add(const std::string& name, const Mat& m) {
    ArrayEntry e;
    e.name = name;
    e.shape = {m.rows(), m.cols()};
    e.data.resize(size_t(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) e.data[size_t(i)] = static_cast<float>(m.data()[i]);
    add(std::move(e));
}

void NamedArrayArchive::add(ArrayEntry entry) {
    if (!valid_token(entry.name)) throw IoError("archive: invalid array name '" + entry.name + "'");
    if (entry.elements() != std::int64_t(entry.data.size())) throw ShapeError("archive: shape does not match data");
    arrays.push_back(std::move(entry));
}

void NamedArrayArchive::set_meta(const std::string& key, const std::string& value) {
    if (!valid_token(key) || value.find('\n') != std::string::npos) throw IoError("archive: invalid meta entry");
    for (auto& [k, v] : meta) {
        if (k == key) {
            v = value;
            return;
        }
    }
    meta.emplace_back(key, value);
}

const ArrayEntry& NamedArrayArchive::array(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.name == name) return a;
    throw IoError("archive: no array named " + name);
}

const std::string* NamedArrayArchive::find_meta(const std::string& key) const {
    for (const auto& [k, v] : meta)
        if (k == key) return &v;
    return nullptr;
}

Mat NamedArrayArchive::matrix(const std::string& name) const {
    const ArrayEntry& a = array(name);
    if (a.shape.size() != 2) throw ShapeError("archive: " + name + " is not two-dimensional");
    Mat m(a.shape[0], a.shape[1]);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = a.data[size_t(i)];
    return m;
}

void NamedArrayArchive::save(const std::filesystem::path& path) const {
    std::string out = std::string(kMagic) + "\n";
    for (const auto& [k, v] : meta) out += "meta " + k + " " + v + "\n";
    for (const auto& a : arrays) out += "array " + a.name + " float32 " + shape_string(a.shape) + "\n";
    out += "data\n";
    for (const auto& a : arrays)
        for (float v : a.data) put_f32(out, v);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path.string());
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("short write to " + path.string());
}

NamedArrayArchive NamedArrayArchive::load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open archive " + path.string());
    std::string line;
    if (!std::getline(f, line) || line != kMagic) throw IoError("not a named-array archive: " + path.string());
    NamedArrayArchive ar;
    bool saw_data = false;
    while (std::getline(f, line)) {
        if (line == "data") {
            saw_data = true;
            break;
        }
        std::istringstream in(line);
        std::string kind;
        in >> kind;
        if (kind == "meta") {
            std::string key;
            in >> key;
            std::string value;
            std::getline(in, value);
            if (!value.empty() && value.front() == ' ') value.erase(0, 1);
            ar.meta.emplace_back(key, value);
        } else if (kind == "array") {
            ArrayEntry e;
            std::string dtype, shape;
            in >> e.name >> dtype >> shape;
            if (dtype != "float32") throw IoError("archive: unsupported element type " + dtype);
            std::istringstream dims(shape);
            for (std::string d; std::getline(dims, d, 'x');) e.shape.push_back(std::stoll(d));
            ar.arrays.push_back(std::move(e));
        } else {
            throw IoError("archive: unexpected manifest line '" + line + "'");
        }
    }
    if (!saw_data) throw IoError("archive: missing data section in " + path.string());
    for (auto& a : ar.arrays) {
        const auto n = a.elements();
        std::string raw(size_t(n) * 4, '\0');
        if (!f.read(raw.data(), std::streamsize(raw.size()))) throw IoError("archive: truncated payload for " + a.name);
        a.data.resize(size_t(n));
        const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
        for (std::int64_t i = 0; i < n; ++i) a.data[size_t(i)] = get_f32(p + 4 * i);
    }
    return ar;
}

} // namespace mgca
