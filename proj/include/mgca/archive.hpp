#pragma once

#include "mgca/common.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mgca {

struct ArrayEntry {
    std::string name;
    std::vector<std::int64_t> shape;
    std::vector<float> data;

    std::int64_t elements() const;
};

/// Named-array archive. A text manifest
///
///     MGCA-ARCHIVE 1
///     meta <key> <value>
///     array <name> float32 <d0>x<d1>...
///     data
///
/// is followed by the array payloads as little-endian IEEE-754 binary32 in
/// manifest order.
struct NamedArrayArchive {
    std::vector<std::pair<std::string, std::string>> meta;
    std::vector<ArrayEntry> arrays;

    void add(const std::string& name, const Mat& m);
    void add(ArrayEntry entry);
    void set_meta(const std::string& key, const std::string& value);

    const ArrayEntry& array(const std::string& name) const;
    const std::string* find_meta(const std::string& key) const;
    Mat matrix(const std::string& name) const;

    void save(const std::filesystem::path& path) const;
    static NamedArrayArchive load(const std::filesystem::path& path);
};

} // namespace mgca
