#include "ifd/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace ifd {

namespace {
constexpr char kMagic[8] = {'I', 'F', 'D', 'C', 'K', 'P', 'T', '1'};

template <class T>
void write_raw(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_raw(std::istream& in, const std::string& path) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw std::runtime_error("load error: checkpoint " + path + " is truncated");
    return value;
}
} // namespace

const Tensor* CheckpointData::find(const std::string& name) const {
    for (const auto& [n, t] : entries)
        if (n == name) return &t;
    return nullptr;
}

void save_checkpoint(const std::string& path, const CheckpointData& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write error: cannot open checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    const std::string header = data.header.dump();
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(data.entries.size()));
    for (const auto& [name, tensor] : data.entries) {
        write_raw<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.shape.size()));
        for (int d : tensor.shape) write_raw<std::int32_t>(out, d);
        out.write(reinterpret_cast<const char*>(tensor.data()),
                  static_cast<std::streamsize>(tensor.numel() * sizeof(float)));
    }
    if (!out) throw std::runtime_error("write error: failed writing checkpoint " + path);
}

CheckpointData load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load error: cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("load error: " + path + " is not an IFD checkpoint");

    CheckpointData data;
    const auto header_len = read_raw<std::uint32_t>(in, path);
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw std::runtime_error("load error: checkpoint " + path + " is truncated");
    try {
        data.header = nlohmann::json::parse(header);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load error: checkpoint " + path + ": bad header: " + e.what());
    }

    const auto count = read_raw<std::uint32_t>(in, path);
    data.entries.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_raw<std::uint16_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto ndim = read_raw<std::uint8_t>(in, path);
        std::vector<int> shape(ndim);
        for (auto& d : shape) d = read_raw<std::int32_t>(in, path);
        Tensor t(shape);
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(float)));
        if (!in) throw std::runtime_error("load error: checkpoint " + path + " is truncated");
        data.entries.emplace_back(std::move(name), std::move(t));
    }
    return data;
}

} // namespace ifd
