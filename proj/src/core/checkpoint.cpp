#include "core/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pdedpc {

namespace {
constexpr char kCkptMagic[8] = {'P', 'D', 'P', 'C', 'K', 'P', 'T', '1'};
}

void save_checkpoint(const std::string& path, const nlohmann::json& header,
                     std::span<const double> blob) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open checkpoint '" + path + "' for writing");
    const std::string hdr = header.dump();
    const std::uint64_t hlen = hdr.size();
    out.write(kCkptMagic, sizeof kCkptMagic);
    out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    out.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    out.write(reinterpret_cast<const char*>(blob.data()),
              static_cast<std::streamsize>(blob.size() * sizeof(double)));
    if (!out) throw std::runtime_error("short write to checkpoint '" + path + "'");
}

std::pair<nlohmann::json, std::vector<double>> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kCkptMagic, sizeof magic) != 0)
        throw std::runtime_error("'" + path + "' is not a checkpoint file");
    std::uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof hlen);
    std::string hdr(hlen, '\0');
    in.read(hdr.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("'" + path + "': truncated header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(hdr);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("'" + path + "': bad checkpoint header: " + e.what());
    }
    std::vector<double> blob;
    const std::uint64_t count = header.at("param_count").get<std::uint64_t>();
    blob.resize(count);
    in.read(reinterpret_cast<char*>(blob.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("'" + path + "': truncated parameter blob");
    return {header, blob};
}

bool is_checkpoint_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[8];
    in.read(magic, sizeof magic);
    return in && std::memcmp(magic, kCkptMagic, sizeof magic) == 0;
}

}  // namespace pdedpc
