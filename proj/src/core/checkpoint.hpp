#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace pdedpc {

// Checkpoint container: 8-byte magic, u64 header length, JSON header bytes,
// then a little-endian f64 blob. The JSON round-trips doubles exactly
// (shortest-repr serialization), the blob is written raw.
void save_checkpoint(const std::string& path, const nlohmann::json& header,
                     std::span<const double> blob);
std::pair<nlohmann::json, std::vector<double>> load_checkpoint(const std::string& path);
bool is_checkpoint_file(const std::string& path);

}  // namespace pdedpc
