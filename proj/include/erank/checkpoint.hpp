#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace erank {

// Shared checkpoint container: u32 little-endian header length, UTF-8 JSON
// header, little-endian float32 payload.
void write_checkpoint(const std::string& path, const nlohmann::json& header,
                      const std::vector<float>& data);
std::pair<nlohmann::json, std::vector<float>> read_checkpoint(const std::string& path);

}  // namespace erank
