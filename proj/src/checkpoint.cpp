#include "erank/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace erank {

static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

void write_checkpoint(const std::string& path, const nlohmann::json& header,
                      const std::vector<float>& data) {
  const std::string head = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open for write: " + path);
  const std::uint32_t len = static_cast<std::uint32_t>(head.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

std::pair<nlohmann::json, std::vector<float>> read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open: " + path);
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), 4);
  std::string head(len, '\0');
  in.read(head.data(), len);
  if (!in) throw std::runtime_error("checkpoint: truncated header: " + path);
  std::vector<char> rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (rest.size() % sizeof(float) != 0)
    throw std::runtime_error("checkpoint: payload not a float array: " + path);
  std::vector<float> data(rest.size() / sizeof(float));
  std::memcpy(data.data(), rest.data(), rest.size());
  return {nlohmann::json::parse(head), std::move(data)};
}

}  // namespace erank
