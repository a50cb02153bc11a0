#include "erank/entity_map.hpp"

#include "erank/png_io.hpp"

namespace erank {

namespace {
constexpr std::uint16_t kUnassignedPixel = 65535;
}

void save_entity_map_png(const std::string& path, const EntityMap& m) {
  png::Buffer buf;
  buf.width = m.width;
  buf.height = m.height;
  buf.format = png::Format::kGray16;
  buf.gray16.resize(static_cast<std::size_t>(m.pixel_count()));
  for (Eigen::Index p = 0; p < m.pixel_count(); ++p) {
    const std::int32_t id = m.ids(p);
    require(id == kUnassignedId || (id >= 0 && id < kUnassignedPixel),
            "entity map: id out of 16-bit range");
    buf.gray16[static_cast<std::size_t>(p)] =
        id == kUnassignedId ? kUnassignedPixel : static_cast<std::uint16_t>(id);
  }
  png::write_file(path, buf);
}

EntityMap load_entity_map_png(const std::string& path) {
  const png::Buffer buf = png::read_file(path);
  if (buf.format != png::Format::kGray16)
    throw std::runtime_error("expected 16-bit gray png: " + path);
  EntityMap m(buf.width, buf.height);
  for (Eigen::Index p = 0; p < m.pixel_count(); ++p) {
    const std::uint16_t v = buf.gray16[static_cast<std::size_t>(p)];
    m.ids(p) = v == kUnassignedPixel ? kUnassignedId : static_cast<std::int32_t>(v);
  }
  return m;
}

}  // namespace erank
