#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace erank {

using Eigen::ArrayXd;
using Eigen::ArrayXi;
using Eigen::Matrix3Xd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

using ArrayXb = Eigen::Array<bool, Eigen::Dynamic, 1>;

// Integer pixel coordinate, x to the right, y down, origin top-left.
struct Pixel {
  int x = 0;
  int y = 0;
};

// Entity-map sentinel for pixels not assigned to any entity.
inline constexpr std::int32_t kUnassignedId = -1;

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

}  // namespace erank
