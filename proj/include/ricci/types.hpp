#ifndef RICCI_TYPES_HPP
#define RICCI_TYPES_HPP

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace ricci {

// Small fixed-capacity storage keeps hot loops free of heap traffic.
inline constexpr int kMaxDim = 6;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

// Raised when a numerical solver cannot meet its contract.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

// Raised for malformed configuration or arguments supplied by a user.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace ricci

#endif
