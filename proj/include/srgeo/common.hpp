#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace srgeo {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline std::string point_str(const Vec& q) {
  std::string s = "(";
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(q[i]);
  }
  return s + ")";
}

}  // namespace srgeo
