#include "mid/tensor.hpp"

#include <cmath>
#include <sstream>

namespace mid {

bool Tensor::all_finite() const {
  for (double v : data)
    if (!std::isfinite(v)) return false;
  return true;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  if (!same_shape(o)) throw ConfigError("Tensor +=: shape mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  if (!same_shape(o)) throw ConfigError("Tensor -=: shape mismatch");
  for (std::size_t i = 0; i < data.size(); ++i) data[i] -= o.data[i];
  return *this;
}

Tensor& Tensor::operator*=(double c) {
  for (double& v : data) v *= c;
  return *this;
}

std::string shape_to_string(const std::vector<std::size_t>& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

}  // namespace mid
