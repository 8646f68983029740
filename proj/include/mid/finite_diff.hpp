#pragma once

#include <functional>

#include "mid/tensor.hpp"

namespace mid {

/// Central-difference gradient estimate of a scalar-valued function,
/// (f(x + h e_i) - f(x - h e_i)) / 2h per coordinate. Testing oracle for
/// every analytic backward pass in the project.
Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                        double h = 1e-5);

}  // namespace mid
