#pragma once

#include "tanp/kernel/autodiff.hpp"
#include "tanp/kernel/parameters.hpp"

namespace tanp {

using Matrix = MatrixX<double>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Params = ParameterStore<double>;
using Gradients = GradientSet<double>;
using Tape = ad::Tape<double>;
using Var = ad::Var<double>;

}  // namespace tanp
