#pragma once

#include <Eigen/Core>

#include <vector>

namespace amdm {

/// Latent vector. All latent-space arithmetic is done in double precision.
using Vector = Eigen::VectorXd;

using VectorList = std::vector<Vector>;

}  // namespace amdm
