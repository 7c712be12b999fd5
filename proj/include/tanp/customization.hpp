#pragma once

#include "tanp/encoder.hpp"
#include "tanp/types.hpp"

namespace tanp {

/// Parameter names of the customization module.
inline const std::string kPoolName = "pool.A";
inline const std::string kTaskProjectionName = "customize.Wo";

/// Mean of the identity-network encodings of the support interactions (1 x d).
Var encode_task_identity(Tape& tape, const Params& params, const MlpSpec& identity, const Var& inputs);

/// Student's-t soft assignment of every row of `tasks` (B x d) to the columns
/// of `pool` (d x k): c_ij proportional to (1 + |t_i - a_j|^2 / alpha)^(-(alpha+1)/2),
/// normalized over j.
Var soft_assign(const Var& tasks, const Var& pool, double alpha);

/// sigmoid((t_i + A c_i^T) Wo) for every row; rows are tasks.
Var final_task_embedding(const Var& tasks, const Var& assignments, const Var& pool, const Var& projection);

/// Sharpened, frequency-normalized targets: D_ij proportional to C_ij^2 / sum_i C_ij.
Matrix target_distribution(const Matrix& assignments);

/// KL(D || C) = sum_ij D_ij log(D_ij / C_ij) with D held constant; 0 log 0 = 0.
Var clustering_loss(const Var& assignments, const Matrix& target);
double clustering_loss(const Matrix& assignments, const Matrix& target);

}  // namespace tanp
