#include "tanp/customization.hpp"

#include <cmath>
#include <stdexcept>

namespace tanp {

Var encode_task_identity(Tape& tape, const Params& params, const MlpSpec& identity, const Var& inputs) {
  if (inputs.rows() == 0) throw std::invalid_argument("encode_task_identity: empty support set");
  return aggregate(mlp_forward(tape, params, identity, inputs));
}

Var soft_assign(const Var& tasks, const Var& pool, double alpha) {
  if (!(alpha > 0)) throw std::invalid_argument("soft_assign: alpha must be positive");
  const auto& t = tasks.value();
  const auto& a = pool.value();
  if (t.cols() != a.rows()) {
    throw std::invalid_argument("soft_assign: task dim " + std::to_string(t.cols()) + " vs pool " + shape_string(a));
  }
  const Eigen::Index n = t.rows();
  const Eigen::Index k = a.cols();
  Matrix dist(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) dist(i, j) = (t.row(i).transpose() - a.col(j)).squaredNorm();
  }
  const double power = -(alpha + 1.0) / 2.0;
  // Normalize in log space so large distances cannot underflow every entry.
  Matrix log_q = (power * (dist.array() / alpha).log1p()).matrix();
  Matrix c(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = log_q.row(i).maxCoeff();
    c.row(i) = (log_q.row(i).array() - m).exp().matrix();
    c.row(i) /= c.row(i).sum();
  }
  auto* tape = tasks.tape();
  const int out_id = static_cast<int>(tape->size());
  return tape->record(std::move(c), {tasks, pool}, [tasks, pool, dist, alpha, out_id](const Matrix& g, Tape& tp) {
    const auto& c = tp.value(out_id);
    const auto& t = tasks.value();
    const auto& a = pool.value();
    // Softmax backward onto log q, then chain through d log q / d dist.
    Matrix s = c.cwiseProduct(g);
    const Eigen::VectorXd row_dot = s.rowwise().sum();
    s -= (c.array().colwise() * row_dot.array()).matrix();
    const Matrix w = (-(alpha + 1.0) / 2.0) / (alpha + dist.array());
    const Matrix coef = 2.0 * s.cwiseProduct(w);  // dL/d dist_ij times 2
    Matrix gt = Matrix::Zero(t.rows(), t.cols());
    Matrix ga = Matrix::Zero(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      for (Eigen::Index j = 0; j < a.cols(); ++j) {
        const Eigen::RowVectorXd diff = t.row(i) - a.col(j).transpose();
        gt.row(i) += coef(i, j) * diff;
        ga.col(j) -= coef(i, j) * diff.transpose();
      }
    }
    if (tp.needs_grad(tasks)) tp.accumulate(tasks, gt);
    if (tp.needs_grad(pool)) tp.accumulate(pool, ga);
  });
}

Var final_task_embedding(const Var& tasks, const Var& assignments, const Var& pool, const Var& projection) {
  auto pooled = ad::matmul(assignments, ad::transpose(pool));
  return ad::sigmoid(ad::matmul(tasks + pooled, projection));
}

Matrix target_distribution(const Matrix& assignments) {
  const Eigen::RowVectorXd freq = assignments.colwise().sum();
  for (Eigen::Index j = 0; j < freq.size(); ++j) {
    if (!(freq(j) > 0)) {
      throw std::invalid_argument("target_distribution: centroid " + std::to_string(j) + " has zero total assignment");
    }
  }
  Matrix d = assignments.cwiseProduct(assignments).array().rowwise() / freq.array();
  const Eigen::VectorXd row_sum = d.rowwise().sum();
  return d.array().colwise() / row_sum.array();
}

namespace {

double kl_term(double d, double c) { return d > 0 ? d * std::log(d / c) : 0.0; }

void require_same(const Matrix& c, const Matrix& d) {
  if (c.rows() != d.rows() || c.cols() != d.cols()) {
    throw std::invalid_argument("clustering_loss: shape mismatch " + shape_string(c) + " vs " + shape_string(d));
  }
}

}  // namespace

double clustering_loss(const Matrix& assignments, const Matrix& target) {
  require_same(assignments, target);
  double total = 0.0;
  for (Eigen::Index i = 0; i < target.size(); ++i) total += kl_term(target.data()[i], assignments.data()[i]);
  return total;
}

Var clustering_loss(const Var& assignments, const Matrix& target) {
  Matrix out(1, 1);
  out(0, 0) = clustering_loss(assignments.value(), target);
  return assignments.tape()->record(std::move(out), {assignments}, [assignments, target](const Matrix& g, Tape& t) {
    t.accumulate(assignments, (-g(0, 0) * target.array() / assignments.value().array()).matrix());
  });
}

}  // namespace tanp
