#pragma once

#include <queue>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "matrix_kernels.hpp"

namespace dobc {

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  double weight = 1.0;
};

// Undirected weighted communication graph, 0-based node indices.
class CommGraph {
 public:
  CommGraph() = default;
  CommGraph(std::size_t nodes, std::vector<Edge> edges) : nodes_(nodes), edges_(std::move(edges)) {
    adjacency_ = Matrix::Zero(nodes_, nodes_);
    for (const auto& e : edges_) {
      if (e.i >= nodes_ || e.j >= nodes_) throw ConfigError("graph: edge endpoint out of range");
      if (e.i == e.j) throw ConfigError("graph: self loops are not allowed");
      if (!(e.weight > 0)) throw ConfigError("graph: edge weights must be positive");
      if (adjacency_(e.i, e.j) != 0) throw ConfigError("graph: duplicate edge");
      adjacency_(e.i, e.j) = adjacency_(e.j, e.i) = e.weight;
    }
  }

  static CommGraph ring(std::size_t nodes, double weight = 1.0) {
    std::vector<Edge> edges;
    for (std::size_t k = 0; k < nodes; ++k)
      if (nodes > 2 || k + 1 < nodes) edges.push_back({k, (k + 1) % nodes, weight});
    return CommGraph(nodes, std::move(edges));
  }

  std::size_t size() const { return nodes_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Matrix& adjacency() const { return adjacency_; }

  Matrix laplacian() const {
    Matrix l = -adjacency_;
    for (std::size_t k = 0; k < nodes_; ++k) l(k, k) = adjacency_.row(k).sum();
    return l;
  }

  bool is_connected() const {
    if (nodes_ == 0) return false;
    std::vector<bool> seen(nodes_, false);
    std::queue<std::size_t> todo;
    todo.push(0);
    seen[0] = true;
    std::size_t count = 1;
    while (!todo.empty()) {
      auto k = todo.front();
      todo.pop();
      for (std::size_t j = 0; j < nodes_; ++j)
        if (adjacency_(k, j) != 0 && !seen[j]) {
          seen[j] = true;
          ++count;
          todo.push(j);
        }
    }
    return count == nodes_;
  }

  // second smallest Laplacian eigenvalue
  double algebraic_connectivity() const {
    if (nodes_ < 2) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(laplacian());
    return es.eigenvalues()(1);
  }

 private:
  std::size_t nodes_ = 0;
  std::vector<Edge> edges_;
  Matrix adjacency_;
};

// Block-diagonal stacking of the given matrices.
inline Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  rows = cols = 0;
  for (const auto& b : blocks) {
    out.block(rows, cols, b.rows(), b.cols()) = b;
    rows += b.rows();
    cols += b.cols();
  }
  return out;
}

struct CollectiveDetectability {
  Eigen::Index stacked_rank = 0;
  bool rank_check = false;
  double min_eigenvalue = 0.0;  // of diag(T_iu)^T (L kron I) diag(T_iu); +inf when empty
  bool eigen_check = false;
  bool holds() const { return rank_check && eigen_check; }
};

// Rank test on [T_1d ... T_Nd] and the positive-definiteness test on the
// consensus-projected Laplacian; the two must agree on a connected graph.
inline CollectiveDetectability collective_strong_detectability(const CommGraph& graph,
                                                               const std::vector<Matrix>& bases,
                                                               RankTolerance tol = {}) {
  if (bases.size() != graph.size()) throw DimensionMismatch("collective detectability: one basis per node");
  if (bases.empty()) throw DimensionMismatch("collective detectability: empty graph");
  if (!graph.is_connected()) throw PreconditionViolated("communication graph is not connected");
  const Eigen::Index n = bases.front().rows();
  std::vector<Matrix> complements;
  for (const auto& t : bases) {
    if (t.rows() != n) throw DimensionMismatch("collective detectability: bases differ in state dimension");
    complements.push_back(annihilator(t, tol).transpose());
  }
  CollectiveDetectability out;
  out.stacked_rank = numerical_rank(hstack(bases, n), tol);
  out.rank_check = out.stacked_rank == n;

  Matrix tu = block_diagonal(complements);
  Matrix lk = Eigen::kroneckerProduct(graph.laplacian(), Matrix::Identity(n, n)).eval();
  Matrix m = tu.transpose() * lk * tu;
  if (m.rows() == 0) {
    out.min_eigenvalue = std::numeric_limits<double>::infinity();
    out.eigen_check = true;
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    out.min_eigenvalue = es.eigenvalues()(0);
    double lmax = graph.laplacian().norm();
    out.eigen_check = out.min_eigenvalue > tol.relative * std::max(1.0, lmax);
  }
  if (out.rank_check != out.eigen_check)
    throw InconsistentChecks("collective detectability: rank test and eigenvalue test disagree");
  return out;
}

}  // namespace dobc
