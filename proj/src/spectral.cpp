#include "ipfnet/spectral.hpp"

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

namespace ipfnet {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr std::size_t kBlock = 4;
constexpr std::size_t kMaxIterations = 20000;

struct Leading {
  double theta = 0.0;
  VectorXd vec;
  std::size_t iterations = 0;
  bool converged = false;
};

// Block power iteration with Rayleigh-Ritz for the largest eigenpair of a
// symmetric positive semi-definite operator. Stops when the Ritz residual is
// below rel_tol * theta.
Leading leading_eigenpair(const std::function<MatrixXd(const MatrixXd&)>& op, MatrixXd block,
                          double rel_tol) {
  Leading out;
  Eigen::HouseholderQR<MatrixXd> qr(block);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(block.rows(), block.cols());
  for (std::size_t it = 1; it <= kMaxIterations; ++it) {
    MatrixXd z = op(q);
    MatrixXd h = q.transpose() * z;
    h = 0.5 * (h + h.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(h);
    Eigen::Index top = h.rows() - 1;
    double theta = es.eigenvalues()(top);
    VectorXd y = es.eigenvectors().col(top);
    VectorXd x = q * y;
    VectorXd r = z * y - theta * x;
    out.theta = theta;
    out.vec = x;
    out.iterations = it;
    if (theta <= 0.0 || r.norm() <= rel_tol * theta) {
      out.converged = true;
      return out;
    }
    // Keep the Ritz vectors ordered so the leading one stays in column 0.
    MatrixXd next = z * es.eigenvectors().rowwise().reverse();
    Eigen::HouseholderQR<MatrixXd> qz(next);
    q = qz.householderQ() * MatrixXd::Identity(next.rows(), next.cols());
  }
  return out;
}

MatrixXd random_block(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  MatrixXd b(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) b(i, j) = nd(gen);
  }
  return b;
}

std::size_t find_root(std::vector<std::size_t>& parent, std::size_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

}  // namespace

bool is_connected(const SparseNetwork& w) {
  const std::size_t m = w.rows();
  const std::size_t total = m + w.cols();
  if (total <= 1) return true;
  std::vector<std::size_t> parent(total);
  std::iota(parent.begin(), parent.end(), 0);
  std::size_t components = total;
  for (const auto& e : w.entries()) {
    std::size_t a = find_root(parent, e.row);
    std::size_t b = find_root(parent, m + e.col);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

LaplacianSpectrum bipartite_laplacian_fiedler(const SparseNetwork& w) {
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  const std::size_t dim = m + n;
  LaplacianSpectrum spec;
  spec.dimension = dim;
  if (dim < 2 || !is_connected(w)) {
    spec.connected = dim >= 2 ? false : true;
    spec.lambda2 = 0.0;
    return spec;
  }
  spec.connected = true;

  // Full Laplacian for Rayleigh quotients; grounded copy (last node removed)
  // for solves. Solving the grounded system and re-centering applies the
  // pseudo-inverse on the complement of the all-ones vector.
  std::vector<Eigen::Triplet<double>> full, grounded;
  std::vector<double> degree(dim, 0.0);
  const auto last = static_cast<Eigen::Index>(dim - 1);
  for (const auto& e : w.entries()) {
    auto r = static_cast<Eigen::Index>(e.row);
    auto c = static_cast<Eigen::Index>(m + e.col);
    degree[e.row] += e.weight;
    degree[m + e.col] += e.weight;
    full.emplace_back(r, c, -e.weight);
    full.emplace_back(c, r, -e.weight);
    if (r != last && c != last) {
      grounded.emplace_back(r, c, -e.weight);
      grounded.emplace_back(c, r, -e.weight);
    }
  }
  for (std::size_t k = 0; k < dim; ++k) {
    auto kk = static_cast<Eigen::Index>(k);
    full.emplace_back(kk, kk, degree[k]);
    if (kk != last) grounded.emplace_back(kk, kk, degree[k]);
  }
  SpMat lap(last + 1, last + 1), lg(last, last);
  lap.setFromTriplets(full.begin(), full.end());
  lg.setFromTriplets(grounded.begin(), grounded.end());
  Eigen::SimplicialLDLT<SpMat> solver(lg);
  if (solver.info() != Eigen::Success) {
    throw ConvergenceError("grounded Laplacian factorization failed");
  }

  auto center = [](MatrixXd& x) { x.rowwise() -= x.colwise().mean(); };
  auto apply_pinv = [&](const MatrixXd& x) {
    MatrixXd b = x;
    center(b);
    MatrixXd y = MatrixXd::Zero(b.rows(), b.cols());
    y.topRows(last) = solver.solve(b.topRows(last));
    center(y);
    return y;
  };

  auto block = std::min<std::size_t>(kBlock, dim - 1);
  MatrixXd start = random_block(last + 1, static_cast<Eigen::Index>(block), 0x5eed1234ULL);
  center(start);
  Leading lead = leading_eigenpair(apply_pinv, start, 1e-11);
  if (!lead.converged) throw ConvergenceError("Fiedler iteration did not converge");

  VectorXd x = lead.vec;
  x.array() -= x.mean();
  x.normalize();
  spec.lambda2 = x.dot(lap * x);
  spec.iterations = lead.iterations;
  return spec;
}

SpectralInfo perron_spectral(const SparseNetwork& w) {
  if (w.empty()) throw InputError("perron_spectral needs a nonzero matrix");
  const auto m = static_cast<Eigen::Index>(w.rows());
  const auto n = static_cast<Eigen::Index>(w.cols());
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(w.nnz());
  for (const auto& e : w.entries()) {
    trips.emplace_back(static_cast<Eigen::Index>(e.row), static_cast<Eigen::Index>(e.col),
                       e.weight);
  }
  SpMat mat(m, n);
  mat.setFromTriplets(trips.begin(), trips.end());
  SpMat mat_t = mat.transpose();

  auto gram = [&](const MatrixXd& v) -> MatrixXd {
    MatrixXd wv = mat * v;
    return mat_t * wv;
  };
  auto block = static_cast<Eigen::Index>(std::min<std::size_t>(kBlock, w.cols()));
  MatrixXd start = random_block(n, block, 0x9e3779b97f4a7c15ULL);
  start.col(0).setOnes();
  Leading lead = leading_eigenpair(gram, start, 1e-13);
  if (!lead.converged) throw ConvergenceError("Perron iteration did not converge");

  VectorXd v = lead.vec;
  if (v.sum() < 0.0) v = -v;
  // Perron vectors are nonnegative; drop round-off below zero.
  v = v.cwiseMax(0.0);
  v.normalize();
  VectorXd u = mat * v;
  double sigma = u.norm();
  if (!(sigma > 0.0)) throw ConvergenceError("Perron iteration collapsed to zero");
  u /= sigma;
  if (u.sum() < 0.0) u = -u;
  u = u.cwiseMax(0.0);
  u.normalize();

  SpectralInfo info;
  info.lambda1 = u.dot(mat * v);
  info.u1.assign(u.data(), u.data() + u.size());
  info.v1.assign(v.data(), v.data() + v.size());
  info.iterations = lead.iterations;
  return info;
}

double leading_eigenvalue(const SparseNetwork& w) {
  if (w.empty()) return 0.0;
  return perron_spectral(w).lambda1;
}

}  // namespace ipfnet
