#include "oracles.hpp"

#include <functional>
#include <stdexcept>

namespace oracle {

std::vector<double> heat_loop(std::vector<double> u, double r, int steps) {
  const std::size_t n = u.size();
  std::vector<double> next(n);
  for (int k = 0; k < steps; ++k) {
    next[0] = u[0];
    next[n - 1] = u[n - 1];
    for (std::size_t i = 1; i + 1 < n; ++i) next[i] = r * u[i - 1] + (1 - 2 * r) * u[i] + r * u[i + 1];
    u.swap(next);
  }
  return u;
}

std::vector<Read> cross_reads(int num_pes, int points_per_pe) {
  std::vector<Read> out;
  const long n = static_cast<long>(num_pes) * points_per_pe;
  for (long i = 1; i < n - 1; ++i) {
    if ((i - 1) / points_per_pe != i / points_per_pe) out.push_back({i, i - 1});
    if ((i + 1) / points_per_pe != i / points_per_pe) out.push_back({i, i + 1});
  }
  return out;
}

BufferedGrid::BufferedGrid(int num_pes, int points_per_pe, double r,
                           std::vector<std::vector<double>> history)
    : num_pes_(num_pes),
      points_per_pe_(points_per_pe),
      r_(r),
      published_(std::move(history)),
      reads_(cross_reads(num_pes, points_per_pe)) {}

void BufferedGrid::step(const std::vector<int>& delays) {
  if (delays.size() != reads_.size()) throw std::invalid_argument("oracle: wrong delay count");
  const auto& cur = published_.front();
  const long n = static_cast<long>(cur.size());
  auto value = [&](long point, long neighbor) {
    for (std::size_t e = 0; e < reads_.size(); ++e) {
      if (reads_[e].point == point && reads_[e].neighbor == neighbor) {
        return published_.at(static_cast<std::size_t>(delays[e]))[static_cast<std::size_t>(neighbor)];
      }
    }
    return cur[static_cast<std::size_t>(neighbor)];
  };
  std::vector<double> next(cur.size());
  next.front() = cur.front();
  next.back() = cur.back();
  for (long i = 1; i < n - 1; ++i) {
    next[static_cast<std::size_t>(i)] =
        r_ * value(i, i - 1) + (1 - 2 * r_) * cur[static_cast<std::size_t>(i)] + r_ * value(i, i + 1);
  }
  published_.insert(published_.begin(), std::move(next));
  published_.pop_back();
}

Eigen::VectorXd BufferedGrid::stacked() const {
  const std::size_t n = published_.front().size();
  Eigen::VectorXd x(static_cast<Eigen::Index>(n * published_.size()));
  for (std::size_t b = 0; b < published_.size(); ++b)
    for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(b * n + i)) = published_[b][i];
  return x;
}

Eigen::MatrixXd mode_by_columns(int num_pes, int points_per_pe, double r, int q,
                                const std::vector<int>& delays) {
  const std::size_t n = static_cast<std::size_t>(num_pes) * points_per_pe;
  const auto dim = static_cast<Eigen::Index>(n * q);
  Eigen::MatrixXd w(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    std::vector<std::vector<double>> hist(static_cast<std::size_t>(q), std::vector<double>(n, 0.0));
    hist[static_cast<std::size_t>(j) / n][static_cast<std::size_t>(j) % n] = 1.0;
    BufferedGrid g(num_pes, points_per_pe, r, hist);
    g.step(delays);
    w.col(j) = g.stacked();
  }
  return w;
}

Eigen::MatrixXd projector(int grid_size, int q) {
  const int dim = grid_size * q;
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(dim, dim);
  for (int b = 0; b < q; ++b) {
    for (int j = 0; j < grid_size; ++j) {
      const double t = static_cast<double>(j) / (grid_size - 1);
      psi(b * grid_size + j, 0) = 1.0 - t;
      psi(b * grid_size + j, grid_size - 1) = t;
    }
  }
  return psi;
}

Eigen::MatrixXd brute_force_expected(int num_pes, int points_per_pe, double r, int q,
                                     const std::vector<std::vector<double>>& probs) {
  const auto edges = cross_reads(num_pes, points_per_pe).size();
  const int n = num_pes * points_per_pe;
  const Eigen::MatrixXd psi = projector(n, q);
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(n * q, n * q);
  std::vector<int> delays(edges, 0);
  std::function<void(std::size_t, double)> rec = [&](std::size_t e, double p) {
    if (e == edges) {
      sum += p * (mode_by_columns(num_pes, points_per_pe, r, q, delays) - psi);
      return;
    }
    for (int d = 0; d < q; ++d) {
      delays[e] = d;
      rec(e + 1, p * probs[e][static_cast<std::size_t>(d)]);
    }
  };
  rec(0, 1.0);
  return sum;
}

Eigen::MatrixXd lyapunov_series(const Eigen::MatrixXd& w, double tol, int max_terms) {
  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(w.rows(), w.cols());
  Eigen::MatrixXd wk = w;
  for (int k = 1; k < max_terms; ++k) {
    const Eigen::MatrixXd term = wk.transpose() * wk;
    p += term;
    if (term.norm() <= tol * p.norm()) return p;
    wk = (w * wk).eval();
  }
  throw std::runtime_error("oracle series did not converge");
}

Eigen::VectorXd mean_error(const Eigen::MatrixXd& lambda, const Eigen::VectorXd& e0, int k) {
  Eigen::VectorXd e = e0;
  for (int i = 0; i < k; ++i) e = (lambda * e).eval();
  return e;
}

}  // namespace oracle
