#include "asyncheat/modes.hpp"

#include "asyncheat/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace asyncheat::modes {

using Eigen::Index;

AugmentedSpec::AugmentedSpec(grid::GridSpec grid, int buffer_len)
    : grid_(std::move(grid)), buffer_len_(buffer_len) {
  if (buffer_len < 1) throw std::invalid_argument("buffer_len must be >= 1");
}

std::vector<DependencyEdge> dependency_edges(const grid::GridSpec& spec) {
  std::vector<DependencyEdge> edges;
  const Index nn = spec.size();
  for (Index i = 1; i + 1 < nn; ++i) {
    const int pe = spec.pe_of(i);
    if (spec.pe_of(i - 1) != pe) edges.push_back({i, i - 1, Side::left});
    if (spec.pe_of(i + 1) != pe) edges.push_back({i, i + 1, Side::right});
  }
  return edges;
}

std::optional<std::uint64_t> mode_count(const AugmentedSpec& aspec) {
  const auto edges = dependency_edges(aspec.grid()).size();
  const auto q = static_cast<std::uint64_t>(aspec.buffer_len());
  std::uint64_t count = 1;
  for (std::size_t e = 0; e < edges; ++e) {
    if (q > 1 && count > std::numeric_limits<std::uint64_t>::max() / q) return std::nullopt;
    count *= q;
  }
  return count;
}

std::string mode_count_text(const AugmentedSpec& aspec) {
  const auto edges = dependency_edges(aspec.grid()).size();
  std::string text = std::to_string(aspec.buffer_len()) + "^" + std::to_string(edges);
  if (auto m = mode_count(aspec)) text += " = " + std::to_string(*m);
  return text;
}

ModeCapExceeded::ModeCapExceeded(std::string count, std::uint64_t cap)
    : std::runtime_error("mode count " + count + " exceeds cap " + std::to_string(cap) +
                         "; reduce num_pes or buffer_len"),
      count_(std::move(count)),
      cap_(cap) {}

DelayPattern most_delayed_pattern(const AugmentedSpec& aspec) {
  const auto edges = dependency_edges(aspec.grid()).size();
  return DelayPattern{std::vector<int>(edges, aspec.buffer_len() - 1)};
}

namespace {

void check_pattern(const AugmentedSpec& aspec, std::size_t num_edges,
                   const DelayPattern& pattern) {
  if (pattern.delays.size() != num_edges) {
    throw std::invalid_argument("delay pattern has " + std::to_string(pattern.delays.size()) +
                                " entries, expected " + std::to_string(num_edges));
  }
  for (int d : pattern.delays) {
    if (d < 0 || d >= aspec.buffer_len()) {
      throw std::invalid_argument("delay " + std::to_string(d) + " outside [0, " +
                                  std::to_string(aspec.buffer_len() - 1) + "]");
    }
  }
}

// Everything except the stale neighbour reads: boundary identity rows, centre
// weights, same-PE neighbour reads and the history shift blocks.
Eigen::MatrixXd fixed_part(const AugmentedSpec& aspec) {
  const auto& spec = aspec.grid();
  const Index nn = spec.size();
  const Index dim = aspec.dim();
  const double r = spec.r();
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(dim, dim);
  w(0, 0) = 1.0;
  w(nn - 1, nn - 1) = 1.0;
  for (Index i = 1; i + 1 < nn; ++i) {
    w(i, i) = 1.0 - 2.0 * r;
    if (spec.pe_of(i - 1) == spec.pe_of(i)) w(i, i - 1) = r;
    if (spec.pe_of(i + 1) == spec.pe_of(i)) w(i, i + 1) = r;
  }
  for (int b = 1; b < aspec.buffer_len(); ++b) {
    w.block(b * nn, (b - 1) * nn, nn, nn).setIdentity();
  }
  return w;
}

}  // namespace

ModeMatrix build_mode_matrix(const AugmentedSpec& aspec, const DelayPattern& pattern) {
  const auto edges = dependency_edges(aspec.grid());
  check_pattern(aspec, edges.size(), pattern);
  const Index nn = aspec.grid_size();
  const double r = aspec.grid().r();
  Eigen::MatrixXd w = fixed_part(aspec);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    w(edges[e].point, pattern.delays[e] * nn + edges[e].neighbor) = r;
  }
  return {std::move(w), pattern};
}

std::vector<ModeMatrix> enumerate_modes(const AugmentedSpec& aspec, std::uint64_t cap) {
  const auto count = mode_count(aspec);
  if (!count || *count > cap) throw ModeCapExceeded(mode_count_text(aspec), cap);

  const auto num_edges = dependency_edges(aspec.grid()).size();
  const int q = aspec.buffer_len();
  std::vector<ModeMatrix> out;
  out.reserve(static_cast<std::size_t>(*count));
  DelayPattern pattern{std::vector<int>(num_edges, 0)};
  for (std::uint64_t j = 0; j < *count; ++j) {
    out.push_back(build_mode_matrix(aspec, pattern));
    // Odometer increment; the last edge varies fastest.
    for (std::size_t e = num_edges; e-- > 0;) {
      if (++pattern.delays[e] < q) break;
      pattern.delays[e] = 0;
    }
  }
  return out;
}

Eigen::VectorXd SteadyStateProjector::apply(const Eigen::VectorXd& x) const {
  if (x.size() != v1.size()) throw std::invalid_argument("projector: dimension mismatch");
  return v1 * x(0) + v2 * x(grid_size - 1);
}

SteadyStateProjector build_projector(const AugmentedSpec& aspec) {
  const Index nn = aspec.grid_size();
  const Index dim = aspec.dim();
  const double span = static_cast<double>(nn - 1);
  Eigen::VectorXd mu1(nn);
  Eigen::VectorXd mu2(nn);
  for (Index j = 0; j < nn; ++j) {
    const double t = static_cast<double>(j);
    mu1(j) = (span - t) / span;
    mu2(j) = t / span;
  }
  SteadyStateProjector proj;
  proj.grid_size = nn;
  proj.v1 = mu1.replicate(aspec.buffer_len(), 1);
  proj.v2 = mu2.replicate(aspec.buffer_len(), 1);
  proj.s1 = Eigen::RowVectorXd::Zero(dim);
  proj.s2 = Eigen::RowVectorXd::Zero(dim);
  proj.s1(0) = 1.0;
  proj.s2(nn - 1) = 1.0;
  proj.psi = proj.v1 * proj.s1 + proj.v2 * proj.s2;
  return proj;
}

Eigen::MatrixXd deflate(const Eigen::MatrixXd& w, const SteadyStateProjector& proj) {
  if (w.rows() != proj.psi.rows() || w.cols() != proj.psi.cols()) {
    throw std::invalid_argument("deflate: mode matrix and projector dimensions differ");
  }
  Eigen::MatrixXd wt = w - proj.psi;
  const double rho = linalg::spectral_radius(wt);
  if (rho >= 1.0 - 1e-12) {
    throw DeflationError("deflated matrix has spectral radius " + std::to_string(rho) +
                         " >= 1; mode construction is inconsistent");
  }
  return wt;
}

SwitchingDistribution::SwitchingDistribution(std::vector<std::vector<double>> per_edge)
    : per_edge_(std::move(per_edge)) {
  if (!per_edge_.empty()) buffer_len_ = static_cast<int>(per_edge_.front().size());
  for (std::size_t e = 0; e < per_edge_.size(); ++e) {
    const auto& p = per_edge_[e];
    if (static_cast<int>(p.size()) != buffer_len_ || p.empty()) {
      throw std::invalid_argument("edge " + std::to_string(e) +
                                  ": every edge needs one probability per delay");
    }
    double sum = 0.0;
    for (double x : p) {
      if (!(x >= 0.0) || x > 1.0) {
        throw std::invalid_argument("edge " + std::to_string(e) +
                                    ": probabilities must lie in [0, 1]");
      }
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw std::invalid_argument("edge " + std::to_string(e) + ": probabilities sum to " +
                                  std::to_string(sum));
    }
  }
}

SwitchingDistribution SwitchingDistribution::uniform(std::size_t num_edges, int buffer_len) {
  if (buffer_len < 1) throw std::invalid_argument("buffer_len must be >= 1");
  return identical(num_edges, std::vector<double>(buffer_len, 1.0 / buffer_len));
}

SwitchingDistribution SwitchingDistribution::identical(std::size_t num_edges,
                                                       std::vector<double> probs) {
  SwitchingDistribution d(std::vector<std::vector<double>>(num_edges, probs));
  d.buffer_len_ = static_cast<int>(probs.size());
  return d;
}

double mode_probability(const DelayPattern& pattern, const SwitchingDistribution& dist) {
  if (pattern.delays.size() != dist.num_edges()) {
    throw std::invalid_argument("mode_probability: pattern and distribution sizes differ");
  }
  double p = 1.0;
  for (std::size_t e = 0; e < pattern.delays.size(); ++e) {
    p *= dist.edge(e).at(static_cast<std::size_t>(pattern.delays[e]));
  }
  return p;
}

namespace {

void check_distribution(const AugmentedSpec& aspec, std::size_t num_edges,
                        const SwitchingDistribution& dist) {
  if (dist.num_edges() != num_edges) {
    throw std::invalid_argument("distribution has " + std::to_string(dist.num_edges()) +
                                " edges, grid has " + std::to_string(num_edges));
  }
  if (num_edges > 0 && dist.buffer_len() != aspec.buffer_len()) {
    throw std::invalid_argument("distribution covers " + std::to_string(dist.buffer_len()) +
                                " delays, buffer length is " +
                                std::to_string(aspec.buffer_len()));
  }
}

}  // namespace

Eigen::MatrixXd expected_matrix(const AugmentedSpec& aspec, const SwitchingDistribution& dist) {
  const auto edges = dependency_edges(aspec.grid());
  check_distribution(aspec, edges.size(), dist);
  const Index nn = aspec.grid_size();
  const double r = aspec.grid().r();
  Eigen::MatrixXd lambda = fixed_part(aspec);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& p = dist.edge(e);
    for (int d = 0; d < aspec.buffer_len(); ++d) {
      lambda(edges[e].point, d * nn + edges[e].neighbor) += r * p[static_cast<std::size_t>(d)];
    }
  }
  lambda -= build_projector(aspec).psi;
  return lambda;
}

Eigen::MatrixXd expected_matrix_enumerated(const AugmentedSpec& aspec,
                                           const SwitchingDistribution& dist,
                                           std::uint64_t cap) {
  check_distribution(aspec, dependency_edges(aspec.grid()).size(), dist);
  const auto proj = build_projector(aspec);
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(aspec.dim(), aspec.dim());
  for (const auto& mode : enumerate_modes(aspec, cap)) {
    const double pi = mode_probability(mode.pattern, dist);
    if (pi != 0.0) lambda += pi * (mode.w - proj.psi);
  }
  return lambda;
}

EigenstructureReport verify_eigenstructure(const Eigen::MatrixXd& w,
                                           const SteadyStateProjector& proj, double tolerance) {
  if (w.rows() != proj.psi.rows() || w.cols() != proj.psi.cols()) {
    throw std::invalid_argument("verify_eigenstructure: dimensions differ");
  }
  EigenstructureReport report;
  report.right_residuals = {(w * proj.v1 - proj.v1).norm(), (w * proj.v2 - proj.v2).norm()};
  report.left_residuals = {(proj.s1 * w - proj.s1).norm(), (proj.s2 * w - proj.s2).norm()};
  report.inf_norm = linalg::inf_norm(w);

  Eigen::EigenSolver<Eigen::MatrixXd> es(w, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) return report;
  const Eigen::VectorXcd ev = es.eigenvalues();
  std::vector<double> moduli(static_cast<std::size_t>(ev.size()));
  for (Index i = 0; i < ev.size(); ++i) {
    moduli[static_cast<std::size_t>(i)] = std::abs(ev(i));
    if (std::abs(ev(i) - std::complex<double>(1.0, 0.0)) <= tolerance) ++report.unit_eigenvalues;
    if (std::abs(ev(i)) >= 1.0 - tolerance) ++report.unit_modulus;
  }
  std::sort(moduli.begin(), moduli.end(), std::greater<>());
  moduli.resize(std::min<std::size_t>(3, moduli.size()));
  report.leading_moduli = moduli;

  const bool residuals_ok =
      std::max({report.right_residuals[0], report.right_residuals[1], report.left_residuals[0],
                report.left_residuals[1]}) < tolerance;
  const bool third_below_one = moduli.size() < 3 || moduli[2] < 1.0 - tolerance;
  report.passed = residuals_ok && report.unit_eigenvalues == 2 && report.unit_modulus == 2 &&
                  third_below_one && std::abs(report.inf_norm - 1.0) <= tolerance;
  return report;
}

}  // namespace asyncheat::modes
