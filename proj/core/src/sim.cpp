#include "asyncheat/sim.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace asyncheat::sim {

using Eigen::Index;
using Eigen::VectorXd;

std::uint64_t run_seed(std::uint64_t base, std::uint64_t index) noexcept {
  std::uint64_t z = index + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return base ^ z;
}

double uniform01(Rng& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

AsyncSimState::AsyncSimState(std::vector<grid::StateVector> history, long step)
    : history_(std::move(history)), step_(step) {
  if (history_.empty()) throw std::invalid_argument("history must hold at least one state");
  for (const auto& u : history_) {
    if (u.size() != history_.front().size()) {
      throw std::invalid_argument("history states differ in size");
    }
  }
  scratch_.resize(history_.front().size());
}

VectorXd AsyncSimState::augmented() const {
  const Index n = history_.front().size();
  VectorXd x(n * static_cast<Index>(history_.size()));
  for (std::size_t b = 0; b < history_.size(); ++b) {
    x.segment(static_cast<Index>(b) * n, n) = history_[b];
  }
  return x;
}

AsyncSimState init_state(const grid::StateVector& initial, int buffer_len) {
  if (buffer_len < 1) throw std::invalid_argument("buffer length must be >= 1");
  return AsyncSimState(std::vector<grid::StateVector>(static_cast<std::size_t>(buffer_len), initial),
                       0);
}

DelaySampler::DelaySampler(const modes::SwitchingDistribution& dist) {
  cdf_.reserve(dist.num_edges());
  for (std::size_t e = 0; e < dist.num_edges(); ++e) {
    const auto& p = dist.edge(e);
    std::vector<double> c(p.size());
    double acc = 0.0;
    for (std::size_t d = 0; d < p.size(); ++d) {
      acc += p[d];
      c[d] = acc;
    }
    cdf_.push_back(std::move(c));
  }
}

void DelaySampler::sample(Rng& rng, modes::DelayPattern& out) const {
  out.delays.resize(cdf_.size());
  for (std::size_t e = 0; e < cdf_.size(); ++e) {
    const double u = uniform01(rng);
    const auto& c = cdf_[e];
    std::size_t d = 0;
    // the last category absorbs any rounding shortfall of the cumulative sum
    while (d + 1 < c.size() && u >= c[d]) ++d;
    out.delays[e] = static_cast<int>(d);
  }
}

modes::DelayPattern sample_delays(Rng& rng, const modes::SwitchingDistribution& dist) {
  modes::DelayPattern p;
  DelaySampler(dist).sample(rng, p);
  return p;
}

AsyncStencil::AsyncStencil(const modes::AugmentedSpec& aspec) : aspec_(aspec), num_edges_(0) {
  const Index n = aspec.grid_size();
  left_edge_.assign(static_cast<std::size_t>(n), -1);
  right_edge_.assign(static_cast<std::size_t>(n), -1);
  const auto edges = modes::dependency_edges(aspec.grid());
  num_edges_ = edges.size();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    auto& slot = edges[e].side == modes::Side::left ? left_edge_ : right_edge_;
    slot[static_cast<std::size_t>(edges[e].point)] = static_cast<int>(e);
  }
}

namespace {

const VectorXd& buffer(const std::vector<VectorXd>& hist, const modes::DelayPattern& pattern,
                       int edge) {
  return hist[static_cast<std::size_t>(pattern.delays[static_cast<std::size_t>(edge)])];
}

}  // namespace

void AsyncStencil::step(AsyncSimState& state, const modes::DelayPattern& pattern) const {
  const Index n = aspec_.grid_size();
  if (state.buffer_len() != aspec_.buffer_len() || state.newest().size() != n) {
    throw std::invalid_argument("state does not match the stencil's augmented spec");
  }
  if (pattern.delays.size() != num_edges_) {
    throw std::invalid_argument("delay pattern has " + std::to_string(pattern.delays.size()) +
                                " entries, expected " + std::to_string(num_edges_));
  }
  for (int d : pattern.delays) {
    if (d < 0 || d >= state.buffer_len()) throw std::invalid_argument("delay outside buffer");
  }
  const double r = aspec_.grid().r();
  const double c = 1.0 - 2.0 * r;
  const auto& hist = state.history_;
  const VectorXd& cur = hist.front();
  VectorXd& out = state.scratch_;

  out(0) = cur(0);
  out(n - 1) = cur(n - 1);
  for (Index i = 1; i + 1 < n; ++i) {
    const int le = left_edge_[static_cast<std::size_t>(i)];
    const int re = right_edge_[static_cast<std::size_t>(i)];
    const double left = le < 0 ? cur(i - 1) : buffer(hist, pattern, le)(i - 1);
    const double right = re < 0 ? cur(i + 1) : buffer(hist, pattern, re)(i + 1);
    out(i) = r * left + c * cur(i) + r * right;
  }
  // oldest buffer becomes scratch, new state goes to the front
  state.history_.back().swap(out);
  std::rotate(state.history_.rbegin(), state.history_.rbegin() + 1, state.history_.rend());
  ++state.step_;
}

AsyncSimState async_step(const AsyncSimState& state, const modes::DelayPattern& pattern,
                         const grid::GridSpec& spec) {
  AsyncSimState next = state;
  AsyncStencil(modes::AugmentedSpec(spec, state.buffer_len())).step(next, pattern);
  return next;
}

void RunConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("steps must be non-negative");
  if (initial.size() != aspec.grid_size()) {
    throw std::invalid_argument("initial condition has " + std::to_string(initial.size()) +
                                " entries, grid has " + std::to_string(aspec.grid_size()));
  }
  if (dist.num_edges() > 0 && dist.buffer_len() != aspec.buffer_len()) {
    throw std::invalid_argument("delay distribution support does not match buffer length");
  }
  if (dist.num_edges() != modes::dependency_edges(aspec.grid()).size()) {
    throw std::invalid_argument("delay distribution edge count does not match the grid");
  }
  for (double eps : epsilons) {
    if (!(eps > 0.0)) throw std::invalid_argument("epsilons must be positive");
  }
  for (int s : snapshot_steps) {
    if (s < 0 || s > steps) throw std::invalid_argument("snapshot step out of range");
  }
}

namespace {

// One ensemble member: state, generator and per-step error bookkeeping.
class RunEngine {
 public:
  RunEngine(const RunConfig& cfg, const AsyncStencil& stencil, const DelaySampler& sampler,
            const VectorXd& ramp, std::uint64_t run_index)
      : stencil_(stencil),
        sampler_(sampler),
        ramp_(ramp),
        state_(init_state(grid::with_boundary(cfg.initial, cfg.bc), cfg.aspec.buffer_len())),
        rng_(run_seed(cfg.seed, run_index)) {}

  void advance() {
    sampler_.sample(rng_, pattern_);
    stencil_.step(state_, pattern_);
  }

  struct Norms {
    double squared = 0.0;
    double err_inf = 0.0;
    double state_inf = 0.0;
  };

  // Writes e = X - X_ss into `e` (length Nnq) when non-null.
  Norms measure(double* e) const {
    Norms out;
    const Index n = ramp_.size();
    const auto& hist = state_.history();
    for (std::size_t b = 0; b < hist.size(); ++b) {
      const double* u = hist[b].data();
      for (Index i = 0; i < n; ++i) {
        const double d = u[i] - ramp_(i);
        out.squared += d * d;
        out.err_inf = std::max(out.err_inf, std::abs(d));
        out.state_inf = std::max(out.state_inf, std::abs(u[i]));
        if (e != nullptr) e[static_cast<Index>(b) * n + i] = d;
      }
    }
    return out;
  }

  const AsyncSimState& state() const noexcept { return state_; }

 private:
  const AsyncStencil& stencil_;
  const DelaySampler& sampler_;
  const VectorXd& ramp_;
  AsyncSimState state_;
  Rng rng_;
  modes::DelayPattern pattern_;
};

// Boundary ramp repeated over the buffers equals psi X(0) once the initial
// state carries the Dirichlet values.
VectorXd steady_ramp(const RunConfig& cfg) {
  return grid::steady_state_profile(cfg.aspec.grid(), cfg.bc);
}

bool wanted(const std::vector<int>& steps, int k) {
  return std::find(steps.begin(), steps.end(), k) != steps.end();
}

template <class F>
void parallel_for(std::size_t count, unsigned workers, F&& f) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  const unsigned used = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  std::vector<std::exception_ptr> errors(used);
  std::vector<std::thread> threads;
  threads.reserve(used);
  for (unsigned w = 0; w < used; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += used) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

constexpr int kChunk = 32;

}  // namespace

Trajectory run_trajectory(const RunConfig& cfg, std::uint64_t run_index) {
  cfg.validate();
  const AsyncStencil stencil(cfg.aspec);
  const DelaySampler sampler(cfg.dist);
  const VectorXd ramp = steady_ramp(cfg);
  RunEngine engine(cfg, stencil, sampler, ramp, run_index);

  Trajectory t;
  const auto len = static_cast<std::size_t>(cfg.steps) + 1;
  t.error_norms.reserve(len);
  t.error_inf_norms.reserve(len);
  t.state_inf_norms.reserve(len);
  for (int k = 0; k <= cfg.steps; ++k) {
    if (k > 0) engine.advance();
    const auto m = engine.measure(nullptr);
    t.error_norms.push_back(std::sqrt(m.squared));
    t.error_inf_norms.push_back(m.err_inf);
    t.state_inf_norms.push_back(m.state_inf);
    if (wanted(cfg.snapshot_steps, k)) t.snapshots[k] = engine.state().newest();
  }
  return t;
}

Trajectory run_sync_reference(const RunConfig& cfg) {
  cfg.validate();
  const auto& g = cfg.aspec.grid();
  const Index n = g.size();
  const double r = g.r();
  const double c = 1.0 - 2.0 * r;
  const VectorXd ramp = steady_ramp(cfg);
  VectorXd u = grid::with_boundary(cfg.initial, cfg.bc);
  VectorXd next(n);

  Trajectory t;
  for (int k = 0; k <= cfg.steps; ++k) {
    if (k > 0) {
      next(0) = u(0);
      next(n - 1) = u(n - 1);
      for (Index i = 1; i + 1 < n; ++i) next(i) = r * u(i - 1) + c * u(i) + r * u(i + 1);
      u.swap(next);
    }
    const VectorXd e = u - ramp;
    t.error_norms.push_back(e.norm());
    t.error_inf_norms.push_back(e.lpNorm<Eigen::Infinity>());
    t.state_inf_norms.push_back(u.lpNorm<Eigen::Infinity>());
    if (wanted(cfg.snapshot_steps, k)) t.snapshots[k] = u;
  }
  return t;
}

EnsembleResult run_ensemble(const RunConfig& cfg, const EnsembleOptions& options) {
  cfg.validate();
  if (options.num_runs < 1) throw std::invalid_argument("ensemble needs at least one run");
  for (int s : options.moment_steps) {
    if (s < 0 || s > cfg.steps) throw std::invalid_argument("moment step out of range");
  }
  const unsigned workers =
      options.workers != 0 ? options.workers : std::max(1u, std::thread::hardware_concurrency());

  const AsyncStencil stencil(cfg.aspec);
  const DelaySampler sampler(cfg.dist);
  const VectorXd ramp = steady_ramp(cfg);
  const auto runs = static_cast<std::size_t>(options.num_runs);
  const Index dim = cfg.aspec.dim();
  const auto num_eps = cfg.epsilons.size();

  std::vector<RunEngine> engines;
  engines.reserve(runs);
  for (std::size_t i = 0; i < runs; ++i) engines.emplace_back(cfg, stencil, sampler, ramp, i);

  EnsembleResult res;
  res.num_runs = options.num_runs;
  res.epsilons = cfg.epsilons;
  const auto len = static_cast<std::size_t>(cfg.steps) + 1;
  res.mean_error_norm.resize(len);
  res.mean_squared_norm.resize(len);
  res.max_error_inf_norm.resize(len);
  res.exceedance.assign(len, std::vector<double>(num_eps, 0.0));
  if (options.keep_run_norms) res.run_error_norms.assign(runs, std::vector<double>(len));
  if (options.keep_run_snapshots) res.run_snapshots.resize(runs);

  // Lockstep in chunks: every run advances kChunk steps and stores its error
  // vectors, then the chunk is reduced in run order.
  std::vector<double> errors(runs * kChunk * static_cast<std::size_t>(dim));
  std::vector<RunEngine::Norms> norms(runs * kChunk);
  std::vector<double> last_state_inf(runs, 0.0);
  std::vector<char> stable(runs, 1);
  const double inv_runs = 1.0 / static_cast<double>(runs);
  VectorXd mean(dim);
  VectorXd var(dim);

  for (int chunk_start = 0; chunk_start <= cfg.steps; chunk_start += kChunk) {
    throw_if_cancelled(options.cancel);
    const int chunk_len = std::min(kChunk, cfg.steps - chunk_start + 1);
    parallel_for(runs, workers, [&](std::size_t i) {
      auto& eng = engines[i];
      for (int s = 0; s < chunk_len; ++s) {
        const int k = chunk_start + s;
        if (k > 0) eng.advance();
        const std::size_t slot = i * kChunk + static_cast<std::size_t>(s);
        const auto m = eng.measure(errors.data() + slot * static_cast<std::size_t>(dim));
        norms[slot] = m;
        if (k > 0 && m.state_inf > last_state_inf[i]) stable[i] = 0;
        last_state_inf[i] = m.state_inf;
        if (options.keep_run_norms) {
          res.run_error_norms[i][static_cast<std::size_t>(k)] = std::sqrt(m.squared);
        }
        if (options.keep_run_snapshots && wanted(cfg.snapshot_steps, k)) {
          res.run_snapshots[i][k] = eng.state().newest();
        }
      }
    });

    for (int s = 0; s < chunk_len; ++s) {
      const int k = chunk_start + s;
      const auto ks = static_cast<std::size_t>(k);
      mean.setZero();
      double sq = 0.0;
      double mx = 0.0;
      for (std::size_t i = 0; i < runs; ++i) {
        const std::size_t slot = i * kChunk + static_cast<std::size_t>(s);
        mean += Eigen::Map<const VectorXd>(errors.data() + slot * static_cast<std::size_t>(dim),
                                           dim);
        const auto& m = norms[slot];
        sq += m.squared;
        mx = std::max(mx, m.err_inf);
        for (std::size_t j = 0; j < num_eps; ++j) {
          if (m.squared > cfg.epsilons[j]) res.exceedance[ks][j] += 1.0;
        }
      }
      mean *= inv_runs;
      res.mean_error_norm[ks] = mean.norm();
      res.mean_squared_norm[ks] = sq * inv_runs;
      res.max_error_inf_norm[ks] = mx;
      for (auto& x : res.exceedance[ks]) x *= inv_runs;

      if (wanted(options.moment_steps, k)) {
        StepMoments mom;
        mom.step = k;
        mom.mean = mean;
        var.setZero();
        for (std::size_t i = 0; i < runs; ++i) {
          const std::size_t slot = i * kChunk + static_cast<std::size_t>(s);
          var += (Eigen::Map<const VectorXd>(errors.data() + slot * static_cast<std::size_t>(dim),
                                             dim) -
                  mean)
                     .cwiseAbs2();
          mom.run_squared_norms.push_back(norms[slot].squared);
        }
        if (runs > 1) {
          mom.std_error = (var / static_cast<double>(runs - 1)).cwiseSqrt() /
                          std::sqrt(static_cast<double>(runs));
        } else {
          mom.std_error = VectorXd::Zero(dim);
        }
        res.moments.push_back(std::move(mom));
      }
    }
  }
  res.marginally_stable = std::all_of(stable.begin(), stable.end(), [](char c) { return c != 0; });
  return res;
}

}  // namespace asyncheat::sim
