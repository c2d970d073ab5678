#include "hcrf/conhcrf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "hcrf/errors.hpp"
#include "hcrf/reference.hpp"
#include "hcrf/rigidfit.hpp"

namespace hcrf {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

Vec3 rigid_message(std::span<const Vec3> positions, std::span<const Vec3> flows,
                   const Vec3& p, bool* degenerate) {
  std::vector<Vec3> warped(positions.size());
  for (std::size_t j = 0; j < positions.size(); ++j) warped[j] = positions[j] + flows[j];
  const auto fit = kabsch_fit(Correspondences(positions, warped));
  if (degenerate) *degenerate = fit.degenerate;
  return rigid_flow_at(fit.transform, p);
}

}  // namespace

void CrfConfig::validate() const {
  for (const auto& k : kernels) {
    if (!(k.alpha >= 0)) throw ConfigError("kernel alpha must be non-negative");
    if (!(k.theta > 0)) throw ConfigError("kernel theta must be positive");
  }
  if (!(beta >= 0)) throw ConfigError("beta must be non-negative");
  if (knn_k < 1) throw ConfigError("knn must be >= 1");
  if (max_iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(tolerance > 0)) throw ConfigError("tolerance must be positive");
}

KernelObservations make_observations(const PointCloud& cloud, const NormalField& normals,
                                     const CrfConfig& config) {
  KernelObservations obs;
  const auto n = static_cast<Eigen::Index>(cloud.size());
  for (const auto& spec : config.kernels) {
    Eigen::MatrixXd channel(3, n);
    if (spec.observation == Observation::normal && normals.normals.size() != cloud.size()) {
      throw InputError("normals are not aligned with the cloud");
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      channel.col(i) = spec.observation == Observation::position ? cloud[i]
                                                                  : normals.normals[i];
    }
    obs.channels.push_back(std::move(channel));
  }
  return obs;
}

double pairwise_kernel(const Eigen::VectorXd& ki, const Eigen::VectorXd& kj, double theta) {
  if (ki.size() != kj.size()) throw InputError("kernel observations differ in dimension");
  return std::exp(-(ki - kj).squaredNorm() / (2.0 * theta * theta));
}

double pairwise_energy(const Vec3& yi, const Vec3& yj, std::span<const KernelTerm> terms) {
  double w = 0.0;
  for (const auto& t : terms) w += t.alpha * t.k;
  return w * (yi - yj).squaredNorm();
}

double highorder_energy(const Vec3& yi, const Vec3& pi, std::span<const Vec3> region_positions,
                        std::span<const Vec3> region_flows, double beta) {
  if (region_positions.empty()) throw InputError("empty region");
  if (region_positions.size() != region_flows.size()) {
    throw InputError("region positions and flows differ in length");
  }
  if (beta == 0.0) return 0.0;
  const Vec3 g = rigid_message(region_positions, region_flows, pi, nullptr);
  return beta * (yi - g).squaredNorm();
}

Vec3 naive_region_flow(std::span<const Vec3> region_flows) {
  if (region_flows.empty()) throw InputError("empty region");
  Vec3 sum = Vec3::Zero();
  for (const auto& v : region_flows) sum += v;
  return sum / static_cast<double>(region_flows.size());
}

NeighborGraph self_neighbor_graph(const PointCloud& cloud, int k) {
  if (k < 1) throw ConfigError("knn must be >= 1");
  const auto with_self = knn_search(cloud, cloud, k + 1);
  std::vector<std::vector<std::size_t>> lists(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    for (auto j : with_self.neighbors(i)) {
      if (j != i && lists[i].size() < static_cast<std::size_t>(k)) lists[i].push_back(j);
    }
  }
  return NeighborGraph(std::move(lists), cloud.size());
}

CrfProblem::CrfProblem(const PointCloud& cloud, const FlowField& initial,
                       const NeighborGraph& graph, const SupervoxelPartition& partition,
                       const KernelObservations& observations, const CrfConfig& config)
    : config_(config), positions_(cloud.points()), initial_(initial.vectors()), graph_(graph),
      partition_(partition), observations_(observations) {
  config_.validate();
  const std::size_t n = positions_.size();
  if (initial_.size() != n) throw InputError("misaligned flow");
  if (graph_.size() != n || graph_.target_size() != n) {
    throw InputError("neighbor graph is not aligned with the cloud");
  }
  if (partition_.point_count() != n) throw InputError("partition is not aligned with the cloud");
  if (observations_.channels.size() != config_.kernels.size()) {
    throw InputError("one observation channel per kernel required");
  }
  for (const auto& ch : observations_.channels) {
    if (static_cast<std::size_t>(ch.cols()) != n) {
      throw InputError("observation channel is not aligned with the cloud");
    }
  }

  offsets_.resize(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) offsets_[i + 1] = offsets_[i] + graph_.neighbors(i).size();
  const std::size_t edges = offsets_[n];
  kernels_.assign(config_.kernels.size(), std::vector<double>(edges, 0.0));
  weights_.assign(edges, 0.0);
  weight_sums_.assign(n, 0.0);

  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto nbrs = graph_.neighbors(i);
    double sum = 0.0;
    for (std::size_t s = 0; s < nbrs.size(); ++s) {
      const std::size_t e = offsets_[i] + s;
      double w = 0.0;
      for (std::size_t c = 0; c < config_.kernels.size(); ++c) {
        const auto& ch = observations_.channels[c];
        const double theta = config_.kernels[c].theta;
        const double k =
            std::exp(-(ch.col(i) - ch.col(nbrs[s])).squaredNorm() / (2.0 * theta * theta));
        kernels_[c][e] = k;
        w += config_.kernels[c].alpha * k;
      }
      weights_[e] = w;
      sum += w;
    }
    weight_sums_[i] = sum;
  }
}

MeanFieldState CrfProblem::initial_state() const {
  MeanFieldState state;
  state.mu = initial_;
  state.sigma.resize(size());
  for (std::size_t i = 0; i < size(); ++i) {
    state.sigma[i] = 1.0 / (2.0 * (1.0 + 2.0 * weight_sums_[i] + config_.beta));
  }
  return state;
}

std::vector<Vec3> region_messages(std::span<const Vec3> mu, const CrfProblem& problem,
                                  std::size_t* degenerate_fits) {
  const auto& cfg = problem.config();
  const auto& pos = problem.positions();
  const auto& regions = problem.partition().regions();
  std::vector<Vec3> out(problem.size(), Vec3::Zero());
  std::size_t degenerate = 0;

  if (!cfg.exact_leave_one_out) {
    // One fit per region on (P_V, P_V + M_V), shared by all its points.
    const auto r_count = static_cast<std::ptrdiff_t>(regions.size());
#pragma omp parallel for schedule(dynamic) reduction(+ : degenerate)
    for (std::ptrdiff_t r = 0; r < r_count; ++r) {
      const auto& region = regions[r];
      std::vector<Vec3> p(region.size());
      std::vector<Vec3> y(region.size());
      for (std::size_t s = 0; s < region.size(); ++s) {
        p[s] = pos[region[s]];
        y[s] = mu[region[s]];
      }
      if (cfg.region_term == RegionTerm::naive_mean) {
        const Vec3 mean = naive_region_flow(y);
        for (auto i : region) out[i] = mean;
        continue;
      }
      std::vector<Vec3> d(region.size());
      for (std::size_t s = 0; s < region.size(); ++s) d[s] = p[s] + y[s];
      const auto fit = kabsch_fit(Correspondences(p, d));
      if (fit.degenerate) ++degenerate;
      for (auto i : region) out[i] = rigid_flow_at(fit.transform, pos[i]);
    }
  } else {
    // Per-point fit on V − i.
    const auto n = static_cast<std::ptrdiff_t>(problem.size());
#pragma omp parallel for schedule(dynamic, 64) reduction(+ : degenerate)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto& region = regions[problem.partition().label(i)];
      if (region.size() < 2) {
        ++degenerate;
        continue;  // translation 0
      }
      std::vector<Vec3> p;
      std::vector<Vec3> y;
      p.reserve(region.size() - 1);
      y.reserve(region.size() - 1);
      for (auto j : region) {
        if (j == static_cast<std::size_t>(i)) continue;
        p.push_back(pos[j]);
        y.push_back(mu[j]);
      }
      if (cfg.region_term == RegionTerm::naive_mean) {
        out[i] = naive_region_flow(y);
        continue;
      }
      bool deg = false;
      out[i] = rigid_message(p, y, pos[i], &deg);
      if (deg) ++degenerate;
    }
  }
  if (degenerate_fits) *degenerate_fits = degenerate;
  return out;
}

MeanFieldState mean_field_step(const MeanFieldState& state, const CrfProblem& problem,
                               StepTimings* timings) {
  const std::size_t n = problem.size();
  if (state.mu.size() != n) throw InputError("mean-field state is not aligned with the cloud");
  const auto& cfg = problem.config();

  MeanFieldState next;
  next.iteration = state.iteration + 1;

  auto t0 = Clock::now();
  std::vector<Vec3> hat;
  if (cfg.beta > 0.0) {
    hat = region_messages(state.mu, problem, &next.degenerate_fits);
  } else {
    hat.assign(n, Vec3::Zero());
  }
  if (timings) timings->highorder_ms += elapsed_ms(t0);

  t0 = Clock::now();
  next.mu.resize(n);
  next.sigma.resize(n);
  const auto& z = problem.initial();
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto nbrs = problem.graph().neighbors(i);
    Vec3 tilde = Vec3::Zero();
    for (std::size_t s = 0; s < nbrs.size(); ++s) tilde += problem.weight(i, s) * state.mu[nbrs[s]];
    const Vec3 bar_mu = z[i] + 2.0 * tilde + cfg.beta * hat[i];
    const double bar_sigma = 1.0 + 2.0 * problem.weight_sum(i) + cfg.beta;
    next.mu[i] = bar_mu / bar_sigma;
    next.sigma[i] = 1.0 / (2.0 * bar_sigma);
  }
  if (timings) timings->pairwise_ms += elapsed_ms(t0);
  return next;
}

double total_energy(const FlowField& flow, const CrfProblem& problem) {
  const std::size_t n = problem.size();
  if (flow.size() != n) throw InputError("misaligned flow");
  const auto& y = flow.vectors();
  const auto& pos = problem.positions();
  const auto& cfg = problem.config();
  std::vector<double> per_point(n, 0.0);

  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 64)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    double e = unary_energy(y[i], problem.initial()[i]);
    const auto nbrs = problem.graph().neighbors(i);
    for (std::size_t s = 0; s < nbrs.size(); ++s) {
      e += problem.weight(i, s) * (y[i] - y[nbrs[s]]).squaredNorm();
    }
    const auto& region = problem.partition().regions()[problem.partition().label(i)];
    if (cfg.beta > 0.0 && region.size() > 1) {
      std::vector<Vec3> p;
      std::vector<Vec3> f;
      for (auto j : region) {
        if (j == static_cast<std::size_t>(i)) continue;
        p.push_back(pos[j]);
        f.push_back(y[j]);
      }
      e += highorder_energy(y[i], pos[i], p, f, cfg.beta);
    }
    per_point[i] = e;
  }
  double total = 0.0;
  for (double e : per_point) total += e;
  return total;
}

RefineResult refine(const CrfProblem& problem, Execution exec) {
  const auto start = Clock::now();
  RefineResult result;
  MeanFieldState state = problem.initial_state();
  StepTimings timings;
  const auto& cfg = problem.config();
  for (int it = 0; it < cfg.max_iterations; ++it) {
    MeanFieldState next = exec == Execution::parallel ? mean_field_step(state, problem, &timings)
                                                      : reference::mean_field_step(state, problem);
    double delta = 0.0;
    for (std::size_t i = 0; i < problem.size(); ++i) {
      if (!is_finite(next.mu[i])) {
        throw NumericalError("non-finite mean after iteration " + std::to_string(it + 1));
      }
      delta = std::max(delta, (next.mu[i] - state.mu[i]).norm());
    }
    state = std::move(next);
    result.iterations = it + 1;
    result.final_delta = delta;
    if (delta < cfg.tolerance) break;
  }
  result.flow = FlowField(state.mu);
  result.state = std::move(state);
  result.pairwise_ms = timings.pairwise_ms;
  result.highorder_ms = timings.highorder_ms;
  result.total_ms = elapsed_ms(start);
  return result;
}

RefineResult refine(const PointCloud& cloud, const FlowField& initial_flow,
                    const SupervoxelPartition& partition,
                    const KernelObservations& observations, const CrfConfig& config,
                    Execution exec) {
  const auto start = Clock::now();
  config.validate();
  if (initial_flow.size() != cloud.size()) throw InputError("misaligned flow");
  const auto k = std::min<std::size_t>(static_cast<std::size_t>(config.knn_k),
                                       cloud.size() - 1);
  NeighborGraph graph = k == 0 ? NeighborGraph(std::vector<std::vector<std::size_t>>(cloud.size()),
                                               cloud.size())
                               : self_neighbor_graph(cloud, static_cast<int>(k));
  const CrfProblem problem(cloud, initial_flow, graph, partition, observations, config);
  const double setup_ms = elapsed_ms(start);
  RefineResult result = refine(problem, exec);
  result.setup_ms = setup_ms;
  result.total_ms = elapsed_ms(start);
  return result;
}

}  // namespace hcrf
