#include "hcrf/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hcrf/errors.hpp"
#include "hcrf/rigidfit.hpp"

namespace hcrf::reference {

NeighborGraph knn_search(const PointCloud& target, const PointCloud& queries, int k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), target.size());
  std::vector<std::vector<std::size_t>> lists(queries.size());
  std::vector<std::size_t> order(target.size());
  std::vector<double> dist(target.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (std::size_t j = 0; j < target.size(); ++j) dist[j] = (target[j] - queries[i]).squaredNorm();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });
    lists[i].assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(kk));
  }
  return NeighborGraph(std::move(lists), target.size());
}

MeanFieldState mean_field_step(const MeanFieldState& state, const CrfProblem& problem) {
  const std::size_t n = problem.size();
  if (state.mu.size() != n) throw InputError("mean-field state is not aligned with the cloud");
  const auto& cfg = problem.config();
  const auto& pos = problem.positions();
  const auto& obs = problem.observations();
  const auto& partition = problem.partition();

  MeanFieldState next;
  next.iteration = state.iteration + 1;

  // Message passing from supervoxels.
  std::vector<Vec3> hat(n, Vec3::Zero());
  if (cfg.beta > 0.0) {
    for (const auto& region : partition.regions()) {
      for (auto i : region) {
        std::vector<Vec3> p;
        std::vector<Vec3> y;
        for (auto j : region) {
          if (cfg.exact_leave_one_out && j == i) continue;
          p.push_back(pos[j]);
          y.push_back(state.mu[j]);
        }
        if (p.empty()) {
          ++next.degenerate_fits;
          continue;
        }
        if (cfg.region_term == RegionTerm::naive_mean) {
          hat[i] = naive_region_flow(y);
          continue;
        }
        std::vector<Vec3> d(p.size());
        for (std::size_t s = 0; s < p.size(); ++s) d[s] = p[s] + y[s];
        const auto fit = kabsch_fit(Correspondences(p, d));
        hat[i] = rigid_flow_at(fit.transform, pos[i]);
        // Count a shared region fit once.
        if (fit.degenerate && (cfg.exact_leave_one_out || i == region.front())) {
          ++next.degenerate_fits;
        }
      }
    }
  }

  // Message passing from neighboring points, weighted sum, normalization.
  next.mu.resize(n);
  next.sigma.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 bar_mu = problem.initial()[i] + cfg.beta * hat[i];
    double bar_sigma = 1.0 + cfg.beta;
    for (std::size_t c = 0; c < cfg.kernels.size(); ++c) {
      Vec3 tilde_mu = Vec3::Zero();
      double tilde_sigma = 0.0;
      for (auto j : problem.graph().neighbors(i)) {
        const double k = pairwise_kernel(obs.channels[c].col(i), obs.channels[c].col(j),
                                         cfg.kernels[c].theta);
        tilde_mu += k * state.mu[j];
        tilde_sigma += k;
      }
      bar_mu += 2.0 * cfg.kernels[c].alpha * tilde_mu;
      bar_sigma += 2.0 * cfg.kernels[c].alpha * tilde_sigma;
    }
    next.mu[i] = bar_mu / bar_sigma;
    next.sigma[i] = 1.0 / (2.0 * bar_sigma);
  }
  return next;
}

FlowEmbedding flow_embedding(const PointCloud& cloud_t, const PointCloud& cloud_t1,
                             const NeighborGraph& graph, const EmbeddingConfig& config) {
  if (!cloud_t.has_features() || !cloud_t1.has_features()) {
    throw InputError("features required");
  }
  config.validate(cloud_t.feature_dim());
  FlowEmbedding out(static_cast<Eigen::Index>(cloud_t.size()), config.cost_dim());
  for (std::size_t i = 0; i < cloud_t.size(); ++i) {
    const auto nbrs = graph.neighbors(i);
    const auto m = static_cast<Eigen::Index>(nbrs.size());
    const Eigen::VectorXd hbar = pseudo_cost(cloud_t.features()[i], cloud_t[i], config.h);
    Eigen::MatrixXd costs(config.cost_dim(), m);
    Eigen::MatrixXd logits(config.cost_dim(), m);
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto j = nbrs[s];
      costs.col(s) = matching_cost(cloud_t.features()[i], cloud_t1.features()[j], cloud_t[i],
                                   cloud_t1[j], config.h);
      const Eigen::VectorXd u = costs.col(s) - hbar;
      const Eigen::VectorXd enc = position_encoding(cloud_t[i], cloud_t1[j], config.ms);
      Eigen::VectorXd x(u.size() + enc.size());
      x << u, enc;
      logits.col(s) = config.ma.forward(x);
    }
    for (Eigen::Index c = 0; c < config.cost_dim(); ++c) {
      double denom = 0.0;
      const double top = logits.row(c).maxCoeff();
      for (Eigen::Index s = 0; s < m; ++s) denom += std::exp(logits(c, s) - top);
      double acc = 0.0;
      for (Eigen::Index s = 0; s < m; ++s) {
        acc += std::exp(logits(c, s) - top) / denom * costs(c, s);
      }
      out(static_cast<Eigen::Index>(i), c) = acc;
    }
  }
  return out;
}

}  // namespace hcrf::reference
