#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "hcrf/geometry.hpp"
#include "hcrf/parallel.hpp"
#include "hcrf/supervoxel.hpp"

namespace hcrf {

// Continuous high-order CRF over per-point flow vectors:
//
//   E(Y) = Σ_i ‖y_i − z_i‖²
//        + Σ_i Σ_{j∈N(i)} Σ_c α_c K_ij^(c) ‖y_i − y_j‖²
//        + Σ_V Σ_{i∈V} β ‖y_i − g(p_i, Y_{V−i})‖²
//
// with Gaussian kernels K_ij^(c) = exp(−‖k_i^c − k_j^c‖² / 2θ_c²) and g the
// displacement of p_i under the Kabsch fit of region V without point i.
// Inference is mean field; each point's posterior is an isotropic Gaussian
// with mean μ_i and variance parameter σ_i.

enum class Observation { position, normal };

struct KernelSpec {
  double alpha = 0.0;
  double theta = 1.0;
  Observation observation = Observation::position;
};

// Which region message feeds the high-order slot of the update.
enum class RegionTerm {
  rigid,       // displacement under the region's Kabsch fit
  naive_mean,  // plain average of the region's flow (ablation)
};

struct CrfConfig {
  std::vector<KernelSpec> kernels = {
      {0.1, 0.15, Observation::position},
      {0.05, 0.3, Observation::normal},
  };
  double beta = 1.0;
  int knn_k = 16;
  int max_iterations = 10;
  double tolerance = 1e-5;
  bool exact_leave_one_out = false;
  RegionTerm region_term = RegionTerm::rigid;

  void validate() const;
};

// Per kernel channel, one column per point.
struct KernelObservations {
  std::vector<Eigen::MatrixXd> channels;
};

KernelObservations make_observations(const PointCloud& cloud, const NormalField& normals,
                                     const CrfConfig& config);

struct MeanFieldState {
  std::vector<Vec3> mu;
  std::vector<double> sigma;
  int iteration = 0;
  // Region fits that fell back to translation-only in the last step.
  std::size_t degenerate_fits = 0;
};

struct KernelTerm {
  double alpha;
  double k;
};

double pairwise_kernel(const Eigen::VectorXd& ki, const Eigen::VectorXd& kj, double theta);

inline double unary_energy(const Vec3& y, const Vec3& z) { return (y - z).squaredNorm(); }

double pairwise_energy(const Vec3& yi, const Vec3& yj, std::span<const KernelTerm> terms);

// β‖y_i − g(p_i, Y_{V−i})‖² for a region given without point i.
double highorder_energy(const Vec3& yi, const Vec3& pi, std::span<const Vec3> region_positions,
                        std::span<const Vec3> region_flows, double beta);

Vec3 naive_region_flow(std::span<const Vec3> region_flows);

// k nearest neighbors of every point within its own cloud, excluding itself.
NeighborGraph self_neighbor_graph(const PointCloud& cloud, int k);

// Everything the updates need, with the pairwise kernel weights evaluated
// once. Immutable after construction.
class CrfProblem {
 public:
  CrfProblem(const PointCloud& cloud, const FlowField& initial, const NeighborGraph& graph,
             const SupervoxelPartition& partition, const KernelObservations& observations,
             const CrfConfig& config);

  std::size_t size() const { return positions_.size(); }
  const CrfConfig& config() const { return config_; }
  const std::vector<Vec3>& positions() const { return positions_; }
  const std::vector<Vec3>& initial() const { return initial_; }
  const NeighborGraph& graph() const { return graph_; }
  const SupervoxelPartition& partition() const { return partition_; }
  const KernelObservations& observations() const { return observations_; }

  // K_ij^(c) for the j-th listed neighbor of i.
  double kernel(std::size_t c, std::size_t i, std::size_t slot) const {
    return kernels_[c][offsets_[i] + slot];
  }
  // Σ_c α_c K_ij^(c) for the j-th listed neighbor of i.
  double weight(std::size_t i, std::size_t slot) const { return weights_[offsets_[i] + slot]; }
  double weight_sum(std::size_t i) const { return weight_sums_[i]; }

  MeanFieldState initial_state() const;

 private:
  CrfConfig config_;
  std::vector<Vec3> positions_;
  std::vector<Vec3> initial_;
  NeighborGraph graph_;
  SupervoxelPartition partition_;
  KernelObservations observations_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<double>> kernels_;
  std::vector<double> weights_;
  std::vector<double> weight_sums_;
};

// Region messages μ̂_i computed from the means in `mu`.
std::vector<Vec3> region_messages(std::span<const Vec3> mu, const CrfProblem& problem,
                                  std::size_t* degenerate_fits = nullptr);

struct StepTimings {
  double highorder_ms = 0.0;
  double pairwise_ms = 0.0;
};

// One synchronous (Jacobi) mean-field update; reads only `state`.
MeanFieldState mean_field_step(const MeanFieldState& state, const CrfProblem& problem,
                               StepTimings* timings = nullptr);

// E(Y) with exact leave-one-out region fits. Singleton regions have no
// V − i and contribute no high-order term.
double total_energy(const FlowField& flow, const CrfProblem& problem);

struct RefineResult {
  FlowField flow;
  MeanFieldState state;
  int iterations = 0;
  double final_delta = 0.0;
  double setup_ms = 0.0;  // neighbor graph and kernel weights
  double pairwise_ms = 0.0;
  double highorder_ms = 0.0;
  double total_ms = 0.0;
};

RefineResult refine(const CrfProblem& problem, Execution exec = Execution::parallel);

RefineResult refine(const PointCloud& cloud, const FlowField& initial_flow,
                    const SupervoxelPartition& partition,
                    const KernelObservations& observations, const CrfConfig& config,
                    Execution exec = Execution::parallel);

}  // namespace hcrf
