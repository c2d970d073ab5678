#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hcrf/geometry.hpp"

namespace hcrf {

enum class Activation { relu, identity };

struct DenseLayer {
  Eigen::MatrixXd weight;  // out × in
  Eigen::VectorXd bias;    // out
  Activation activation = Activation::relu;
};

// Shared per-point perceptron.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // Gaussian(0, std) weights and zero biases; relu on every layer but the last.
  static Mlp seeded(const std::vector<int>& widths, std::uint64_t seed, double stddev = 0.1);

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;

 private:
  std::vector<DenseLayer> layers_;
};

struct EmbeddingConfig {
  int neighbor_k = 16;
  Mlp h;   // matching cost: (f_i, f_j, p_j − p_i) → cost_dim
  Mlp ms;  // position encoding: 10 → pos_dim
  Mlp ma;  // aggregation logits: cost_dim + pos_dim → cost_dim

  Eigen::Index cost_dim() const { return h.output_dim(); }
  Eigen::Index pos_dim() const { return ms.output_dim(); }
  void validate(Eigen::Index feature_dim) const;
};

// Seeded networks with one hidden layer of `hidden` units each.
EmbeddingConfig seeded_embedding_config(Eigen::Index feature_dim, int cost_dim, int pos_dim,
                                        int hidden, int neighbor_k, std::uint64_t seed);

// One row per frame-t point.
using FlowEmbedding = Eigen::MatrixXd;

Eigen::VectorXd matching_cost(const Eigen::VectorXd& fi, const Eigen::VectorXd& fj,
                              const Vec3& pi, const Vec3& pj, const Mlp& h);

// Cost of the pseudo stationary pair (the point matched with itself).
Eigen::VectorXd pseudo_cost(const Eigen::VectorXd& fi, const Vec3& pi, const Mlp& h);

Eigen::VectorXd cost_difference(const Eigen::VectorXd& hij, const Eigen::VectorXd& hbar_i);

// Ms(p_i ⊕ p_j ⊕ (p_i − p_j) ⊕ ‖p_i − p_j‖)
Eigen::VectorXd position_encoding(const Vec3& pi, const Vec3& pj, const Mlp& ms);

// Columns are neighbors. Softmax over neighbors, independently per channel,
// of Ma(u_ij ⊕ s_ij).
Eigen::MatrixXd aggregation_weights(const Eigen::MatrixXd& u, const Eigen::MatrixXd& s,
                                    const Mlp& ma);

// Channelwise softmax across columns.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

FlowEmbedding flow_embedding(const PointCloud& cloud_t, const PointCloud& cloud_t1,
                             const NeighborGraph& graph, const EmbeddingConfig& config);

// Softmax-weighted average offset to the k nearest frame-(t+1) points with
// logits −‖p_i − p_j‖² / τ. A weight-free stand-in initial flow.
FlowField baseline_initial_flow(const PointCloud& cloud_t, const PointCloud& cloud_t1, int k,
                                double tau);

// Weight files: "tensor <name> <rows> <cols>" then rows·cols row-major values.
// Networks are stored as <net>.<layer>.weight / <net>.<layer>.bias.
void write_weights(std::ostream& out, const EmbeddingConfig& config);
EmbeddingConfig read_weights(std::istream& in, int neighbor_k);

}  // namespace hcrf
