#pragma once

// Single-threaded reference kernels. They follow the textbook formulation
// step by step and are kept to cross-check and benchmark the OpenMP kernels.

#include "hcrf/conhcrf.hpp"
#include "hcrf/flowembed.hpp"
#include "hcrf/geometry.hpp"

namespace hcrf::reference {

// Exhaustive distance sort per query.
NeighborGraph knn_search(const PointCloud& target, const PointCloud& queries, int k);

// Mean-field update with kernels re-evaluated from the observations and a
// per-region fit loop, all serial.
MeanFieldState mean_field_step(const MeanFieldState& state, const CrfProblem& problem);

FlowEmbedding flow_embedding(const PointCloud& cloud_t, const PointCloud& cloud_t1,
                             const NeighborGraph& graph, const EmbeddingConfig& config);

}  // namespace hcrf::reference
