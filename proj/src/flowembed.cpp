#include "hcrf/flowembed.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "hcrf/errors.hpp"

namespace hcrf {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.bias.size() != layer.weight.rows()) {
      throw InputError("layer " + std::to_string(l) + ": bias does not match weight rows");
    }
    if (l > 0 && layer.weight.cols() != layers_[l - 1].weight.rows()) {
      throw InputError("layer " + std::to_string(l) + ": input does not chain");
    }
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      throw InputError("layer " + std::to_string(l) + ": non-finite parameter");
    }
  }
}

Mlp Mlp::seeded(const std::vector<int>& widths, std::uint64_t seed, double stddev) {
  if (widths.size() < 2) throw ConfigError("an MLP needs input and output widths");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, stddev);
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    DenseLayer layer;
    layer.weight.resize(widths[l + 1], widths[l]);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = gauss(rng);
    }
    layer.bias = Eigen::VectorXd::Zero(widths[l + 1]);
    layer.activation = l + 2 == widths.size() ? Activation::identity : Activation::relu;
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Eigen::Index Mlp::input_dim() const {
  return layers_.empty() ? 0 : layers_.front().weight.cols();
}

Eigen::Index Mlp::output_dim() const {
  return layers_.empty() ? 0 : layers_.back().weight.rows();
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  if (layers_.empty()) throw InputError("empty network");
  if (x.size() != input_dim()) {
    throw InputError("network expects input of dimension " + std::to_string(input_dim()) +
                     ", got " + std::to_string(x.size()));
  }
  Eigen::VectorXd a = x;
  for (const auto& layer : layers_) {
    a = layer.weight * a + layer.bias;
    if (layer.activation == Activation::relu) a = a.cwiseMax(0.0);
  }
  return a;
}

void EmbeddingConfig::validate(Eigen::Index feature_dim) const {
  if (neighbor_k < 1) throw ConfigError("neighbor_k must be >= 1");
  if (h.input_dim() != 2 * feature_dim + 3) {
    throw ConfigError("h input must be 2·feature_dim + 3");
  }
  if (ms.input_dim() != 10) throw ConfigError("ms input must be 10");
  if (ma.input_dim() != cost_dim() + pos_dim()) {
    throw ConfigError("ma input must be cost_dim + pos_dim");
  }
  if (ma.output_dim() != cost_dim()) throw ConfigError("ma output must be cost_dim");
}

EmbeddingConfig seeded_embedding_config(Eigen::Index feature_dim, int cost_dim, int pos_dim,
                                        int hidden, int neighbor_k, std::uint64_t seed) {
  EmbeddingConfig cfg;
  cfg.neighbor_k = neighbor_k;
  const int f = static_cast<int>(feature_dim);
  cfg.h = Mlp::seeded({2 * f + 3, hidden, cost_dim}, seed);
  cfg.ms = Mlp::seeded({10, hidden, pos_dim}, seed + 1);
  cfg.ma = Mlp::seeded({cost_dim + pos_dim, hidden, cost_dim}, seed + 2);
  cfg.validate(feature_dim);
  return cfg;
}

Eigen::VectorXd matching_cost(const Eigen::VectorXd& fi, const Eigen::VectorXd& fj,
                              const Vec3& pi, const Vec3& pj, const Mlp& h) {
  if (h.input_dim() != fi.size() + fj.size() + 3) {
    throw InputError("matching cost network does not match feature dimensions");
  }
  Eigen::VectorXd x(fi.size() + fj.size() + 3);
  x << fi, fj, pj - pi;
  return h.forward(x);
}

Eigen::VectorXd pseudo_cost(const Eigen::VectorXd& fi, const Vec3& pi, const Mlp& h) {
  return matching_cost(fi, fi, pi, pi, h);
}

Eigen::VectorXd cost_difference(const Eigen::VectorXd& hij, const Eigen::VectorXd& hbar_i) {
  if (hij.size() != hbar_i.size()) throw InputError("cost vectors differ in dimension");
  return hij - hbar_i;
}

Eigen::VectorXd position_encoding(const Vec3& pi, const Vec3& pj, const Mlp& ms) {
  if (ms.input_dim() != 10) throw InputError("position encoder expects 10 inputs");
  Eigen::VectorXd x(10);
  x << pi, pj, pi - pj, (pi - pj).norm();
  return ms.forward(x);
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  if (logits.cols() == 0) throw InputError("softmax over an empty set");
  Eigen::MatrixXd w(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    const Eigen::RowVectorXd e = (logits.row(r).array() - top).exp().matrix();
    w.row(r) = e / e.sum();
  }
  return w;
}

Eigen::MatrixXd aggregation_weights(const Eigen::MatrixXd& u, const Eigen::MatrixXd& s,
                                    const Mlp& ma) {
  if (u.cols() == 0) throw InputError("empty neighbor set");
  if (u.cols() != s.cols()) throw InputError("cost and position sets differ in size");
  Eigen::MatrixXd logits(ma.output_dim(), u.cols());
  Eigen::VectorXd x(u.rows() + s.rows());
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    x << u.col(j), s.col(j);
    logits.col(j) = ma.forward(x);
  }
  return softmax_columns(logits);
}

FlowEmbedding flow_embedding(const PointCloud& cloud_t, const PointCloud& cloud_t1,
                             const NeighborGraph& graph, const EmbeddingConfig& config) {
  if (!cloud_t.has_features() || !cloud_t1.has_features()) {
    throw InputError("features required");
  }
  if (cloud_t.feature_dim() != cloud_t1.feature_dim()) {
    throw InputError("frames carry features of different dimension");
  }
  if (graph.size() != cloud_t.size() || graph.target_size() != cloud_t1.size()) {
    throw InputError("neighbor graph does not map frame t into frame t+1");
  }
  config.validate(cloud_t.feature_dim());
  for (std::size_t i = 0; i < graph.size(); ++i) {
    if (graph.neighbors(i).empty()) throw InputError("empty neighbor set");
  }

  const auto cost_dim = config.cost_dim();
  FlowEmbedding out(static_cast<Eigen::Index>(cloud_t.size()), cost_dim);
  const auto n = static_cast<std::ptrdiff_t>(cloud_t.size());
  const auto& ft = cloud_t.features();
  const auto& ft1 = cloud_t1.features();

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(i);
    const auto m = static_cast<Eigen::Index>(nbrs.size());
    Eigen::MatrixXd costs(cost_dim, m);
    Eigen::MatrixXd diffs(cost_dim, m);
    Eigen::MatrixXd enc(config.pos_dim(), m);
    const Eigen::VectorXd hbar = pseudo_cost(ft[i], cloud_t[i], config.h);
    for (Eigen::Index s = 0; s < m; ++s) {
      const auto j = nbrs[s];
      costs.col(s) = matching_cost(ft[i], ft1[j], cloud_t[i], cloud_t1[j], config.h);
      diffs.col(s) = cost_difference(costs.col(s), hbar);
      enc.col(s) = position_encoding(cloud_t[i], cloud_t1[j], config.ms);
    }
    const Eigen::MatrixXd w = aggregation_weights(diffs, enc, config.ma);
    out.row(i) = w.cwiseProduct(costs).rowwise().sum().transpose();
  }
  return out;
}

FlowField baseline_initial_flow(const PointCloud& cloud_t, const PointCloud& cloud_t1, int k,
                                double tau) {
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  const auto graph = knn_search(cloud_t1, cloud_t, k);
  std::vector<Vec3> flow(cloud_t.size());
  const auto n = static_cast<std::ptrdiff_t>(cloud_t.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto nbrs = graph.neighbors(i);
    // Neighbors are sorted, so the first carries the largest logit.
    const double top = -(cloud_t1[nbrs[0]] - cloud_t[i]).squaredNorm() / tau;
    double norm = 0.0;
    Vec3 acc = Vec3::Zero();
    for (auto j : nbrs) {
      const Vec3 d = cloud_t1[j] - cloud_t[i];
      const double w = std::exp(-d.squaredNorm() / tau - top);
      norm += w;
      acc += w * d;
    }
    flow[i] = acc / norm;
  }
  return FlowField(std::move(flow));
}

namespace {

void write_tensor(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
  out.precision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out << (c ? " " : "") << m(r, c);
    out << '\n';
  }
}

void write_mlp(std::ostream& out, const std::string& prefix, const Mlp& net) {
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& layer = net.layers()[l];
    const std::string base = prefix + "." + std::to_string(l);
    write_tensor(out, base + ".weight", layer.weight);
    write_tensor(out, base + ".bias", Eigen::MatrixXd(layer.bias));
  }
}

Mlp assemble(const std::map<std::string, Eigen::MatrixXd>& tensors, const std::string& prefix) {
  std::vector<DenseLayer> layers;
  for (int l = 0;; ++l) {
    const std::string base = prefix + "." + std::to_string(l);
    const auto w = tensors.find(base + ".weight");
    if (w == tensors.end()) break;
    const auto b = tensors.find(base + ".bias");
    if (b == tensors.end()) throw InputError("missing tensor " + base + ".bias");
    if (b->second.cols() != 1) throw InputError("tensor " + base + ".bias must have one column");
    layers.push_back({w->second, b->second.col(0), Activation::relu});
  }
  if (layers.empty()) throw InputError("missing tensor " + prefix + ".0.weight");
  layers.back().activation = Activation::identity;
  return Mlp(std::move(layers));
}

}  // namespace

void write_weights(std::ostream& out, const EmbeddingConfig& config) {
  write_mlp(out, "h", config.h);
  write_mlp(out, "ms", config.ms);
  write_mlp(out, "ma", config.ma);
}

EmbeddingConfig read_weights(std::istream& in, int neighbor_k) {
  std::map<std::string, Eigen::MatrixXd> tensors;
  std::string keyword;
  while (in >> keyword) {
    if (keyword != "tensor") throw InputError("expected 'tensor', got '" + keyword + "'");
    std::string name;
    long rows = 0;
    long cols = 0;
    if (!(in >> name >> rows >> cols) || rows < 1 || cols < 1) {
      throw InputError("malformed tensor header");
    }
    Eigen::MatrixXd m(rows, cols);
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        if (!(in >> m(r, c))) throw InputError("tensor " + name + ": truncated values");
      }
    }
    if (!tensors.emplace(name, std::move(m)).second) {
      throw InputError("duplicate tensor " + name);
    }
  }
  EmbeddingConfig cfg;
  cfg.neighbor_k = neighbor_k;
  cfg.h = assemble(tensors, "h");
  cfg.ms = assemble(tensors, "ms");
  cfg.ma = assemble(tensors, "ma");
  return cfg;
}

}  // namespace hcrf
