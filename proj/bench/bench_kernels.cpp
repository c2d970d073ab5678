// Wall-clock comparison of the OpenMP kernels against the serial reference
// kernels on a synthetic scene. Usage: bench_kernels [points] [repeats]

#include <chrono>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>

#include "hcrf/conhcrf.hpp"
#include "hcrf/evalbench.hpp"
#include "hcrf/flowembed.hpp"
#include "hcrf/reference.hpp"

using namespace hcrf;

namespace {

double time_ms(const std::function<void()>& fn, int repeats) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double parallel_ms, double serial_ms) {
  std::cout << std::left << std::setw(28) << name << std::right << std::fixed
            << std::setprecision(2) << std::setw(12) << parallel_ms << std::setw(12)
            << serial_ms << std::setw(10) << serial_ms / parallel_ms << "x\n";
}

}  // namespace

int main(int argc, char** argv) {
  const int points = argc > 1 ? std::atoi(argv[1]) : 8192;
  const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;

  SyntheticSceneSpec spec;
  spec.points_per_body = 128;
  spec.body_count = std::max(1, points / spec.points_per_body);
  spec.seed = 7;
  const auto scene = generate_scene(spec);
  const auto& cloud = scene.cloud_t;

  std::cout << "points " << cloud.size() << ", threads " << max_threads() << "\n";
  std::cout << std::left << std::setw(28) << "kernel" << std::right << std::setw(12)
            << "openmp ms" << std::setw(12) << "serial ms" << std::setw(11) << "speedup\n";

  row("knn_search k=16",
      time_ms([&] { knn_search(cloud, cloud, 16); }, repeats),
      time_ms([&] { reference::knn_search(cloud, cloud, 16); }, repeats));

  const CrfConfig config;
  const auto normals = estimate_normals(cloud, 16);
  const auto obs = make_observations(cloud, normals, config);
  const auto graph = self_neighbor_graph(cloud, config.knn_k);
  const CrfProblem problem(cloud, scene.initial_flow, graph, scene.body_labels, obs, config);
  const auto state = problem.initial_state();
  row("mean_field_step",
      time_ms([&] { mean_field_step(state, problem); }, repeats),
      time_ms([&] { reference::mean_field_step(state, problem); }, repeats));
  row("refine (10 iterations)",
      time_ms([&] { refine(problem, Execution::parallel); }, repeats),
      time_ms([&] { refine(problem, Execution::serial); }, repeats));

  CrfConfig exact = config;
  exact.exact_leave_one_out = true;
  const CrfProblem exact_problem(cloud, scene.initial_flow, graph, scene.body_labels, obs, exact);
  const double approx_ms = time_ms([&] { region_messages(state.mu, problem); }, repeats);
  const double exact_ms = time_ms([&] { region_messages(state.mu, exact_problem); }, 1);
  std::cout << "high-order messages: per-region " << approx_ms << " ms, leave-one-out "
            << exact_ms << " ms (" << exact_ms / approx_ms << "x)\n";

  std::vector<Eigen::VectorXd> f(cloud.size());
  std::vector<Eigen::VectorXd> f1(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    f[i] = cloud[i];
    f1[i] = scene.cloud_t1[i];
  }
  const auto t = cloud.with_features(f);
  const auto t1 = scene.cloud_t1.with_features(f1);
  const auto ecfg = seeded_embedding_config(3, 16, 8, 32, 16, 1);
  const auto egraph = knn_search(t1, t, ecfg.neighbor_k);
  row("flow_embedding",
      time_ms([&] { flow_embedding(t, t1, egraph, ecfg); }, repeats),
      time_ms([&] { reference::flow_embedding(t, t1, egraph, ecfg); }, repeats));
  return 0;
}
