#include "hcrf/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "hcrf/errors.hpp"
#include "hcrf/flowembed.hpp"
#include "hcrf/io.hpp"

namespace hcrf {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
bool parse_number(std::string_view text, T& out) {
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_bool(std::string_view text, bool& out) {
  if (text == "true" || text == "1") {
    out = true;
    return true;
  }
  if (text == "false" || text == "0") {
    out = false;
    return true;
  }
  return false;
}

KernelSpec& kernel_for(CrfConfig& crf, Observation obs) {
  for (auto& k : crf.kernels) {
    if (k.observation == obs) return k;
  }
  crf.kernels.push_back({0.0, 1.0, obs});
  return crf.kernels.back();
}

using Setter = std::function<bool(PipelineConfig&, std::string_view)>;

template <typename T>
Setter number(T PipelineConfig::*field) {
  return [field](PipelineConfig& c, std::string_view v) { return parse_number(v, c.*field); };
}

template <typename T, typename Sub>
Setter number(Sub PipelineConfig::*sub, T Sub::*field) {
  return [sub, field](PipelineConfig& c, std::string_view v) {
    return parse_number(v, (c.*sub).*field);
  };
}

Setter kernel_value(Observation obs, double KernelSpec::*field) {
  return [obs, field](PipelineConfig& c, std::string_view v) {
    return parse_number(v, kernel_for(c.crf, obs).*field);
  };
}

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"alpha_position", kernel_value(Observation::position, &KernelSpec::alpha)},
      {"alpha_normal", kernel_value(Observation::normal, &KernelSpec::alpha)},
      {"theta_position", kernel_value(Observation::position, &KernelSpec::theta)},
      {"theta_normal", kernel_value(Observation::normal, &KernelSpec::theta)},
      {"beta", number(&PipelineConfig::crf, &CrfConfig::beta)},
      {"knn", number(&PipelineConfig::crf, &CrfConfig::knn_k)},
      {"iterations", number(&PipelineConfig::crf, &CrfConfig::max_iterations)},
      {"tolerance", number(&PipelineConfig::crf, &CrfConfig::tolerance)},
      {"exact_leave_one_out",
       [](PipelineConfig& c, std::string_view v) {
         return parse_bool(v, c.crf.exact_leave_one_out);
       }},
      {"region_term",
       [](PipelineConfig& c, std::string_view v) {
         if (v == "rigid") {
           c.crf.region_term = RegionTerm::rigid;
         } else if (v == "naive") {
           c.crf.region_term = RegionTerm::naive_mean;
         } else {
           return false;
         }
         return true;
       }},
      {"supervoxel_size",
       number(&PipelineConfig::segmenter, &SegmenterConfig::desired_point_count)},
      {"position_weight", number(&PipelineConfig::segmenter, &SegmenterConfig::position_weight)},
      {"normal_weight", number(&PipelineConfig::segmenter, &SegmenterConfig::normal_weight)},
      {"lloyd_iterations",
       number(&PipelineConfig::segmenter, &SegmenterConfig::lloyd_iterations)},
      {"normal_k", number(&PipelineConfig::normal_k)},
      {"baseline_k", number(&PipelineConfig::baseline_k)},
      {"baseline_tau", number(&PipelineConfig::baseline_tau)},
      {"seed", number(&PipelineConfig::seed)},
  };
  return table;
}

}  // namespace

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    std::string_view line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (!seen.emplace(key).second) {
      throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
    }
    if (!it->second(config, value)) {
      throw ConfigError(where + "invalid value '" + std::string(value) + "' for " +
                        std::string(key));
    }
  }
  config.segmenter.seed = config.seed;
  try {
    config.crf.validate();
    config.segmenter.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (config.normal_k < 3) throw ConfigError("config: normal_k must be >= 3");
  if (config.baseline_k < 1) throw ConfigError("config: baseline_k must be >= 1");
  if (!(config.baseline_tau > 0)) throw ConfigError("config: baseline_tau must be positive");
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

void put(std::ostream& out, std::string_view key, double v) {
  out << key << ": " << v << '\n';
}

}  // namespace

void write_metrics(std::ostream& out, const MetricsReport& m, std::string_view prefix) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  const std::string p(prefix);
  put(out, p + "epe3d", m.epe3d);
  put(out, p + "acc3ds", m.acc3ds);
  put(out, p + "acc3dr", m.acc3dr);
  put(out, p + "outliers3d", m.outliers3d);
  if (m.epe2d) put(out, p + "epe2d", *m.epe2d);
  if (m.acc2d) put(out, p + "acc2d", *m.acc2d);
  out.precision(old);
}

std::string write_report(const RunReport& r) {
  std::ostringstream out;
  out.precision(std::numeric_limits<double>::max_digits10);
  put(out, "supervoxel_ms", r.supervoxel_ms);
  put(out, "pairwise_ms", r.pairwise_ms);
  put(out, "highorder_ms", r.highorder_ms);
  put(out, "total_ms", r.total_ms);
  out << "iterations: " << r.iterations << '\n';
  put(out, "final_delta", r.final_delta);
  out << "point_count: " << r.point_count << '\n';
  out << "region_count: " << r.region_count << '\n';
  if (r.metrics) write_metrics(out, *r.metrics);
  if (r.initial_metrics) write_metrics(out, *r.initial_metrics, "initial_");
  return out.str();
}

RunReport parse_report(std::string_view text) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto eol = text.find('\n');
    const auto line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    ++line_no;
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw InputError("report line " + std::to_string(line_no) + ": expected key: value");
    }
    kv.emplace(std::string(trim(line.substr(0, colon))), std::string(trim(line.substr(colon + 1))));
  }
  const auto get = [&](const std::string& key, auto& out) {
    const auto it = kv.find(key);
    if (it == kv.end()) return false;
    if (!parse_number(std::string_view(it->second), out)) {
      throw InputError("report: bad value for " + key);
    }
    return true;
  };
  const auto require = [&](const std::string& key, auto& out) {
    if (!get(key, out)) throw InputError("report: missing " + key);
  };

  RunReport r;
  require("supervoxel_ms", r.supervoxel_ms);
  require("pairwise_ms", r.pairwise_ms);
  require("highorder_ms", r.highorder_ms);
  require("total_ms", r.total_ms);
  require("iterations", r.iterations);
  require("final_delta", r.final_delta);
  require("point_count", r.point_count);
  require("region_count", r.region_count);
  const auto metrics = [&](const std::string& prefix) -> std::optional<MetricsReport> {
    MetricsReport m;
    if (!get(prefix + "epe3d", m.epe3d)) return std::nullopt;
    require(prefix + "acc3ds", m.acc3ds);
    require(prefix + "acc3dr", m.acc3dr);
    require(prefix + "outliers3d", m.outliers3d);
    double v = 0.0;
    if (get(prefix + "epe2d", v)) m.epe2d = v;
    if (get(prefix + "acc2d", v)) m.acc2d = v;
    m.point_count = r.point_count;
    return m;
  };
  r.metrics = metrics("");
  r.initial_metrics = metrics("initial_");
  return r;
}

FlowField quantize_to_float(const FlowField& flow) {
  std::vector<Vec3> out = flow.vectors();
  for (auto& v : out) v = v.cast<float>().cast<double>();
  return FlowField(std::move(out));
}

RunReport run_pipeline(const PipelineConfig& config) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  const auto ms_since = [](Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
  };

  // Read every input first so a bad file leaves no partial outputs behind.
  const auto frame_t = io::read_ply(config.frame_t);
  const auto frame_t1 = io::read_ply(config.frame_t1);
  const auto& cloud = frame_t.cloud;
  std::optional<FlowField> initial;
  if (config.initial_flow) initial = io::read_sfl(*config.initial_flow);
  std::optional<SupervoxelPartition> partition;
  if (config.labels) partition = io::read_labels(*config.labels);
  std::optional<FlowField> gt;
  if (config.ground_truth) gt = io::read_sfl(*config.ground_truth);

  if (initial && initial->size() != cloud.size()) {
    throw InputError("initial flow has " + std::to_string(initial->size()) +
                     " vectors for " + std::to_string(cloud.size()) + " points");
  }
  if (partition && partition->point_count() != cloud.size()) {
    throw InputError("label file does not match the cloud size");
  }
  if (gt && gt->size() != cloud.size()) {
    throw InputError("ground truth does not match the cloud size");
  }

  RunReport report;
  report.point_count = cloud.size();

  auto t = Clock::now();
  NormalField normals;
  if (frame_t.normals) {
    normals.normals = *frame_t.normals;
    normals.valid.assign(cloud.size(), true);
  } else if (cloud.size() >= 3) {
    normals = estimate_normals(cloud, config.normal_k);
  } else {
    normals.normals.assign(cloud.size(), Vec3::UnitZ());
    normals.valid.assign(cloud.size(), false);
  }
  if (!partition) {
    SegmenterConfig seg = config.segmenter;
    seg.seed = config.seed;
    partition = segment(cloud, normals, seg);
  }
  report.supervoxel_ms = ms_since(t);
  report.region_count = partition->region_count();

  if (!initial) {
    initial = quantize_to_float(
        baseline_initial_flow(cloud, frame_t1.cloud, config.baseline_k, config.baseline_tau));
  }

  const auto observations = make_observations(cloud, normals, config.crf);
  const auto result = refine(cloud, *initial, *partition, observations, config.crf);
  report.pairwise_ms = result.setup_ms + result.pairwise_ms;
  report.highorder_ms = result.highorder_ms;
  report.iterations = result.iterations;
  report.final_delta = result.final_delta;

  if (gt) {
    report.metrics = compute_metrics(result.flow, *gt, cloud, config.intrinsics);
    report.initial_metrics = compute_metrics(*initial, *gt, cloud, config.intrinsics);
  }
  report.total_ms = ms_since(start);

  io::write_sfl(config.output, result.flow);
  if (config.report) {
    std::ofstream out(*config.report);
    if (!out) throw InputError("cannot write " + config.report->string());
    out << write_report(report);
  }
  return report;
}

}  // namespace hcrf
