#pragma once

// Synthetic 1-D datasets and the two-stage training experiment: a wide
// two-layer net trained from small initialization, plateau detection on its
// loss trace, and comparison of each plateau's output function against
// trained narrow reference nets.

#include "embedlab/landscape.hpp"
#include "embedlab/network.hpp"

#include <array>
#include <span>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace embedlab {

/// One term a * tanh(w * (x - c)) of the smooth target.
struct TanhBump {
  double amplitude = 1.0;
  double slope = 1.0;
  double center = 0.0;
};

std::vector<TanhBump> default_bumps();
double bump_target(std::span<const TanhBump> bumps, double x);

struct SyntheticSpec {
  std::string kind = "tanh_bumps";  // or "teacher"
  std::size_t n = 30;
  double noise = 0.0;
  std::uint64_t seed = 0;
  double x_min = -3.0;
  double x_max = 3.0;
  std::vector<TanhBump> bumps = default_bumps();
  double teacher_scale = 1.0;  // init scale of the teacher net
};

/// "tanh_bumps": evenly spaced scalar inputs with targets from the bump sum
/// plus Gaussian noise. "teacher": random inputs in [x_min, x_max]^d labelled
/// by a random network of `shape`, so the shape can fit the data exactly.
Dataset make_synthetic(const SyntheticSpec& spec, const NetShape& shape, const Activation& sigma);

struct Plateau {
  std::size_t start = 0;
  std::size_t end = 0;
  double risk = 0.0;  // at the snapshot
  bool terminal = false;  // ends at the last recorded iteration
  std::vector<double> distances;  // min sup-distance over the references of each width 1..k_max
  std::size_t nearest_width = 0;
  double nearest_distance = 0.0;
  ParamTuple snapshot;  // smallest-gradient iterate of the flat run
};

/// Windowed plateau detector: iteration t is flat when the mean of
/// |risk[s] - risk[s-1]| over the `window` steps ending at t is below
/// threshold * (1 + risk[t]). Returns disjoint, ordered [start, end] runs.
std::vector<std::pair<std::size_t, std::size_t>> detect_plateaus(std::span<const double> risks,
                                                                 std::size_t window,
                                                                 double threshold);

struct TwoStageConfig {
  std::size_t width = 100;
  std::string activation = "tanh";
  SyntheticSpec data;
  double init_scale = 1e-2;
  std::uint64_t seed = 7;
  double lr = 0.02;
  std::size_t max_iters = 60000;
  double grad_tol = 1e-8;
  std::size_t window = 500;
  double plateau_threshold = 1e-7;
  std::size_t max_reference_width = 4;
  std::size_t reference_restarts = 24;
  std::vector<double> reference_scales;  // restart r uses entry r mod size
  double reference_critical_tol = 1e-6;  // restarts above this are dropped
  DescentOptions reference;  // seed is overridden per restart
  std::size_t grid_points = 601;
  std::size_t trace_stride = 10;
};

TwoStageConfig default_two_stage_config();

struct ReferenceNet {
  std::size_t width = 0;
  ParamTuple params;
  double risk = 0.0;
  double gradient_inf_norm = 0.0;
};

struct TwoStageReport {
  TwoStageConfig config;
  Dataset data;
  std::vector<double> risks;  // one per iteration
  std::vector<double> grad_norms;
  ParamTuple final_params;
  std::vector<ReferenceNet> references;  // every converged restart, by width
  std::vector<Plateau> plateaus;
  std::vector<double> grid;
};

/// max over the grid of |f_a(x) - f_b(x)| for scalar-in, scalar-out nets.
double sup_distance(const ParamTuple& a, const ParamTuple& b, const Activation& sigma,
                    std::span<const double> grid);

std::vector<double> uniform_grid(double lo, double hi, std::size_t points);

TwoStageReport run_two_stage(const TwoStageConfig& cfg);

/// Writes two_stage_report.json, loss_trace.csv and plot_data.csv.
void write_two_stage(const TwoStageReport& report, const std::filesystem::path& dir);

}  // namespace embedlab
