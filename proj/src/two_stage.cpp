#include "embedlab/two_stage.hpp"

#include "embedlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>

namespace embedlab {

namespace {

using Index = Eigen::Index;

double scalar_output(const ParamTuple& theta, const Activation& sigma, double x) {
  return forward(theta, sigma, Vector::Constant(1, x))[0];
}

// Online version of the detector in detect_plateaus().
class FlatTracker {
 public:
  FlatTracker(std::size_t window, double threshold) : window_(window), threshold_(threshold) {}

  bool push(double risk) {
    if (has_prev_) {
      const double d = std::abs(risk - prev_);
      diffs_.push_back(d);
      sum_ += d;
      if (diffs_.size() > window_) {
        sum_ -= diffs_[diffs_.size() - window_ - 1];
      }
    }
    prev_ = risk;
    has_prev_ = true;
    if (diffs_.size() < window_) return false;
    return sum_ / static_cast<double>(window_) < threshold_ * (1.0 + risk);
  }

 private:
  std::size_t window_;
  double threshold_;
  std::vector<double> diffs_;
  double sum_ = 0.0;
  double prev_ = 0.0;
  bool has_prev_ = false;
};

// Every converged restart is kept: a plateau may sit near a narrow saddle
// rather than the narrow global minimum.
std::vector<ReferenceNet> train_references(const TwoStageConfig& cfg, std::size_t width,
                                           const Activation& sigma, const LossFn& loss,
                                           const Dataset& data) {
  const NetShape shape({1, width, 1});
  std::vector<ReferenceNet> out;
  std::optional<ReferenceNet> best;
  for (std::size_t r = 0; r < cfg.reference_restarts; ++r) {
    DescentOptions opt = cfg.reference;
    opt.seed = cfg.seed * 1000003ULL + width * 1009ULL + r;
    if (!cfg.reference_scales.empty()) opt.init_scale = cfg.reference_scales[r % cfg.reference_scales.size()];
    CriticalPointRecord rec;
    try {
      rec = find_critical(shape, sigma, loss, data, opt);
    } catch (const DivergenceError&) {
      continue;
    }
    ReferenceNet ref{width, rec.params, rec.risk, rec.gradient_inf_norm};
    if (!best || ref.risk < best->risk) best = ref;
    if (ref.gradient_inf_norm <= cfg.reference_critical_tol) out.push_back(std::move(ref));
  }
  if (!best)
    throw DivergenceError(0, "every restart of the width-" + std::to_string(width) + " reference diverged");
  if (out.empty()) out.push_back(*best);
  return out;
}

}  // namespace

std::vector<TanhBump> default_bumps() { return {{1.0, 1.0, 0.0}, {-0.3, 3.0, 1.0}}; }

double bump_target(std::span<const TanhBump> bumps, double x) {
  double y = 0.0;
  for (const TanhBump& b : bumps) y += b.amplitude * std::tanh(b.slope * (x - b.center));
  return y;
}

Dataset make_synthetic(const SyntheticSpec& spec, const NetShape& shape, const Activation& sigma) {
  if (spec.n == 0) throw NetworkError("synthetic dataset needs n >= 1");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Dataset d;
  if (spec.kind == "tanh_bumps") {
    if (shape.input_dim() != 1 || shape.output_dim() != 1)
      throw NetworkError("tanh_bumps data needs scalar input and output");
    const std::vector<double> xs = uniform_grid(spec.x_min, spec.x_max, spec.n);
    for (double x : xs) {
      d.inputs.push_back(Vector::Constant(1, x));
      d.targets.push_back(Vector::Constant(1, bump_target(spec.bumps, x) + spec.noise * gauss(rng)));
    }
  } else if (spec.kind == "teacher") {
    const ParamTuple teacher = random_params(shape, spec.teacher_scale, rng());
    std::uniform_real_distribution<double> draw(spec.x_min, spec.x_max);
    for (std::size_t i = 0; i < spec.n; ++i) {
      Vector x(static_cast<Index>(shape.input_dim()));
      for (Index k = 0; k < x.size(); ++k) x[k] = draw(rng);
      Vector y = forward(teacher, sigma, x);
      for (Index k = 0; k < y.size(); ++k) y[k] += spec.noise * gauss(rng);
      d.inputs.push_back(std::move(x));
      d.targets.push_back(std::move(y));
    }
  } else {
    throw NetworkError("unknown synthetic dataset kind '" + spec.kind + "'");
  }
  return d;
}

std::vector<double> uniform_grid(double lo, double hi, std::size_t points) {
  std::vector<double> g(points);
  if (points == 1) {
    g[0] = 0.5 * (lo + hi);
    return g;
  }
  for (std::size_t i = 0; i < points; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return g;
}

std::vector<std::pair<std::size_t, std::size_t>> detect_plateaus(std::span<const double> risks,
                                                                 std::size_t window,
                                                                 double threshold) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (window == 0) return out;
  FlatTracker tracker(window, threshold);
  std::size_t run_start = 0;
  bool in_run = false;
  auto close = [&](std::size_t last) {
    const std::size_t start = run_start - window;
    if (!out.empty() && start <= out.back().second)
      out.back().second = last;
    else
      out.emplace_back(start, last);
  };
  for (std::size_t t = 0; t < risks.size(); ++t) {
    const bool flat = tracker.push(risks[t]);
    if (flat && !in_run) {
      run_start = t;
      in_run = true;
    } else if (!flat && in_run) {
      close(t - 1);
      in_run = false;
    }
  }
  if (in_run) close(risks.size() - 1);
  return out;
}

TwoStageConfig default_two_stage_config() {
  TwoStageConfig cfg;
  cfg.reference.lr = 0.05;
  cfg.reference.max_iters = 20000;
  cfg.reference.grad_tol = 1e-9;
  cfg.reference.init_scale = 1.0;
  cfg.reference_scales = {1.0, 2.0, 3.0};
  return cfg;
}

double sup_distance(const ParamTuple& a, const ParamTuple& b, const Activation& sigma,
                    std::span<const double> grid) {
  double worst = 0.0;
  for (double x : grid)
    worst = std::max(worst, std::abs(scalar_output(a, sigma, x) - scalar_output(b, sigma, x)));
  return worst;
}

TwoStageReport run_two_stage(const TwoStageConfig& cfg) {
  const Activation sigma = Activation::by_name(cfg.activation);
  const LossFn loss = LossFn::mse();
  const NetShape shape({1, cfg.width, 1});

  TwoStageReport rep;
  rep.config = cfg;
  rep.data = make_synthetic(cfg.data, shape, sigma);
  rep.grid = uniform_grid(cfg.data.x_min, cfg.data.x_max, cfg.grid_points);

  Vector x = random_params(shape, cfg.init_scale, cfg.seed).to_vector();
  FlatTracker tracker(cfg.window, cfg.plateau_threshold);
  // Each flat run keeps the iterate with the smallest gradient, keyed by the run's last iteration.
  std::map<std::size_t, ParamTuple> run_snapshots;
  bool in_run = false;
  double run_best_grad = 0.0;
  Vector run_best;
  for (std::size_t it = 0;; ++it) {
    const ParamTuple theta = ParamTuple::from_vector(shape, x);
    const double r = risk(theta, sigma, loss, rep.data);
    const Vector g = gradient(theta, sigma, loss, rep.data);
    if (!std::isfinite(r) || !g.allFinite()) throw DivergenceError(it, "two-stage training");
    rep.risks.push_back(r);
    rep.grad_norms.push_back(inf_norm(g));
    const bool flat = tracker.push(r);
    if (in_run && !flat) run_snapshots[it - 1] = ParamTuple::from_vector(shape, run_best);
    if (flat && (!in_run || rep.grad_norms.back() < run_best_grad)) {
      run_best_grad = rep.grad_norms.back();
      run_best = x;
    }
    in_run = flat;
    if (rep.grad_norms.back() <= cfg.grad_tol || it >= cfg.max_iters) break;
    x -= cfg.lr * g;
  }
  rep.final_params = ParamTuple::from_vector(shape, x);
  if (in_run) run_snapshots[rep.risks.size() - 1] = ParamTuple::from_vector(shape, run_best);

  for (std::size_t k = 1; k <= cfg.max_reference_width; ++k)
    for (ReferenceNet& ref : train_references(cfg, k, sigma, loss, rep.data))
      rep.references.push_back(std::move(ref));

  for (const auto& [start, end] : detect_plateaus(rep.risks, cfg.window, cfg.plateau_threshold)) {
    Plateau p;
    p.start = start;
    p.end = end;
    p.terminal = end + 1 == rep.risks.size();
    double best = std::numeric_limits<double>::infinity();
    for (auto run = run_snapshots.lower_bound(start); run != run_snapshots.end() && run->first <= end; ++run) {
      const double gn = inf_norm(gradient(run->second, sigma, loss, rep.data));
      if (gn < best) {
        best = gn;
        p.snapshot = run->second;
      }
    }
    p.risk = risk(p.snapshot, sigma, loss, rep.data);
    p.distances.assign(cfg.max_reference_width, std::numeric_limits<double>::infinity());
    p.nearest_distance = std::numeric_limits<double>::infinity();
    for (const ReferenceNet& ref : rep.references) {
      const double dist = sup_distance(p.snapshot, ref.params, sigma, rep.grid);
      p.distances[ref.width - 1] = std::min(p.distances[ref.width - 1], dist);
      if (dist < p.nearest_distance) {
        p.nearest_distance = dist;
        p.nearest_width = ref.width;
      }
    }
    rep.plateaus.push_back(std::move(p));
  }
  return rep;
}

void write_two_stage(const TwoStageReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const TwoStageConfig& cfg = rep.config;
  const Activation sigma = Activation::by_name(cfg.activation);

  Json plateaus = Json::array();
  for (const Plateau& p : rep.plateaus)
    plateaus.push_back({{"start", p.start},
                        {"end", p.end},
                        {"risk", p.risk},
                        {"terminal", p.terminal},
                        {"distances", p.distances},
                        {"nearest_width", p.nearest_width},
                        {"nearest_distance", p.nearest_distance}});
  Json refs = Json::array();
  for (const ReferenceNet& r : rep.references)
    refs.push_back({{"width", r.width}, {"risk", r.risk}, {"gradient_inf_norm", r.gradient_inf_norm},
                    {"params", params_to_json(r.params, cfg.activation)}});
  Json report{{"width", cfg.width},
              {"activation", cfg.activation},
              {"seed", cfg.seed},
              {"init_scale", cfg.init_scale},
              {"lr", cfg.lr},
              {"iterations", rep.risks.empty() ? 0 : rep.risks.size() - 1},
              {"final_risk", rep.risks.empty() ? 0.0 : rep.risks.back()},
              {"final_gradient_inf_norm", rep.grad_norms.empty() ? 0.0 : rep.grad_norms.back()},
              {"window", cfg.window},
              {"plateau_threshold", cfg.plateau_threshold},
              {"grid_points", cfg.grid_points},
              {"plateaus", plateaus},
              {"plateau_detected", !rep.plateaus.empty()},
              {"references", refs}};
  if (rep.plateaus.empty()) report["note"] = "no plateau detected";
  write_json(dir / "two_stage_report.json", report);

  std::ofstream trace(dir / "loss_trace.csv");
  trace.precision(17);
  trace << "iteration,risk,grad_inf_norm\n";
  for (std::size_t i = 0; i < rep.risks.size(); ++i)
    if (i % std::max<std::size_t>(cfg.trace_stride, 1) == 0 || i + 1 == rep.risks.size())
      trace << i << ',' << rep.risks[i] << ',' << rep.grad_norms[i] << '\n';

  std::ofstream plot(dir / "plot_data.csv");
  plot.precision(17);
  plot << "x,target,wide_final";
  for (std::size_t i = 0; i < rep.references.size(); ++i)
    plot << ",reference_" << i + 1 << "_w" << rep.references[i].width;
  for (std::size_t p = 0; p < rep.plateaus.size(); ++p) plot << ",plateau_" << p + 1;
  plot << '\n';
  const bool has_target = cfg.data.kind == "tanh_bumps";
  for (double x : rep.grid) {
    plot << x << ',';
    if (has_target) plot << bump_target(cfg.data.bumps, x);
    plot << ',' << scalar_output(rep.final_params, sigma, x);
    for (const ReferenceNet& r : rep.references) plot << ',' << scalar_output(r.params, sigma, x);
    for (const Plateau& p : rep.plateaus) plot << ',' << scalar_output(p.snapshot, sigma, x);
    plot << '\n';
  }
}

}  // namespace embedlab
