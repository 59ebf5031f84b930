#include "embedlab/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace embedlab {

namespace fs = std::filesystem;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  std::string out;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--seed", o.seed, "Seed override");
  cmd->add_option("--tol", o.tol, "Tolerance override");
  cmd->add_option("--out", o.out, "Output directory");
}

ExperimentConfig config_or_default(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) {
    cfg.optimizer.seed = *o.seed;
    cfg.two_stage.seed = *o.seed;
  }
  return cfg;
}

Dataset dataset_for(const std::string& path, const ExperimentConfig& cfg, const NetShape& shape) {
  if (!path.empty()) return dataset_from_json(read_json(path));
  if (cfg.dataset_path) return dataset_from_json(read_json(*cfg.dataset_path));
  ExperimentConfig c = cfg;
  if (!c.shape) c.shape = shape;
  return resolve_dataset(c);
}

std::vector<Vector> random_inputs(std::size_t dim, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(-2.0, 2.0);
  std::vector<Vector> xs;
  for (std::size_t i = 0; i < count; ++i) {
    Vector x(static_cast<Eigen::Index>(dim));
    for (Eigen::Index k = 0; k < x.size(); ++k) x[k] = draw(rng);
    xs.push_back(std::move(x));
  }
  return xs;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << std::scientific << v;
  return s.str();
}

template <typename T>
T json_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

// ---------------------------------------------------------------------------

int cmd_train(const CommonOptions& o, std::ostream& out) {
  ExperimentConfig cfg = config_or_default(o);
  if (!cfg.shape) throw SchemaError("config.widths", "missing");
  if (o.tol) cfg.optimizer.grad_tol = *o.tol;
  const Activation sigma = Activation::by_name(cfg.activation);
  const LossFn loss = LossFn::by_name(cfg.loss);
  const Dataset data = resolve_dataset(cfg);
  data.check(*cfg.shape);

  fs::create_directories(cfg.output_dir);
  std::ofstream trace(cfg.output_dir / "loss_trace.csv");
  trace.precision(17);
  trace << "iteration,risk,grad_inf_norm\n";
  const std::size_t stride = std::max<std::size_t>(cfg.trace_stride, 1);
  const CriticalPointRecord rec = find_critical(
      *cfg.shape, sigma, loss, data, cfg.optimizer, [&](std::size_t it, double r, double g) {
        if (it % stride == 0) trace << it << ',' << r << ',' << g << '\n';
      });
  trace << "final," << rec.risk << ',' << rec.gradient_inf_norm << '\n';

  write_json(cfg.output_dir / "params.json", params_to_json(rec.params, cfg.activation));
  write_json(cfg.output_dir / "train_report.json",
             {{"widths", cfg.shape->widths()},
              {"seed", cfg.optimizer.seed},
              {"iterations", rec.iterations},
              {"final_risk", rec.risk},
              {"gradient_inf_norm", rec.gradient_inf_norm},
              {"grad_tol", cfg.optimizer.grad_tol},
              {"converged", rec.gradient_inf_norm <= cfg.optimizer.grad_tol}});
  out << "train: risk " << fmt(rec.risk) << ", |grad|_inf " << fmt(rec.gradient_inf_norm) << " after "
      << rec.iterations << " iterations\n";
  return kExitOk;
}

struct EmbedOptions {
  std::string params, spec, data;
};

int cmd_embed(const CommonOptions& o, const EmbedOptions& e, std::ostream& out) {
  const ExperimentConfig cfg = config_or_default(o);
  const std::string spec_path = !e.spec.empty() ? e.spec
                                : cfg.embedding_path ? cfg.embedding_path->string()
                                                     : "";
  if (e.params.empty()) throw SchemaError("--params", "required");
  if (spec_path.empty()) throw SchemaError("--spec", "required");
  const NetworkFile net = params_from_json(read_json(e.params));
  const Activation sigma = Activation::by_name(net.activation);
  const EmbeddingSpec spec = embedding_spec_from_json(read_json(spec_path));
  const NetShape narrow = net.params.shape();
  const GeneralEmbedding g = resolve_embedding(spec, narrow, sigma);
  const ParamTuple wide = embedding_function(spec, narrow, sigma)(net.params);

  std::vector<Vector> inputs;
  if (!e.data.empty() || cfg.dataset_path)
    inputs = dataset_for(e.data, cfg, narrow).inputs;
  else
    inputs = random_inputs(narrow.input_dim(), 20, o.seed.value_or(0));
  const double residual = output_preservation_residual(net.params, wide, sigma, inputs);
  const CompatibilityReport compat = validate_compatibility(g, sigma, o.tol.value_or(1e-8));

  write_json(cfg.output_dir / "wide_params.json", params_to_json(wide, net.activation));
  write_json(cfg.output_dir / "embedding.json", general_embedding_to_json(g));
  write_json(cfg.output_dir / "embed_report.json",
             {{"narrow_widths", narrow.widths()},
              {"wide_widths", wide.shape().widths()},
              {"output_residual", residual},
              {"compatibility", compatibility_report_to_json(compat)}});
  out << "embed: " << to_string(narrow) << " -> " << to_string(wide.shape()) << "\n"
      << "output-preservation residual " << fmt(residual) << "\n"
      << "compatibility residuals: forward " << fmt(std::max(compat.forward_effective, compat.forward_null))
      << ", backward " << fmt(std::max(compat.backward_effective, compat.backward_null)) << ", bias "
      << fmt(std::max({compat.bias_effective, compat.null_to_null, compat.null_to_effective}))
      << ", beta " << fmt(compat.beta_normalization) << " (max " << fmt(compat.max_residual()) << ")\n";
  return kExitOk;
}

struct VerifyOptions {
  std::string params, wide, spec, data;
  double output_tol = 1e-10;
  double pullback_tol = 1e-4;
  double critical_threshold = 1e-6;
  double critical_factor = 100.0;
  std::size_t random_inputs = 20;
};

int cmd_verify(const CommonOptions& o, const VerifyOptions& v, std::ostream& out) {
  const ExperimentConfig cfg = config_or_default(o);
  const double tol = o.tol.value_or(1e-8);
  if (v.params.empty()) throw SchemaError("--params", "required");
  if (v.wide.empty() && v.spec.empty()) throw SchemaError("--wide/--spec", "one of them is required");
  const NetworkFile net = params_from_json(read_json(v.params));
  const Activation sigma = Activation::by_name(net.activation);
  const LossFn loss = LossFn::by_name(cfg.loss);
  const NetShape narrow = net.params.shape();
  const Dataset data = dataset_for(v.data, cfg, narrow);
  data.check(narrow);

  std::optional<EmbeddingSpec> spec;
  std::optional<GeneralEmbedding> presentation;
  if (!v.spec.empty()) {
    spec = embedding_spec_from_json(read_json(v.spec));
    presentation = resolve_embedding(*spec, narrow, sigma);
  }
  const ParamTuple wide = !v.wide.empty() ? params_from_json(read_json(v.wide)).params
                                          : embedding_function(*spec, narrow, sigma)(net.params);
  if (wide.depth() != narrow.depth() || wide.shape().input_dim() != narrow.input_dim() ||
      wide.shape().output_dim() != narrow.output_dim())
    throw SchemaError("--wide", "wide network " + to_string(wide.shape()) + " is incompatible with " +
                                    to_string(narrow));

  Json report{{"narrow_widths", narrow.widths()}, {"wide_widths", wide.shape().widths()}};
  bool all = true;
  auto record = [&](const std::string& name, Json entry, bool pass) {
    entry["passed"] = pass;
    report[name] = std::move(entry);
    all = all && pass;
    out << "verify " << name << ": " << (pass ? "PASS" : "FAIL") << "\n";
  };

  std::vector<Vector> inputs = data.inputs;
  for (Vector& x : random_inputs(narrow.input_dim(), v.random_inputs, o.seed.value_or(0)))
    inputs.push_back(std::move(x));
  const double out_res = output_preservation_residual(net.params, wide, sigma, inputs);
  record("output_preservation", {{"residual", out_res}, {"tolerance", v.output_tol}}, out_res <= v.output_tol);

  const double rep_res = representation_residual(net.params, wide, sigma, data.inputs);
  record("representation", {{"residual", rep_res}, {"tolerance", tol}}, rep_res <= tol);

  const double gn = inf_norm(gradient(net.params, sigma, loss, data));
  const double gw = inf_norm(gradient(wide, sigma, loss, data));
  const bool vacuous = gn > v.critical_threshold;
  const double bound = v.critical_factor * std::max(gn, 1e-14);
  record("criticality",
         {{"narrow_gradient_inf_norm", gn},
          {"wide_gradient_inf_norm", gw},
          {"bound", bound},
          {"narrow_is_critical", !vacuous},
          {"critical_threshold", v.critical_threshold}},
         vacuous || gw <= bound);

  if (presentation && wide.shape() == presentation->mapping.wide()) {
    const CompatibilityReport compat = validate_compatibility(*presentation, sigma, tol);
    record("compatibility", compatibility_report_to_json(compat), compat.passed());
    const CertificateTraceReport cert =
        check_certificate_trace(net.params, wide, presentation->mapping, presentation->beta,
                                presentation->b_star, sigma, loss, data, tol);
    record("certificate_trace", certificate_report_to_json(cert), cert.passed());
  } else {
    report["certificate_trace"] = {{"skipped", "no embedding presentation"}};
  }

  if (spec && sigma.twice_differentiable() && wide.shape().param_count() <= kMaxDenseWideParams) {
    const double pb = pullback_identity_check(net.params, embedding_function(*spec, narrow, sigma), sigma,
                                              loss, data);
    record("pullback_identity", {{"residual", pb}, {"tolerance", v.pullback_tol}}, pb <= v.pullback_tol);
  } else {
    report["pullback_identity"] = {{"skipped", "needs an embedding spec, a C2 activation and a small wide net"}};
  }

  report["all_passed"] = all;
  write_json(cfg.output_dir / "verify_report.json", report);
  return all ? kExitOk : kExitVerificationFailed;
}

struct AnalysisOptions {
  std::string params, data, mode = "analytic";
  double h2_tol = kDefaultH2Tolerance;
};

int cmd_hessian(const CommonOptions& o, const AnalysisOptions& a, std::ostream& out) {
  const ExperimentConfig cfg = config_or_default(o);
  if (a.params.empty()) throw SchemaError("--params", "required");
  const NetworkFile net = params_from_json(read_json(a.params));
  const Activation sigma = Activation::by_name(net.activation);
  const LossFn loss = LossFn::by_name(cfg.loss);
  const Dataset data = dataset_for(a.data, cfg, net.params.shape());
  if (a.mode != "analytic" && a.mode != "fd") throw SchemaError("--mode", "expected analytic or fd");
  const double grad = inf_norm(gradient(net.params, sigma, loss, data));
  const double tau = o.tol.value_or(coupled_zero_tolerance(grad));
  const HessianReport h = hessian(net.params, sigma, loss, data,
                                  a.mode == "fd" ? HessianMode::FullFd : HessianMode::AnalyticH1PlusFd, tau);
  Json report = hessian_report_to_json(h, tau);
  report["mode"] = a.mode;
  report["gradient_inf_norm"] = grad;
  report["risk"] = risk(net.params, sigma, loss, data);
  report["classification"] = to_string(classify(h, tau));
  write_json(cfg.output_dir / "hessian_report.json", report);
  const Inertia in = inertia_of(h.eigenvalues, tau);
  out << "hessian: dim " << h.full.rows() << ", inertia (" << in.n_neg << "," << in.n_zero << "," << in.n_pos
      << ") at tol " << fmt(tau) << ", |H2|max " << fmt(max_abs(h.h2)) << ", |H2[L-1]|max "
      << fmt(max_abs(h.restricted_h2())) << "\n";
  return kExitOk;
}

int cmd_saddle(const CommonOptions& o, const AnalysisOptions& a, std::ostream& out) {
  const ExperimentConfig cfg = config_or_default(o);
  if (a.params.empty()) throw SchemaError("--params", "required");
  const NetworkFile net = params_from_json(read_json(a.params));
  const Activation sigma = Activation::by_name(net.activation);
  const LossFn loss = LossFn::by_name(cfg.loss);
  const Dataset data = dataset_for(a.data, cfg, net.params.shape());
  CriticalPointRecord rec = analyze_point(net.params, sigma, loss, data);
  if (o.tol) {
    rec.zero_tolerance = *o.tol;
    rec.classification = classify(*rec.hessian, *o.tol);
  }
  const ScreenResult screen = truly_bad_screen(rec, sigma, loss, data, a.h2_tol);
  const SaddleConstruction sc = screen.evidence ? *screen.evidence
                                                : strict_saddle_construct(rec, sigma, loss, data, a.h2_tol);
  Json report{{"risk", rec.risk},
              {"gradient_inf_norm", rec.gradient_inf_norm},
              {"zero_tolerance", rec.zero_tolerance},
              {"classification", to_string(*rec.classification)},
              {"inertia", inertia_to_json(inertia_of(rec.hessian->eigenvalues, rec.zero_tolerance))},
              {"screen", screen_to_json(screen)},
              {"construction", saddle_to_json(sc)}};
  write_json(cfg.output_dir / "saddle_report.json", report);
  out << "saddle: " << to_string(*rec.classification) << ", screen " << to_string(screen.status)
      << ", construction " << to_string(sc.kind);
  if (sc.kind != SaddleCase::Inconclusive)
    out << " (predicted " << fmt(sc.predicted) << ", achieved " << fmt(sc.achieved) << ")";
  out << "\n";
  return kExitOk;
}

struct DofOptions {
  std::string widths, params, spec;
  std::size_t seeds = 10;
};

NetShape parse_widths(const std::string& text) {
  std::vector<std::size_t> widths;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      widths.push_back(static_cast<std::size_t>(std::stoul(item)));
    } catch (const std::exception&) {
      throw SchemaError("--widths", "expected comma-separated positive integers");
    }
  }
  try {
    return NetShape(widths);
  } catch (const NetworkError& e) {
    throw SchemaError("--widths", e.what());
  }
}

int cmd_dof(const CommonOptions& o, const DofOptions& d, std::ostream& out) {
  const ExperimentConfig cfg = config_or_default(o);
  NetShape narrow;
  if (!d.widths.empty())
    narrow = parse_widths(d.widths);
  else if (!d.params.empty())
    narrow = params_from_json(read_json(d.params)).params.shape();
  else if (cfg.shape)
    narrow = *cfg.shape;
  else
    throw SchemaError("--widths", "narrow shape required (--widths, --params or config)");
  const std::string spec_path = !d.spec.empty() ? d.spec
                                : cfg.embedding_path ? cfg.embedding_path->string()
                                                     : "";
  if (spec_path.empty()) throw SchemaError("--spec", "required");
  const EmbeddingSpec spec = embedding_spec_from_json(read_json(spec_path));
  const GeneralEmbedding g = resolve_embedding(spec, narrow, Activation::by_name(cfg.activation));
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < d.seeds; ++k) seeds.push_back(o.seed.value_or(0) + k);
  const DofReport rep = dof_verify(g.mapping, seeds);
  Json j = dof_report_to_json(rep);
  j["narrow_widths"] = narrow.widths();
  j["wide_widths"] = g.mapping.wide().widths();
  write_json(cfg.output_dir / "dof_report.json", j);
  out << "dof: " << to_string(narrow) << " -> " << to_string(g.mapping.wide()) << ", formula "
      << rep.formula_value << ", K " << rep.k << ", m_null " << rep.m_null << ", seeds matching "
      << std::count_if(rep.rows.begin(), rep.rows.end(), [](const DofSeedRow& r) { return r.matches; })
      << "/" << rep.rows.size() << "\n";
  return rep.all_match() ? kExitOk : kExitVerificationFailed;
}

int cmd_two_stage(const CommonOptions& o, std::ostream& out) {
  const ExperimentConfig cfg = config_or_default(o);
  TwoStageConfig ts = cfg.two_stage;
  if (o.tol) ts.plateau_threshold = *o.tol;
  const TwoStageReport rep = run_two_stage(ts);
  write_two_stage(rep, cfg.output_dir);
  out << "two-stage: " << rep.risks.size() - 1 << " iterations, final risk " << fmt(rep.risks.back()) << ", "
      << rep.plateaus.size() << " plateau(s)\n";
  if (rep.plateaus.empty()) out << "no plateau detected\n";
  for (const Plateau& p : rep.plateaus)
    out << "  [" << p.start << ", " << p.end << "] risk " << fmt(p.risk) << ", nearest width " << p.nearest_width
        << " at sup-distance " << fmt(p.nearest_distance) << (p.terminal ? " (terminal)" : "") << "\n";
  return kExitOk;
}

SyntheticSpec synthetic_from_json(const Json& j, SyntheticSpec s) {
  s.kind = json_or<std::string>(j, "kind", s.kind);
  s.n = json_or<std::size_t>(j, "n", s.n);
  s.noise = json_or<double>(j, "noise", s.noise);
  s.seed = json_or<std::uint64_t>(j, "seed", s.seed);
  s.x_min = json_or<double>(j, "x_min", s.x_min);
  s.x_max = json_or<double>(j, "x_max", s.x_max);
  s.teacher_scale = json_or<double>(j, "teacher_scale", s.teacher_scale);
  if (j.contains("bumps")) {
    s.bumps.clear();
    for (const Json& b : j.at("bumps")) {
      if (!b.is_array() || b.size() != 3) throw SchemaError("dataset.bumps", "each bump is [amplitude, slope, center]");
      s.bumps.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>()});
    }
  }
  return s;
}

DescentOptions descent_from_json(const Json& j, DescentOptions d) {
  d.lr = json_or<double>(j, "lr", d.lr);
  d.max_iters = json_or<std::size_t>(j, "max_iters", d.max_iters);
  d.grad_tol = json_or<double>(j, "grad_tol", d.grad_tol);
  d.init_scale = json_or<double>(j, "init_scale", d.init_scale);
  d.polish = json_or<bool>(j, "polish", d.polish);
  d.polish_steps = json_or<std::size_t>(j, "polish_steps", d.polish_steps);
  return d;
}

}  // namespace

ExperimentConfig config_from_json(const Json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw SchemaError("config", "expected an object");
  ExperimentConfig cfg;
  auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
  try {
    if (j.contains("widths")) cfg.shape = shape_from_json(j.at("widths"), "config.widths");
    cfg.activation = json_or<std::string>(j, "activation", cfg.activation);
    Activation::by_name(cfg.activation);
    cfg.loss = json_or<std::string>(j, "loss", cfg.loss);
    LossFn::by_name(cfg.loss);
    if (j.contains("dataset")) {
      const Json& d = j.at("dataset");
      if (d.is_string())
        cfg.dataset_path = resolve(d.get<std::string>());
      else if (d.is_object())
        cfg.synthetic = synthetic_from_json(d, cfg.synthetic);
      else
        throw SchemaError("config.dataset", "expected a path or a synthetic spec object");
    }
    if (j.contains("optimizer")) cfg.optimizer = descent_from_json(j.at("optimizer"), cfg.optimizer);
    cfg.optimizer.seed = json_or<std::uint64_t>(j, "seed", cfg.optimizer.seed);
    if (j.contains("embedding")) cfg.embedding_path = resolve(j.at("embedding").get<std::string>());
    if (j.contains("output_dir")) cfg.output_dir = resolve(j.at("output_dir").get<std::string>());
    cfg.trace_stride = json_or<std::size_t>(j, "trace_stride", cfg.trace_stride);
    if (j.contains("two_stage")) {
      const Json& t = j.at("two_stage");
      TwoStageConfig& ts = cfg.two_stage;
      ts.width = json_or<std::size_t>(t, "width", ts.width);
      ts.activation = json_or<std::string>(t, "activation", ts.activation);
      ts.init_scale = json_or<double>(t, "init_scale", ts.init_scale);
      ts.seed = json_or<std::uint64_t>(t, "seed", ts.seed);
      ts.lr = json_or<double>(t, "lr", ts.lr);
      ts.max_iters = json_or<std::size_t>(t, "max_iters", ts.max_iters);
      ts.grad_tol = json_or<double>(t, "grad_tol", ts.grad_tol);
      ts.window = json_or<std::size_t>(t, "window", ts.window);
      ts.plateau_threshold = json_or<double>(t, "plateau_threshold", ts.plateau_threshold);
      ts.max_reference_width = json_or<std::size_t>(t, "max_reference_width", ts.max_reference_width);
      ts.reference_restarts = json_or<std::size_t>(t, "reference_restarts", ts.reference_restarts);
      ts.reference_critical_tol = json_or<double>(t, "reference_critical_tol", ts.reference_critical_tol);
      if (t.contains("reference_scales")) ts.reference_scales = t.at("reference_scales").get<std::vector<double>>();
      ts.grid_points = json_or<std::size_t>(t, "grid_points", ts.grid_points);
      ts.trace_stride = json_or<std::size_t>(t, "trace_stride", ts.trace_stride);
      if (t.contains("data")) ts.data = synthetic_from_json(t.at("data"), ts.data);
      if (t.contains("reference")) ts.reference = descent_from_json(t.at("reference"), ts.reference);
    }
  } catch (const Json::exception& e) {
    throw SchemaError("config", e.what());
  } catch (const NetworkError& e) {
    throw SchemaError("config", e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  return config_from_json(read_json(path), path.has_parent_path() ? path.parent_path() : fs::path("."));
}

Dataset resolve_dataset(const ExperimentConfig& cfg) {
  if (cfg.dataset_path) return dataset_from_json(read_json(*cfg.dataset_path));
  if (!cfg.shape) throw SchemaError("config.widths", "needed to generate a synthetic dataset");
  return make_synthetic(cfg.synthetic, *cfg.shape, Activation::by_name(cfg.activation));
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Critical embeddings between fully-connected networks of different widths"};
  app.require_subcommand(1);

  CommonOptions common;
  EmbedOptions embed;
  VerifyOptions verify;
  AnalysisOptions analysis;
  DofOptions dof;

  auto* train = app.add_subcommand("train", "Gradient descent to a near-critical point");
  add_common(train, common);

  auto* emb = app.add_subcommand("embed", "Apply an embedding spec to a parameter file");
  add_common(emb, common);
  emb->add_option("--params", embed.params, "Narrow parameter file");
  emb->add_option("--spec", embed.spec, "Embedding spec file");
  emb->add_option("--data", embed.data, "Dataset file for the output check");

  auto* ver = app.add_subcommand("verify", "Check output, representation and criticality preservation");
  add_common(ver, common);
  ver->add_option("--params", verify.params, "Narrow parameter file");
  ver->add_option("--wide", verify.wide, "Wide parameter file");
  ver->add_option("--spec", verify.spec, "Embedding spec file");
  ver->add_option("--data", verify.data, "Dataset file");
  ver->add_option("--output-tol", verify.output_tol, "Output-preservation tolerance")->capture_default_str();
  ver->add_option("--pullback-tol", verify.pullback_tol, "Pull-back identity tolerance")->capture_default_str();
  ver->add_option("--critical-threshold", verify.critical_threshold, "Narrow gradient level counted as critical")
      ->capture_default_str();
  ver->add_option("--critical-factor", verify.critical_factor, "Allowed wide/narrow gradient ratio")
      ->capture_default_str();

  auto* hes = app.add_subcommand("hessian", "Hessian spectrum, inertia and H1/H2 split");
  add_common(hes, common);
  hes->add_option("--params", analysis.params, "Parameter file");
  hes->add_option("--data", analysis.data, "Dataset file");
  hes->add_option("--mode", analysis.mode, "analytic or fd")->capture_default_str();

  auto* sad = app.add_subcommand("saddle", "Truly-bad screen and strict-saddle construction");
  add_common(sad, common);
  sad->add_option("--params", analysis.params, "Parameter file");
  sad->add_option("--data", analysis.data, "Dataset file");
  sad->add_option("--h2-tol", analysis.h2_tol, "Tolerance for a vanishing H2")->capture_default_str();

  auto* dofc = app.add_subcommand("dof", "Degrees of freedom of compatible embeddings");
  add_common(dofc, common);
  dofc->add_option("--widths", dof.widths, "Narrow widths, comma separated");
  dofc->add_option("--params", dof.params, "Narrow parameter file (for its shape)");
  dofc->add_option("--spec", dof.spec, "Embedding spec carrying the index mapping");
  dofc->add_option("--seeds", dof.seeds, "Number of beta seeds")->capture_default_str();

  auto* two = app.add_subcommand("two-stage", "Wide-net training with plateau analysis");
  add_common(two, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) return cmd_train(common, out);
    if (*emb) return cmd_embed(common, embed, out);
    if (*ver) return cmd_verify(common, verify, out);
    if (*hes) return cmd_hessian(common, analysis, out);
    if (*sad) return cmd_saddle(common, analysis, out);
    if (*dofc) return cmd_dof(common, dof, out);
    if (*two) return cmd_two_stage(common, out);
  } catch (const SchemaError& e) {
    err << "schema error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnsupportedModeError& e) {
    err << "unsupported: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NumericsError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const EmbeddingError& e) {
    err << "invalid embedding: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NetworkError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

}  // namespace embedlab
