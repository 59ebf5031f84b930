#include "embedlab/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace embedlab {

namespace {

using Index = Eigen::Index;

const Json& field(const Json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(path + "." + key, "missing");
  return *it;
}

double number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  return j.get<double>();
}

std::size_t count(const Json& j, const std::string& path) {
  if (!j.is_number_integer() && !j.is_number_unsigned()) throw SchemaError(path, "expected an integer");
  const auto v = j.get<long long>();
  if (v < 0) throw SchemaError(path, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

const Json& array(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

Vector vector_from(const Json& j, const std::string& path) {
  array(j, path);
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Index>(i)] = number(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Matrix matrix_from(const Json& j, const std::string& path) {
  array(j, path);
  if (j.empty()) throw SchemaError(path, "empty matrix");
  const std::size_t cols = array(j[0], path + "[0]").size();
  Matrix m(static_cast<Index>(j.size()), static_cast<Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string rp = path + "[" + std::to_string(r) + "]";
    if (array(j[r], rp).size() != cols) throw SchemaError(rp, "ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<Index>(r), static_cast<Index>(c)) = number(j[r][c], rp + "[" + std::to_string(c) + "]");
  }
  return m;
}

Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json to_json(const Matrix& m) {
  Json out = Json::array();
  for (Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Json layers_to_json(const ParamTuple& theta) {
  Json layers = Json::array();
  for (const Layer& layer : theta.layers())
    layers.push_back({{"W", to_json(layer.weight)}, {"b", to_json(layer.bias)}});
  return layers;
}

ParamTuple layers_from_json(const Json& j, const std::string& path) {
  array(j, path);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < j.size(); ++l) {
    const std::string lp = path + "[" + std::to_string(l) + "]";
    layers.push_back({matrix_from(field(j[l], "W", lp), lp + ".W"),
                      vector_from(field(j[l], "b", lp), lp + ".b")});
  }
  try {
    return ParamTuple(std::move(layers));
  } catch (const std::exception& e) {
    throw SchemaError(path, e.what());
  }
}

std::vector<std::vector<std::size_t>> index_map_from(const Json& j, const std::string& path) {
  array(j, path);
  std::vector<std::vector<std::size_t>> maps;
  for (std::size_t l = 0; l < j.size(); ++l) {
    const std::string lp = path + "[" + std::to_string(l) + "]";
    std::vector<std::size_t> row;
    for (std::size_t k = 0; k < array(j[l], lp).size(); ++k)
      row.push_back(count(j[l][k], lp + "[" + std::to_string(k) + "]"));
    maps.push_back(std::move(row));
  }
  return maps;
}

IndexMapping mapping_from(const EmbeddingSpec& spec, const NetShape& narrow) {
  try {
    return IndexMapping(narrow, spec.index_map);
  } catch (const EmbeddingError& e) {
    throw SchemaError("index_map", e.what());
  }
}

}  // namespace

NetShape shape_from_json(const Json& j, const std::string& path) {
  array(j, path);
  std::vector<std::size_t> widths;
  for (std::size_t i = 0; i < j.size(); ++i) widths.push_back(count(j[i], path + "[" + std::to_string(i) + "]"));
  try {
    return NetShape(std::move(widths));
  } catch (const NetworkError& e) {
    throw SchemaError(path, e.what());
  }
}

Json params_to_json(const ParamTuple& theta, const std::string& activation) {
  return {{"widths", theta.shape().widths()}, {"activation", activation}, {"layers", layers_to_json(theta)}};
}

NetworkFile params_from_json(const Json& j) {
  NetworkFile out;
  const NetShape shape = shape_from_json(field(j, "widths", "params"), "params.widths");
  const Json& act = field(j, "activation", "params");
  if (!act.is_string()) throw SchemaError("params.activation", "expected a string");
  out.activation = act.get<std::string>();
  try {
    Activation::by_name(out.activation);
  } catch (const NetworkError& e) {
    throw SchemaError("params.activation", e.what());
  }
  out.params = layers_from_json(field(j, "layers", "params"), "params.layers");
  if (!(out.params.shape() == shape))
    throw SchemaError("params.layers", "layer sizes " + to_string(out.params.shape()) +
                                           " disagree with widths " + to_string(shape));
  return out;
}

Json dataset_to_json(const Dataset& data) {
  Json inputs = Json::array();
  Json targets = Json::array();
  for (const Vector& x : data.inputs) inputs.push_back(to_json(x));
  for (const Vector& y : data.targets) targets.push_back(to_json(y));
  return {{"inputs", inputs}, {"targets", targets}};
}

Dataset dataset_from_json(const Json& j) {
  Dataset d;
  const Json& inputs = array(field(j, "inputs", "dataset"), "dataset.inputs");
  const Json& targets = array(field(j, "targets", "dataset"), "dataset.targets");
  for (std::size_t i = 0; i < inputs.size(); ++i)
    d.inputs.push_back(vector_from(inputs[i], "dataset.inputs[" + std::to_string(i) + "]"));
  for (std::size_t i = 0; i < targets.size(); ++i)
    d.targets.push_back(vector_from(targets[i], "dataset.targets[" + std::to_string(i) + "]"));
  if (d.inputs.empty()) throw SchemaError("dataset.inputs", "empty dataset");
  if (d.inputs.size() != d.targets.size())
    throw SchemaError("dataset.targets", "length differs from inputs");
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d.inputs[i].size() != d.inputs[0].size())
      throw SchemaError("dataset.inputs[" + std::to_string(i) + "]", "inconsistent dimension");
    if (d.targets[i].size() != d.targets[0].size())
      throw SchemaError("dataset.targets[" + std::to_string(i) + "]", "inconsistent dimension");
  }
  return d;
}

Json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot open file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path.string(), e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_json(const std::filesystem::path& path, const Json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << dump_json(j);
}

EmbeddingSpec embedding_spec_from_json(const Json& j) {
  EmbeddingSpec spec;
  const Json& kind = field(j, "kind", "spec");
  if (!kind.is_string()) throw SchemaError("spec.kind", "expected a string");
  const std::string k = kind.get<std::string>();
  if (k == "steps") {
    spec.kind = EmbeddingSpec::Kind::Steps;
    const Json& steps = array(field(j, "steps", "spec"), "spec.steps");
    for (std::size_t i = 0; i < steps.size(); ++i) {
      const std::string sp = "spec.steps[" + std::to_string(i) + "]";
      const Json& sk = field(steps[i], "kind", sp);
      const std::size_t l = count(field(steps[i], "l", sp), sp + ".l");
      const double alpha = number(field(steps[i], "alpha", sp), sp + ".alpha");
      if (sk == "null") {
        spec.steps.push_back(EmbeddingStep::null(l, alpha));
      } else if (sk == "split") {
        spec.steps.push_back(EmbeddingStep::split(l, count(field(steps[i], "s", sp), sp + ".s"), alpha));
      } else {
        throw SchemaError(sp + ".kind", "expected \"null\" or \"split\"");
      }
    }
  } else if (k == "threefold") {
    spec.kind = EmbeddingSpec::Kind::Threefold;
  } else if (k == "general") {
    spec.kind = EmbeddingSpec::Kind::General;
    spec.index_map = index_map_from(field(j, "index_map", "spec"), "spec.index_map");
    spec.general = Json{{"alpha", field(j, "alpha", "spec")},
                        {"beta", field(j, "beta", "spec")},
                        {"b_star", j.value("b_star", Json::array())}};
  } else if (k == "sampled") {
    spec.kind = EmbeddingSpec::Kind::Sampled;
    spec.index_map = index_map_from(field(j, "index_map", "spec"), "spec.index_map");
    if (j.contains("seed")) spec.seed = count(j["seed"], "spec.seed");
  } else {
    throw SchemaError("spec.kind", "expected one of steps, threefold, general, sampled; got \"" + k + "\"");
  }
  return spec;
}

GeneralEmbedding resolve_embedding(const EmbeddingSpec& spec, const NetShape& narrow,
                                   const Activation& sigma) {
  switch (spec.kind) {
    case EmbeddingSpec::Kind::Steps:
      return present_steps(narrow, spec.steps);
    case EmbeddingSpec::Kind::Threefold:
      return present_threefold(narrow);
    case EmbeddingSpec::Kind::Sampled:
      return sample_compatible(mapping_from(spec, narrow), sigma, spec.seed).embedding;
    case EmbeddingSpec::Kind::General:
      break;
  }
  GeneralEmbedding g;
  g.mapping = mapping_from(spec, narrow);
  const Json& raw = *spec.general;
  g.alpha.values = layers_from_json(field(raw["alpha"], "layers", "spec.alpha"), "spec.alpha.layers");
  if (!(g.alpha.values.shape() == g.mapping.wide()))
    throw SchemaError("spec.alpha", "shape " + to_string(g.alpha.values.shape()) +
                                        " differs from the index mapping's wide shape " +
                                        to_string(g.mapping.wide()));
  const Json& beta = array(raw["beta"], "spec.beta");
  if (beta.size() != narrow.depth() + 1) throw SchemaError("spec.beta", "needs one list per layer 0..L");
  for (std::size_t l = 0; l < beta.size(); ++l) {
    const std::string lp = "spec.beta[" + std::to_string(l) + "]";
    array(beta[l], lp);
    if (beta[l].size() != g.mapping.wide().width(l)) throw SchemaError(lp, "wrong length");
    Vector b(static_cast<Index>(beta[l].size()));
    for (std::size_t i = 0; i < beta[l].size(); ++i)
      b[static_cast<Index>(i)] = beta[l][i].is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                      : number(beta[l][i], lp + "[" + std::to_string(i) + "]");
    g.beta.layers.push_back(std::move(b));
  }
  const Json& bs = array(raw["b_star"], "spec.b_star");
  for (std::size_t k = 0; k < bs.size(); ++k) {
    const std::string kp = "spec.b_star[" + std::to_string(k) + "]";
    const std::size_t l = count(field(bs[k], "l", kp), kp + ".l");
    const std::size_t i = count(field(bs[k], "i", kp), kp + ".i");
    if (i == 0) throw SchemaError(kp + ".i", "neuron indices are 1-based");
    g.b_star.values[{l, i - 1}] = number(field(bs[k], "value", kp), kp + ".value");
  }
  return g;
}

EmbeddingFn embedding_function(const EmbeddingSpec& spec, const NetShape& narrow,
                               const Activation& sigma) {
  switch (spec.kind) {
    case EmbeddingSpec::Kind::Steps: {
      auto steps = spec.steps;
      return [steps](const ParamTuple& t) { return compose(t, steps); };
    }
    case EmbeddingSpec::Kind::Threefold:
      return [](const ParamTuple& t) { return global_threefold(t); };
    default: {
      const GeneralEmbedding g = resolve_embedding(spec, narrow, sigma);
      return [g](const ParamTuple& t) { return general_apply(t, g); };
    }
  }
}

Json general_embedding_to_json(const GeneralEmbedding& g) {
  Json beta = Json::array();
  for (const Vector& b : g.beta.layers) {
    Json row = Json::array();
    for (Index i = 0; i < b.size(); ++i) row.push_back(std::isnan(b[i]) ? Json(nullptr) : Json(b[i]));
    beta.push_back(std::move(row));
  }
  Json bs = Json::array();
  for (const auto& [key, value] : g.b_star.values)
    bs.push_back({{"l", key.first}, {"i", key.second + 1}, {"value", value}});
  return {{"kind", "general"},
          {"index_map", g.mapping.maps()},
          {"alpha", {{"layers", layers_to_json(g.alpha.values)}}},
          {"beta", beta},
          {"b_star", bs}};
}

Json inertia_to_json(const Inertia& in) {
  return {{"n_neg", in.n_neg}, {"n_zero", in.n_zero}, {"n_pos", in.n_pos},
          {"zero_tolerance", in.zero_tolerance}};
}

Json eigenvalues_to_json(const Vector& values, std::size_t limit) {
  const auto n = static_cast<std::size_t>(values.size());
  Json out = Json::array();
  if (n <= limit) {
    for (std::size_t i = 0; i < n; ++i) out.push_back(values[static_cast<Index>(i)]);
    return out;
  }
  const std::size_t low = limit / 2;
  for (std::size_t i = 0; i < low; ++i) out.push_back(values[static_cast<Index>(i)]);
  for (std::size_t i = n - (limit - low); i < n; ++i) out.push_back(values[static_cast<Index>(i)]);
  return out;
}

Json hessian_report_to_json(const HessianReport& h, double zero_tol) {
  const Index p = static_cast<Index>(h.hidden_params);
  return {{"dimension", h.full.rows()},
          {"hidden_params", h.hidden_params},
          {"eigenvalues", eigenvalues_to_json(h.eigenvalues)},
          {"eigenvalues_truncated", h.eigenvalues.size() > 64},
          {"min_eigenvalue", h.min_eigenvalue()},
          {"max_eigenvalue", h.eigenvalues.size() ? h.eigenvalues[h.eigenvalues.size() - 1] : 0.0},
          {"inertia", inertia_to_json(inertia_of(h.eigenvalues, zero_tol))},
          {"n_neg", inertia_of(h.eigenvalues, zero_tol).n_neg},
          {"symmetry_residual", max_abs(h.full - h.full.transpose())},
          {"split_residual", max_abs(h.full - h.h1 - h.h2)},
          {"h1_max_abs", max_abs(h.h1)},
          {"h2_max_abs", max_abs(h.h2)},
          {"h2_restricted_max_abs", p > 0 ? max_abs(h.restricted_h2()) : 0.0}};
}

Json compatibility_report_to_json(const CompatibilityReport& r) {
  return {{"forward_effective", r.forward_effective},
          {"forward_null", r.forward_null},
          {"backward_effective", r.backward_effective},
          {"backward_null", r.backward_null},
          {"bias_effective", r.bias_effective},
          {"null_to_null", r.null_to_null},
          {"null_to_effective", r.null_to_effective},
          {"beta_normalization", r.beta_normalization},
          {"max_residual", r.max_residual()},
          {"tolerance", r.tolerance},
          {"passed", r.passed()}};
}

Json certificate_report_to_json(const CertificateTraceReport& r) {
  return {{"effective_feature", r.effective_feature},
          {"effective_error", r.effective_error},
          {"null_feature", r.null_feature},
          {"null_error", r.null_error},
          {"max_residual", r.max_residual()},
          {"tolerance", r.tolerance},
          {"passed", r.passed()}};
}

Json saddle_to_json(const SaddleConstruction& s) {
  Json out{{"case", to_string(s.kind)},
           {"h2_max_abs", s.h2_norm},
           {"h2_restricted_max_abs", s.h2_restricted_norm},
           {"wide_widths", s.wide_params.shape().widths()}};
  if (s.kind == SaddleCase::Inconclusive) return out;
  out["lambda"] = s.lambda;
  out["predicted"] = s.predicted;
  out["achieved"] = s.achieved;
  out["relative_error"] = s.predicted != 0.0 ? std::abs(s.achieved - s.predicted) / std::abs(s.predicted) : 0.0;
  out["matches"] = s.matches();
  out["narrow_direction"] = to_json(s.narrow_direction);
  out["wide_min_eigenvalue"] = s.wide_min_eigenvalue ? Json(*s.wide_min_eigenvalue) : Json(nullptr);
  return out;
}

Json screen_to_json(const ScreenResult& s) {
  Json out{{"status", to_string(s.status)},
           {"candidate", s.candidate()},
           {"h2_max_abs", s.h2_norm},
           {"min_eigenvalue", s.min_eigenvalue},
           {"zero_tolerance", s.zero_tolerance}};
  out["evidence"] = s.evidence ? saddle_to_json(*s.evidence) : Json(nullptr);
  return out;
}

Json dof_report_to_json(const DofReport& r) {
  Json rows = Json::array();
  for (const DofSeedRow& row : r.rows)
    rows.push_back({{"seed", row.seed}, {"alpha_nullity", row.alpha_nullity}, {"total", row.total},
                    {"matches", row.matches}});
  return {{"k_per_layer", r.k_per_layer},
          {"k", r.k},
          {"m_null", r.m_null},
          {"formula_value", r.formula_value},
          {"expected_alpha_nullity", r.expected_alpha_nullity},
          {"beta_freedom", r.beta_freedom},
          {"b_star_freedom", r.b_star_freedom},
          {"rows", rows},
          {"all_match", r.all_match()}};
}

Json inertia_comparison_to_json(const InertiaComparison& c) {
  return {{"narrow", inertia_to_json(c.narrow)},
          {"wide", inertia_to_json(c.wide)},
          {"zero_tolerance", c.zero_tolerance},
          {"monotone", c.monotone}};
}

}  // namespace embedlab
