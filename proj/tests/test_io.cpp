#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "common.hpp"
#include "embedlab/io.hpp"
#include "embedlab/two_stage.hpp"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

using namespace embedlab;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = EMBEDLAB_FIXTURE_DIR;
const Activation kTanh = Activation::tanh();

std::string schema_field(const Json& j, NetworkFile (*parse)(const Json&)) {
  try {
    parse(j);
  } catch (const SchemaError& e) {
    return e.field();
  }
  return "";
}

}  // namespace

TEST_CASE("parameter files round-trip exactly") {
  const ParamTuple t = random_params(NetShape({2, 3, 1}), 1.0, 12);
  const Json j = params_to_json(t, "sigmoid");
  CHECK(j.at("widths") == Json::array({2, 3, 1}));
  const NetworkFile back = params_from_json(Json::parse(dump_json(j)));
  CHECK(back.activation == "sigmoid");
  CHECK((back.params.to_vector() - t.to_vector()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(dump_json(params_to_json(back.params, back.activation)) == dump_json(j));
}

TEST_CASE("the shipped reference parameter file") {
  const NetworkFile f = params_from_json(read_json(kFixtures / "theta_a.json"));
  CHECK((f.params.to_vector() - theta_a().to_vector()).norm() == 0.0);
  CHECK(f.activation == "tanh");
}

TEST_CASE("malformed parameter files name the failing field") {
  Json j = params_to_json(theta_a(), "tanh");
  Json bad_shape = j;
  bad_shape["layers"][0]["W"] = Json::array({Json::array({1.0, 2.0})});
  CHECK(schema_field(bad_shape, params_from_json).find("params.layers") != std::string::npos);
  Json bad_act = j;
  bad_act["activation"] = "swish";
  CHECK(schema_field(bad_act, params_from_json) == "params.activation");
  Json missing = j;
  missing.erase("layers");
  CHECK(schema_field(missing, params_from_json) == "params.layers");
}

TEST_CASE("datasets round-trip and are validated") {
  const Dataset d = s_a();
  const Dataset back = dataset_from_json(dataset_to_json(d));
  REQUIRE(back.size() == 2);
  CHECK(back.targets[1][0] == 0.3);
  CHECK_THROWS_AS(dataset_from_json(Json{{"inputs", {{0.0}}}, {"targets", Json::array()}}), SchemaError);
  CHECK_THROWS_AS(dataset_from_json(Json{{"inputs", {{0.0}, {1.0, 2.0}}}, {"targets", {{0.0}, {1.0}}}}),
                  SchemaError);
}

TEST_CASE("steps and threefold specs resolve against a shape") {
  const EmbeddingSpec steps = embedding_spec_from_json(read_json(kFixtures / "steps_spec.json"));
  CHECK(steps.kind == EmbeddingSpec::Kind::Steps);
  REQUIRE(steps.steps.size() == 2);
  CHECK(steps.steps[0].kind == EmbeddingStep::Kind::Null);
  CHECK(steps.steps[1].neuron == 1);
  const ParamTuple w = embedding_function(steps, theta_a().shape(), kTanh)(theta_a());
  CHECK(w.shape() == NetShape({1, 4, 1}));
  const GeneralEmbedding g = resolve_embedding(steps, theta_a().shape(), kTanh);
  CHECK((general_apply(theta_a(), g).to_vector() - w.to_vector()).cwiseAbs().maxCoeff() <= 1e-15);

  const EmbeddingSpec three = embedding_spec_from_json(Json{{"kind", "threefold"}});
  CHECK(embedding_function(three, theta_a().shape(), kTanh)(theta_a()).shape() == NetShape({1, 6, 1}));
}

TEST_CASE("the shipped general spec validates and preserves outputs") {
  const EmbeddingSpec spec = embedding_spec_from_json(read_json(kFixtures / "general_spec.json"));
  CHECK(spec.kind == EmbeddingSpec::Kind::General);
  const GeneralEmbedding g = resolve_embedding(spec, theta_a().shape(), kTanh);
  CHECK(g.mapping.wide() == NetShape({1, 4, 1}));
  CHECK(std::isnan(g.beta.layers[1][3]));
  CHECK(g.b_star.at(1, 3) == 0.2);
  CHECK(validate_compatibility(g, kTanh, 1e-8).passed());
  const ParamTuple w = general_apply(theta_a(), g);
  CHECK(output_preservation_residual(theta_a(), w, kTanh, random_inputs(1, 20, 1)) <= 1e-12);

  const Json again = general_embedding_to_json(g);
  const GeneralEmbedding g2 = resolve_embedding(embedding_spec_from_json(again), theta_a().shape(), kTanh);
  CHECK((general_apply(theta_a(), g2).to_vector() - w.to_vector()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sampled specs are reproducible") {
  const Json j{{"kind", "sampled"}, {"index_map", {{1}, {2, 1, 0, 1}, {1}}}, {"seed", 3}};
  const EmbeddingSpec spec = embedding_spec_from_json(j);
  const GeneralEmbedding a = resolve_embedding(spec, theta_a().shape(), kTanh);
  const GeneralEmbedding b = resolve_embedding(spec, theta_a().shape(), kTanh);
  CHECK((a.alpha.values.to_vector() - b.alpha.values.to_vector()).norm() == 0.0);
  CHECK(validate_compatibility(a, kTanh, 1e-8).passed());
}

TEST_CASE("invalid specs raise schema errors naming the field") {
  try {
    embedding_spec_from_json(Json{{"kind", "steps"}, {"steps", {{{"kind", "split"}, {"l", 1}}}}});
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.field().find("steps[0]") != std::string::npos);
  }
  CHECK_THROWS_AS(embedding_spec_from_json(Json{{"kind", "fourfold"}}), SchemaError);
  CHECK_THROWS_AS(embedding_spec_from_json(Json{{"kind", "general"}}), SchemaError);
}

TEST_CASE("eigenvalue lists keep the extremal values when truncated") {
  const Vector v = Vector::LinSpaced(100, -50.0, 49.0);
  const Json j = eigenvalues_to_json(v, 64);
  REQUIRE(j.size() == 64);
  CHECK(j[0] == -50.0);
  CHECK(j[31] == -19.0);
  CHECK(j[32] == 18.0);
  CHECK(j[63] == 49.0);
  CHECK(eigenvalues_to_json(Vector::LinSpaced(5, 0.0, 4.0)).size() == 5);
  const Json h = hessian_report_to_json(hessian(theta_a(), kTanh, LossFn::mse(), s_a()), 1e-6);
  CHECK(h.at("eigenvalues_truncated") == false);
}

TEST_CASE("hessian and inertia reports carry the classifier inputs") {
  const HessianReport h = hessian(theta_a(), kTanh, LossFn::mse(), s_a());
  const Json j = hessian_report_to_json(h, 1e-6);
  CHECK(j.contains("inertia"));
  CHECK(j.at("inertia").contains("n_neg"));
  CHECK(j.contains("h2_max_abs"));
  CHECK(j.contains("h2_restricted_max_abs"));
}

TEST_CASE("uniform grids and synthetic sets") {
  const std::vector<double> g = uniform_grid(-3.0, 3.0, 601);
  CHECK(g.front() == -3.0);
  CHECK(g.back() == 3.0);
  CHECK(g[300] == doctest::Approx(0.0));

  SyntheticSpec s;
  const Dataset d = make_synthetic(s, NetShape({1, 5, 1}), kTanh);
  REQUIRE(d.size() == 30);
  CHECK(d.targets[0][0] == doctest::Approx(bump_target(s.bumps, -3.0)));

  SyntheticSpec t;
  t.kind = "teacher";
  t.n = 12;
  const Dataset dt = make_synthetic(t, NetShape({2, 3, 1}), kTanh);
  CHECK(dt.inputs[0].size() == 2);
  CHECK(make_synthetic(t, NetShape({2, 3, 1}), kTanh).targets[5][0] == dt.targets[5][0]);
  t.kind = "spiral";
  CHECK_THROWS_AS(make_synthetic(t, NetShape({2, 3, 1}), kTanh), NetworkError);
}

TEST_CASE("plateau detection on a synthetic trace") {
  std::vector<double> r;
  for (int i = 0; i < 1000; ++i) r.push_back(1.0 - 1e-3 * i);  // falling
  for (int i = 0; i < 2000; ++i) r.push_back(0.0);            // flat
  for (int i = 0; i < 1000; ++i) r.push_back(-1e-3 * i);      // falling
  const auto p = detect_plateaus(r, 500, 1e-7);
  REQUIRE(p.size() == 1);
  CHECK(p[0].first >= 1000);
  CHECK(p[0].first <= 1001);
  CHECK(p[0].second < 3000 + 500);
  CHECK(p[0].second >= 3000);

  std::vector<double> two = r;
  for (int i = 0; i < 2000; ++i) two.push_back(-1.0);
  const auto q = detect_plateaus(two, 500, 1e-7);
  REQUIRE(q.size() == 2);
  CHECK(q[0].second < q[1].first);
  CHECK(q[1].second == two.size() - 1);
  CHECK(detect_plateaus(std::vector<double>(100, 0.0), 500, 1e-7).empty());
}

TEST_CASE("sup distance of a net to itself is zero") {
  const ParamTuple t = random_params(NetShape({1, 3, 1}), 1.0, 2);
  const std::vector<double> g = uniform_grid(-3, 3, 61);
  CHECK(sup_distance(t, t, kTanh, g) == 0.0);
  CHECK(sup_distance(t, null_embed(t, 1, 0.3), kTanh, g) <= 1e-15);
}
