#pragma once

// JSON and CSV serialization of parameters, datasets, embedding specs and
// analysis reports.
//
// Parameter file: {"widths":[...], "activation":"tanh",
//                  "layers":[{"W":[[...],...], "b":[...]}, ...]}
// Dataset file:   {"inputs":[[...],...], "targets":[[...],...]}
// Embedding spec: {"kind":"steps", "steps":[{"kind":"split","l":1,"s":2,"alpha":0.25}, ...]}
//                 {"kind":"threefold"}
//                 {"kind":"general", "index_map":[[...] per layer 0..L],
//                  "alpha":{"layers":[{"W":..., "b":...}, ...]},
//                  "beta":[[...] per layer 0..L, null at null neurons],
//                  "b_star":[{"l":1, "i":3, "value":0.2}, ...]}
//                 {"kind":"sampled", "index_map":[...], "seed":0}
// Neuron indices "s" and "i" are 1-based.

#include "embedlab/embedding.hpp"
#include "embedlab/landscape.hpp"
#include "embedlab/network.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace embedlab {

using Json = nlohmann::json;

/// Malformed input; the message names the offending field.
class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct NetworkFile {
  ParamTuple params;
  std::string activation = "tanh";
};

Json params_to_json(const ParamTuple& theta, const std::string& activation);
NetworkFile params_from_json(const Json& j);

Json dataset_to_json(const Dataset& data);
Dataset dataset_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
/// Two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
std::string dump_json(const Json& j);

struct EmbeddingSpec {
  enum class Kind { Steps, Threefold, General, Sampled };
  Kind kind = Kind::Steps;
  std::vector<EmbeddingStep> steps;
  std::vector<std::vector<std::size_t>> index_map;
  std::optional<Json> general;  // raw alpha/beta/b_star, resolved against a shape
  std::uint64_t seed = 0;
};

EmbeddingSpec embedding_spec_from_json(const Json& j);

/// Resolves an embedding description into a general presentation over `narrow`.
GeneralEmbedding resolve_embedding(const EmbeddingSpec& spec, const NetShape& narrow,
                                   const Activation& sigma);

/// The embedding as a closure; steps and threefold use the dedicated operators.
EmbeddingFn embedding_function(const EmbeddingSpec& spec, const NetShape& narrow,
                               const Activation& sigma);

Json general_embedding_to_json(const GeneralEmbedding& g);

Json inertia_to_json(const Inertia& in);
/// At most `limit` values: the smallest and largest halves when truncated.
Json eigenvalues_to_json(const Vector& values, std::size_t limit = 64);
Json hessian_report_to_json(const HessianReport& h, double zero_tol);
Json compatibility_report_to_json(const CompatibilityReport& r);
Json certificate_report_to_json(const CertificateTraceReport& r);
Json saddle_to_json(const SaddleConstruction& s);
Json screen_to_json(const ScreenResult& s);
Json dof_report_to_json(const DofReport& r);
Json inertia_comparison_to_json(const InertiaComparison& c);

NetShape shape_from_json(const Json& j, const std::string& field);

}  // namespace embedlab
