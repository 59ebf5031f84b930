#include "embedlab/cli.hpp"
#include "embedlab/embedding.hpp"
#include "embedlab/landscape.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace py = pybind11;
using namespace embedlab;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Dataset to_dataset(const RowMatrix& x, const RowMatrix& y) {
  if (x.rows() != y.rows()) throw py::value_error("inputs and targets need the same number of rows");
  Dataset d;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    d.inputs.push_back(x.row(i).transpose());
    d.targets.push_back(y.row(i).transpose());
  }
  return d;
}

ParamTuple params_of(const std::vector<std::size_t>& widths, const Vector& flat) {
  return ParamTuple::from_vector(NetShape(widths), flat);
}

}  // namespace

PYBIND11_MODULE(embedlab, m) {
  m.doc() = "Critical embeddings between fully-connected networks of different widths";

  py::register_exception<NetworkError>(m, "NetworkError", PyExc_ValueError);
  py::register_exception<EmbeddingError>(m, "EmbeddingError", PyExc_ValueError);
  py::register_exception<NumericsError>(m, "NumericsError", PyExc_ArithmeticError);

  py::class_<ParamTuple>(m, "Params")
      .def_static("zeros", [](const std::vector<std::size_t>& w) { return ParamTuple::zeros(NetShape(w)); })
      .def_static("from_vector", &params_of, py::arg("widths"), py::arg("flat"))
      .def_static("random", [](const std::vector<std::size_t>& w, double scale, std::uint64_t seed) {
        return random_params(NetShape(w), scale, seed);
      }, py::arg("widths"), py::arg("scale") = 1.0, py::arg("seed") = 0)
      .def_property_readonly("widths", [](const ParamTuple& t) { return t.shape().widths(); })
      .def_property_readonly("depth", &ParamTuple::depth)
      .def("to_vector", &ParamTuple::to_vector)
      .def("weight", [](const ParamTuple& t, std::size_t l) { return Matrix(t.weight(l)); })
      .def("bias", [](const ParamTuple& t, std::size_t l) { return Vector(t.bias(l)); })
      .def("__len__", [](const ParamTuple& t) { return t.shape().param_count(); });

  m.def("forward", [](const ParamTuple& t, const Vector& x, const std::string& act) {
    return forward(t, Activation::by_name(act), x);
  }, py::arg("params"), py::arg("x"), py::arg("activation") = "tanh");

  m.def("risk", [](const ParamTuple& t, const RowMatrix& x, const RowMatrix& y, const std::string& act) {
    return risk(t, Activation::by_name(act), LossFn::mse(), to_dataset(x, y));
  }, py::arg("params"), py::arg("inputs"), py::arg("targets"), py::arg("activation") = "tanh");

  m.def("gradient", [](const ParamTuple& t, const RowMatrix& x, const RowMatrix& y, const std::string& act) {
    return gradient(t, Activation::by_name(act), LossFn::mse(), to_dataset(x, y));
  }, py::arg("params"), py::arg("inputs"), py::arg("targets"), py::arg("activation") = "tanh");

  m.def("hessian", [](const ParamTuple& t, const RowMatrix& x, const RowMatrix& y, const std::string& act) {
    const HessianReport h = hessian(t, Activation::by_name(act), LossFn::mse(), to_dataset(x, y));
    return std::make_tuple(h.full, h.eigenvalues);
  }, py::arg("params"), py::arg("inputs"), py::arg("targets"), py::arg("activation") = "tanh",
        "Returns (H, ascending eigenvalues).");

  m.def("find_critical", [](const std::vector<std::size_t>& widths, const RowMatrix& x, const RowMatrix& y,
                            std::uint64_t seed, double lr, std::size_t max_iters, double grad_tol,
                            const std::string& act) {
    DescentOptions o;
    o.seed = seed;
    o.lr = lr;
    o.max_iters = max_iters;
    o.grad_tol = grad_tol;
    const CriticalPointRecord r = find_critical(NetShape(widths), Activation::by_name(act), LossFn::mse(),
                                                to_dataset(x, y), o);
    return std::make_tuple(r.params, r.risk, r.gradient_inf_norm);
  }, py::arg("widths"), py::arg("inputs"), py::arg("targets"), py::arg("seed") = 0, py::arg("lr") = 0.05,
        py::arg("max_iters") = 200000, py::arg("grad_tol") = 1e-8, py::arg("activation") = "tanh",
        "Returns (params, risk, gradient inf-norm).");

  m.def("null_embed", &null_embed, py::arg("params"), py::arg("layer"), py::arg("alpha"));
  m.def("split_embed", &split_embed, py::arg("params"), py::arg("layer"), py::arg("neuron"), py::arg("alpha"));
  m.def("global_threefold", &global_threefold, py::arg("params"));

  m.def("sampled_embedding", [](const ParamTuple& t, const std::vector<std::vector<std::size_t>>& maps,
                                std::uint64_t seed, const std::string& act) {
    const SampledEmbedding s = sample_compatible(IndexMapping(t.shape(), maps), Activation::by_name(act), seed);
    const double residual = validate_compatibility(s.embedding, Activation::by_name(act), 1e-8).max_residual();
    return std::make_tuple(general_apply(t, s.embedding), residual);
  }, py::arg("params"), py::arg("index_map"), py::arg("seed") = 0, py::arg("activation") = "tanh",
        "Draws a compatible embedding for the index map and applies it. Returns (wide params, "
        "compatibility residual).");

  m.def("output_residual", [](const ParamTuple& narrow, const ParamTuple& wide, const RowMatrix& x,
                              const std::string& act) {
    std::vector<Vector> xs;
    for (Eigen::Index i = 0; i < x.rows(); ++i) xs.push_back(x.row(i).transpose());
    return output_preservation_residual(narrow, wide, Activation::by_name(act), xs);
  }, py::arg("narrow"), py::arg("wide"), py::arg("inputs"), py::arg("activation") = "tanh");

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> storage{"embedlab"};
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const std::string& s : storage) argv.push_back(s.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return std::make_tuple(code, out.str(), err.str());
  }, py::arg("args"), "Runs the command-line tool in-process. Returns (exit code, stdout, stderr).");
}
