#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "fracsob/errors.hpp"
#include "fracsob/experiments.hpp"

namespace py = pybind11;
using namespace fracsob;

namespace {

Vec to_vec(const std::vector<double>& v) { return Vec(std::span<const double>(v)); }
std::vector<double> from_vec(const Vec& v) { return v.to_vector(); }
std::vector<std::int64_t> from_ivec(const IVec& v) { return v.to_vector(); }

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }
nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Box to_box(const std::vector<double>& lo, const std::vector<double>& hi) { return {to_vec(lo), to_vec(hi)}; }

QuadratureSpec quad_of(std::uint64_t samples, std::uint64_t seed, const std::string& method) {
  QuadratureSpec q;
  q.samples = samples;
  q.seed = seed;
  if (method == "tensor-grid") q.method = QuadMethod::TensorGrid;
  else if (method != "monte-carlo-pairs") throw ConfigError("method must be monte-carlo-pairs or tensor-grid");
  return q;
}

// Python callables may be invoked from worker threads, so every call takes the GIL.
FieldMap python_field(const std::string& name, int n, int m, py::function fn) {
  auto holder = std::make_shared<py::function>(std::move(fn));
  auto eval = [holder, m](const Vec& x) {
    py::gil_scoped_acquire gil;
    const auto out = (*holder)(from_vec(x)).cast<std::vector<double>>();
    if (static_cast<int>(out.size()) != m) throw Error("python field returned a value of the wrong dimension");
    return to_vec(out);
  };
  // Releasing the last reference also needs the GIL.
  std::shared_ptr<void> guard(nullptr, [holder](void*) mutable {
    py::gil_scoped_acquire gil;
    holder.reset();
  });
  return FieldMap(name, n, m, [eval, guard](const Vec& x) { return eval(x); });
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Fractional Sobolev approximation by cubical meshes";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ExceptionalPoint>(m, "ExceptionalPoint", base.ptr());
  py::register_exception<OutOfBounds>(m, "OutOfBounds", base.ptr());
  py::register_exception<OutsideTube>(m, "OutsideTube", base.ptr());
  py::register_exception<PreconditionError>(m, "PreconditionError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  m.def("set_worker_threads", &set_worker_threads, py::arg("n"));
  m.def("worker_threads", &worker_threads);

  py::class_<FieldMap>(m, "FieldMap")
      .def_property_readonly("name", &FieldMap::name)
      .def_property_readonly("in_dim", &FieldMap::in_dim)
      .def_property_readonly("out_dim", &FieldMap::out_dim)
      .def("__call__", [](const FieldMap& f, const std::vector<double>& x) { return from_vec(f(to_vec(x))); })
      .def("jacobian", [](const FieldMap& f, const std::vector<double>& x) {
        const Jacobian J = f.jacobian(to_vec(x));
        std::vector<std::vector<double>> out(J.rows(), std::vector<double>(J.cols()));
        for (int i = 0; i < J.rows(); ++i)
          for (int k = 0; k < J.cols(); ++k) out[i][k] = J(i, k);
        return out;
      });
  m.def("make_field", [](const std::string& name, int n, const py::object& params) {
    return make_field(name, n, params.is_none() ? nlohmann::json::object() : from_py(params));
  }, py::arg("name"), py::arg("n"), py::arg("params") = py::none());
  m.def("field_names", &field_names);
  m.def("python_field", &python_field, py::arg("name"), py::arg("n"), py::arg("m"), py::arg("fn"),
        "Wrap a Python callable taking and returning a list of floats.");
  m.def("vortex_map", &vortex_map, py::arg("n"), py::arg("k"));

  py::class_<MeshSpec>(m, "Mesh")
      .def(py::init([](const std::vector<double>& T, double eps, const std::vector<double>& lo,
                       const std::vector<double>& hi) {
             MeshSpec mesh{to_vec(T), eps, static_cast<int>(T.size()), to_box(lo, hi)};
             mesh.validate();
             return mesh;
           }),
           py::arg("translation"), py::arg("eps"), py::arg("lo"), py::arg("hi"))
      .def_static("covering", [](const std::vector<double>& T, double eps, const std::vector<double>& lo,
                                 const std::vector<double>& hi) { return MeshSpec::covering(to_vec(T), eps, to_box(lo, hi)); })
      .def_property_readonly("translation", [](const MeshSpec& s) { return from_vec(s.translation); })
      .def_property_readonly("eps", [](const MeshSpec& s) { return s.half_width; })
      .def_property_readonly("lo", [](const MeshSpec& s) { return from_vec(s.bounds.lo); })
      .def_property_readonly("hi", [](const MeshSpec& s) { return from_vec(s.bounds.hi); })
      .def("cube_of", [](const MeshSpec& s, const std::vector<double>& x) { return from_ivec(cube_of(to_vec(x), s)); })
      .def("cube_center", [](const MeshSpec& s, const std::vector<std::int64_t>& k) {
        return from_vec(s.cube_center(IVec(std::span<const std::int64_t>(k))));
      })
      .def("face_count", [](const MeshSpec& s, int j) { return enumerate_skeleton_faces(s, j).size(); })
      .def("dual_skeleton_distance",
           [](const MeshSpec& s, const std::vector<double>& x, int j) { return dual_skeleton_distance(to_vec(x), s, j); })
      .def("to_dict", [](const MeshSpec& s) { return to_py(s.to_json()); });

  m.def("sector_of", [](const std::vector<double>& local, int j) {
    const Sector s = sector_of(to_vec(local), j);
    return py::make_tuple(from_ivec(s.sigma), from_ivec(s.q));
  }, py::arg("local"), py::arg("j"), "Returns (sigma, q); sigma uses 0-based axes.");
  m.def("project_to_skeleton", [](const std::vector<double>& local, int j, double eps) {
    return from_vec(project_to_skeleton(to_vec(local), j, eps).target);
  }, py::arg("local"), py::arg("j"), py::arg("eps"));
  m.def("eval_extension", [](const FieldMap& f, const MeshSpec& mesh, int j, const std::vector<double>& x) {
    return from_vec(eval_extension(f, mesh, j, to_vec(x)));
  }, py::arg("f"), py::arg("mesh"), py::arg("j"), py::arg("x"));
  m.def("homogeneous_extension", &homogeneous_extension, py::arg("f"), py::arg("mesh"), py::arg("j"));

  auto report = [](const NormReport& r) { return to_py(r.to_json()); };
  m.def("lp_norm", [report](const FieldMap& f, const std::vector<double>& lo, const std::vector<double>& hi, double p,
                            std::uint64_t samples, std::uint64_t seed) {
    NormReport r;
    {
      py::gil_scoped_release nogil;
      r = lp_norm(f, to_box(lo, hi), p, quad_of(samples, seed, "monte-carlo-pairs"));
    }
    return report(r);
  }, py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("p"), py::arg("samples") = 200'000, py::arg("seed") = 1);
  m.def("gagliardo_seminorm_p", [report](const FieldMap& f, const std::vector<double>& lo,
                                         const std::vector<double>& hi, double s, double p, std::uint64_t samples,
                                         std::uint64_t seed) {
    NormReport r;
    {
      py::gil_scoped_release nogil;
      r = gagliardo_seminorm_p(f, to_box(lo, hi), s, p, quad_of(samples, seed, "monte-carlo-pairs"));
    }
    return report(r);
  }, py::arg("f"), py::arg("lo"), py::arg("hi"), py::arg("s"), py::arg("p"), py::arg("samples") = 200'000,
     py::arg("seed") = 1);
  m.def("wsp_distance", [report](const FieldMap& f, const FieldMap& g, const std::vector<double>& lo,
                                 const std::vector<double>& hi, double s, double p, std::uint64_t samples,
                                 std::uint64_t seed) {
    NormReport r;
    {
      py::gil_scoped_release nogil;
      r = wsp_distance(f, g, to_box(lo, hi), s, p, quad_of(samples, seed, "monte-carlo-pairs"));
    }
    return report(r);
  }, py::arg("f"), py::arg("g"), py::arg("lo"), py::arg("hi"), py::arg("s"), py::arg("p"),
     py::arg("samples") = 200'000, py::arg("seed") = 1);

  py::class_<ManifoldTarget>(m, "ManifoldTarget")
      .def_static("sphere", &ManifoldTarget::sphere, py::arg("k"), py::arg("delta") = 0.2)
      .def_static("product", &ManifoldTarget::product, py::arg("ks"), py::arg("delta") = 0.2)
      .def_property_readonly("ambient_dim", &ManifoldTarget::ambient_dim)
      .def_property_readonly("delta", &ManifoldTarget::delta)
      .def("distance", [](const ManifoldTarget& t, const std::vector<double>& x) { return t.distance(to_vec(x)); });
  m.def("nearest_point_projection", [](const std::vector<double>& x, const ManifoldTarget& t) {
    return from_vec(nearest_point_projection(to_vec(x), t));
  }, py::arg("x"), py::arg("target"));
  m.def("winding_number", [](const FieldMap& u, const std::vector<double>& center, double radius, int samples) {
    return winding_number(u, to_vec(center), radius, samples);
  }, py::arg("u"), py::arg("center"), py::arg("radius"), py::arg("samples") = 1024);

  m.def("cstar_oracle", &cstar_oracle);
  m.def("w11_gradient_gap", [](const FieldMap& u, const std::vector<double>& lo, const std::vector<double>& hi,
                               const std::vector<double>& T, double eps) {
    const W11Row r = w11_gradient_gap(u, to_box(lo, hi), to_vec(T), eps);
    return py::dict(py::arg("value") = r.value, py::arg("error") = r.error, py::arg("full_cubes") = r.full_cubes);
  }, py::arg("u"), py::arg("lo"), py::arg("hi"), py::arg("T"), py::arg("eps"));

  m.def("run_experiment", [](const py::object& config, const std::optional<std::filesystem::path>& out_dir) {
    ExperimentConfig cfg;
    if (py::isinstance<py::dict>(config)) cfg = ExperimentConfig::from_json(from_py(config));
    else cfg = ExperimentConfig::load(config.cast<std::filesystem::path>());
    ExperimentReport rep;
    {
      py::gil_scoped_release nogil;
      rep = run_experiment(cfg);
      if (out_dir) emit_report(rep, *out_dir);
    }
    py::dict out;
    out["name"] = rep.name;
    out["verdict"] = rep.verdict;
    out["pass"] = rep.pass;
    out["report"] = to_py(rep.json);
    return out;
  }, py::arg("config"), py::arg("out_dir") = py::none(),
     "Run an experiment from a config dict or a path; optionally write the report files.");
}
