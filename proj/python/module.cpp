// Python bindings over dense numpy arrays. Quadtrees are built on entry and
// flattened on return, so every call takes a block_size.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "spamm/frechet.hpp"
#include "spamm/io.hpp"
#include "spamm/precond.hpp"
#include "spamm/spamm.hpp"
#include "spamm/sqrt_iter.hpp"

namespace py = pybind11;
using namespace spamm;

namespace {

using Array = Eigen::Ref<const DenseMatrix>;

py::dict stats_dict(const MultiplyStats &s) {
  py::dict d;
  d["leaf_products_performed"] = s.leaf_products_performed;
  d["leaf_products_possible"] = s.leaf_products_possible;
  d["leaf_products_culled"] = s.leaf_products_culled;
  d["culled_subtrees_per_depth"] = s.culled_subtrees_per_depth;
  d["volume_fraction"] = s.volume_fraction();
  return d;
}

py::list history_list(const std::vector<HistoryRow> &rows) {
  py::list out;
  for (const auto &r : rows) {
    py::dict d;
    d["k"] = r.k;
    d["t"] = r.t;
    d["alpha"] = r.alpha;
    d["eps"] = r.eps;
    d["vol_y"] = r.y_stats.volume_fraction();
    d["vol_z"] = r.z_stats.volume_fraction();
    d["vol_x"] = r.x_stats.volume_fraction();
    out.append(d);
  }
  return out;
}

IterationConfig make_config(const std::string &mode, double tau,
                            std::optional<double> tau_s, std::size_t block_size,
                            std::size_t max_iter, double tol, bool scaling) {
  IterationConfig c;
  c.mode = channel_from_string(mode);
  c.tau = tau;
  c.tau_s = tau_s;
  c.block_size = block_size;
  c.max_iter = max_iter;
  c.convergence_tol = tol;
  c.scaling_enabled = scaling;
  return c;
}

// Product representation bound together with its block size.
struct Representation {
  precond::ProductRepresentation rep;
  std::size_t block_size;
};

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "SpAMM products, Newton-Schulz inverse square roots and "
            "regularized preconditioner ladders";

  static py::exception<DivergenceError> divergence(m, "DivergenceError",
                                                   PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p)
        std::rethrow_exception(p);
    } catch (const DivergenceError &e) {
      divergence(e.what());
    } catch (const InvalidArgument &e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ShapeError &e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const IoError &e) {
      PyErr_SetString(PyExc_OSError, e.what());
    }
  });

  m.def("set_worker_count", &set_worker_count, py::arg("n"));
  m.def("worker_count", &worker_count);

  m.def(
      "multiply",
      [](const Array &a, const Array &b, double tau, std::size_t block_size) {
        MultiplyResult r;
        {
          py::gil_scoped_release release;
          r = multiply(build(a, block_size), build(b, block_size), tau);
        }
        return py::make_tuple(to_dense(r.product), stats_dict(r.stats));
      },
      py::arg("a"), py::arg("b"), py::arg("tau") = 0.0,
      py::arg("block_size") = HierMatrix::kDefaultBlockSize,
      "a (x)_tau b; returns (product, stats).");
  m.def("error_bound", &error_bound, py::arg("n"), py::arg("tau"),
        py::arg("norm_a"), py::arg("norm_b"));
  m.def("elementwise_error_bound", &elementwise_error_bound, py::arg("n"),
        py::arg("tau"), py::arg("norm_a"), py::arg("norm_b"));

  m.def("alpha_schedule", [](double t) { return alpha_schedule(t); }, py::arg("t"));
  m.def("epsilon_schedule", [](double t) { return epsilon_schedule(t); },
        py::arg("t"));

  m.def(
      "inv_sqrt",
      [](const Array &s, const std::string &mode, double tau,
         std::optional<double> tau_s, std::size_t block_size, std::size_t max_iter,
         double tol, bool scaling) {
        const IterationConfig c =
            make_config(mode, tau, tau_s, block_size, max_iter, tol, scaling);
        IterationResult r;
        {
          py::gil_scoped_release release;
          r = run(build(s, block_size), c);
        }
        py::dict d;
        d["sqrt"] = to_dense(r.sqrt);
        d["inv_sqrt"] = to_dense(r.inv_sqrt);
        d["status"] = std::string(to_string(r.status));
        d["iterations"] = r.iterations;
        d["history"] = history_list(r.history);
        return d;
      },
      py::arg("s"), py::arg("mode") = "dual", py::arg("tau") = 0.0,
      py::arg("tau_s") = py::none(),
      py::arg("block_size") = HierMatrix::kDefaultBlockSize,
      py::arg("max_iter") = 100, py::arg("tol") = 1e-10, py::arg("scaling") = true,
      "Scaled Newton-Schulz iteration; returns a dict with sqrt, inv_sqrt, "
      "status, iterations and history.");

  m.def(
      "error_flow",
      [](const Array &s, std::size_t steps, const std::string &mode, double tau,
         std::optional<double> tau_s, std::size_t block_size, bool scaling) {
        const IterationConfig c =
            make_config(mode, tau, tau_s, block_size, steps, 1e-10, scaling);
        frechet::ErrorFlow f;
        {
          py::gil_scoped_release release;
          f = frechet::track_error_flow(build(s, block_size), c, steps);
        }
        py::list rows;
        for (const auto &r : f.records) {
          py::dict d;
          d["k"] = r.k;
          d["t_approx"] = r.t_approx;
          d["t_reference"] = r.t_reference;
          d["dy"] = r.dy;
          d["dz"] = r.dz;
          d["dx"] = r.dx;
          d["dz_bound"] = r.dz_bound;
          d["z_norm"] = r.z_norm;
          d["limit_gap_y"] = r.limit_gap_y;
          d["limit_gap_z"] = r.limit_gap_z;
          rows.append(d);
        }
        py::dict d;
        d["records"] = rows;
        d["bifurcated"] = f.bifurcated;
        d["bifurcation_step"] = f.bifurcation_step;
        d["status"] = std::string(to_string(f.status));
        return d;
      },
      py::arg("s"), py::arg("steps") = 60, py::arg("mode") = "dual",
      py::arg("tau") = 0.0, py::arg("tau_s") = py::none(),
      py::arg("block_size") = HierMatrix::kDefaultBlockSize,
      py::arg("scaling") = true,
      "SpAMM iteration against an exact dense reference in lockstep.");

  m.def(
      "gen_decay",
      [](std::size_t n, int dim, double gamma, double shift,
         const std::string &ordering, std::optional<double> kappa,
         const std::string &surgery, std::uint64_t seed) {
        io::SyntheticSpec spec;
        spec.n = n;
        spec.lattice_dim = dim;
        spec.decay_rate = gamma;
        spec.diagonal_shift = shift;
        spec.ordering = io::ordering_from_string(ordering);
        spec.target_condition = kappa;
        spec.surgery = io::surgery_from_string(surgery);
        spec.seed = seed;
        return io::gen_decay(spec);
      },
      py::arg("n"), py::arg("dim") = 1, py::arg("gamma") = 1.0,
      py::arg("shift") = 0.0, py::arg("ordering") = "natural",
      py::arg("kappa") = py::none(), py::arg("surgery") = "spectral",
      py::arg("seed") = 0, "Exponential-decay lattice matrix.");

  m.def("read_matrix_market", &io::read_matrix_market, py::arg("path"));
  m.def(
      "write_matrix_market",
      [](const Array &a, const io::fs::path &path, bool symmetric) {
        io::write_matrix_market(a, path, symmetric);
      },
      py::arg("a"), py::arg("path"), py::arg("symmetric") = true);

  m.def("shifted_condition", &precond::shifted_condition, py::arg("s_min"),
        py::arg("s_max"), py::arg("mu"));
  m.def("exact_shifted_condition", &precond::exact_shifted_condition,
        py::arg("s_min"), py::arg("s_max"), py::arg("mu"));

  py::class_<Representation>(m, "Representation",
                             "Inverse factor as a product of slices")
      .def(py::init([](std::size_t block_size) {
             return Representation{{}, block_size};
           }),
           py::arg("block_size") = HierMatrix::kDefaultBlockSize)
      .def_static(
          "load",
          [](const io::fs::path &dir, std::size_t block_size) {
            return Representation{io::load_representation(dir, block_size),
                                  block_size};
          },
          py::arg("dir"), py::arg("block_size") = HierMatrix::kDefaultBlockSize)
      .def("save",
           [](const Representation &r, const io::fs::path &dir) {
             io::save_representation(r.rep, dir);
           })
      .def(
          "extend",
          [](Representation &r, const Array &s, double mu, double tau0,
             double tau_apply, std::optional<double> tau_s, std::size_t max_iter) {
            IterationConfig c;
            c.block_size = r.block_size;
            c.tau_s = tau_s;
            c.max_iter = max_iter;
            py::gil_scoped_release release;
            r.rep = precond::extend(r.rep, build(s, r.block_size), mu, tau0,
                                    tau_apply, c);
          },
          py::arg("s"), py::arg("mu"), py::arg("tau0") = 0.1,
          py::arg("tau_apply") = 0.01, py::arg("tau_s") = py::none(),
          py::arg("max_iter") = 100,
          "Adds a slice for s + mu I; mu must be below the last slice's.")
      .def(
          "apply",
          [](const Representation &r, const Array &a, double tau) {
            return to_dense(precond::apply(r.rep, build(a, r.block_size), tau));
          },
          py::arg("a"), py::arg("tau") = 0.0, "z_m^T ... z_0^T a")
      .def(
          "congruence",
          [](const Representation &r, const Array &s) {
            return precond::dense_congruence(r.rep, s);
          },
          py::arg("s"), "Exact dense Z^T s Z.")
      .def("__len__", [](const Representation &r) { return r.rep.slices.size(); })
      .def_property_readonly("slices", [](const Representation &r) {
        py::list out;
        for (const auto &sl : r.rep.slices) {
          py::dict d;
          d["z"] = to_dense(sl.z_factor);
          d["mu"] = sl.mu;
          d["tau0"] = sl.tau0;
          d["tau_apply"] = sl.tau_apply;
          d["iterations"] = sl.iterations;
          d["trace_error"] = sl.final_trace_error;
          d["status"] = std::string(to_string(sl.status));
          out.append(d);
        }
        return out;
      });
}
