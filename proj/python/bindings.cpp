#include <pybind11/gil_safe_call_once.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "kneescout/baconwatts.hpp"
#include "kneescout/error.hpp"
#include "kneescout/matrixprofile.hpp"
#include "kneescout/preprocess.hpp"
#include "kneescout/report.hpp"
#include "kneescout/segmentation.hpp"
#include "kneescout/synthgen.hpp"

namespace py = pybind11;
using namespace kneescout;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<double> to_vector(const Array& a) {
    if (a.ndim() != 1) throw py::value_error("expected a one-dimensional array");
    return {a.data(), a.data() + a.size()};
}

template <class T>
py::array_t<T> to_array(const std::vector<T>& v) {
    return py::array_t<T>(static_cast<py::ssize_t>(v.size()), v.data());
}

CapacityFadeSeries make_series(const py::array_t<std::int64_t>& cycles, const Array& capacity, double q_nom,
                               const std::string& cell_id) {
    CapacityFadeSeries s;
    s.cell_id = cell_id;
    s.cycles.assign(cycles.data(), cycles.data() + cycles.size());
    s.capacity_ah = to_vector(capacity);
    s.q_nom_ah = q_nom;
    return s;
}

py::dict report_dict(const KneeReport& r) {
    py::dict d;
    d["cell_id"] = r.cell_id;
    d["method"] = std::string(to_string(r.method));
    d["onset_cycle"] = r.onset_cycle;
    d["knee_cycle"] = r.knee_cycle;
    d["eol_cycle"] = r.eol_cycle ? py::object(py::int_(*r.eol_cycle)) : py::object(py::none());
    d["params"] = r.params;
    d["diagnostics"] = r.diagnostics;
    return d;
}

}  // namespace

PYBIND11_MODULE(_kneescout, m) {
    m.doc() = "Knee-onset and knee identification for battery capacity fade";

    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
    error_type.call_once_and_store_result(
        [&] { return py::exception<Error>(m, "KneeScoutError", PyExc_RuntimeError); });
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            const auto& type = error_type.get_stored();
            py::object exc = type(std::string(e.what()));
            exc.attr("code") = std::string(to_string(e.code()));
            exc.attr("numerical") = is_numerical(e.code());
            PyErr_SetObject(type.ptr(), exc.ptr());
        }
    });

    m.def(
        "identify_knees",
        [](const py::array_t<std::int64_t>& cycles, const Array& capacity, double q_nom, const std::string& cell_id,
           int sg_window, int sg_order, int curv_window, int mp_window, std::optional<int> cac_window,
           std::optional<int> exclusion, double eol_threshold, unsigned threads) {
            PipelineParams p;
            p.sg_window = sg_window;
            p.sg_order = sg_order;
            p.curv_window = curv_window;
            p.mp_window = mp_window;
            p.cac_window = cac_window;
            p.exclusion_radius = exclusion;
            p.eol_threshold = eol_threshold;
            p.threads = threads;
            const auto s = make_series(cycles, capacity, q_nom, cell_id);
            KneeReport r;
            {
                py::gil_scoped_release release;
                r = identify_knees(s, p);
            }
            return report_dict(r);
        },
        py::arg("cycles"), py::arg("capacity_ah"), py::arg("q_nom_ah"), py::arg("cell_id") = "cell",
        py::arg("sg_window") = 21, py::arg("sg_order") = 3, py::arg("curv_window") = 3, py::arg("mp_window") = 3,
        py::arg("cac_window") = py::none(), py::arg("exclusion") = py::none(), py::arg("eol_threshold") = 0.8,
        py::arg("threads") = 1u, "Curvature segmentation: onset and knee from the two deepest arc-curve minima.");

    m.def(
        "identify_knees_dbw",
        [](const py::array_t<std::int64_t>& cycles, const Array& capacity, double q_nom, const std::string& cell_id,
           double gamma, int max_iter) {
            DbwOptions o;
            o.gamma = gamma;
            o.max_iter = max_iter;
            return report_dict(identify_knees_dbw(make_series(cycles, capacity, q_nom, cell_id), o));
        },
        py::arg("cycles"), py::arg("capacity_ah"), py::arg("q_nom_ah"), py::arg("cell_id") = "cell",
        py::arg("gamma") = 10.0, py::arg("max_iter") = 1000, "Double Bacon-Watts fit packaged as a knee report.");

    m.def(
        "savgol_smooth",
        [](const Array& values, int window, int order) {
            NormalizedSeries s;
            s.values = to_vector(values);
            s.cycles.resize(s.values.size());
            for (std::size_t i = 0; i < s.cycles.size(); ++i) s.cycles[i] = static_cast<Cycle>(i);
            return to_array(savgol_smooth(s, window, order).values);
        },
        py::arg("values"), py::arg("window") = 21, py::arg("order") = 3);

    m.def(
        "approximate_curvature",
        [](const Array& values, int ws) {
            SmoothedSeries s;
            s.values = to_vector(values);
            s.cycles.assign(s.values.size(), 0);
            return to_array(approximate_curvature(s, ws).values);
        },
        py::arg("values"), py::arg("ws") = 3);

    m.def(
        "mass", [](const Array& query, const Array& series) { return to_array(mass(to_vector(query), to_vector(series)).distances); },
        py::arg("query"), py::arg("series"));

    m.def(
        "stamp",
        [](const Array& series, int window, int exclusion, unsigned threads) {
            const auto v = to_vector(series);
            MatrixProfile mp;
            {
                py::gil_scoped_release release;
                mp = stamp(v, window, exclusion, threads);
            }
            std::vector<std::int64_t> idx(mp.I.begin(), mp.I.end());
            return py::make_tuple(to_array(mp.P), to_array(idx));
        },
        py::arg("series"), py::arg("window"), py::arg("exclusion") = -1, py::arg("threads") = 1u,
        "Matrix profile (P, I) of a series.");

    m.def(
        "fluss",
        [](const py::array_t<std::int64_t>& index, std::size_t edge_zone) {
            std::vector<std::size_t> I;
            for (py::ssize_t i = 0; i < index.size(); ++i) {
                if (index.data()[i] < 0) throw py::value_error("negative profile index");
                I.push_back(static_cast<std::size_t>(index.data()[i]));
            }
            const auto set = fluss(I, edge_zone);
            std::vector<std::int64_t> ac(set.ac.begin(), set.ac.end());
            return py::make_tuple(to_array(ac), to_array(set.iac), to_array(set.cac));
        },
        py::arg("index"), py::arg("edge_zone") = 0);

    m.def(
        "rea",
        [](const Array& cac, int n_boundaries, int exclusion) {
            return rea(to_vector(cac), n_boundaries, exclusion).boundaries;
        },
        py::arg("cac"), py::arg("n_boundaries") = 2, py::arg("exclusion") = 15);

    m.def(
        "pearson", [](const Array& x, const Array& y) { return pearson(to_vector(x), to_vector(y)); }, py::arg("x"),
        py::arg("y"));

    m.def(
        "generate",
        [](int n_cycles, double a, double b, double c, int n_k, int knee_width, double p, double noise_sigma,
           std::uint64_t seed) {
            SyntheticSpec s;
            s.n_cycles = n_cycles;
            s.a = a;
            s.b = b;
            s.c = c;
            s.n_k = n_k;
            s.knee_width = knee_width;
            s.p = p;
            s.noise_sigma = noise_sigma;
            s.seed = seed;
            const auto curve = generate(s);
            py::object truth = py::none();
            if (curve.truth) {
                py::dict t;
                t["onset_cycle"] = curve.truth->onset_cycle;
                t["knee_cycle"] = curve.truth->knee_cycle;
                truth = t;
            }
            return py::make_tuple(to_array(curve.series.cycles), to_array(curve.series.capacity_ah), truth);
        },
        py::arg("n_cycles") = 2000, py::arg("a") = 5e-4, py::arg("b") = 0.0, py::arg("c") = 0.01, py::arg("n_k") = 800,
        py::arg("knee_width") = 0, py::arg("p") = 1.0, py::arg("noise_sigma") = 0.0, py::arg("seed") = 0,
        "Synthetic fade curve: (cycles, capacity_ah, truth or None). Capacity is in units of a 1.1 Ah cell.");
}
