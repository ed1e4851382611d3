#include <optional>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "neinfer/error.hpp"
#include "neinfer/harness.hpp"
#include "neinfer/inference.hpp"
#include "neinfer/priors.hpp"
#include "neinfer/subsets.hpp"
#include "neinfer/two_phase.hpp"

namespace py = pybind11;
using namespace neinfer;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ResponseEnsemble to_ensemble(const Array& a, std::size_t n_steps) {
    if (a.ndim() != 2) throw InvalidArgument("responses must be a 2-D array (rows x columns)");
    const std::size_t rows = std::size_t(a.shape(0));
    const std::size_t cols = std::size_t(a.shape(1));
    if (n_steps == 0) n_steps = cols;
    if (cols % n_steps != 0) throw InvalidArgument("column count is not a multiple of n_steps");
    std::vector<double> data(a.data(), a.data() + rows * cols);
    return ResponseEnsemble(rows, cols / n_steps, n_steps, std::move(data));
}

std::vector<double> to_vector(const Array& a) {
    return std::vector<double>(a.data(), a.data() + a.size());
}

Observation make_obs(const Array& d_obs, const Array& noise, double band_width, std::size_t n_steps) {
    return Observation::with_band(to_vector(d_obs), to_vector(noise), band_width, n_steps);
}

py::tuple envelope_tuple(const Envelope& e) {
    return py::make_tuple(py::array_t<double>(py::ssize_t(e.lower.size()), e.lower.data()),
                          py::array_t<double>(py::ssize_t(e.upper.size()), e.upper.data()));
}

std::vector<py::tuple> selection_list(const SubsetSelection& sel) {
    std::vector<py::tuple> out;
    for (const auto& e : sel.entries) {
        const auto mem = e.subset.members();
        out.push_back(py::make_tuple(std::vector<std::uint32_t>(mem.begin(), mem.end()), e.loss));
    }
    return out;
}

SubsetSelection from_list(const std::vector<std::vector<std::uint32_t>>& subsets) {
    SubsetSelection sel;
    for (const auto& m : subsets) sel.entries.push_back({SubsetId(m), 0.0});
    return sel;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "C++ core of neinfer";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("count_subsets", &count_subsets, py::arg("n"), py::arg("k_max"),
          "Number of non-empty subsets of size <= k_max.");

    m.def(
        "rel_perm",
        [](double sw, double s_iw, double beta) {
            const RelPerm kr = rel_perm(sw, s_iw, beta);
            return py::make_tuple(kr.water, kr.oil);
        },
        py::arg("sw"), py::arg("s_iw"), py::arg("beta") = 2.0,
        "Brooks-Corey (k_rw, k_ro).");

    m.def(
        "prior_envelope",
        [](const Array& responses, std::size_t k_max) {
            return envelope_tuple(prior_envelope(to_ensemble(responses, 0), k_max));
        },
        py::arg("responses"), py::arg("k_max") = 1);

    m.def(
        "select_posterior",
        [](const Array& responses, const Array& d_obs, const Array& noise, double sigma,
           std::size_t k_max, std::size_t n_steps, std::size_t stride, std::size_t workers) {
            const auto ens = to_ensemble(responses, n_steps);
            const auto obs = make_obs(d_obs, noise, 2.0, ens.n_steps());
            return selection_list(select_posterior(ens, obs, sigma, k_max, {stride, workers}));
        },
        py::arg("responses"), py::arg("d_obs"), py::arg("noise"), py::arg("sigma"),
        py::arg("k_max"), py::arg("n_steps") = 0, py::arg("stride") = 1, py::arg("workers") = 1,
        "List of (members, loss) with loss < sigma, sorted by loss.");

    m.def(
        "posterior_envelope",
        [](const Array& responses, const std::vector<std::vector<std::uint32_t>>& subsets) {
            return envelope_tuple(posterior_envelope(to_ensemble(responses, 0), from_list(subsets)));
        },
        py::arg("responses"), py::arg("subsets"));

    m.def(
        "auto_sigma",
        [](const Array& responses, const Array& d_obs, const Array& noise, std::size_t k_max,
           double coverage_target, double band_width, std::size_t n_steps) {
            const auto ens = to_ensemble(responses, n_steps);
            const auto obs = make_obs(d_obs, noise, band_width, ens.n_steps());
            const auto r = auto_sigma(ens, obs, k_max, coverage_target);
            py::dict d;
            d["sigma"] = r.sigma;
            d["coverage"] = r.coverage;
            d["selected"] = r.selected;
            d["min_loss"] = r.min_loss;
            d["max_loss"] = r.max_loss;
            return d;
        },
        py::arg("responses"), py::arg("d_obs"), py::arg("noise"), py::arg("k_max"),
        py::arg("coverage_target") = 0.95, py::arg("band_width") = 2.0, py::arg("n_steps") = 0);

    m.def(
        "sample_h_fields",
        [](std::array<int, 3> dims, std::array<double, 3> spacing, std::array<double, 3> range,
           double sill, double mean_h, std::uint64_t seed, std::size_t count) {
            VariogramSpec spec;
            spec.range = range;
            spec.sill = sill;
            spec.mean_h = mean_h;
            const Grid grid(dims, spacing);
            const auto fields = sample_gaussian_field(grid, spec, seed, count);
            py::array_t<double> out({py::ssize_t(count), py::ssize_t(grid.num_cells())});
            auto w = out.mutable_unchecked<2>();
            for (std::size_t r = 0; r < count; ++r) {
                for (std::size_t c = 0; c < grid.num_cells(); ++c) w(r, c) = fields[r][c];
            }
            return out;
        },
        py::arg("dims"), py::arg("spacing"), py::arg("range"), py::arg("sill") = 1.0,
        py::arg("mean_h") = VariogramSpec{}.mean_h, py::arg("seed") = 0, py::arg("count") = 1,
        "Gaussian h = log2(10 k) fields, one row per realisation.");

    m.def(
        "run_case_json",
        [](const std::string& config, std::optional<std::string> out_dir, bool nei, bool predict,
           bool esmda) {
            const auto c = load_case_config(config);
            RunBundle b;
            {
                py::gil_scoped_release release;
                b = run_case(c, {nei, predict, esmda});
                if (out_dir) export_bundle(b, *out_dir);
            }
            return summary_json(b.summary);
        },
        py::arg("config"), py::arg("out_dir") = py::none(), py::arg("nei") = true,
        py::arg("predict") = true, py::arg("esmda") = true);
}
