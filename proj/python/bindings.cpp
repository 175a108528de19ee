// Python bindings for the channel-estimation pipeline.
#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "nfce/harness/evaluate.hpp"
#include "nfce/harness/run_config.hpp"

namespace py = pybind11;
using namespace nfce;
using namespace nfce::harness;

namespace {

using json = nlohmann::json;

json parse(const std::string& s) { return s.empty() ? json::object() : json::parse(s); }

SteeringModel parse_model(const std::string& s) {
  if (s == "exact") return SteeringModel::exact;
  if (s == "fresnel") return SteeringModel::fresnel;
  if (s == "planar") return SteeringModel::planar;
  throw InvalidArgument("steering model must be exact, fresnel or planar");
}

diffusion::SigmaRule parse_sigma(const std::string& s) {
  if (s == "zero") return diffusion::SigmaRule::zero;
  if (s == "ddpm") return diffusion::SigmaRule::ddpm;
  throw InvalidArgument("sigma must be zero or ddpm");
}

// (B, 2, N, K) float64 array <-> Image.
py::array_t<double> to_array(const Image& img) {
  py::array_t<double> out({img.batch, img.channels, img.height, img.width});
  std::copy(img.data.data(), img.data.data() + img.size(), out.mutable_data());
  return out;
}

Image from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 4) throw InvalidArgument("expected a (batch, channels, height, width) array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
            static_cast<int>(a.shape(3)));
  std::copy(a.data(), a.data() + img.size(), img.data.data());
  return img;
}

py::dict sweep_to_dict(const SweepResult& r) {
  py::list rows;
  for (const auto& p : r.points) {
    py::dict d;
    d["axis"] = to_string(r.axis);
    d["value"] = p.value;
    d["method"] = to_string(p.method);
    d["nmse_linear"] = p.nmse_linear;
    d["nmse_db"] = p.nmse_db();
    d["trials"] = p.trials;
    rows.append(d);
  }
  py::dict out;
  out["rows"] = rows;
  out["fraunhofer_m"] = r.fraunhofer_m ? py::cast(*r.fraunhofer_m) : py::none();
  return out;
}

}  // namespace

PYBIND11_MODULE(_nfce, m) {
  m.doc() = "Near-field channel estimation: compressed-sensing initialization and diffusion refinement";

  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "geometry",
      [](const std::string& system_json) {
        const auto g = derive_geometry(SystemConfig::from_json(parse(system_json)));
        py::dict d;
        d["wavelength_m"] = g.wavelength;
        d["aperture_m"] = g.aperture;
        d["fraunhofer_m"] = g.fraunhofer_m;
        d["fresnel_m"] = g.fresnel_m;
        d["antenna_offsets_m"] = g.antenna_offsets;
        d["subcarrier_hz"] = g.subcarrier_freqs;
        return d;
      },
      py::arg("system_json") = "");

  m.def(
      "steering_vector",
      [](double angle, double distance, const std::string& model, const std::string& system_json) {
        const auto g = derive_geometry(SystemConfig::from_json(parse(system_json)));
        return CVector(steering_vector(angle, distance, parse_model(model), g));
      },
      py::arg("angle"), py::arg("distance"), py::arg("model") = "exact", py::arg("system_json") = "");

  m.def("nmse", py::overload_cast<const CMatrix&, const CMatrix&>(&harness::nmse), py::arg("truth"),
        py::arg("estimate"));

  m.def(
      "alpha_bar",
      [](int steps, double beta_1, double beta_T) {
        const auto s = diffusion::linear_schedule(steps, beta_1, beta_T);
        std::vector<double> out;
        for (int t = 0; t <= steps; ++t) out.push_back(s.alpha_bar(t));
        return out;
      },
      py::arg("steps") = 1000, py::arg("beta_1") = 1e-4, py::arg("beta_T") = 0.02);

  m.def("time_embedding", [](double t, int dim) { return RVector(time_embedding(t, dim)); }, py::arg("t"),
        py::arg("dim"));

  py::class_<Scenario>(m, "Scenario")
      .def(py::init([](const std::string& scenario_json) {
             return Scenario(scenario_json.empty() ? ScenarioConfig::toy()
                                                   : ScenarioConfig::from_json(parse(scenario_json)));
           }),
           py::arg("scenario_json") = "")
      .def_property_readonly("n_atoms", [](const Scenario& s) { return s.dict.size(); })
      .def_property_readonly("fraunhofer_m", [](const Scenario& s) { return s.geom.fraunhofer_m; })
      .def_property_readonly("config_json", [](const Scenario& s) { return s.config.to_json().dump(); })
      .def(
          "simulate",
          [](const Scenario& s, double snr_db, std::uint64_t seed) {
            Rng rng(seed);
            const Instance inst = simulate(s, snr_db, rng);
            py::dict d;
            d["truth"] = py::cast(inst.truth.h, py::return_value_policy::copy);
            d["somp"] = py::cast(inst.somp.h, py::return_value_policy::copy);
            d["support"] = inst.sparse.support;
            d["noise_power"] = inst.noise_power;
            return d;
          },
          py::arg("snr_db"), py::arg("seed") = 0);

  m.def(
      "generate_dataset",
      [](const std::string& config_path, std::size_t count, std::uint64_t seed, const std::filesystem::path& out) {
        const RunConfig rc = load_run_config(config_path);
        save_dataset(generate_dataset(rc.scenario, count, seed), out);
      },
      py::arg("config_path"), py::arg("count"), py::arg("seed"), py::arg("out"));

  m.def(
      "train",
      [](const std::string& config_path, const std::filesystem::path& dataset, const std::filesystem::path& out,
         int iters, int batch, double lr, double ema, std::uint64_t seed) {
        const RunConfig rc = load_run_config(config_path);
        const Dataset ds = load_dataset(dataset);
        TrainState st = init_train_state(rc.denoiser, rc.schedule, ds, seed);
        TrainOptions o;
        o.iters = iters;
        o.batch = batch;
        o.lr = lr;
        o.ema = ema;
        o.seed = seed;
        {
          py::gil_scoped_release release;
          train(st, ds, o);
        }
        save_checkpoint(st, out);
        return st.loss_history;
      },
      py::arg("config_path"), py::arg("dataset"), py::arg("out"), py::arg("iters") = 1000, py::arg("batch") = 8,
      py::arg("lr") = 1e-4, py::arg("ema") = 0.9999, py::arg("seed") = 0);

  py::class_<TrainState>(m, "Checkpoint")
      .def(py::init([](const std::filesystem::path& dir) { return load_checkpoint(dir); }), py::arg("path"))
      .def_readonly("step", &TrainState::step)
      .def_property_readonly("steps_T", [](const TrainState& s) { return s.schedule.steps; })
      .def_property_readonly("scenario_json", [](const TrainState& s) { return s.scenario.to_json().dump(); })
      .def(
          "refine",
          [](const TrainState& s, const py::array_t<double, py::array::c_style | py::array::forcecast>& side,
             int steps, const std::string& sigma, std::uint64_t seed, bool use_ema, bool clip_x0) {
            const Image in = from_array(side);
            auto spec = make_sampler(Method::nm_gdm, s.schedule.steps, steps, parse_sigma(sigma));
            spec.clip_x0 = clip_x0;
            Image out;
            {
              py::gil_scoped_release release;
              out = refine_images(in, s, spec, use_ema, 50, seed);
            }
            return to_array(out);
          },
          py::arg("side"), py::arg("steps") = 50, py::arg("sigma") = "zero", py::arg("seed") = 0,
          py::arg("use_ema") = true, py::arg("clip_x0") = false);

  m.def("pack_image", [](const CMatrix& h) { return to_array(pack_image(h)); }, py::arg("h"));
  m.def(
      "unpack_image",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a, int index) {
        return unpack_image(from_array(a), index);
      },
      py::arg("image"), py::arg("index") = 0);

  m.def(
      "evaluate",
      [](const std::string& axis, const std::vector<double>& grid, const std::vector<std::string>& methods,
         int trials, const std::string& scenario_json, const std::string& checkpoint, int steps,
         const std::string& sigma, double snr_db, std::uint64_t seed, bool clip_x0) {
        std::optional<TrainState> ckpt;
        if (!checkpoint.empty()) ckpt = load_checkpoint(checkpoint);
        ScenarioConfig base = ScenarioConfig::toy();
        if (!scenario_json.empty())
          base = ScenarioConfig::from_json(parse(scenario_json));
        else if (ckpt)
          base = ckpt->scenario;
        EvalOptions o;
        o.axis = parse_axis(axis);
        o.grid = grid;
        o.methods.clear();
        for (const auto& s : methods) o.methods.push_back(parse_method(s));
        o.trials = trials;
        o.steps = steps;
        o.sigma = parse_sigma(sigma);
        o.snr_db = snr_db;
        o.seed = seed;
        o.clip_x0 = clip_x0;
        SweepResult r;
        {
          py::gil_scoped_release release;
          r = evaluate_sweep(base, o, ckpt ? &*ckpt : nullptr);
        }
        return sweep_to_dict(r);
      },
      py::arg("axis"), py::arg("grid"), py::arg("methods") = std::vector<std::string>{"somp"},
      py::arg("trials") = 200, py::arg("scenario_json") = "", py::arg("checkpoint") = "", py::arg("steps") = 50,
      py::arg("sigma") = "zero", py::arg("snr_db") = 5.0, py::arg("seed") = 0, py::arg("clip_x0") = false);
}
