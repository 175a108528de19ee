#include "nfce/harness/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace nfce::harness {

namespace {

constexpr std::uint64_t kSamplerStream = 0x5a3b1e0dULL;

template <class E>
E parse_enum(const std::string& s, const std::vector<std::pair<const char*, E>>& table,
             const char* what) {
  for (const auto& [name, value] : table)
    if (s == name) return value;
  std::string options;
  for (const auto& [name, value] : table) options += std::string(options.empty() ? "" : ", ") + name;
  throw InvalidArgument(std::string("unknown ") + what + " '" + s + "' (expected one of: " + options + ")");
}

const std::vector<std::pair<const char*, SweepAxis>> kAxes{{"snr", SweepAxis::snr},
                                                           {"antennas", SweepAxis::antennas},
                                                           {"pilots", SweepAxis::pilots},
                                                           {"distance", SweepAxis::distance},
                                                           {"sampling_steps", SweepAxis::sampling_steps}};
const std::vector<std::pair<const char*, Method>> kMethods{{"somp", Method::somp},
                                                           {"ls", Method::ls},
                                                           {"genie_ls", Method::genie_ls},
                                                           {"gdm", Method::gdm},
                                                           {"nm_gdm", Method::nm_gdm}};

int as_positive_int(double v, const char* what) {
  const auto i = static_cast<int>(std::lround(v));
  if (i <= 0 || std::abs(v - i) > 1e-9)
    throw InvalidArgument(std::string(what) + " grid values must be positive integers");
  return i;
}

}  // namespace

SweepAxis parse_axis(const std::string& s) { return parse_enum(s, kAxes, "axis"); }
Method parse_method(const std::string& s) { return parse_enum(s, kMethods, "method"); }
std::string to_string(SweepAxis a) {
  for (const auto& [name, v] : kAxes)
    if (v == a) return name;
  return "?";
}
std::string to_string(Method m) {
  for (const auto& [name, v] : kMethods)
    if (v == m) return name;
  return "?";
}
bool is_diffusion(Method m) { return m == Method::gdm || m == Method::nm_gdm; }

std::vector<Instance> draw_instances(const Scenario& sc, int trials, double snr_db,
                                     std::uint64_t seed) {
  detail::require(trials >= 1, "trials must be positive");
  std::vector<Instance> out;
  out.reserve(static_cast<std::size_t>(trials));
  // Instance i always uses stream (seed, i): grid points share channel draws.
  for (int i = 0; i < trials; ++i) {
    Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(i));
    out.push_back(simulate(sc, snr_db, rng));
  }
  return out;
}

Image refine_images(const Image& side_raw, const TrainState& ckpt,
                    const diffusion::SamplerSpec& spec, bool use_ema, int batch,
                    std::uint64_t seed) {
  detail::require(batch >= 1, "refinement batch must be positive");
  const auto& sys = ckpt.scenario.system;
  if (side_raw.channels != 2 || side_raw.height != sys.n_antennas ||
      side_raw.width != sys.n_subcarriers)
    throw InvalidArgument("checkpoint was trained on " + std::to_string(sys.n_antennas) + "x" +
                          std::to_string(sys.n_subcarriers) + " channels but inputs are " +
                          side_raw.shape_string());
  const UNetDenoiser<float> net(ckpt.denoiser);
  const auto& params = use_ema ? ckpt.ema : ckpt.params;
  const auto denoiser = make_denoiser(net, params);
  const auto sched = ckpt.schedule.build();

  Image out = Image::zeros_like(side_raw);
  const int n = side_raw.batch;
  for (int start = 0, chunk = 0; start < n; start += batch, ++chunk) {
    const int b = std::min(batch, n - start);
    Image side = Dataset::slice(side_raw, static_cast<std::size_t>(start),
                                static_cast<std::size_t>(start + b));
    ckpt.norm.apply(side);
    // Chunk-indexed stream keeps results independent of how many chunks run before.
    Rng rng = Rng::derive(seed ^ kSamplerStream, static_cast<std::uint64_t>(chunk));
    Image x0 = diffusion::sample(denoiser, side, sched, spec, rng);
    ckpt.norm.invert(x0);
    out.data.segment(Eigen::Index(start) * out.sample_size(), x0.size()) = x0.data;
  }
  return out;
}

std::vector<CMatrix> refine(const std::vector<Instance>& instances, const TrainState& ckpt,
                            const diffusion::SamplerSpec& spec, bool use_ema, int batch,
                            std::uint64_t seed) {
  if (instances.empty()) return {};
  const auto& h = instances.front().somp.h;
  Image side(static_cast<int>(instances.size()), 2, static_cast<int>(h.rows()),
             static_cast<int>(h.cols()));
  for (std::size_t i = 0; i < instances.size(); ++i)
    side.sample(static_cast<int>(i)) = pack_image(instances[i].somp.h).data;
  const Image x0 = refine_images(side, ckpt, spec, use_ema, batch, seed);
  std::vector<CMatrix> out;
  out.reserve(instances.size());
  for (int i = 0; i < x0.batch; ++i) out.push_back(unpack_image(x0, i));
  return out;
}

diffusion::SamplerSpec make_sampler(Method m, int T, int steps, diffusion::SigmaRule sigma) {
  diffusion::SamplerSpec spec;
  if (m == Method::gdm) {
    spec.steps = diffusion::subsequence(T, T);
    spec.sigma = diffusion::SigmaRule::ddpm;
    spec.markovian_when_full = true;
  } else {
    detail::require(steps >= 1 && steps <= T, "sampling steps must lie in [1, T]");
    spec.steps = diffusion::subsequence(T, steps);
    spec.sigma = sigma;
  }
  return spec;
}

double method_nmse(Method m, const Scenario& sc, const std::vector<Instance>& instances,
                   const TrainState* ckpt, const EvalOptions& opts, int steps) {
  std::vector<CMatrix> truth, est;
  truth.reserve(instances.size());
  for (const auto& inst : instances) truth.push_back(inst.truth.h);
  switch (m) {
    case Method::somp:
      for (const auto& inst : instances) est.push_back(inst.somp.h);
      break;
    case Method::ls:
      for (const auto& inst : instances)
        est.push_back(ls_estimate(inst.raw, inst.combiners).channel.h);
      break;
    case Method::genie_ls:
      for (const auto& inst : instances)
        est.push_back(genie_ls_estimate(inst.raw, inst.combiners, inst.truth.paths, sc.geom).channel.h);
      break;
    case Method::gdm:
    case Method::nm_gdm: {
      if (ckpt == nullptr) throw InvalidArgument(to_string(m) + " needs a checkpoint");
      auto spec = make_sampler(m, ckpt->schedule.steps, steps, opts.sigma);
      spec.clip_x0 = opts.clip_x0;
      est = refine(instances, *ckpt, spec, opts.use_ema, opts.batch, opts.seed);
      break;
    }
  }
  return nmse(truth, est);
}

SweepResult evaluate_sweep(const ScenarioConfig& base, const EvalOptions& opts,
                           const TrainState* ckpt) {
  detail::require(!opts.grid.empty(), "sweep grid is empty");
  detail::require(!opts.methods.empty(), "no methods selected");
  for (Method m : opts.methods)
    if (is_diffusion(m) && ckpt == nullptr)
      throw InvalidArgument(to_string(m) + " requires --checkpoint");
  SweepResult r;
  r.axis = opts.axis;
  for (double v : opts.grid) {
    ScenarioConfig cfg = base;
    double snr = opts.snr_db;
    int steps = opts.steps;
    switch (opts.axis) {
      case SweepAxis::snr:
        snr = v;
        break;
      case SweepAxis::antennas:
        cfg.system.n_antennas = as_positive_int(v, "antenna");
        break;
      case SweepAxis::pilots:
        cfg.system.pilot_len = as_positive_int(v, "pilot");
        break;
      case SweepAxis::distance:
        detail::require(v > opts.distance_halfwidth, "distance grid values must exceed the window half-width");
        cfg.dist_range = {v - opts.distance_halfwidth, v + opts.distance_halfwidth};
        break;
      case SweepAxis::sampling_steps:
        steps = as_positive_int(v, "sampling step");
        break;
    }
    cfg.system.validate();
    const Scenario sc(cfg);
    if (opts.axis == SweepAxis::distance) r.fraunhofer_m = sc.geom.fraunhofer_m;
    const auto instances = draw_instances(sc, opts.trials, snr, opts.seed);
    for (Method m : opts.methods)
      r.points.push_back({v, m, method_nmse(m, sc, instances, ckpt, opts, steps), opts.trials});
  }
  return r;
}

void write_csv(const SweepResult& r, const std::filesystem::path& path) {
  detail::require(!r.points.empty(), "cannot write an empty result");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  f << "axis,method,nmse_linear,nmse_db,trials\n";
  char buf[256];
  for (const auto& p : r.points) {
    std::snprintf(buf, sizeof buf, "%s=%.17g,%s,%.17g,%.17g,%d\n", to_string(r.axis).c_str(),
                  p.value, to_string(p.method).c_str(), p.nmse_linear, p.nmse_db(), p.trials);
    f << buf;
  }
  if (r.fraunhofer_m) {
    std::snprintf(buf, sizeof buf, "# fraunhofer_m=%.17g\n", *r.fraunhofer_m);
    f << buf;
  }
  if (!f) throw InvalidArgument("failed writing " + path.string());
}

SweepResult read_csv(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read " + path.string());
  std::string line;
  std::getline(f, line);
  if (line != "axis,method,nmse_linear,nmse_db,trials")
    throw InvalidArgument(path.string() + " is not a results CSV");
  SweepResult r;
  bool have_axis = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    if (line.rfind("# fraunhofer_m=", 0) == 0) {
      r.fraunhofer_m = std::stod(line.substr(15));
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cells.push_back(c);
    if (cells.size() != 5) throw InvalidArgument("malformed CSV row: " + line);
    const auto eq = cells[0].find('=');
    if (eq == std::string::npos) throw InvalidArgument("malformed axis cell: " + cells[0]);
    const SweepAxis axis = parse_axis(cells[0].substr(0, eq));
    if (have_axis && axis != r.axis) throw InvalidArgument("CSV mixes sweep axes");
    r.axis = axis;
    have_axis = true;
    SweepPoint p;
    p.value = std::stod(cells[0].substr(eq + 1));
    p.method = parse_method(cells[1]);
    p.nmse_linear = std::stod(cells[2]);
    p.trials = std::stoi(cells[4]);
    r.points.push_back(p);
  }
  return r;
}

void write_svg(const SweepResult& r, const std::filesystem::path& path) {
  detail::require(!r.points.empty(), "cannot plot an empty result");
  std::map<Method, std::vector<std::pair<double, double>>> series;
  double x0 = r.points.front().value, x1 = x0;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& p : r.points) {
    const double db = std::max(p.nmse_db(), -200.0);
    series[p.method].emplace_back(p.value, db);
    x0 = std::min(x0, p.value);
    x1 = std::max(x1, p.value);
    y0 = std::min(y0, db);
    y1 = std::max(y1, db);
  }
  if (x1 == x0) { x0 -= 1; x1 += 1; }
  y0 = std::floor(y0 / 5.0) * 5.0;
  y1 = std::ceil(y1 / 5.0) * 5.0;
  if (y1 == y0) y1 = y0 + 5.0;

  const double W = 640, H = 420, L = 70, R = 150, T = 30, B = 50;
  const auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  const auto py = [&](double y) { return T + (y1 - y) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                "font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                W, H);
  f << buf;
  for (double y = y0; y <= y1 + 1e-9; y += 5.0) {
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%.2f\" x2=\"%g\" y2=\"%.2f\" stroke=\"#ddd\"/>"
                  "<text x=\"%g\" y=\"%.2f\" text-anchor=\"end\">%g</text>\n",
                  L, py(y), W - R, py(y), L - 6, py(y) + 4, y);
    f << buf;
  }
  std::vector<double> ticks;
  for (const auto& p : r.points)
    if (std::find(ticks.begin(), ticks.end(), p.value) == ticks.end()) ticks.push_back(p.value);
  for (double x : ticks) {
    std::snprintf(buf, sizeof buf, "<text x=\"%.2f\" y=\"%g\" text-anchor=\"middle\">%g</text>\n",
                  px(x), H - B + 18, x);
    f << buf;
  }
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"black\"/>\n"
                "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n"
                "<text transform=\"translate(18,%g) rotate(-90)\" text-anchor=\"middle\">NMSE (dB)</text>\n",
                L, T, W - L - R, H - T - B, (L + W - R) / 2, H - 10, to_string(r.axis).c_str(),
                (T + H - B) / 2);
  f << buf;
  int idx = 0;
  for (const auto& [m, pts] : series) {
    auto sorted = pts;
    std::sort(sorted.begin(), sorted.end());
    const char* color = colors[idx % 5];
    f << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : sorted) {
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(x), py(y));
      f << buf;
    }
    f << "\"/>\n";
    for (const auto& [x, y] : sorted) {
      std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", px(x),
                    py(y), color);
      f << buf;
    }
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%g\" y1=\"%d\" x2=\"%g\" y2=\"%d\" stroke=\"%s\" stroke-width=\"2\"/>"
                  "<text x=\"%g\" y=\"%d\">%s</text>\n",
                  W - R + 10, 40 + 18 * idx, W - R + 30, 40 + 18 * idx, color, W - R + 35,
                  44 + 18 * idx, to_string(m).c_str());
    f << buf;
    ++idx;
  }
  if (r.fraunhofer_m) {
    std::snprintf(buf, sizeof buf, "<text x=\"%g\" y=\"20\">Fraunhofer distance %.1f m</text>\n", L,
                  *r.fraunhofer_m);
    f << buf;
  }
  f << "</svg>\n";
}

}  // namespace nfce::harness
