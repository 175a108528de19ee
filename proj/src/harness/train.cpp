#include "nfce/harness/train.hpp"

#include <cmath>
#include <string>

#include "nfce/harness/io.hpp"

namespace nfce::harness {

namespace {

template <class T>
ParameterStore<T> zeros_like(const ParameterStore<T>& p) {
  ParameterStore<T> out;
  for (const auto& [name, e] : p.entries())
    out.add(name, e.shape, nn::Matrix<T>::Zero(e.tensor.value().rows(), e.tensor.value().cols()));
  return out;
}

}  // namespace

TrainState init_train_state(const DenoiserConfig& cfg, const ScheduleParams& sched,
                            const Dataset& ds, std::uint64_t seed) {
  TrainState s;
  s.denoiser = cfg;
  s.schedule = sched;
  Rng rng = Rng::derive(seed, 0x1a17);
  s.params = UNetDenoiser<float>(cfg).init_params(rng);
  s.ema = s.params.cast<float>();
  s.adam_m = zeros_like(s.params);
  s.adam_v = zeros_like(s.params);
  s.norm = ds.norm;
  s.scenario = ds.scenario;
  return s;
}

double batch_loss(const UNetDenoiser<float>& net, const ParameterStore<float>& params,
                  const diffusion::NoiseSchedule& sched, const Image& side, const Image& target,
                  const std::vector<int>& t, const Image& eps) {
  nn::NoGradGuard guard;
  const diffusion::Denoiser fn = [&](const Image& x, const Image& s, const std::vector<int>& tt) {
    return net.denoise(params, x, s, tt);
  };
  return diffusion::training_loss(fn, target, side, t, eps, sched);
}

void train(TrainState& state, const Dataset& ds, const TrainOptions& opts) {
  detail::require(ds.train.size() > 0, "training split is empty");
  detail::require(opts.batch >= 1 && opts.iters >= 0, "invalid batch size or iteration count");
  detail::require(opts.ema >= 0.0 && opts.ema < 1.0, "EMA rate must lie in [0, 1)");
  const UNetDenoiser<float> net(state.denoiser);
  const auto sched = state.schedule.build();

  Image side = Dataset::slice(ds.side, ds.train.begin, ds.train.end);
  Image target = Dataset::slice(ds.target, ds.train.begin, ds.train.end);
  state.norm.apply(side);
  state.norm.apply(target);

  const int n_train = static_cast<int>(ds.train.size());
  for (int it = 0; it < opts.iters; ++it) {
    // Stream keyed by the global step so resumed training continues the same sequence.
    Rng rng = Rng::derive(opts.seed, static_cast<std::uint64_t>(state.step));
    std::vector<std::size_t> idx(opts.batch);
    std::vector<int> t(opts.batch);
    for (int b = 0; b < opts.batch; ++b) {
      idx[b] = static_cast<std::size_t>(rng.uniform_int(0, n_train - 1));
      t[b] = rng.uniform_int(1, sched.steps());
    }
    const Image s_b = ds.gather(side, idx);
    const Image h0 = ds.gather(target, idx);
    const Image eps = diffusion::standard_normal_like(h0, rng);
    Image h_t = Image::zeros_like(h0);
    for (int b = 0; b < opts.batch; ++b) {
      const double ab = sched.alpha_bar(t[b]);
      h_t.sample(b) = std::sqrt(ab) * h0.sample(b) + std::sqrt(1.0 - ab) * eps.sample(b);
    }

    const UNetDenoiser<float>& model = net;
    const auto pred = model.forward(state.params, image_to_tensor<float>(h_t),
                                    image_to_tensor<float>(s_b), t, true, &rng);
    const auto target_eps = image_to_tensor<float>(eps);
    const auto loss = nn::mse(pred, target_eps.value());
    const double loss_value = loss.value()(0, 0);
    if (!std::isfinite(loss_value))
      throw NumericalError("non-finite training loss at step " + std::to_string(state.step) +
                           "; lower the learning rate or check the dataset normalization");
    state.params.zero_grad();
    loss.backward();

    ++state.step;
    const double bc1 = 1.0 - std::pow(opts.adam_beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(opts.adam_beta2, static_cast<double>(state.step));
    const float step_size = static_cast<float>(opts.lr * std::sqrt(bc2) / bc1);
    const float b1 = static_cast<float>(opts.adam_beta1);
    const float b2 = static_cast<float>(opts.adam_beta2);
    const float eps_hat = static_cast<float>(opts.adam_eps * std::sqrt(bc2));
    const float ema = static_cast<float>(opts.ema);
    for (auto& [name, e] : state.params.entries()) {
      const auto& g = e.tensor.grad();
      auto& w = e.tensor.mutable_value();
      if (g.size() != 0) {
        auto& m = state.adam_m.get(name).mutable_value();
        auto& v = state.adam_v.get(name).mutable_value();
        m = b1 * m + (1.0f - b1) * g;
        v.array() = b2 * v.array() + (1.0f - b2) * g.array().square();
        w.array() -= step_size * m.array() / (v.array().sqrt() + eps_hat);
      }
      auto& shadow = state.ema.get(name).mutable_value();
      shadow = ema * shadow + (1.0f - ema) * w;
    }
    state.params.zero_grad();
    state.loss_history.push_back(loss_value);
    if (opts.log_every > 0 && opts.on_log && (it + 1) % opts.log_every == 0)
      opts.on_log(it + 1, loss_value);
  }
}

namespace {

void save_store(const ParameterStore<float>& store, const std::filesystem::path& dir) {
  io::ensure_directory(dir);
  for (const auto& [name, e] : store.entries()) {
    // Logical row-major order of (rows, ...) equals the row-major flattening of the matrix.
    const nn::Matrix<float>& v = e.tensor.value();
    std::vector<float> flat(static_cast<std::size_t>(v.size()));
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) flat[r * v.cols() + c] = v(r, c);
    io::write_f32(dir / (name + ".f32"), flat);
  }
}

ParameterStore<float> load_store(const nlohmann::json& params, const std::filesystem::path& dir) {
  ParameterStore<float> store;
  for (const auto& p : params) {
    const auto name = p.at("name").get<std::string>();
    const auto shape = p.at("shape").get<std::vector<int>>();
    long long total = 1;
    for (int d : shape) total *= d;
    const auto flat = io::read_f32(dir / (name + ".f32"), static_cast<std::size_t>(total));
    nn::Matrix<float> v(shape[0], total / shape[0]);
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c) v(r, c) = flat[r * v.cols() + c];
    store.add(name, shape, std::move(v));
  }
  return store;
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& dir) {
  io::ensure_directory(dir);
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, e] : state.params.entries())
    params.push_back({{"name", name}, {"shape", e.shape}});
  nlohmann::json m;
  m["format"] = "nfce-checkpoint";
  m["version"] = 1;
  m["dtype"] = "float32 little-endian";
  m["parameters"] = params;
  m["sets"] = {"raw", "ema", "adam_m", "adam_v"};
  m["schedule"] = {{"steps", state.schedule.steps},
                   {"beta_1", state.schedule.beta_1},
                   {"beta_T", state.schedule.beta_T}};
  m["denoiser"] = state.denoiser.to_json();
  m["step"] = state.step;
  m["normalization"] = {{"min", state.norm.min}, {"max", state.norm.max}};
  m["scenario"] = state.scenario.to_json();
  m["loss_history_tail"] = std::vector<double>(
      state.loss_history.end() - std::min<std::size_t>(state.loss_history.size(), 100),
      state.loss_history.end());
  save_store(state.params, dir / "raw");
  save_store(state.ema, dir / "ema");
  save_store(state.adam_m, dir / "adam_m");
  save_store(state.adam_v, dir / "adam_v");
  io::write_json(dir / "manifest.json", m);
}

TrainState load_checkpoint(const std::filesystem::path& dir) {
  const auto m = io::read_json(dir / "manifest.json");
  if (m.value("format", "") != "nfce-checkpoint") throw InvalidArgument("not a checkpoint manifest");
  TrainState s;
  s.denoiser = DenoiserConfig::from_json(m.at("denoiser"));
  s.schedule.steps = m["schedule"]["steps"].get<int>();
  s.schedule.beta_1 = m["schedule"]["beta_1"].get<double>();
  s.schedule.beta_T = m["schedule"]["beta_T"].get<double>();
  s.step = m.at("step").get<std::int64_t>();
  s.norm = {m["normalization"]["min"].get<double>(), m["normalization"]["max"].get<double>()};
  s.scenario = ScenarioConfig::from_json(m.at("scenario"));
  s.params = load_store(m["parameters"], dir / "raw");
  s.ema = load_store(m["parameters"], dir / "ema");
  s.adam_m = load_store(m["parameters"], dir / "adam_m");
  s.adam_v = load_store(m["parameters"], dir / "adam_v");
  const UNetDenoiser<float> net(s.denoiser);
  net.validate_params(s.params);
  return s;
}

}  // namespace nfce::harness
