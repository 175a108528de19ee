// Command-line front end: dataset generation, training, refinement, sweeps, plotting.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>

#include "nfce/harness/evaluate.hpp"
#include "nfce/harness/io.hpp"
#include "nfce/harness/run_config.hpp"

namespace {

using namespace nfce;
using namespace nfce::harness;

template <class T>
std::vector<T> split_list(const std::string& s, T (*conv)(const std::string&)) {
  std::vector<T> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(conv(item));
  return out;
}

double to_double(const std::string& s) { return std::stod(s); }
Method to_method(const std::string& s) { return parse_method(s); }

diffusion::SigmaRule parse_sigma(const std::string& s) {
  if (s == "zero") return diffusion::SigmaRule::zero;
  if (s == "ddpm") return diffusion::SigmaRule::ddpm;
  throw InvalidArgument("--sigma must be zero or ddpm");
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
};

void add_common(CLI::App* app, Common& c, bool out_required) {
  app->add_option("--config", c.config, "JSON configuration file")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "master random seed");
  auto* o = app->add_option("--out", c.out, "output location");
  if (out_required) o->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Near-field XL-MIMO channel estimation: polar-domain SOMP plus diffusion refinement"};
  app.require_subcommand(1);

  Common gen_c;
  std::optional<std::size_t> gen_count;
  auto* gen = app.add_subcommand("generate-dataset", "simulate paired (SOMP estimate, true channel) records");
  add_common(gen, gen_c, true);
  gen->add_option("--count", gen_count, "number of records (split 5:1:1)");

  Common tr_c;
  std::string tr_dataset, tr_resume, tr_eta;
  std::optional<int> tr_iters, tr_batch, tr_c1, tr_nrb, tr_T, tr_log;
  std::optional<double> tr_lr, tr_ema, tr_dropout;
  auto* tr = app.add_subcommand("train", "train the conditional denoiser");
  add_common(tr, tr_c, true);
  tr->add_option("--dataset", tr_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--iters", tr_iters, "training iterations");
  tr->add_option("--batch", tr_batch, "batch size");
  tr->add_option("--lr", tr_lr, "Adam learning rate");
  tr->add_option("--ema", tr_ema, "EMA rate");
  tr->add_option("--c1", tr_c1, "base channel count");
  tr->add_option("--eta-c", tr_eta, "channel multipliers, e.g. 1,2,2,2");
  tr->add_option("--n-rb", tr_nrb, "ResNet+ blocks per level");
  tr->add_option("--dropout", tr_dropout, "dropout rate");
  tr->add_option("--T", tr_T, "diffusion steps");
  tr->add_option("--resume", tr_resume, "continue from a checkpoint")->check(CLI::ExistingDirectory);
  tr->add_option("--log-every", tr_log, "print the loss every n iterations");

  Common rf_c;
  std::string rf_ckpt, rf_dataset, rf_split = "test", rf_sigma = "zero";
  int rf_steps = 50, rf_batch = 50;
  bool rf_raw = false, rf_clip = false;
  auto* rf = app.add_subcommand("refine", "refine the SOMP estimates of a dataset split");
  add_common(rf, rf_c, true);
  rf->add_option("--checkpoint", rf_ckpt, "checkpoint directory")->required()->check(CLI::ExistingDirectory);
  rf->add_option("--dataset", rf_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  rf->add_option("--split", rf_split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  rf->add_option("--steps", rf_steps, "sampling steps S");
  rf->add_option("--sigma", rf_sigma, "sampler noise rule")->check(CLI::IsMember({"zero", "ddpm"}));
  rf->add_option("--batch", rf_batch, "instances per denoiser call");
  rf->add_flag("--raw-params", rf_raw, "use raw instead of EMA parameters");
  rf->add_flag("--clip-x0", rf_clip, "clamp predicted clean images to [0, 1] while sampling");

  Common ev_c;
  std::string ev_axis = "snr", ev_grid, ev_methods = "somp", ev_ckpt, ev_sigma = "zero";
  int ev_trials = 200, ev_steps = 50, ev_batch = 50;
  double ev_snr = 5.0, ev_halfwidth = 0.0;
  bool ev_raw = false, ev_clip = false;
  auto* ev = app.add_subcommand("evaluate", "NMSE sweep over one experiment axis");
  add_common(ev, ev_c, true);
  ev->add_option("--axis", ev_axis, "snr, antennas, pilots, distance or sampling_steps");
  ev->add_option("--grid", ev_grid, "comma-separated axis values")->required();
  ev->add_option("--methods", ev_methods, "comma-separated: somp, ls, genie_ls, gdm, nm_gdm");
  ev->add_option("--trials", ev_trials, "instances per grid point");
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint directory")->check(CLI::ExistingDirectory);
  ev->add_option("--steps", ev_steps, "sampling steps S for nm_gdm");
  ev->add_option("--sigma", ev_sigma, "nm_gdm noise rule")->check(CLI::IsMember({"zero", "ddpm"}));
  ev->add_option("--snr", ev_snr, "SNR in dB when the axis is not snr");
  ev->add_option("--distance-halfwidth", ev_halfwidth, "distance window half-width in m");
  ev->add_option("--batch", ev_batch, "instances per denoiser call");
  ev->add_flag("--raw-params", ev_raw, "use raw instead of EMA parameters");
  ev->add_flag("--clip-x0", ev_clip, "clamp predicted clean images to [0, 1] while sampling");

  std::string pl_input, pl_out;
  auto* pl = app.add_subcommand("plot", "render a results CSV as an SVG line plot");
  pl->add_option("--input", pl_input, "results CSV")->required()->check(CLI::ExistingFile);
  pl->add_option("--out", pl_out, "SVG path (defaults to the CSV path with .svg)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto rc = load_run_config(gen_c.config);
      const auto ds = generate_dataset(rc.scenario, gen_count.value_or(rc.count), gen_c.seed);
      save_dataset(ds, gen_c.out);
      std::printf("wrote %zu records (train %zu, val %zu, test %zu) to %s\n", ds.count(),
                  ds.train.size(), ds.val.size(), ds.test.size(), gen_c.out.c_str());
    } else if (*tr) {
      const auto rc = load_run_config(tr_c.config);
      const auto ds = load_dataset(tr_dataset);
      TrainState state;
      if (!tr_resume.empty()) {
        state = load_checkpoint(tr_resume);
      } else {
        DenoiserConfig dc = rc.denoiser;
        if (tr_c1) dc.base_channels = *tr_c1;
        if (tr_nrb) dc.n_resblocks = *tr_nrb;
        if (tr_dropout) dc.dropout = *tr_dropout;
        if (!tr_eta.empty()) {
          const auto v = split_list<double>(tr_eta, to_double);
          if (v.size() != 4) throw InvalidArgument("--eta-c needs exactly 4 entries");
          for (int i = 0; i < 4; ++i) dc.channel_mult[i] = static_cast<int>(v[i]);
        }
        dc.validate();
        ScheduleParams sp = rc.schedule;
        if (tr_T) sp.steps = *tr_T;
        state = init_train_state(dc, sp, ds, tr_c.seed);
      }
      TrainOptions opts;
      opts.seed = tr_c.seed;
      if (tr_iters) opts.iters = *tr_iters;
      if (tr_batch) opts.batch = *tr_batch;
      if (tr_lr) opts.lr = *tr_lr;
      if (tr_ema) opts.ema = *tr_ema;
      opts.log_every = tr_log.value_or(100);
      opts.on_log = [](int it, double loss) {
        std::printf("iter %d loss %.6f\n", it, loss);
        std::fflush(stdout);
      };
      train(state, ds, opts);
      save_checkpoint(state, tr_c.out);
      std::printf("saved checkpoint at step %lld to %s\n", static_cast<long long>(state.step),
                  tr_c.out.c_str());
    } else if (*rf) {
      const auto ckpt = load_checkpoint(rf_ckpt);
      const auto ds = load_dataset(rf_dataset);
      const SplitRange r = rf_split == "train" ? ds.train : rf_split == "val" ? ds.val : ds.test;
      const Image side = Dataset::slice(ds.side, r.begin, r.end);
      const Image target = Dataset::slice(ds.target, r.begin, r.end);
      auto spec = make_sampler(Method::nm_gdm, ckpt.schedule.steps, rf_steps, parse_sigma(rf_sigma));
      spec.clip_x0 = rf_clip;
      const Image refined = refine_images(side, ckpt, spec, !rf_raw, rf_batch, rf_c.seed);
      std::vector<CMatrix> truth, somp, est;
      for (int i = 0; i < side.batch; ++i) {
        truth.push_back(unpack_image(target, i));
        somp.push_back(unpack_image(side, i));
        est.push_back(unpack_image(refined, i));
      }
      io::ensure_directory(rf_c.out);
      std::vector<float> flat(refined.data.data(), refined.data.data() + refined.size());
      io::write_f32(std::filesystem::path(rf_c.out) / "refined.f32", flat);
      const double n_somp = nmse(truth, somp), n_ref = nmse(truth, est);
      io::write_json(std::filesystem::path(rf_c.out) / "manifest.json",
                     {{"format", "nfce-refined"},
                      {"dtype", "float32 little-endian"},
                      {"arrays", {{"refined", {{"file", "refined.f32"},
                                               {"shape", {refined.batch, 2, refined.height, refined.width}}}}}},
                      {"split", rf_split},
                      {"steps", rf_steps},
                      {"sigma", rf_sigma},
                      {"clip_x0", rf_clip},
                      {"nmse_somp", n_somp},
                      {"nmse_refined", n_ref}});
      std::printf("%zu records: somp %.3f dB, refined %.3f dB\n", r.size(), to_db(n_somp), to_db(n_ref));
    } else if (*ev) {
      std::optional<TrainState> ckpt;
      if (!ev_ckpt.empty()) ckpt = load_checkpoint(ev_ckpt);
      ScenarioConfig base = ckpt ? ckpt->scenario : load_run_config(ev_c.config).scenario;
      if (ckpt && !ev_c.config.empty()) base = load_run_config(ev_c.config).scenario;
      EvalOptions opts;
      opts.axis = parse_axis(ev_axis);
      opts.grid = split_list<double>(ev_grid, to_double);
      opts.methods = split_list<Method>(ev_methods, to_method);
      opts.trials = ev_trials;
      opts.steps = ev_steps;
      opts.sigma = parse_sigma(ev_sigma);
      opts.snr_db = ev_snr;
      opts.distance_halfwidth = ev_halfwidth;
      opts.batch = ev_batch;
      opts.use_ema = !ev_raw;
      opts.clip_x0 = ev_clip;
      opts.seed = ev_c.seed;
      const auto result = evaluate_sweep(base, opts, ckpt ? &*ckpt : nullptr);
      const std::filesystem::path out(ev_c.out);
      write_csv(result, out / "results.csv");
      write_svg(result, out / "results.svg");
      for (const auto& p : result.points)
        std::printf("%s=%g %-8s %.4e (%.3f dB) over %d trials\n", to_string(result.axis).c_str(),
                    p.value, to_string(p.method).c_str(), p.nmse_linear, p.nmse_db(), p.trials);
      if (result.fraunhofer_m) std::printf("Fraunhofer distance: %.2f m\n", *result.fraunhofer_m);
    } else if (*pl) {
      const auto result = read_csv(pl_input);
      std::filesystem::path out = pl_out.empty() ? std::filesystem::path(pl_input).replace_extension(".svg")
                                                 : std::filesystem::path(pl_out);
      write_svg(result, out);
      std::printf("wrote %s\n", out.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
