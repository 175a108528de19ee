#include "nfce/harness/dataset.hpp"

#include <cmath>

#include "nfce/harness/io.hpp"

namespace nfce::harness {

Normalization Normalization::fit(const std::vector<const Image*>& images) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const Image* img : images) {
    if (img->size() == 0) continue;
    detail::require(img->data.allFinite(), "normalization needs finite values");
    lo = std::min(lo, img->data.minCoeff());
    hi = std::max(hi, img->data.maxCoeff());
  }
  detail::require(std::isfinite(lo) && hi > lo, "normalization needs non-constant data");
  return {lo, hi};
}

void Normalization::apply(Image& img) const { img.data = (img.data - min) / scale(); }
void Normalization::invert(Image& img) const { img.data = img.data * scale() + min; }

Image Dataset::slice(const Image& src, std::size_t begin, std::size_t end) {
  detail::require(begin <= end && end <= static_cast<std::size_t>(src.batch), "slice out of range");
  Image out(static_cast<int>(end - begin), src.channels, src.height, src.width);
  out.data = src.data.segment(static_cast<Eigen::Index>(begin) * src.sample_size(), out.size());
  return out;
}

Image Dataset::gather(const Image& src, const std::vector<std::size_t>& indices) const {
  Image out(static_cast<int>(indices.size()), src.channels, src.height, src.width);
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.sample(static_cast<int>(i)) = src.sample(static_cast<int>(indices[i]));
  return out;
}

void split_bounds(std::size_t count, SplitRange& train, SplitRange& val, SplitRange& test) {
  detail::require(count >= 7, "a 5:1:1 split needs at least 7 records");
  const std::size_t n_val = count / 7;
  const std::size_t n_test = count / 7;
  const std::size_t n_train = count - n_val - n_test;
  train = {0, n_train};
  val = {n_train, n_train + n_val};
  test = {n_train + n_val, count};
}

Dataset generate_dataset(const ScenarioConfig& sc_cfg, std::size_t count, std::uint64_t seed) {
  const auto [snr_lo, snr_hi] = sc_cfg.snr_range_db;
  detail::require(snr_lo <= snr_hi, "invalid SNR range");
  Dataset ds;
  ds.scenario = sc_cfg;
  ds.seed = seed;
  split_bounds(count, ds.train, ds.val, ds.test);

  const Scenario sc(sc_cfg);
  const int n = sc_cfg.system.n_antennas;
  const int k = sc_cfg.system.n_subcarriers;
  ds.side = Image(static_cast<int>(count), 2, n, k);
  ds.target = Image(static_cast<int>(count), 2, n, k);
  ds.snr_db.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::derive(seed, i);
    const double snr = snr_lo == snr_hi ? snr_lo : rng.uniform(snr_lo, snr_hi);
    const Instance inst = simulate(sc, snr, rng);
    // Stored at float32 precision so in-memory and reloaded datasets agree.
    ds.side.sample(static_cast<int>(i)) = pack_image(inst.somp.h).data.cast<float>().cast<double>();
    ds.target.sample(static_cast<int>(i)) = pack_image(inst.truth.h).data.cast<float>().cast<double>();
    ds.snr_db[i] = snr;
  }
  const Image tr_side = Dataset::slice(ds.side, ds.train.begin, ds.train.end);
  const Image tr_target = Dataset::slice(ds.target, ds.train.begin, ds.train.end);
  ds.norm = Normalization::fit({&tr_side, &tr_target});
  return ds;
}

namespace {

std::vector<float> to_f32(const Eigen::ArrayXd& a) {
  std::vector<float> v(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) v[i] = static_cast<float>(a[i]);
  return v;
}

nlohmann::json split_json(const SplitRange& r) { return {{"begin", r.begin}, {"end", r.end}}; }
SplitRange split_from(const nlohmann::json& j) {
  return {j.at("begin").get<std::size_t>(), j.at("end").get<std::size_t>()};
}

}  // namespace

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  io::ensure_directory(dir);
  const std::vector<int> shape{ds.side.batch, ds.side.channels, ds.side.height, ds.side.width};
  io::write_f32(dir / "side.f32", to_f32(ds.side.data));
  io::write_f32(dir / "target.f32", to_f32(ds.target.data));
  io::write_f32(dir / "snr_db.f32", to_f32(Eigen::Map<const Eigen::ArrayXd>(
                                        ds.snr_db.data(), static_cast<Eigen::Index>(ds.snr_db.size()))));
  nlohmann::json m;
  m["format"] = "nfce-dataset";
  m["version"] = 1;
  m["dtype"] = "float32 little-endian";
  m["layout"] = "row-major";
  m["count"] = ds.count();
  m["seed"] = ds.seed;
  m["arrays"] = {{"side", {{"file", "side.f32"}, {"shape", shape}}},
                 {"target", {{"file", "target.f32"}, {"shape", shape}}},
                 {"snr_db", {{"file", "snr_db.f32"}, {"shape", {ds.count()}}}}};
  m["splits"] = {{"train", split_json(ds.train)},
                 {"val", split_json(ds.val)},
                 {"test", split_json(ds.test)}};
  m["normalization"] = {{"min", ds.norm.min}, {"max", ds.norm.max}};
  m["config"] = ds.scenario.to_json();
  io::write_json(dir / "manifest.json", m);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto m = io::read_json(dir / "manifest.json");
  if (m.value("format", "") != "nfce-dataset") throw InvalidArgument("not a dataset manifest");
  Dataset ds;
  ds.scenario = ScenarioConfig::from_json(m.at("config"));
  ds.seed = m.at("seed").get<std::uint64_t>();
  const auto shape = m.at("arrays").at("side").at("shape").get<std::vector<int>>();
  detail::require_shape(shape.size() == 4, "dataset images must be 4-D");
  ds.side = Image(shape[0], shape[1], shape[2], shape[3]);
  ds.target = Image(shape[0], shape[1], shape[2], shape[3]);
  const auto n = static_cast<std::size_t>(ds.side.size());
  const auto side = io::read_f32(dir / m["arrays"]["side"]["file"].get<std::string>(), n);
  const auto target = io::read_f32(dir / m["arrays"]["target"]["file"].get<std::string>(), n);
  for (std::size_t i = 0; i < n; ++i) {
    ds.side.data[static_cast<Eigen::Index>(i)] = side[i];
    ds.target.data[static_cast<Eigen::Index>(i)] = target[i];
  }
  const auto snr = io::read_f32(dir / m["arrays"]["snr_db"]["file"].get<std::string>(),
                                static_cast<std::size_t>(shape[0]));
  ds.snr_db.assign(snr.begin(), snr.end());
  ds.train = split_from(m["splits"]["train"]);
  ds.val = split_from(m["splits"]["val"]);
  ds.test = split_from(m["splits"]["test"]);
  ds.norm = {m["normalization"]["min"].get<double>(), m["normalization"]["max"].get<double>()};
  return ds;
}

}  // namespace nfce::harness
