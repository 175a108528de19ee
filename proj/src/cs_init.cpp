#include "nfce/cs_init.hpp"

#include <algorithm>
#include <cmath>

namespace nfce {

SompOptions default_somp_options(const SystemConfig& cfg, double noise_power) {
  SompOptions o;
  o.max_atoms = cfg.n_paths;
  o.tolerance = 1.1 * std::sqrt(noise_power) *
                std::sqrt(static_cast<double>(cfg.n_measurements()) * cfg.n_subcarriers);
  return o;
}

namespace {

// Joint least-squares fit of the selected atoms across all subcarriers.
CMatrix refit(const CMatrix& a, const CMatrix& r, const SompOptions& opts, bool& ridge_used) {
  CMatrix gram = a.adjoint() * a;
  const CMatrix rhs = a.adjoint() * r;
  Eigen::JacobiSVD<CMatrix> svd(gram);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1)
                                            : std::numeric_limits<double>::infinity();
  if (cond > opts.ridge_condition) {
    ridge_used = true;
    const double lambda = opts.ridge_scale * gram.trace().real() / static_cast<double>(gram.rows());
    gram.diagonal().array() += lambda;
  }
  return gram.ldlt().solve(rhs);
}

}  // namespace

SparseEstimate somp_estimate(const Observation& obs, const SompOptions& opts) {
  detail::require(opts.max_atoms >= 0, "max_atoms must be non-negative");
  detail::require(opts.max_atoms <= obs.phi.rows(), "max_atoms must not exceed Q·N_RF");
  detail::require_shape(obs.r.rows() == obs.phi.rows(), "observation and sensing rows differ");

  const Eigen::Index atoms = obs.phi.cols();
  SparseEstimate est;
  est.coeffs = CMatrix::Zero(atoms, obs.r.cols());

  CMatrix residual = obs.r;
  double res_norm = residual.norm();
  est.residual_history.push_back(res_norm);
  std::vector<char> chosen(static_cast<std::size_t>(atoms), 0);

  while (static_cast<int>(est.support.size()) < opts.max_atoms && res_norm > opts.tolerance &&
         res_norm > 0.0) {
    const CMatrix corr = obs.phi.adjoint() * residual;
    Eigen::Index best = -1;
    double best_score = 0.0;
    for (Eigen::Index j = 0; j < atoms; ++j) {
      if (chosen[j]) continue;
      const double score = corr.row(j).cwiseAbs().sum();
      if (score > best_score) {
        best_score = score;
        best = j;
      }
    }
    if (best < 0) break;
    chosen[best] = 1;
    est.support.push_back(static_cast<int>(best));

    CMatrix a(obs.phi.rows(), static_cast<Eigen::Index>(est.support.size()));
    for (std::size_t i = 0; i < est.support.size(); ++i) a.col(i) = obs.phi.col(est.support[i]);
    const CMatrix x = refit(a, obs.r, opts, est.ridge_used);
    residual = obs.r - a * x;
    // LS projections cannot grow the residual; clamp float round-off.
    res_norm = std::min(residual.norm(), est.residual_history.back());
    est.residual_history.push_back(res_norm);

    est.coeffs.setZero();
    for (std::size_t i = 0; i < est.support.size(); ++i)
      est.coeffs.row(est.support[i]) = x.row(static_cast<Eigen::Index>(i));
  }
  return est;
}

ChannelMatrix initial_estimate(const TransformMatrix& dict, const SparseEstimate& est) {
  detail::require_shape(est.coeffs.rows() == dict.p.cols(),
                        "estimate rows must equal the number of dictionary atoms");
  ChannelMatrix ch;
  ch.h = CMatrix::Zero(dict.p.rows(), est.coeffs.cols());
  for (int j : est.support) ch.h.noalias() += dict.p.col(j) * est.coeffs.row(j);
  return ch;
}

BaselineResult ls_estimate(const CMatrix& raw, const CombinerSet& combiners) {
  const CMatrix c = combiners.stacked();
  detail::require_shape(raw.rows() == c.rows(), "raw measurement rows must equal Q·N_RF");
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(c);
  BaselineResult out;
  out.minimum_norm = cod.rank() < c.cols();
  out.channel.h = cod.solve(raw);
  return out;
}

BaselineResult genie_ls_estimate(const CMatrix& raw, const CombinerSet& combiners,
                                 const std::vector<PathParams>& true_paths, const Geometry& geom) {
  detail::require(!true_paths.empty(), "genie LS needs the true path support");
  const CMatrix c = combiners.stacked();
  detail::require_shape(raw.rows() == c.rows(), "raw measurement rows must equal Q·N_RF");

  CMatrix steer(geom.n_antennas, static_cast<Eigen::Index>(true_paths.size()));
  for (std::size_t l = 0; l < true_paths.size(); ++l)
    steer.col(l) = steering_vector(true_paths[l].angle, true_paths[l].distance,
                                   SteeringModel::exact, geom);

  const CMatrix xi = whitening_factor(combiners);
  const auto lower = xi.triangularView<Eigen::Lower>();
  const CMatrix sens = lower.solve(c * steer);
  const CMatrix rhs = lower.solve(raw);
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(sens);
  BaselineResult out;
  out.minimum_norm = cod.rank() < sens.cols();
  out.channel.h = steer * cod.solve(rhs);
  out.channel.paths = true_paths;
  return out;
}

BaselineResult baseline_estimate(BaselineMode mode, const CMatrix& raw, const CombinerSet& combiners,
                                 const std::vector<PathParams>* true_paths, const Geometry* geom) {
  if (mode == BaselineMode::ls) return ls_estimate(raw, combiners);
  detail::require(true_paths != nullptr && geom != nullptr,
                  "genie LS requires the true support and geometry");
  return genie_ls_estimate(raw, combiners, *true_paths, *geom);
}

Image pack_image(const CMatrix& h) {
  detail::require(h.allFinite(), "pack_image needs finite entries");
  Image img(1, 2, static_cast<int>(h.rows()), static_cast<int>(h.cols()));
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      img.at(0, 0, y, x) = h(y, x).real();
      img.at(0, 1, y, x) = h(y, x).imag();
    }
  return img;
}

CMatrix unpack_image(const Image& img, int index) {
  detail::require_shape(img.channels == 2, "channel images have exactly two channels");
  detail::require(index >= 0 && index < img.batch, "image index out of range");
  CMatrix h(img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      h(y, x) = cdouble(img.at(index, 0, y, x), img.at(index, 1, y, x));
  return h;
}

}  // namespace nfce
