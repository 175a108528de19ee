#include "nfce/polardict.hpp"

#include <cmath>
#include <string>

namespace nfce {

PolarGrid build_grid(const Geometry& geom, const GridOptions& opts) {
  detail::require(opts.d_min > 0.0, "d_min must be positive");
  detail::require(opts.beta_delta > 0.0, "beta_delta must be positive");
  detail::require(opts.d_min >= opts.floor_wavelengths * geom.wavelength,
                  "d_min is below the physical floor of " +
                      std::to_string(opts.floor_wavelengths) + " wavelengths");

  const int n = geom.n_antennas;
  // Ring spacing is uniform in 1/d: r_s = N²d²cos²φ / (2β²λ s).
  const double ring_scale = static_cast<double>(n) * n * geom.spacing * geom.spacing /
                            (2.0 * opts.beta_delta * opts.beta_delta * geom.wavelength);

  PolarGrid grid;
  grid.angles.reserve(n);
  grid.distances.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double sin_phi = -1.0 + 2.0 * i / n;
    const double phi = std::asin(sin_phi);
    const double cos2 = 1.0 - sin_phi * sin_phi;
    std::vector<double> rings;
    if (opts.include_far_field) rings.push_back(std::numeric_limits<double>::infinity());
    for (int s = 1; opts.max_rings < 0 || s <= opts.max_rings; ++s) {
      const double r = ring_scale * cos2 / s;
      if (r < opts.d_min) break;
      rings.push_back(r);
      if (grid.total_atoms + rings.size() > opts.atom_budget) break;
    }
    if (rings.empty()) rings.push_back(std::numeric_limits<double>::infinity());
    grid.total_atoms += rings.size();
    if (grid.total_atoms > opts.atom_budget)
      throw InvalidArgument("polar grid exceeds the atom budget of " +
                            std::to_string(opts.atom_budget));
    grid.angles.push_back(phi);
    grid.distances.push_back(std::move(rings));
  }
  return grid;
}

TransformMatrix build_transform(const PolarGrid& grid, const Geometry& geom) {
  TransformMatrix t;
  t.p.resize(geom.n_antennas, static_cast<Eigen::Index>(grid.total_atoms));
  t.atoms.reserve(grid.total_atoms);
  Eigen::Index col = 0;
  for (std::size_t a = 0; a < grid.angles.size(); ++a) {
    for (std::size_t s = 0; s < grid.distances[a].size(); ++s) {
      const double phi = grid.angles[a];
      const double dist = grid.distances[a][s];
      t.p.col(col++) = is_far_field(dist) ? steering_vector(phi, 1.0, SteeringModel::planar, geom)
                                          : steering_vector(phi, dist, SteeringModel::fresnel, geom);
      t.atoms.push_back({static_cast<int>(a), static_cast<int>(s), phi, dist});
    }
  }
  return t;
}

CVector synthesize(const TransformMatrix& dict, const CVector& coeffs) {
  detail::require_shape(coeffs.size() == dict.p.cols(),
                        "coefficient length must equal the number of dictionary atoms");
  return dict.p * coeffs;
}

CMatrix synthesize(const TransformMatrix& dict, const CMatrix& coeffs) {
  detail::require_shape(coeffs.rows() == dict.p.cols(),
                        "coefficient rows must equal the number of dictionary atoms");
  return dict.p * coeffs;
}

}  // namespace nfce
