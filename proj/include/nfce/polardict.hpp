#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "nfce/channel.hpp"
#include "nfce/sysgeom.hpp"
#include "nfce/types.hpp"

namespace nfce {

struct GridOptions {
  double d_min = 5.0;
  double beta_delta = 1.2;
  bool include_far_field = true;
  /// Caps rings per angle; negative means no cap.
  int max_rings = -1;
  std::size_t atom_budget = 1'000'000;
  /// Smallest admissible d_min in carrier wavelengths.
  double floor_wavelengths = 1.0;
};

/// Joint angle-distance sampling grid. Far-field atoms carry distance +inf.
struct PolarGrid {
  std::vector<double> angles;
  std::vector<std::vector<double>> distances;
  std::size_t total_atoms = 0;
};

struct TransformMatrix {
  CMatrix p;
  struct Atom {
    int angle_index;
    int distance_index;
    double angle;
    double distance;
  };
  std::vector<Atom> atoms;

  Eigen::Index size() const { return p.cols(); }
};

inline bool is_far_field(double distance) { return std::isinf(distance); }

PolarGrid build_grid(const Geometry& geom, const GridOptions& opts);

/// Columns are fresnel steering vectors at grid points; far-field atoms use the planar model.
TransformMatrix build_transform(const PolarGrid& grid, const Geometry& geom);

CVector synthesize(const TransformMatrix& dict, const CVector& coeffs);
CMatrix synthesize(const TransformMatrix& dict, const CMatrix& coeffs);

}  // namespace nfce
