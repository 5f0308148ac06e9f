#pragma once

#include <functional>

#include "siso/numerics.hpp"
#include "siso/sdp.hpp"

namespace siso {

struct IntervalBox {
  Vector lower, upper;
};

struct AffineAbstraction {
  Matrix A_upper, A_lower;
  Vector e_upper, e_lower;
  double theta_star = 0;
  Vector sigma;
};

using VectorMap = std::function<Vector(const Vector&)>;

// Vertices of the uniform grid with `subdivisions` cells per axis.
std::vector<Vector> grid_vertices(const IntervalBox& box, int subdivisions);

// Half the diagonal of one grid cell.
double cell_radius(const IntervalBox& box, int subdivisions);

// Minimum-width affine sandwich of q over the grid vertices of the box, with margin sigma
// per output component. Throws AbstractionFailure if the LP is infeasible.
AffineAbstraction abstract_on_box(const VectorMap& q, const IntervalBox& box, const Vector& sigma,
                                  int subdivisions = 1, const sdp::Options& opt = sdp::Options::from_env());

// sigma = L_mu * cell_radius * 1, which extends the vertex guarantee to the whole box
// when every component of q is L_mu-Lipschitz in the 2-norm.
AffineAbstraction abstract_on_box_lipschitz(const VectorMap& q, const IntervalBox& box, double L_mu,
                                            int subdivisions = 1,
                                            const sdp::Options& opt = sdp::Options::from_env());

struct MidlineObservation {
  Matrix C, D_tilde;
  Vector e;
  double eta_va = 0;
};

// Average of the two abstractions. Columns [0, n_state) are the state block, the rest the
// input block. eta_va is theta*/2 when `sound_norm` is off; otherwise sqrt(l) (theta*/2 + max sigma),
// a 2-norm bound on the residual that also covers cell interiors.
MidlineObservation midline_observation(const AffineAbstraction& a, int n_state, bool sound_norm = true);

}  // namespace siso
