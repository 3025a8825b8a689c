#pragma once

#include <cstdint>
#include <vector>

#include "pucci/grid.hpp"
#include "pucci/matrix_ops.hpp"

namespace pucci {

// One orthonormal lattice frame: the primary direction (ax, ay) is a primitive
// integer offset, the partner is its quarter turn (-ay, ax). Both legs have the
// same squared lattice length ax^2 + ay^2.
struct Frame {
  int ax = 1, ay = 0;
  double angle = 0.0;     // radians, in [0, pi/2)
  double inv_len2 = 1.0;  // 1 / ((ax^2 + ay^2) * h^2)

  int bx() const { return -ay; }
  int by() const { return ax; }
};

// Frames used to probe second derivatives. frames[0] is always the axis frame.
// In two dimensions the nominal angles i*pi/(2K), i = 0..K-1, are each mapped
// to the nearest angle realizable by a primitive integer offset of Chebyshev
// radius <= 3 (eight distinct directions per quarter turn); duplicates after
// the mapping are dropped. The realized set is nested under doubling of K. In
// one dimension the set is the single axis regardless of K.
struct StencilSet {
  int dim = 1;
  int requested_frames = 1;
  double h = 0.0;
  std::vector<Frame> frames;
};

StencilSet make_stencil_set(const Grid& grid, int frame_count);

// Second difference of u at an interior node along the integer lattice offset
// (ox, oy), divided by the squared step length. Axis offsets (|ox| or |oy|
// zero) use the grid's cut-cell arms with the unequal-arm formula
//   2 [ u+ / (a(a+b)) - u0 / (ab) + u- / (b(a+b)) ],
// which reduces to the centered difference when both arms equal h. Wide
// offsets require both endpoints to be nodes; otherwise input_error.
double directional_second_difference(const Field& u, int node, int ox, int oy);

// Monotone discretization of one of the operator kinds on a grid. All
// off-center stencil weights are nonnegative by construction, so the node
// update is nondecreasing in every neighbor value.
//
// Per interior node, a wide frame is usable only when all four endpoints land
// on Interior nodes or on Boundary nodes that sit exactly on the lattice;
// otherwise that frame falls back to the axis frame, whose cut-cell arms
// always reach value-carrying nodes.
struct DiscreteOperator {
  OperatorKind kind;
  StencilSet stencils;
  const Grid* grid = nullptr;

  // Wide-frame endpoint ids, 4 per frame per interior node in the order
  // +d1, -d1, +d2, -d2; usable[] gates each frame.
  int wide_count = 0;
  std::vector<int32_t> wide_nbr;
  std::vector<uint8_t> wide_usable;

  // Infimum-of-linear evaluation: each matrix is projected onto the realizable
  // frame nearest its eigenframe; q1, q2 are its Rayleigh quotients there and
  // aq1, aq2 the axis-frame pair used where that frame is unusable.
  struct ProjectedMatrix {
    int frame = 0;
    double q1 = 0.0, q2 = 0.0;
    double aq1 = 0.0, aq2 = 0.0;
  };
  std::vector<ProjectedMatrix> projected;
};

DiscreteOperator make_discrete_operator(const OperatorKind& kind, const Grid& grid,
                                        const StencilSet& stencils);

// Convenience: stencil set with the default frame count (8 in 2D).
DiscreteOperator make_discrete_operator(const OperatorKind& kind, const Grid& grid);

// F_h(D^2 u) at interior nodes (zero elsewhere). When selected_frame is given
// it is resized to the node count and receives, per interior node, the index
// of the frame attaining the extremum (lowest index on ties; -1 off-interior).
// The parallel and serial variants run the same per-node kernel and produce
// bitwise identical fields.
Field apply_operator(const DiscreteOperator& op, const Field& u,
                     std::vector<int>* selected_frame = nullptr);
Field apply_operator_serial(const DiscreteOperator& op, const Field& u,
                            std::vector<int>* selected_frame = nullptr);
void apply_operator_into(const DiscreteOperator& op, const Field& u, Field& out,
                         std::vector<int>* selected_frame = nullptr);
void apply_operator_serial_into(const DiscreteOperator& op, const Field& u, Field& out,
                                std::vector<int>* selected_frame = nullptr);

// Largest sum of center-weight magnitudes over interior nodes: max over nodes
// of the coefficient multiplying u(x) in F_h when every frame contributes its
// steepest admissible weight. Governs explicit time-step restrictions.
double max_center_weight(const DiscreteOperator& op);

struct MonotonicityViolation {
  int node = -1;
  int neighbor = -1;
  double before = 0.0;
  double after = 0.0;
};

// Randomized check of discrete monotonicity: for random fields, a positive
// bump of size eps at a single stencil neighbor must not decrease the node
// value. The violation list of a correct operator is empty.
struct MonotonicityReport {
  int trials = 0;
  double eps = 0.0;
  std::vector<MonotonicityViolation> violations;
  bool clean() const { return violations.empty(); }
};

MonotonicityReport monotonicity_audit(const DiscreteOperator& op, int trials = 500,
                                      std::uint64_t seed = 0x9e3779b97f4a7c15ull,
                                      double eps = 1e-6);

}  // namespace pucci
