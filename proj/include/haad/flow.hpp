#pragma once

#include "haad/autodiff.hpp"
#include "haad/rng.hpp"

#include <vector>

namespace haad::flow {

using ad::Matrix;
using ad::NodePtr;

// One invertible affine map W x + b with W = Q R: Q a product of d Householder
// reflections, R upper triangular with positive diagonal exp(r_diag_log).
// log|det W| is the sum of r_diag_log, exactly.
struct InvertibleAffine {
    std::vector<NodePtr> householder_vs;  // d vectors, each d x 1
    NodePtr r_diag_log;                   // d x 1
    NodePtr r_upper;                      // d x d, only the strict upper part is used
    NodePtr bias;                         // d x 1
};

struct MonotonicPrelu {
    NodePtr slope_log;  // slope a = exp(slope_log) > 0
};

struct FlowNetwork {
    int dim = 0;
    std::vector<InvertibleAffine> layers;       // 10 by default
    std::vector<MonotonicPrelu> activations;    // layers - 1
    NodePtr upper_mask;                         // constant strict-upper mask
};

struct FlowOutput {
    NodePtr u;       // latent, dim x 1
    NodePtr logdet;  // 1 x 1, accumulated log|det Jacobian|
    NodePtr v;       // penultimate feature: after the last activation
};

// Registers all flow parameters under "flow." names. Layers start orthogonal
// (random unit reflection vectors, R = I, bias 0) and activation slopes start
// at 1, so the initial map is an isometry with zero log-determinant.
FlowNetwork init_flow(ad::ParamStore& store, int dim, int layers, std::uint64_t seed);

FlowOutput flow_forward(const NodePtr& input, const FlowNetwork& net);

// Exact inverse; plain matrix arithmetic, no graph.
Eigen::VectorXd flow_inverse(const Eigen::VectorXd& latent, const FlowNetwork& net);

// NLL under a standard-normal base: (d/2) ln(2 pi) + 0.5 ||u||^2 - logdet.
NodePtr nll(const FlowOutput& out);

}  // namespace haad::flow
