#include "haad/flow.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace haad::flow {

namespace {

Matrix strict_upper_mask(int dim) {
    Matrix m = Matrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j) m(i, j) = 1.0;
    return m;
}

std::string layer_name(const char* kind, int index) {
    std::ostringstream os;
    os << "flow." << kind << (index < 10 ? "0" : "") << index;
    return os.str();
}

}  // namespace

FlowNetwork init_flow(ad::ParamStore& store, int dim, int layers, std::uint64_t seed) {
    if (dim < 1 || layers < 1) throw std::invalid_argument("flow: invalid dimensions");
    FlowNetwork net;
    net.dim = dim;
    net.upper_mask = ad::constant(strict_upper_mask(dim));

    Rng rng = stream_rng(seed, "init/flow");
    for (int k = 0; k < layers; ++k) {
        const std::string base = layer_name("layer", k);
        InvertibleAffine layer;
        for (int i = 0; i < dim; ++i) {
            Eigen::VectorXd v(dim);
            do {
                for (int r = 0; r < dim; ++r) v(r) = rng.normal();
            } while (v.norm() == 0.0);
            v.normalize();
            std::ostringstream vn;
            vn << base << ".v" << (i < 10 ? "00" : i < 100 ? "0" : "") << i;
            layer.householder_vs.push_back(store.create(vn.str(), v));
        }
        layer.r_diag_log = store.create(base + ".r_diag_log", Matrix::Zero(dim, 1));
        layer.r_upper = store.create(base + ".r_upper", Matrix::Zero(dim, dim));
        layer.bias = store.create(base + ".bias", Matrix::Zero(dim, 1));
        net.layers.push_back(std::move(layer));
    }
    // Slopes start at 1 so the whole stack is an isometry at initialization;
    // the penultimate feature then preserves input geometry before training
    // shapes it, and the initial NLL is an honest upper bound for descent.
    for (int k = 0; k + 1 < layers; ++k)
        net.activations.push_back(
            {store.create(layer_name("act", k) + ".slope_log", Matrix::Zero(1, 1))});
    return net;
}

FlowOutput flow_forward(const NodePtr& input, const FlowNetwork& net) {
    if (input->rows() != net.dim || input->cols() != 1)
        throw std::invalid_argument("flow_forward: input must be dim x 1");

    const int layers = static_cast<int>(net.layers.size());
    NodePtr x = input;
    NodePtr logdet = ad::scalar_const(0.0);
    NodePtr v_penultimate;

    for (int k = 0; k < layers; ++k) {
        if (k > 0) {
            const auto& act = net.activations[k - 1];
            // Activation log-det: slope_log per negative pre-activation entry.
            const double neg = static_cast<double>((x->value.array() < 0.0).count());
            logdet = ad::add(logdet, ad::scalar_mul(act.slope_log, neg));
            x = ad::prelu(x, ad::exp_op(act.slope_log));
            if (k == layers - 1) v_penultimate = x;
        }
        const auto& layer = net.layers[k];
        // R x = exp(diag) .* x + strict_upper(r_upper) x
        NodePtr z = ad::add(ad::mul(ad::exp_op(layer.r_diag_log), x),
                            ad::matmul(ad::mul(layer.r_upper, net.upper_mask), x));
        // Q = H_0 H_1 ... H_{d-1}, applied right to left.
        for (int i = net.dim - 1; i >= 0; --i)
            z = ad::householder_apply(layer.householder_vs[i], z);
        x = ad::add(z, layer.bias);
        logdet = ad::add(logdet, ad::sum_all(layer.r_diag_log));
        if (!x->value.allFinite()) {
            std::ostringstream os;
            os << "flow_forward: non-finite value after affine layer " << k;
            throw std::runtime_error(os.str());
        }
    }
    if (!v_penultimate) v_penultimate = x;  // single-layer flows have no activation
    return {x, logdet, v_penultimate};
}

Eigen::VectorXd flow_inverse(const Eigen::VectorXd& latent, const FlowNetwork& net) {
    if (latent.size() != net.dim)
        throw std::invalid_argument("flow_inverse: latent must have flow dimension");

    const int layers = static_cast<int>(net.layers.size());
    Eigen::VectorXd x = latent;
    for (int k = layers - 1; k >= 0; --k) {
        const auto& layer = net.layers[k];
        Eigen::VectorXd z = x - layer.bias->value.col(0);
        // Q^{-1} = H_{d-1} ... H_0
        for (int i = 0; i < net.dim; ++i) {
            const Eigen::VectorXd& v = layer.householder_vs[i]->value.col(0);
            z -= (2.0 * v.dot(z) / v.squaredNorm()) * v;
        }
        // back-substitution on R
        Eigen::VectorXd solved(net.dim);
        for (int r = net.dim - 1; r >= 0; --r) {
            double acc = z(r);
            for (int c = r + 1; c < net.dim; ++c)
                acc -= layer.r_upper->value(r, c) * solved(c);
            solved(r) = acc / std::exp(layer.r_diag_log->value(r, 0));
        }
        x = solved;
        if (k > 0) {
            const double a = std::exp(net.activations[k - 1].slope_log->value(0, 0));
            for (int r = 0; r < net.dim; ++r)
                if (x(r) < 0.0) x(r) /= a;
        }
    }
    return x;
}

NodePtr nll(const FlowOutput& out) {
    const double d = static_cast<double>(out.u->rows());
    NodePtr quad = ad::scalar_mul(ad::sum_all(ad::mul(out.u, out.u)), 0.5);
    NodePtr norm = ad::scalar_const(0.5 * d * std::log(2.0 * 3.14159265358979323846));
    return ad::sub(ad::add(norm, quad), out.logdet);
}

}  // namespace haad::flow
