#pragma once

#include <Eigen/Dense>

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace haad::ad {

using Matrix = Eigen::MatrixXd;

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of a define-by-run computation graph over dense real matrices.
// The graph is rebuilt every training step; only leaf (parameter) nodes
// persist, and their gradients accumulate across backward calls until the
// caller zeroes them.
struct Node {
    Matrix value;
    Matrix grad;  // sized on first accumulation
    bool requires_grad = false;
    const char* op = "leaf";
    std::vector<NodePtr> parents;
    // Scatters this node's grad into its parents' grads.
    std::function<void(Node&)> backprop;

    Eigen::Index rows() const { return value.rows(); }
    Eigen::Index cols() const { return value.cols(); }
    double scalar() const { return value(0, 0); }

    void accumulate(const Matrix& g);
    void zero_grad();
};

NodePtr constant(Matrix v);
NodePtr leaf(Matrix v);       // requires_grad = true
NodePtr scalar_const(double v);

// Primitives. Shape mismatches throw std::invalid_argument naming the op and
// both operand shapes.
NodePtr matmul(const NodePtr& a, const NodePtr& b);
NodePtr add(const NodePtr& a, const NodePtr& b);
NodePtr sub(const NodePtr& a, const NodePtr& b);
NodePtr mul(const NodePtr& a, const NodePtr& b);  // elementwise
NodePtr scalar_mul(const NodePtr& a, double c);
NodePtr scale(const NodePtr& a, const NodePtr& s);  // s is 1x1, broadcast
NodePtr concat_rows(const std::vector<NodePtr>& parts);
NodePtr concat_cols(const std::vector<NodePtr>& parts);
NodePtr reshape(const NodePtr& a, Eigen::Index rows, Eigen::Index cols);  // row-major order
NodePtr flatten(const NodePtr& a);  // row-major column vector
NodePtr transpose(const NodePtr& a);
NodePtr tanh_op(const NodePtr& a);
NodePtr exp_op(const NodePtr& a);
NodePtr log_op(const NodePtr& a);
// PReLU with learnable positive slope a (1x1 node): x >= 0 -> x, else a*x.
// Derivative at exactly 0 uses the positive-side slope.
NodePtr prelu(const NodePtr& x, const NodePtr& slope);
NodePtr sum_all(const NodePtr& a);   // 1x1
NodePtr row_sum(const NodePtr& a);   // rows x 1
NodePtr col_sum(const NodePtr& a);   // 1 x cols
NodePtr slice_rows(const NodePtr& a, Eigen::Index start, Eigen::Index count);
// Fused Householder reflection applied to a column vector:
// y = z - 2 v (v^T z) / (v^T v). Differentiable in both v and z.
NodePtr householder_apply(const NodePtr& v, const NodePtr& z);

// Reverse-mode sweep from a 1x1 loss node. Gradients accumulate into every
// reachable node with requires_grad set.
void backward(const NodePtr& loss);

struct Parameter {
    std::string name;
    NodePtr node;

    Eigen::Index rows() const { return node->rows(); }
    Eigen::Index cols() const { return node->cols(); }
};

// Named parameter registry with deterministic (lexicographic) iteration order.
class ParamStore {
public:
    NodePtr create(const std::string& name, Matrix init);
    void add(const std::string& name, NodePtr node);
    const NodePtr& at(const std::string& name) const;
    std::vector<Parameter> ordered() const;
    std::size_t size() const { return params_.size(); }
    void zero_grads();

private:
    std::map<std::string, NodePtr> params_;
};

struct GradCheckReport {
    bool pass = true;
    double max_rel_err = 0.0;
    std::string worst;  // "name[i,j]" of the worst coordinate
};

// Compares reverse-mode gradients of f (a scalar graph rebuilt per call from
// the current parameter values) against central finite differences.
GradCheckReport grad_check(const std::function<NodePtr()>& f,
                           std::span<const Parameter> params,
                           double h, double tol);

}  // namespace haad::ad
