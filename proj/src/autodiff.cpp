#include "haad/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace haad::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

[[noreturn]] void shape_error(const char* op, const Node& a, const Node& b) {
    std::ostringstream os;
    os << op << ": shape mismatch (" << a.rows() << "x" << a.cols() << ") vs ("
       << b.rows() << "x" << b.cols() << ")";
    throw std::invalid_argument(os.str());
}

void require_same_shape(const char* op, const Node& a, const Node& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

void require_scalar(const char* op, const Node& s) {
    if (s.rows() != 1 || s.cols() != 1) {
        std::ostringstream os;
        os << op << ": expected 1x1 operand, got " << s.rows() << "x" << s.cols();
        throw std::invalid_argument(os.str());
    }
}

NodePtr make_node(const char* op, Matrix value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->value = std::move(value);
    n->parents = std::move(parents);
    for (const auto& p : n->parents) {
        if (p->requires_grad) {
            n->requires_grad = true;
            break;
        }
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

Matrix reshape_row_major(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
    RowMat rm = m;
    return Matrix(Eigen::Map<const RowMat>(rm.data(), rows, cols));
}

}  // namespace

void Node::accumulate(const Matrix& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

void Node::zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }

NodePtr constant(Matrix v) {
    auto n = std::make_shared<Node>();
    n->op = "const";
    n->value = std::move(v);
    return n;
}

NodePtr leaf(Matrix v) {
    auto n = std::make_shared<Node>();
    n->value = std::move(v);
    n->requires_grad = true;
    return n;
}

NodePtr scalar_const(double v) {
    Matrix m(1, 1);
    m(0, 0) = v;
    return constant(std::move(m));
}

NodePtr matmul(const NodePtr& a, const NodePtr& b) {
    if (a->cols() != b->rows()) shape_error("matmul", *a, *b);
    return make_node("matmul", a->value * b->value, {a, b}, [](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad) a.accumulate(self.grad * b.value.transpose());
        if (b.requires_grad) b.accumulate(a.value.transpose() * self.grad);
    });
}

NodePtr add(const NodePtr& a, const NodePtr& b) {
    require_same_shape("add", *a, *b);
    return make_node("add", a->value + b->value, {a, b}, [](Node& self) {
        for (auto& p : self.parents)
            if (p->requires_grad) p->accumulate(self.grad);
    });
}

NodePtr sub(const NodePtr& a, const NodePtr& b) {
    require_same_shape("sub", *a, *b);
    return make_node("sub", a->value - b->value, {a, b}, [](Node& self) {
        if (self.parents[0]->requires_grad) self.parents[0]->accumulate(self.grad);
        if (self.parents[1]->requires_grad) self.parents[1]->accumulate(-self.grad);
    });
}

NodePtr mul(const NodePtr& a, const NodePtr& b) {
    require_same_shape("mul", *a, *b);
    return make_node("mul", a->value.cwiseProduct(b->value), {a, b}, [](Node& self) {
        Node& a = *self.parents[0];
        Node& b = *self.parents[1];
        if (a.requires_grad) a.accumulate(self.grad.cwiseProduct(b.value));
        if (b.requires_grad) b.accumulate(self.grad.cwiseProduct(a.value));
    });
}

NodePtr scalar_mul(const NodePtr& a, double c) {
    return make_node("scalar_mul", a->value * c, {a}, [c](Node& self) {
        self.parents[0]->accumulate(self.grad * c);
    });
}

NodePtr scale(const NodePtr& a, const NodePtr& s) {
    require_scalar("scale", *s);
    return make_node("scale", a->value * s->value(0, 0), {a, s}, [](Node& self) {
        Node& a = *self.parents[0];
        Node& s = *self.parents[1];
        if (a.requires_grad) a.accumulate(self.grad * s.value(0, 0));
        if (s.requires_grad) {
            Matrix g(1, 1);
            g(0, 0) = self.grad.cwiseProduct(a.value).sum();
            s.accumulate(g);
        }
    });
}

NodePtr concat_rows(const std::vector<NodePtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
    Eigen::Index rows = 0;
    const Eigen::Index cols = parts[0]->cols();
    for (const auto& p : parts) {
        if (p->cols() != cols) shape_error("concat_rows", *parts[0], *p);
        rows += p->rows();
    }
    Matrix v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleRows(at, p->rows()) = p->value;
        at += p->rows();
    }
    return make_node("concat_rows", std::move(v), parts, [](Node& self) {
        Eigen::Index at = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) p->accumulate(self.grad.middleRows(at, p->rows()));
            at += p->rows();
        }
    });
}

NodePtr concat_cols(const std::vector<NodePtr>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
    Eigen::Index cols = 0;
    const Eigen::Index rows = parts[0]->rows();
    for (const auto& p : parts) {
        if (p->rows() != rows) shape_error("concat_cols", *parts[0], *p);
        cols += p->cols();
    }
    Matrix v(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
        v.middleCols(at, p->cols()) = p->value;
        at += p->cols();
    }
    return make_node("concat_cols", std::move(v), parts, [](Node& self) {
        Eigen::Index at = 0;
        for (auto& p : self.parents) {
            if (p->requires_grad) p->accumulate(self.grad.middleCols(at, p->cols()));
            at += p->cols();
        }
    });
}

NodePtr reshape(const NodePtr& a, Eigen::Index rows, Eigen::Index cols) {
    if (a->rows() * a->cols() != rows * cols) {
        std::ostringstream os;
        os << "reshape: cannot view " << a->rows() << "x" << a->cols() << " as "
           << rows << "x" << cols;
        throw std::invalid_argument(os.str());
    }
    return make_node("reshape", reshape_row_major(a->value, rows, cols), {a},
                     [](Node& self) {
                         Node& a = *self.parents[0];
                         a.accumulate(reshape_row_major(self.grad, a.rows(), a.cols()));
                     });
}

NodePtr flatten(const NodePtr& a) { return reshape(a, a->rows() * a->cols(), 1); }

NodePtr transpose(const NodePtr& a) {
    return make_node("transpose", a->value.transpose(), {a}, [](Node& self) {
        self.parents[0]->accumulate(self.grad.transpose());
    });
}

NodePtr tanh_op(const NodePtr& a) {
    return make_node("tanh", a->value.array().tanh().matrix(), {a}, [](Node& self) {
        self.parents[0]->accumulate(
            (self.grad.array() * (1.0 - self.value.array().square())).matrix());
    });
}

NodePtr exp_op(const NodePtr& a) {
    return make_node("exp", a->value.array().exp().matrix(), {a}, [](Node& self) {
        self.parents[0]->accumulate(self.grad.cwiseProduct(self.value));
    });
}

NodePtr log_op(const NodePtr& a) {
    return make_node("log", a->value.array().log().matrix(), {a}, [](Node& self) {
        self.parents[0]->accumulate(
            self.grad.cwiseQuotient(self.parents[0]->value));
    });
}

NodePtr prelu(const NodePtr& x, const NodePtr& slope) {
    require_scalar("prelu", *slope);
    const double a = slope->value(0, 0);
    Matrix v = x->value.unaryExpr([a](double t) { return t >= 0.0 ? t : a * t; });
    return make_node("prelu", std::move(v), {x, slope}, [a](Node& self) {
        Node& x = *self.parents[0];
        Node& s = *self.parents[1];
        if (x.requires_grad) {
            Matrix g = x.value.unaryExpr([a](double t) { return t >= 0.0 ? 1.0 : a; });
            x.accumulate(self.grad.cwiseProduct(g));
        }
        if (s.requires_grad) {
            double acc = 0.0;
            for (Eigen::Index j = 0; j < x.value.cols(); ++j)
                for (Eigen::Index i = 0; i < x.value.rows(); ++i)
                    if (x.value(i, j) < 0.0) acc += self.grad(i, j) * x.value(i, j);
            Matrix g(1, 1);
            g(0, 0) = acc;
            s.accumulate(g);
        }
    });
}

NodePtr sum_all(const NodePtr& a) {
    Matrix v(1, 1);
    v(0, 0) = a->value.sum();
    return make_node("sum_all", std::move(v), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        a.accumulate(Matrix::Constant(a.rows(), a.cols(), self.grad(0, 0)));
    });
}

NodePtr row_sum(const NodePtr& a) {
    return make_node("row_sum", a->value.rowwise().sum(), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        a.accumulate(self.grad.replicate(1, a.cols()));
    });
}

NodePtr col_sum(const NodePtr& a) {
    return make_node("col_sum", a->value.colwise().sum(), {a}, [](Node& self) {
        Node& a = *self.parents[0];
        a.accumulate(self.grad.replicate(a.rows(), 1));
    });
}

NodePtr slice_rows(const NodePtr& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 1 || start + count > a->rows()) {
        std::ostringstream os;
        os << "slice_rows: [" << start << ", " << start + count << ") out of range for "
           << a->rows() << " rows";
        throw std::invalid_argument(os.str());
    }
    return make_node("slice_rows", a->value.middleRows(start, count), {a},
                     [start, count](Node& self) {
                         Node& a = *self.parents[0];
                         Matrix g = Matrix::Zero(a.rows(), a.cols());
                         g.middleRows(start, count) = self.grad;
                         a.accumulate(g);
                     });
}

NodePtr householder_apply(const NodePtr& v, const NodePtr& z) {
    if (v->cols() != 1 || z->cols() != 1 || v->rows() != z->rows())
        shape_error("householder_apply", *v, *z);
    const double s = v->value.squaredNorm();
    if (s == 0.0) throw std::invalid_argument("householder_apply: zero reflection vector");
    const double vtz = v->value.col(0).dot(z->value.col(0));
    Matrix y = z->value - (2.0 * vtz / s) * v->value;
    return make_node("householder_apply", std::move(y), {v, z}, [s, vtz](Node& self) {
        Node& v = *self.parents[0];
        Node& z = *self.parents[1];
        const Matrix& g = self.grad;
        const double vtg = v.value.col(0).dot(g.col(0));
        if (z.requires_grad) z.accumulate(g - (2.0 * vtg / s) * v.value);
        if (v.requires_grad) {
            v.accumulate((-2.0 / s) *
                         (vtz * g + vtg * z.value - (2.0 * vtg * vtz / s) * v.value));
        }
    });
}

void backward(const NodePtr& loss) {
    if (loss->rows() != 1 || loss->cols() != 1)
        throw std::invalid_argument("backward: loss must be 1x1");
    if (!loss->requires_grad) return;

    // Iterative post-order DFS; reverse gives a valid topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.get(), 0);
    visited.insert(loss.get());
    while (!stack.empty()) {
        auto [node, next] = stack.back();
        if (next < node->parents.size()) {
            ++stack.back().second;
            Node* p = node->parents[next].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    Matrix seed(1, 1);
    seed(0, 0) = 1.0;
    loss->accumulate(seed);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && n->grad.size() != 0) n->backprop(*n);
    }
    // Intermediate grads are graph-local; drop them so a second backward on a
    // rebuilt graph starts clean. Leaf grads are untouched.
    for (Node* n : order)
        if (n->backprop) n->grad.resize(0, 0);
}

NodePtr ParamStore::create(const std::string& name, Matrix init) {
    auto node = leaf(std::move(init));
    add(name, node);
    return node;
}

void ParamStore::add(const std::string& name, NodePtr node) {
    auto [it, inserted] = params_.emplace(name, std::move(node));
    if (!inserted) throw std::invalid_argument("duplicate parameter name: " + name);
}

const NodePtr& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::invalid_argument("unknown parameter: " + name);
    return it->second;
}

std::vector<Parameter> ParamStore::ordered() const {
    std::vector<Parameter> out;
    out.reserve(params_.size());
    for (const auto& [name, node] : params_) out.push_back({name, node});
    return out;
}

void ParamStore::zero_grads() {
    for (auto& [name, node] : params_) node->zero_grad();
}

GradCheckReport grad_check(const std::function<NodePtr()>& f,
                           std::span<const Parameter> params,
                           double h, double tol) {
    if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");

    for (const auto& p : params) p.node->zero_grad();
    backward(f());
    std::vector<Matrix> analytic;
    analytic.reserve(params.size());
    for (const auto& p : params) analytic.push_back(p.node->grad);

    GradCheckReport report;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Matrix& value = params[k].node->value;
        for (Eigen::Index j = 0; j < value.cols(); ++j) {
            for (Eigen::Index i = 0; i < value.rows(); ++i) {
                const double saved = value(i, j);
                value(i, j) = saved + h;
                const double fp = f()->value(0, 0);
                value(i, j) = saved - h;
                const double fm = f()->value(0, 0);
                value(i, j) = saved;
                const double numeric = (fp - fm) / (2.0 * h);
                const double exact = analytic[k](i, j);
                const double rel = std::abs(exact - numeric) /
                                   std::max({std::abs(exact), std::abs(numeric), 1.0});
                if (rel > report.max_rel_err) {
                    report.max_rel_err = rel;
                    std::ostringstream os;
                    os << params[k].name << "[" << i << "," << j << "]";
                    report.worst = os.str();
                }
            }
        }
    }
    report.pass = report.max_rel_err < tol;
    for (const auto& p : params) p.node->zero_grad();
    return report;
}

}  // namespace haad::ad
