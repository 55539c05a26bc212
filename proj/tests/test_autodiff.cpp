#include "haad/autodiff.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>

using namespace haad;
using ad::Matrix;
using ad::NodePtr;

namespace {

Matrix m22(double a, double b, double c, double d) {
    Matrix m(2, 2);
    m << a, b, c, d;
    return m;
}

// grad_check wrapper for a single-input primitive builder.
ad::GradCheckReport check_unary(const std::function<NodePtr(const NodePtr&)>& op,
                                const Matrix& x0) {
    ad::ParamStore store;
    NodePtr x = store.create("x", x0);
    auto f = [&]() { return ad::sum_all(ad::mul(op(x), op(x))); };
    const auto params = store.ordered();
    return ad::grad_check(f, params, 1e-6, 1e-6);
}

}  // namespace

TEST_CASE("matmul identity") {
    NodePtr a = ad::constant(m22(1, 2, 3, 4));
    NodePtr i = ad::constant(Matrix::Identity(2, 2));
    CHECK(ad::matmul(a, i)->value.isApprox(m22(1, 2, 3, 4)));
}

TEST_CASE("tanh of zero matrix is zero") {
    NodePtr z = ad::constant(Matrix::Zero(3, 2));
    CHECK(ad::tanh_op(z)->value.isZero(0.0));
}

TEST_CASE("d/dx sum(x*x) matches the finite-difference oracle at x=3") {
    ad::ParamStore store;
    NodePtr x = store.create("x", Matrix::Constant(1, 1, 3.0));
    auto f = [&]() { return ad::sum_all(ad::mul(x, x)); };

    x->zero_grad();
    ad::backward(f());
    CHECK(x->grad(0, 0) == doctest::Approx(6.0).epsilon(1e-12));

    const double h = 1e-6;
    x->value(0, 0) = 3.0 + h;
    const double fp = f()->scalar();
    x->value(0, 0) = 3.0 - h;
    const double fm = f()->scalar();
    x->value(0, 0) = 3.0;
    CHECK(x->grad(0, 0) == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-8));
}

TEST_CASE("backward of sum(W) gives all-ones") {
    NodePtr w = ad::leaf(m22(0.3, -0.7, 1.1, 0.0));
    w->zero_grad();
    ad::backward(ad::sum_all(w));
    CHECK(w->grad.isApprox(Matrix::Ones(2, 2)));
}

TEST_CASE("backward through a matmul chain") {
    Matrix av(1, 2), bv(2, 1);
    av << 1, 2;
    bv << 1, 1;
    NodePtr a = ad::leaf(av);
    NodePtr b = ad::leaf(bv);
    a->zero_grad();
    b->zero_grad();
    ad::backward(ad::sum_all(ad::matmul(a, b)));
    Matrix ga(1, 2), gb(2, 1);
    ga << 1, 1;
    gb << 1, 2;
    CHECK(a->grad.isApprox(ga));
    CHECK(b->grad.isApprox(gb));
}

TEST_CASE("gradients accumulate across backward calls") {
    NodePtr w = ad::leaf(m22(1, 2, 3, 4));
    w->zero_grad();
    NodePtr loss = ad::sum_all(ad::mul(w, w));
    ad::backward(loss);
    const Matrix once = w->grad;
    NodePtr loss2 = ad::sum_all(ad::mul(w, w));
    ad::backward(loss2);
    CHECK(w->grad.isApprox(2.0 * once));
}

TEST_CASE("backward rejects non-scalar losses") {
    NodePtr w = ad::leaf(m22(1, 2, 3, 4));
    CHECK_THROWS_AS(ad::backward(w), std::invalid_argument);
}

TEST_CASE("shape mismatches name the op and shapes") {
    NodePtr a = ad::constant(Matrix::Zero(2, 3));
    NodePtr b = ad::constant(Matrix::Zero(2, 3));
    CHECK_THROWS_WITH_AS(ad::matmul(a, b), doctest::Contains("matmul"),
                         std::invalid_argument);
    NodePtr c = ad::constant(Matrix::Zero(3, 3));
    CHECK_THROWS_AS(ad::add(a, c), std::invalid_argument);
}

TEST_CASE("every primitive passes grad_check against central differences") {
    Rng rng(123);
    const Matrix x34 = testing::random_matrix(3, 4, rng);
    const Matrix y34 = testing::random_matrix(3, 4, rng);

    SUBCASE("binary and matrix ops") {
        ad::ParamStore store;
        NodePtr a = store.create("a", x34);
        NodePtr b = store.create("b", y34);
        NodePtr c = store.create("c", testing::random_matrix(4, 2, rng));
        NodePtr s = store.create("s", Matrix::Constant(1, 1, 0.7));
        auto f = [&]() {
            NodePtr t = ad::add(ad::mul(a, b), ad::sub(a, ad::scalar_mul(b, 0.5)));
            t = ad::matmul(ad::scale(t, s), c);                     // 3x2
            t = ad::concat_cols({t, ad::matmul(a, c)});             // 3x4
            t = ad::concat_rows({t, ad::reshape(ad::transpose(t), 3, 4)});  // 6x4
            NodePtr sliced = ad::sum_all(ad::slice_rows(t, 2, 3));
            return ad::add(ad::add(ad::sum_all(ad::row_sum(t)), ad::sum_all(ad::col_sum(t))),
                           sliced);
        };
        const auto params = store.ordered();
        const auto report = ad::grad_check(f, params, 1e-6, 1e-6);
        INFO("worst: ", report.worst, " rel err ", report.max_rel_err);
        CHECK(report.pass);
    }

    SUBCASE("elementwise nonlinearities") {
        CHECK(check_unary([](const NodePtr& x) { return ad::tanh_op(x); }, x34).pass);
        CHECK(check_unary([](const NodePtr& x) { return ad::exp_op(x); }, x34).pass);
        // log needs positive inputs
        Rng prng(5);
        const Matrix pos = testing::random_matrix(3, 3, prng, 0.2, 2.0);
        CHECK(check_unary([](const NodePtr& x) { return ad::log_op(x); }, pos).pass);
    }

    SUBCASE("prelu with learnable slope, inputs away from the kink") {
        ad::ParamStore store;
        Matrix x0 = testing::random_matrix(4, 3, rng);
        for (Eigen::Index j = 0; j < x0.cols(); ++j)
            for (Eigen::Index i = 0; i < x0.rows(); ++i)
                if (std::abs(x0(i, j)) < 1e-3) x0(i, j) = 0.1;
        NodePtr x = store.create("x", x0);
        NodePtr slope_log = store.create("slope_log", Matrix::Constant(1, 1, std::log(0.1)));
        auto f = [&]() {
            NodePtr y = ad::prelu(x, ad::exp_op(slope_log));
            return ad::sum_all(ad::mul(y, y));
        };
        const auto params = store.ordered();
        CHECK(ad::grad_check(f, params, 1e-6, 1e-6).pass);
    }

    SUBCASE("householder_apply in both arguments") {
        ad::ParamStore store;
        NodePtr v = store.create("v", testing::random_matrix(5, 1, rng));
        NodePtr z = store.create("z", testing::random_matrix(5, 1, rng));
        auto f = [&]() {
            NodePtr y = ad::householder_apply(v, z);
            return ad::sum_all(ad::mul(y, y));
        };
        const auto params = store.ordered();
        CHECK(ad::grad_check(f, params, 1e-6, 1e-6).pass);
    }
}

TEST_CASE("householder_apply is an isometric reflection") {
    Rng rng(9);
    NodePtr v = ad::constant(testing::random_matrix(6, 1, rng));
    NodePtr z = ad::constant(testing::random_matrix(6, 1, rng));
    NodePtr y = ad::householder_apply(v, z);
    CHECK(y->value.norm() == doctest::Approx(z->value.norm()).epsilon(1e-12));
    // applying the same reflection twice restores the input
    NodePtr back = ad::householder_apply(v, y);
    CHECK((back->value - z->value).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("grad_check on a constant function passes with zero error") {
    ad::ParamStore store;
    store.create("x", Matrix::Zero(2, 2));
    auto f = []() { return ad::scalar_const(4.2); };
    const auto params = store.ordered();
    const auto report = ad::grad_check(f, params, 1e-6, 1e-6);
    CHECK(report.pass);
    CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("grad_check flags a deliberately wrong adjoint") {
    ad::ParamStore store;
    Rng rng(77);
    NodePtr x = store.create("x", testing::random_matrix(2, 2, rng));
    auto f = [&]() {
        // hand-built tanh node with the adjoint sign flipped
        auto n = std::make_shared<ad::Node>();
        n->op = "bad_tanh";
        n->value = x->value.array().tanh().matrix();
        n->parents = {x};
        n->requires_grad = true;
        n->backprop = [](ad::Node& self) {
            self.parents[0]->accumulate(
                (self.grad.array() * (self.value.array().square() - 1.0)).matrix());
        };
        return ad::sum_all(n);
    };
    const auto params = store.ordered();
    const auto report = ad::grad_check(f, params, 1e-6, 1e-6);
    CHECK_FALSE(report.pass);
    CHECK(report.max_rel_err > 1e-2);
}

TEST_CASE("backward is deterministic") {
    auto run = []() {
        Rng rng(42);
        ad::ParamStore store;
        NodePtr a = store.create("a", testing::random_matrix(3, 3, rng));
        NodePtr b = store.create("b", testing::random_matrix(3, 3, rng));
        store.zero_grads();
        ad::backward(ad::sum_all(ad::tanh_op(ad::matmul(a, b))));
        return std::make_pair(a->grad, b->grad);
    };
    const auto [ga1, gb1] = run();
    const auto [ga2, gb2] = run();
    CHECK(testing::exactly_equal(ga1, ga2));
    CHECK(testing::exactly_equal(gb1, gb2));
}

TEST_CASE("parameter store rejects duplicates and orders by name") {
    ad::ParamStore store;
    store.create("b.param", Matrix::Zero(1, 1));
    store.create("a.param", Matrix::Zero(1, 1));
    CHECK_THROWS_AS(store.create("a.param", Matrix::Zero(1, 1)), std::invalid_argument);
    const auto ordered = store.ordered();
    REQUIRE(ordered.size() == 2);
    CHECK(ordered[0].name == "a.param");
    CHECK(ordered[1].name == "b.param");
}
