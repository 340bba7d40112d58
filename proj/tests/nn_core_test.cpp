#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "liftgan/nn/checkpoint.hpp"
#include "liftgan/nn/grad_check.hpp"
#include "liftgan/nn/ops.hpp"
#include "liftgan/nn/optim.hpp"
#include "liftgan/rng.hpp"

using namespace liftgan;
using namespace liftgan::nn;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (auto& v : t.values()) v = lo + (hi - lo) * rng.uniform01();
    return t;
}

// Reduces any output to a scalar with fixed random weights, so every output
// coordinate contributes a distinct amount to the checked loss.
Var project(Var y) {
    Rng r(777);
    Var w = y.tape().constant(random_tensor(y.shape(), r));
    return sum(mul(y, w));
}

constexpr double kTol = 1e-4;
constexpr int kPoints = 10;

void expect_grad_ok(ParamSet& params, const LossFn& f, const char* op) {
    const auto r = grad_check(params, f);
    EXPECT_LT(r.max_rel_error, kTol) << op << " worst " << r.worst;
    EXPECT_GT(r.checked, 0u) << op;
}

}  // namespace

TEST(Forward, SoftmaxOfUniformLogits) {
    Tape t;
    Var y = softmax(t.constant(Tensor({4}, 0.0)));
    for (double v : y.value().values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Forward, SoftmaxRowsSumToOne) {
    Rng rng(3);
    Tape t;
    Var y = softmax(t.constant(random_tensor({50, 33}, rng, -30, 30)));
    for (std::size_t r = 0; r < 50; ++r) {
        double s = 0;
        for (std::size_t j = 0; j < 33; ++j) {
            EXPECT_GE(y.value()[r * 33 + j], 0.0);
            s += y.value()[r * 33 + j];
        }
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Forward, GlobalMaxPoolPerChannel) {
    Tape t;
    Var y = global_max_pool1d(t.constant(Tensor({3, 2}, {1, 7, 3, 2, 5, 6})));
    EXPECT_EQ(y.value(), Tensor({2}, {5, 7}));
}

TEST(Forward, ValidConvolution) {
    Tape t;
    Var x = t.constant(Tensor({5, 1}, {1, 2, 3, 4, 5}));
    Var k = t.constant(Tensor({3, 1, 1}, {1, 0, -1}));
    EXPECT_EQ(conv1d(x, k).value(), Tensor({3, 1}, {-2, -2, -2}));
}

TEST(Forward, BatchedConvMatchesPerSample) {
    Rng rng(5);
    Tape t;
    Var x = t.constant(random_tensor({3, 9, 4}, rng));
    Var k = t.constant(random_tensor({4, 4, 6}, rng));
    const Tensor y = conv1d(x, k).value();
    ASSERT_EQ(y.shape(), (Shape{3, 6, 6}));
    // direct triple loop
    for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t s = 0; s < 6; ++s)
            for (std::size_t f = 0; f < 6; ++f) {
                double acc = 0;
                for (std::size_t d = 0; d < 4; ++d)
                    for (std::size_t c = 0; c < 4; ++c)
                        acc += x.value()[(b * 9 + s + d) * 4 + c] * k.value()[(d * 4 + c) * 6 + f];
                EXPECT_NEAR(y[(b * 6 + s) * 6 + f], acc, 1e-12);
            }
}

TEST(Forward, LstmCellMatchesScalarFormula) {
    Tape t;
    // in = 1, H = 1: gates read straight off the weights.
    Var x = t.constant(Tensor({1, 1}, {0.5}));
    Var h = t.constant(Tensor({1, 1}, {-0.3}));
    Var c = t.constant(Tensor({1, 1}, {0.2}));
    Var w = t.constant(Tensor({1, 4}, {0.1, 0.2, 0.3, 0.4}));
    Var u = t.constant(Tensor({1, 4}, {-0.5, 0.6, -0.7, 0.8}));
    Var b = t.constant(Tensor({4}, {0.0, 1.0, 0.0, 0.0}));
    auto s = lstm_cell(x, h, c, w, u, b);
    auto sg = [](double z) { return 1 / (1 + std::exp(-z)); };
    const double zi = 0.05 + 0.15, zf = 0.1 - 0.18 + 1, zg = 0.15 + 0.21, zo = 0.2 - 0.24;
    const double cn = sg(zf) * 0.2 + sg(zi) * std::tanh(zg);
    EXPECT_NEAR(s.c.value()[0], cn, 1e-15);
    EXPECT_NEAR(s.h.value()[0], sg(zo) * std::tanh(cn), 1e-15);
}

TEST(Forward, ShapeErrorsNameOpAndShapes) {
    Tape t;
    Var a = t.constant(Tensor({2, 3}));
    Var b = t.constant(Tensor({2, 3}));
    try {
        matmul(a, b);
        FAIL();
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("matmul"), std::string::npos);
        EXPECT_NE(msg.find("[2,3]"), std::string::npos);
    }
    EXPECT_THROW(conv1d(t.constant(Tensor({2, 1})), t.constant(Tensor({3, 1, 1}))), ShapeError);
    EXPECT_THROW(add(a, t.constant(Tensor({3, 2}))), ShapeError);
    const std::int32_t bad[] = {5};
    EXPECT_THROW(embedding_lookup(t.constant(Tensor({5, 2})), bad), ShapeError);
}

TEST(Backward, SumGivesOnes) {
    ParamSet ps;
    auto& w = ps.add("w", Tensor({3}, {1, -2, 5}));
    Tape t;
    t.backward(sum(t.parameter(w)));
    EXPECT_EQ(w.grad, Tensor({3}, 1.0));
}

TEST(Backward, DotSelfGivesTwiceW) {
    ParamSet ps;
    auto& w = ps.add("w", Tensor({3}, {1, -2, 5}));
    Tape t;
    Var v = t.parameter(w);
    t.backward(dot(v, v));
    EXPECT_EQ(w.grad, Tensor({3}, {2, -4, 10}));
}

TEST(Backward, NonScalarLossThrows) {
    ParamSet ps;
    auto& w = ps.add("w", Tensor({3}));
    Tape t;
    EXPECT_THROW(t.backward(t.parameter(w)), ShapeError);
}

TEST(Backward, UnreachedParameterGetsZero) {
    ParamSet ps;
    auto& a = ps.add("a", Tensor({2}, 1.0));
    auto& b = ps.add("b", Tensor({2}, 1.0));
    ps.zero_grad();
    Tape t;
    t.parameter(b);
    t.backward(sum(t.parameter(a)));
    EXPECT_EQ(b.grad, Tensor({2}, 0.0));
}

TEST(Backward, ReplayIsBitIdentical) {
    auto run = [] {
        Rng rng(9);
        ParamSet ps;
        auto& w = ps.add("w", random_tensor({4, 6}, rng));
        auto& k = ps.add("k", random_tensor({3, 6, 5}, rng));
        Tape t;
        Rng drop(2);
        Var x = dropout(relu(t.parameter(w)), 0.3, drop, true);
        Var y = global_max_pool1d(conv1d(reshape(x, {4, 6}), t.parameter(k)));
        Var loss = project(tanh(y));
        t.backward(loss);
        return std::make_tuple(loss.value(), w.grad, k.grad);
    };
    EXPECT_EQ(run(), run());
}

// Finite-difference checks, one per op, each at kPoints random points.

TEST(GradCheck, LinearFunctionIsExact) {
    Rng rng(1);
    ParamSet ps;
    auto& w = ps.add("w", random_tensor({7}, rng));
    auto r = grad_check(ps, [&](Tape& t) { return project(scale(t.parameter(w), 3.5)); });
    EXPECT_LT(r.max_rel_error, 1e-10);
    EXPECT_EQ(r.checked, 7u);
}

TEST(GradCheck, ReluKinkIsExcluded) {
    ParamSet ps;
    auto& w = ps.add("w", Tensor({3}, {0.5, 0.0, -0.5}));
    auto r = grad_check(ps, [&](Tape& t) { return sum(relu(t.parameter(w))); });
    EXPECT_EQ(r.excluded, 1u);
    EXPECT_EQ(r.checked, 2u);
    EXPECT_LT(r.max_rel_error, 1e-10);
}

TEST(GradCheck, NonFiniteLossThrows) {
    ParamSet ps;
    auto& w = ps.add("w", Tensor({1}, {1.0}));
    EXPECT_THROW(grad_check(ps, [&](Tape& t) { return scale(sum(t.parameter(w)), INFINITY); }), std::domain_error);
}

TEST(GradCheck, RestoresValuesAndGradients) {
    Rng rng(4);
    ParamSet ps;
    auto& w = ps.add("w", random_tensor({5}, rng));
    w.grad = Tensor({5}, 42.0);
    const Tensor before = w.value;
    grad_check(ps, [&](Tape& t) { return project(tanh(t.parameter(w))); });
    EXPECT_EQ(w.value, before);
    EXPECT_EQ(w.grad, Tensor({5}, 42.0));
}

class OpGrad : public ::testing::TestWithParam<int> {
protected:
    Rng rng{static_cast<std::uint64_t>(1000 + GetParam())};
};

TEST_P(OpGrad, Matmul) {
    ParamSet ps;
    auto& a = ps.add("a", random_tensor({3, 4}, rng));
    auto& b = ps.add("b", random_tensor({4, 5}, rng));
    expect_grad_ok(ps, [&](Tape& t) { return project(matmul(t.parameter(a), t.parameter(b))); }, "matmul");
}

TEST_P(OpGrad, AddMulScale) {
    ParamSet ps;
    auto& a = ps.add("a", random_tensor({2, 3}, rng));
    auto& b = ps.add("b", random_tensor({2, 3}, rng));
    expect_grad_ok(
        ps,
        [&](Tape& t) {
            Var x = t.parameter(a), y = t.parameter(b);
            return project(scale(add(mul(x, y), x), -1.7));
        },
        "add/mul/scale");
}

TEST_P(OpGrad, SumMeanDot) {
    ParamSet ps;
    auto& a = ps.add("a", random_tensor({6}, rng));
    auto& b = ps.add("b", random_tensor({6}, rng));
    expect_grad_ok(
        ps,
        [&](Tape& t) {
            Var x = t.parameter(a), y = t.parameter(b);
            return add(mul(mean(x), dot(x, y)), sum(y));
        },
        "sum/mean/dot");
}

TEST_P(OpGrad, DenseAndBias) {
    ParamSet ps;
    auto& x = ps.add("x", random_tensor({4, 3}, rng));
    auto& w = ps.add("w", random_tensor({3, 2}, rng));
    auto& b = ps.add("b", random_tensor({2}, rng));
    expect_grad_ok(ps, [&](Tape& t) { return project(dense(t.parameter(x), t.parameter(w), t.parameter(b))); },
                   "dense");
}

TEST_P(OpGrad, EmbeddingLookupWithRepeats) {
    ParamSet ps;
    auto& table = ps.add("table", random_tensor({5, 3}, rng));
    const std::int32_t ids[] = {4, 0, 4, 2, 4};
    expect_grad_ok(ps, [&](Tape& t) { return project(embedding_lookup(t.parameter(table), ids)); }, "embedding");
}

TEST_P(OpGrad, LstmCell) {
    ParamSet ps;
    const std::size_t B = 2, in = 3, H = 4;
    auto& x = ps.add("x", random_tensor({B, in}, rng));
    auto& h = ps.add("h", random_tensor({B, H}, rng));
    auto& c = ps.add("c", random_tensor({B, H}, rng));
    auto& w = ps.add("w", random_tensor({in, 4 * H}, rng));
    auto& u = ps.add("u", random_tensor({H, 4 * H}, rng));
    auto& b = ps.add("b", random_tensor({4 * H}, rng));
    expect_grad_ok(
        ps,
        [&](Tape& t) {
            auto s = lstm_cell(t.parameter(x), t.parameter(h), t.parameter(c), t.parameter(w), t.parameter(u),
                               t.parameter(b));
            // two steps so gradients also flow through the returned state
            auto s2 = lstm_cell(t.parameter(x), s.h, s.c, t.parameter(w), t.parameter(u), t.parameter(b));
            return add(project(s2.h), project(s2.c));
        },
        "lstm_cell");
}

TEST_P(OpGrad, SliceConcatReshape) {
    ParamSet ps;
    auto& a = ps.add("a", random_tensor({3, 5}, rng));
    auto& b = ps.add("b", random_tensor({2, 2}, rng));
    expect_grad_ok(
        ps,
        [&](Tape& t) {
            Var parts[] = {slice_cols(t.parameter(a), 1, 3), t.parameter(b)};
            return project(reshape(concat_rows(parts), {2, 5}));
        },
        "slice/concat/reshape");
}

TEST_P(OpGrad, Conv1d) {
    ParamSet ps;
    auto& x = ps.add("x", random_tensor({2, 7, 3}, rng));
    auto& k = ps.add("k", random_tensor({3, 3, 4}, rng));
    expect_grad_ok(ps, [&](Tape& t) { return project(conv1d(t.parameter(x), t.parameter(k))); }, "conv1d");
}

TEST_P(OpGrad, GlobalMaxPool) {
    ParamSet ps;
    auto& x = ps.add("x", random_tensor({2, 6, 3}, rng));
    expect_grad_ok(ps, [&](Tape& t) { return project(global_max_pool1d(t.parameter(x))); }, "global_max_pool1d");
}

TEST_P(OpGrad, Activations) {
    ParamSet ps;
    auto& x = ps.add("x", random_tensor({3, 4}, rng, -3, 3));
    expect_grad_ok(ps, [&](Tape& t) { return project(relu(t.parameter(x))); }, "relu");
    expect_grad_ok(ps, [&](Tape& t) { return project(sigmoid(t.parameter(x))); }, "sigmoid");
    expect_grad_ok(ps, [&](Tape& t) { return project(tanh(t.parameter(x))); }, "tanh");
    expect_grad_ok(ps, [&](Tape& t) { return project(softmax(t.parameter(x))); }, "softmax");
}

TEST_P(OpGrad, DropoutWithFixedMask) {
    ParamSet ps;
    auto& x = ps.add("x", random_tensor({4, 5}, rng));
    const std::uint64_t mask_seed = rng.next_u64();
    expect_grad_ok(
        ps,
        [&](Tape& t) {
            Rng m(mask_seed);
            return project(dropout(t.parameter(x), 0.4, m, true));
        },
        "dropout");
}

TEST_P(OpGrad, CategoricalCrossEntropy) {
    ParamSet ps;
    auto& logits = ps.add("logits", random_tensor({4, 5}, rng, -2, 2));
    auto& p = ps.add("p", random_tensor({4, 5}, rng, 0.1, 1.0));
    const std::int32_t targets[] = {0, 3, 4, 3};
    const double weights[] = {1.0, -0.5, 2.0, 0.25};
    expect_grad_ok(ps, [&](Tape& t) { return categorical_cross_entropy(softmax(t.parameter(logits)), targets); },
                   "cce/softmax");
    expect_grad_ok(ps, [&](Tape& t) { return categorical_cross_entropy(t.parameter(p), targets, weights); },
                   "cce weighted");
}

TEST_P(OpGrad, BinaryCrossEntropy) {
    ParamSet ps;
    auto& z = ps.add("z", random_tensor({6, 1}, rng, -3, 3));
    const double labels[] = {1, 0, 1, 1, 0, 0};
    expect_grad_ok(ps, [&](Tape& t) { return binary_cross_entropy(sigmoid(t.parameter(z)), labels); }, "bce");
}

INSTANTIATE_TEST_SUITE_P(RandomPoints, OpGrad, ::testing::Range(0, kPoints));

TEST(Loss, CrossEntropyValues) {
    Tape t;
    Var p = t.constant(Tensor({2, 2}, {0.25, 0.75, 0.5, 0.5}));
    const std::int32_t tg[] = {1, 0};
    EXPECT_NEAR(categorical_cross_entropy(p, tg).value().item(), -(std::log(0.75) + std::log(0.5)) / 2, 1e-15);
    const double y[] = {1, 0};
    Var q = t.constant(Tensor({2}, {0.8, 0.3}));
    EXPECT_NEAR(binary_cross_entropy(q, y).value().item(), -(std::log(0.8) + std::log(0.7)) / 2, 1e-15);
}

TEST(Dropout, InferenceIsIdentity) {
    Rng rng(1);
    Tape t;
    Var x = t.constant(random_tensor({10, 10}, rng));
    Rng d(2);
    EXPECT_EQ(dropout(x, 0.2, d, false).value(), x.value());
    EXPECT_EQ(d, Rng(2));
}

TEST(Dropout, ExpectationMatchesInput) {
    Rng rng(1);
    const Tensor in = random_tensor({8}, rng, 0.5, 2.0);
    Tensor acc({8});
    Rng d(7);
    const int masks = 20000;
    for (int k = 0; k < masks; ++k) {
        Tape t(false);
        Var y = dropout(t.constant(in), 0.2, d, true);
        for (std::size_t i = 0; i < 8; ++i) acc[i] += y.value()[i];
    }
    for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(acc[i] / masks, in[i], 0.02 * in[i]);
}

TEST(Dropout, RejectsBadRate) {
    Tape t;
    Rng d(1);
    EXPECT_THROW(dropout(t.constant(Tensor({2})), 1.0, d, true), std::invalid_argument);
}

TEST(Adam, ZeroLearningRateLeavesParams) {
    Rng rng(2);
    ParamSet ps;
    auto& w = ps.add("w", random_tensor({4}, rng));
    w.grad = random_tensor({4}, rng);
    const Tensor before = w.value;
    adam_step(ps, {.lr = 0.0});
    EXPECT_EQ(w.value, before);
}

TEST(Adam, ZeroGradientFreshStateLeavesParams) {
    Rng rng(2);
    ParamSet ps;
    auto& w = ps.add("w", random_tensor({4}, rng));
    ps.add("never_touched", Tensor({2}, 1.0));
    ps.zero_grad();
    ps["never_touched"].grad = Tensor();
    const Tensor before = w.value;
    adam_step(ps, {.lr = 0.1});
    EXPECT_EQ(w.value, before);
    EXPECT_EQ(ps["never_touched"].value, Tensor({2}, 1.0));
}

TEST(Adam, OneStepOnSquareDecreases) {
    ParamSet ps;
    auto& w = ps.add("w", Tensor({1}, {1.0}));
    Tape t;
    Var v = t.parameter(w);
    t.backward(mul(v, v));
    adam_step(ps, {.lr = 0.01});
    // first step moves by lr * sign(g) up to eps
    EXPECT_NEAR(w.value[0], 0.99, 1e-9);
    EXPECT_LT(w.value[0] * w.value[0], 1.0);
    EXPECT_EQ(ps.adam_steps(), 1);
}

TEST(Adam, ShapeMismatchThrows) {
    ParamSet ps;
    auto& w = ps.add("w", Tensor({3}));
    w.grad = Tensor({2});
    EXPECT_THROW(adam_step(ps, {}), ShapeError);
}

TEST(Adam, ClipGradNorm) {
    ParamSet ps;
    auto& a = ps.add("a", Tensor({1}));
    auto& b = ps.add("b", Tensor({1}));
    a.grad = Tensor({1}, {3.0});
    b.grad = Tensor({1}, {4.0});
    EXPECT_DOUBLE_EQ(clip_grad_norm(ps, 1.0), 5.0);
    EXPECT_NEAR(a.grad[0], 0.6, 1e-15);
    EXPECT_NEAR(b.grad[0], 0.8, 1e-15);
}

TEST(Checkpoint, RoundtripIsBitExact) {
    Rng rng(11);
    ParamSet ps;
    ps.add("emb", random_tensor({3, 4}, rng, -1e-300, 1e300));
    ps.add("bias", Tensor({2}, {-0.0, std::nextafter(1.0, 2.0)}));
    ps.add("scalar", Tensor::scalar(M_PI));
    std::stringstream buf;
    save_params(ps, buf);

    ParamSet loaded;
    loaded.add("emb", Tensor({3, 4}));
    loaded.add("bias", Tensor({2}));
    loaded.add("scalar", Tensor::scalar(0));
    load_params(loaded, buf);
    EXPECT_TRUE(ps.same_values(loaded));
    EXPECT_TRUE(std::signbit(loaded["bias"].value[0]));

    std::stringstream again;
    save_params(loaded, again);
    std::stringstream first;
    save_params(ps, first);
    EXPECT_EQ(first.str(), again.str());
}

TEST(Checkpoint, FixedByteLayout) {
    ParamSet ps;
    ps.add("w", Tensor({1}, {1.0}));
    std::stringstream buf;
    save_params(ps, buf);
    const std::string s = buf.str();
    ASSERT_EQ(s.size(), 8u + 4 + 8 + 8 + 1 + 8 + 8 + 8);
    EXPECT_EQ(s.substr(0, 8), "LGPARAMS");
    EXPECT_EQ(s[8], 1);
    // 1.0 = 0x3ff0000000000000, little-endian
    EXPECT_EQ(static_cast<unsigned char>(s[s.size() - 1]), 0x3f);
    EXPECT_EQ(static_cast<unsigned char>(s[s.size() - 2]), 0xf0);
}

TEST(Checkpoint, MismatchesAreRejected) {
    ParamSet ps;
    ps.add("w", Tensor({2}, 1.0));
    std::stringstream buf;
    save_params(ps, buf);
    const std::string bytes = buf.str();

    ParamSet wrong_shape;
    wrong_shape.add("w", Tensor({3}));
    std::stringstream in1(bytes);
    EXPECT_THROW(load_params(wrong_shape, in1), CheckpointError);
    EXPECT_EQ(wrong_shape["w"].value, Tensor({3}));

    ParamSet wrong_name;
    wrong_name.add("v", Tensor({2}));
    std::stringstream in2(bytes);
    EXPECT_THROW(load_params(wrong_name, in2), CheckpointError);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    EXPECT_THROW(read_params(truncated), CheckpointError);
    std::stringstream garbage("not a checkpoint at all");
    EXPECT_THROW(read_params(garbage), CheckpointError);
}
