#include "diakrit/layers.hpp"

#include <cmath>
#include <string>

#include <gtest/gtest.h>

#include "support/fd_check.hpp"

using namespace diakrit;
using fdcheck::fd_check;
using fdcheck::FdReport;

namespace {

// Fills a tensor with values whose pairwise gaps are ≥ 0.08, so an FD probe
// of ±1e-4 can never change which element a max-pool window selects.
void fill_distinct(Tensor<double>& t, Rng& rng) {
    std::vector<double> levels(t.numel());
    for (size_t i = 0; i < levels.size(); ++i) levels[i] = static_cast<double>(i) * 0.1;
    rng.shuffle(levels);
    for (size_t i = 0; i < t.numel(); ++i) t.v[i] = levels[i] + rng.uniform(-0.01, 0.01);
}

Tensor<double> random_proj(const std::vector<int>& shape, Rng& rng) {
    Tensor<double> p(shape);
    for (double& v : p.v) v = rng.uniform(0.2, 1.0) * (rng.chance(0.5) ? 1.0 : -1.0);
    return p;
}

double project(const Tensor<double>& y, const Tensor<double>& proj) {
    double s = 0;
    for (size_t i = 0; i < y.numel(); ++i) s += y.v[i] * proj.v[i];
    return s;
}

std::string what_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

} // namespace

// ---- conv2d ---------------------------------------------------------------

TEST(Conv2d, IdentityKernelReproducesInput) {
    Rng rng(1);
    Conv2d<float> conv(3, 3, 1, 1, Pad::Same, rng);
    for (int ic = 0; ic < 3; ++ic)
        for (int oc = 0; oc < 3; ++oc) conv.w.v[static_cast<size_t>(ic) * 3 + oc] = ic == oc;
    Tensor<float> x({2, 4, 5, 3});
    for (float& v : x.v) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    Tensor<float> y = conv.forward(x, false);
    ASSERT_TRUE(y.same_shape(x));
    for (size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.v[i], x.v[i]) << "element " << i;
}

TEST(Conv2d, SamePaddingStride2HalvesWidth16To8) {
    Rng rng(2);
    Conv2d<float> conv(2, 5, 3, 2, Pad::Same, rng);
    Tensor<float> x({1, 4, 16, 2});
    Tensor<float> y = conv.forward(x, false);
    EXPECT_EQ(y.shape, (std::vector<int>{1, 2, 8, 5}));
}

TEST(Conv2d, GradientMatchesFiniteDifferences5x7x3) {
    Rng rng(3);
    Conv2d<double> conv(3, 4, 3, 1, Pad::Same, rng);
    for (double& b : conv.b.v) b = rng.uniform(-0.5, 0.5);
    Tensor<double> x({1, 5, 7, 3});
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    Tensor<double> proj = random_proj({1, 5, 7, 4}, rng);

    auto loss = [&] { return project(conv.forward(x, true), proj); };
    loss();
    Tensor<double> dx = conv.backward(proj);

    FdReport rep = fd_check(loss, {{&x.v, dx.v, "x"},
                                   {&conv.w.v, conv.gw.v, "w"},
                                   {&conv.b.v, conv.gb.v, "b"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

TEST(Conv2d, GradientMatchesFiniteDifferencesValidStride2) {
    Rng rng(4);
    Conv2d<double> conv(2, 3, 3, 2, Pad::Valid, rng);
    for (double& b : conv.b.v) b = rng.uniform(-0.5, 0.5);
    Tensor<double> x({1, 7, 8, 2});
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    Tensor<double> y = conv.forward(x, true);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 3, 3, 3}));
    Tensor<double> proj = random_proj(y.shape, rng);

    auto loss = [&] { return project(conv.forward(x, true), proj); };
    Tensor<double> dx = conv.backward(proj);

    FdReport rep = fd_check(loss, {{&x.v, dx.v, "x"},
                                   {&conv.w.v, conv.gw.v, "w"},
                                   {&conv.b.v, conv.gb.v, "b"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

TEST(Conv2d, GradientMatchesFiniteDifferences1x1FastPath) {
    Rng rng(5);
    Conv2d<double> conv(3, 2, 1, 1, Pad::Same, rng);
    for (double& b : conv.b.v) b = rng.uniform(-0.5, 0.5);
    Tensor<double> x({2, 3, 4, 3});
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    Tensor<double> proj = random_proj({2, 3, 4, 2}, rng);

    auto loss = [&] { return project(conv.forward(x, true), proj); };
    loss();
    Tensor<double> dx = conv.backward(proj);

    FdReport rep = fd_check(loss, {{&x.v, dx.v, "x"},
                                   {&conv.w.v, conv.gw.v, "w"},
                                   {&conv.b.v, conv.gb.v, "b"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

TEST(Conv2d, ChannelMismatchReportsBothShapes) {
    Rng rng(6);
    Conv2d<float> conv(3, 4, 3, 1, Pad::Same, rng);
    Tensor<float> x({1, 5, 7, 4});
    std::string msg = what_of([&] { conv.forward(x, false); });
    EXPECT_NE(msg.find("[1,5,7,4]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3,3,3,4]"), std::string::npos) << msg;
}

TEST(Conv2d, RejectsNonRank4Input) {
    Rng rng(7);
    Conv2d<float> conv(3, 4, 3, 1, Pad::Same, rng);
    Tensor<float> x({5, 3});
    EXPECT_THROW(conv.forward(x, false), Error);
}

// ---- maxpool ---------------------------------------------------------------

TEST(MaxPool, ConstantInputGivesConstantOutput) {
    MaxPool<float> pool;
    Tensor<float> x({1, 5, 5, 2});
    for (float& v : x.v) v = 3.25f;
    Tensor<float> y = pool.forward(x, false);
    EXPECT_EQ(y.shape, (std::vector<int>{1, 3, 3, 2}));
    for (float v : y.v) EXPECT_EQ(v, 3.25f);
}

TEST(MaxPool, Height16Pools8Then4) {
    Rng rng(8);
    MaxPool<float> pool;
    Tensor<float> x({1, 16, 16, 1});
    for (float& v : x.v) v = static_cast<float>(rng.uniform());
    Tensor<float> y1 = pool.forward(x, false);
    EXPECT_EQ(y1.shape, (std::vector<int>{1, 8, 8, 1}));
    Tensor<float> y2 = pool.forward(y1, false);
    EXPECT_EQ(y2.shape, (std::vector<int>{1, 4, 4, 1}));
}

TEST(MaxPool, GradientMatchesFiniteDifferencesAwayFromTies) {
    Rng rng(9);
    MaxPool<double> pool;
    Tensor<double> x({1, 5, 6, 2});
    fill_distinct(x, rng);
    Tensor<double> y = pool.forward(x, true);
    Tensor<double> proj = random_proj(y.shape, rng);

    auto loss = [&] { return project(pool.forward(x, true), proj); };
    Tensor<double> dx = pool.backward(proj);

    FdReport rep = fd_check(loss, {{&x.v, dx.v, "x"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

TEST(MaxPool, TiesRouteGradientToFirstScannedPosition) {
    MaxPool<double> pool;
    Tensor<double> x({1, 2, 2, 1});
    x.v = {1.0, 1.0, 1.0, 1.0}; // every window is a four-way tie
    Tensor<double> y = pool.forward(x, true);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 1, 1, 1}));
    Tensor<double> dy(y.shape);
    dy.v[0] = 1.0;
    Tensor<double> dx = pool.backward(dy);
    EXPECT_EQ(dx.v[0], 1.0); // first scanned wins
    EXPECT_EQ(dx.v[1], 0.0);
    EXPECT_EQ(dx.v[2], 0.0);
    EXPECT_EQ(dx.v[3], 0.0);
}

// ---- dense ------------------------------------------------------------------

TEST(Dense, GradientMatchesFiniteDifferences) {
    Rng rng(10);
    Dense<double> dense(5, 4, rng);
    for (double& b : dense.b.v) b = rng.uniform(-0.5, 0.5);
    Tensor<double> x({3, 5});
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    Tensor<double> proj = random_proj({3, 4}, rng);

    auto loss = [&] { return project(dense.forward(x, true), proj); };
    loss();
    Tensor<double> dx = dense.backward(proj);

    FdReport rep = fd_check(loss, {{&x.v, dx.v, "x"},
                                   {&dense.w.v, dense.gw.v, "w"},
                                   {&dense.b.v, dense.gb.v, "b"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

TEST(Dense, ShapeMismatchReportsBothShapes) {
    Rng rng(11);
    Dense<float> dense(5, 4, rng);
    Tensor<float> x({3, 6});
    std::string msg = what_of([&] { dense.forward(x, false); });
    EXPECT_NE(msg.find("[3,6]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[5,4]"), std::string::npos) << msg;
}

// ---- relu ---------------------------------------------------------------------

TEST(Relu, ClampsNegativesAndRoutesGradient) {
    Relu<double> relu;
    Tensor<double> x({1, 4});
    x.v = {-2.0, -0.5, 0.5, 2.0};
    Tensor<double> y = relu.forward(x, true);
    EXPECT_EQ(y.v, (std::vector<double>{0.0, 0.0, 0.5, 2.0}));
    Tensor<double> dy({1, 4});
    dy.v = {1.0, 2.0, 3.0, 4.0};
    Tensor<double> dx = relu.backward(dy);
    EXPECT_EQ(dx.v, (std::vector<double>{0.0, 0.0, 3.0, 4.0}));
}

TEST(Relu, GradientMatchesFiniteDifferencesAwayFromKink) {
    Rng rng(12);
    Relu<double> relu;
    Tensor<double> x({2, 3, 4, 2});
    for (double& v : x.v)
        v = rng.uniform(0.1, 1.0) * (rng.chance(0.5) ? 1.0 : -1.0); // |x| ≥ 0.1
    Tensor<double> proj = random_proj(x.shape, rng);

    auto loss = [&] { return project(relu.forward(x, true), proj); };
    loss();
    Tensor<double> dx = relu.backward(proj);

    FdReport rep = fd_check(loss, {{&x.v, dx.v, "x"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

// ---- softmax --------------------------------------------------------------------

TEST(Softmax, EqualLogitsOver13ClassesGiveUniform) {
    Tensor<double> x({1, 13});
    for (double& v : x.v) v = 0.7;
    Tensor<double> y = softmax(x);
    for (int c = 0; c < 13; ++c) {
        EXPECT_NEAR(y.at(0, c), 1.0 / 13.0, 1e-12);
        EXPECT_DOUBLE_EQ(y.at(0, c), y.at(0, 0));
    }
}

TEST(Softmax, RowsSumToOneWithin1e6) {
    Rng rng(13);
    Tensor<float> x({7, 13});
    for (float& v : x.v) v = static_cast<float>(rng.uniform(-5.0, 5.0));
    Tensor<float> y = softmax(x);
    for (int r = 0; r < 7; ++r) {
        double sum = 0;
        for (int c = 0; c < 13; ++c) {
            EXPECT_GE(y.at(r, c), 0.0f);
            sum += y.at(r, c);
        }
        EXPECT_NEAR(sum, 1.0, 1e-6);
    }
}

TEST(Softmax, ExtremeLogitsStayFinite) {
    Tensor<float> x({1, 3});
    x.v = {1e4f, 0.0f, -1e4f};
    Tensor<float> y = softmax(x);
    ASSERT_TRUE(all_finite(y));
    EXPECT_NEAR(y.v[0], 1.0f, 1e-6);
    EXPECT_NEAR(y.v[1] + y.v[2], 0.0f, 1e-6);
}

TEST(Softmax, BackwardMatchesFiniteDifferences) {
    Rng rng(14);
    Tensor<double> x({2, 5});
    for (double& v : x.v) v = rng.uniform(-2.0, 2.0);
    Tensor<double> proj = random_proj(x.shape, rng);

    auto loss = [&] { return project(softmax(x), proj); };
    Tensor<double> y = softmax(x);
    Tensor<double> dx = softmax_backward(y, proj);

    FdReport rep = fd_check(loss, {{&x.v, dx.v, "x"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

// ---- dropout ----------------------------------------------------------------------

TEST(Dropout, RateZeroIsIdentity) {
    Rng rng(15);
    Dropout<float> drop(0.0);
    Tensor<float> x({1, 3, 3, 2});
    for (float& v : x.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    Tensor<float> y = drop.forward(x, true, 42);
    for (size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.v[i], x.v[i]);
}

TEST(Dropout, InferenceIsIdentityAtAnyRate) {
    Rng rng(16);
    Dropout<float> drop(0.5);
    Tensor<float> x({1, 4, 4, 3});
    for (float& v : x.v) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    Tensor<float> y = drop.forward(x, false, 42);
    for (size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y.v[i], x.v[i]);
}

TEST(Dropout, TrainingScalesSurvivorsByInverseKeepRate) {
    Dropout<double> drop(0.5);
    Tensor<double> x({10000});
    for (double& v : x.v) v = 1.0;
    Tensor<double> y = drop.forward(x, true, 7);
    size_t zeros = 0;
    for (double v : y.v) {
        ASSERT_TRUE(v == 0.0 || v == 2.0) << v; // survivors scaled by 1/(1-0.5)
        zeros += v == 0.0;
    }
    double frac = static_cast<double>(zeros) / 10000.0;
    EXPECT_GT(frac, 0.45);
    EXPECT_LT(frac, 0.55);

    Tensor<double> dy({10000});
    for (double& v : dy.v) v = 1.0;
    Tensor<double> dx = drop.backward(dy);
    for (size_t i = 0; i < dx.numel(); ++i)
        EXPECT_EQ(dx.v[i], y.v[i] == 0.0 ? 0.0 : 2.0) << "element " << i;
}

TEST(Dropout, SameSeedSameMaskDifferentSeedDifferentMask) {
    Dropout<float> drop(0.5);
    Tensor<float> x({1000});
    for (float& v : x.v) v = 1.0f;
    Tensor<float> a = drop.forward(x, true, 7);
    Tensor<float> b = drop.forward(x, true, 7);
    EXPECT_EQ(a.v, b.v);
    Tensor<float> c = drop.forward(x, true, 8);
    EXPECT_NE(a.v, c.v);
}

TEST(Dropout, RejectsRateOutsideHalfOpenUnitInterval) {
    EXPECT_THROW(Dropout<float>(1.0), Error);
    EXPECT_THROW(Dropout<float>(-0.1), Error);
    EXPECT_NO_THROW(Dropout<float>(0.0));
    EXPECT_NO_THROW(Dropout<float>(0.999));
}

// ---- channel concat ------------------------------------------------------------------

TEST(ChannelConcat, InterleavesPerCellAndSplitInverts) {
    Tensor<float> a({1, 2, 3, 2}), b({1, 2, 3, 5});
    for (size_t i = 0; i < a.numel(); ++i) a.v[i] = static_cast<float>(i);
    for (size_t i = 0; i < b.numel(); ++i) b.v[i] = 100.0f + static_cast<float>(i);
    Tensor<float> y = channel_concat(a, b);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 2, 3, 7}));
    for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 3; ++w) {
            for (int c = 0; c < 2; ++c) EXPECT_EQ(y.at(0, h, w, c), a.at(0, h, w, c));
            for (int c = 0; c < 5; ++c) EXPECT_EQ(y.at(0, h, w, 2 + c), b.at(0, h, w, c));
        }
    auto [da, db] = channel_split(y, 2, 5);
    EXPECT_EQ(da.v, a.v);
    EXPECT_EQ(db.v, b.v);
}

TEST(ChannelConcat, SpatialMismatchReportsBothShapes) {
    Tensor<float> a({1, 2, 3, 2}), b({1, 3, 3, 5});
    std::string msg = what_of([&] { channel_concat(a, b); });
    EXPECT_NE(msg.find("[1,2,3,2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[1,3,3,5]"), std::string::npos) << msg;
}

// ---- fire -------------------------------------------------------------------------

TEST(Fire, PaperShape16xWx64GivesDoubleChannels) {
    Rng rng(17);
    Fire<float> fire(64, 16, 64, 64, rng);
    EXPECT_EQ(fire.out_channels(), 128);
    Tensor<float> x({1, 16, 9, 64});
    Tensor<float> y = fire.forward(x, false);
    EXPECT_EQ(y.shape, (std::vector<int>{1, 16, 9, 128}));
}

TEST(Fire, ZeroInputZeroBiasGivesZeroOutput) {
    Rng rng(18);
    Fire<float> fire(8, 2, 3, 3, rng); // biases are zero-initialized
    Tensor<float> x({1, 4, 4, 8});
    Tensor<float> y = fire.forward(x, false);
    for (float v : y.v) EXPECT_EQ(v, 0.0f);
}

TEST(Fire, GradientMatchesFiniteDifferencesTiny) {
    Rng rng(19);
    Fire<double> fire(2, 2, 3, 3, rng);
    // Keep every ReLU input well away from its kink so central differences
    // stay valid: small weights + large positive biases pin most channels ON,
    // and one strongly negative bias per expand branch pins a channel OFF.
    // The dead channels give the two branches distinct ReLU masks, so a
    // backward pass that cross-wires them cannot cancel out.
    for (double& w : fire.squeeze.w.v) w *= 0.1;
    for (double& w : fire.expand1.w.v) w *= 0.03;
    for (double& w : fire.expand3.w.v) w *= 0.01;
    for (double& b : fire.squeeze.b.v) b = 5.0;
    for (double& b : fire.expand1.b.v) b = 5.0;
    for (double& b : fire.expand3.b.v) b = 5.0;
    fire.expand1.b.v[0] = -10.0;
    fire.expand3.b.v[1] = -10.0;
    Tensor<double> x({1, 4, 5, 2});
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);

    // validity precondition for the 1e-6 tolerance: margin ≥ 0.5 everywhere
    Tensor<double> s_pre = fire.squeeze.forward(x, false);
    for (double v : s_pre.v) ASSERT_GT(v, 0.5);
    Tensor<double> e1_pre = fire.expand1.forward(s_pre, false); // relu(s_pre) = s_pre here
    Tensor<double> e3_pre = fire.expand3.forward(s_pre, false);
    for (double v : e1_pre.v) ASSERT_GT(std::abs(v), 0.5);
    for (double v : e3_pre.v) ASSERT_GT(std::abs(v), 0.5);

    Tensor<double> y = fire.forward(x, true);
    ASSERT_EQ(y.shape, (std::vector<int>{1, 4, 5, 6}));
    Tensor<double> proj = random_proj(y.shape, rng);

    auto loss = [&] { return project(fire.forward(x, true), proj); };
    loss();
    Tensor<double> dx = fire.backward(proj);

    std::vector<fdcheck::GradPair> pairs = {{&x.v, dx.v, "x"}};
    for (auto& p : fire.params("fire"))
        pairs.push_back({&p.value->v, p.grad->v, p.name});
    FdReport rep = fd_check(loss, pairs);
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;

    // the OFF channels really are off: their gradients vanish exactly
    for (auto& p : fire.params("fire"))
        if (p.name == "fire.expand1.b")
            EXPECT_EQ(p.grad->v[0], 0.0);
}

// ---- fused softmax cross-entropy --------------------------------------------------

TEST(SoftmaxXent, UniformLogitsLoseLog13) {
    SoftmaxXent<double> xent;
    Tensor<double> logits({4, 13});
    std::vector<int> targets = {0, 3, 7, 12};
    double loss = xent.forward(logits, targets);
    EXPECT_NEAR(loss, std::log(13.0), 1e-9);
}

TEST(SoftmaxXent, ConfidentCorrectPredictionLosesNothing) {
    SoftmaxXent<double> xent;
    Tensor<double> logits({1, 5});
    logits.v = {50.0, 0.0, 0.0, 0.0, 0.0};
    EXPECT_NEAR(xent.forward(logits, {0}), 0.0, 1e-9);
}

TEST(SoftmaxXent, GradientMatchesFiniteDifferences) {
    Rng rng(20);
    SoftmaxXent<double> xent;
    Tensor<double> logits({4, 6});
    for (double& v : logits.v) v = rng.uniform(-2.0, 2.0);
    std::vector<int> targets = {0, 3, 5, 2};

    auto loss = [&] { return xent.forward(logits, targets); };
    loss();
    Tensor<double> dx = xent.backward();

    FdReport rep = fd_check(loss, {{&logits.v, dx.v, "logits"}});
    EXPECT_LT(rep.max_rel_err, 1e-6) << rep.worst;
}

TEST(SoftmaxXent, TargetCountMismatchThrows) {
    SoftmaxXent<float> xent;
    Tensor<float> logits({4, 6});
    EXPECT_THROW(xent.forward(logits, {0, 1}), Error);
}
