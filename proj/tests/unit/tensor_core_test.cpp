#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <string>

#include "grad_cases.hpp"
#include "gradcheck.hpp"
#include "gsvit/error.hpp"
#include "gsvit/ops.hpp"

namespace gsvit {
namespace {

using testing::check_gradients;
using testing::op_cases;
using testing::random_tensor;
using testing::Inputs;

constexpr double kGradTolerance = 1e-4;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
    Tensor eye({2, 2}, {1, 0, 0, 1});
    Tensor m({2, 2}, {1, 2, 3, 4});
    Tensor out = ops::matmul(eye, m);
    EXPECT_EQ(out.shape(), (Shape{2, 2}));
    EXPECT_EQ(std::vector<float>(out.data().begin(), out.data().end()), (std::vector<float>{1, 2, 3, 4}));
}

TEST(Matmul, RowTimesColumnOfOnes) {
    Tensor row = Tensor::ones({1, 3});
    Tensor col = Tensor::ones({3, 1});
    Tensor out = ops::matmul(row, col);
    EXPECT_EQ(out.shape(), (Shape{1, 1}));
    EXPECT_FLOAT_EQ(out[0], 3.0f);
}

TEST(Matmul, GradientOfSumMatchesRowSumsOfB) {
    Tensor64 a({2, 2}, {1, 0, 0, 1}, true);
    Tensor64 b({2, 2}, {2, 0, 0, 3});
    {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        tape.backward(ops::sum(ops::matmul(a, b)));
    }
    // d/dA sum(A B) = 1 * B^T, i.e. every row equals the row sums of B.
    const std::vector<double> expected{2, 3, 2, 3};
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_DOUBLE_EQ(a.grad()[i], expected[i]);
    }
    auto r = check_gradients([&](const Inputs& in) { return ops::sum(ops::matmul(in[0], b)); },
                             {Tensor64({2, 2}, {1, 0, 0, 1}, true)});
    EXPECT_LT(r.max_relative_error, kGradTolerance);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 5});
    try {
        ops::matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
    }
}

TEST(Softmax, UniformInputGivesUniformOutput) {
    Tensor x = Tensor::zeros({3});
    Tensor y = ops::softmax(x, 0);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_NEAR(y[i], 1.0f / 3.0f, 1e-7);
    }
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
    Tensor64 x({2}, {1000.0, 0.0});
    Tensor64 y = ops::softmax(x, 0);
    EXPECT_NEAR(y[0], 1.0, 1e-12);
    EXPECT_NEAR(y[1], 0.0, 1e-12);
}

TEST(Softmax, NanInputIsRejected) {
    Tensor x({2}, {0.0f, std::nanf("")});
    EXPECT_THROW(ops::softmax(x, 0), NumericError);
}

TEST(Softmax, RowsSumToOneForFiniteInputs) {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t rows = 1 + rng.uniform_index(6);
        const std::size_t cols = 1 + rng.uniform_index(20);
        std::vector<float> data(rows * cols);
        for (auto& v : data) {
            v = static_cast<float>(rng.uniform(-80.0, 80.0));
        }
        Tensor y = ops::softmax(Tensor({rows, cols}, data), 1);
        for (std::size_t r = 0; r < rows; ++r) {
            double total = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
                total += y[r * cols + c];
            }
            EXPECT_NEAR(total, 1.0, 1e-6);
        }
    }
}

TEST(Softmax, GradientMatchesFiniteDifferences) {
    Rng rng(11);
    for (std::size_t axis = 0; axis < 2; ++axis) {
        auto r = check_gradients([axis](const Inputs& in) { return ops::softmax(in[0], axis); },
                                 {random_tensor({3, 5}, rng, -2, 2)});
        EXPECT_LT(r.max_relative_error, kGradTolerance) << "axis " << axis;
    }
}

TEST(LayerNorm, ConstantRowNormalisesToZero) {
    Tensor y = ops::layer_norm(Tensor({1, 3}, {5, 5, 5}), Tensor::ones({3}), Tensor::zeros({3}), 1e-5);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_FLOAT_EQ(y[i], 0.0f);
    }
}

TEST(LayerNorm, MatchesDirectFormula) {
    Tensor64 y = ops::layer_norm(Tensor64({3}, {1, 2, 3}), Tensor64::ones({3}), Tensor64::zeros({3}), 1e-12);
    // mean 2, population variance 2/3 -> (x - 2) / sqrt(2/3)
    EXPECT_NEAR(y[0], -1.2247, 1e-3);
    EXPECT_NEAR(y[1], 0.0, 1e-3);
    EXPECT_NEAR(y[2], 1.2247, 1e-3);
}

TEST(LayerNorm, NonPositiveEpsIsAConfigError) {
    EXPECT_THROW(ops::layer_norm(Tensor::ones({2, 3}), Tensor::ones({3}), Tensor::zeros({3}), 0.0), ConfigError);
    EXPECT_THROW(ops::layer_norm(Tensor::ones({2, 3}), Tensor::ones({3}), Tensor::zeros({3}), -1.0), ConfigError);
}

TEST(LayerNorm, GradientMatchesFiniteDifferences) {
    Rng rng(3);
    auto r = check_gradients(
        [](const Inputs& in) { return ops::layer_norm(in[0], in[1], in[2], 1e-5); },
        {random_tensor({4, 6}, rng), random_tensor({6}, rng, 0.5, 1.5), random_tensor({6}, rng)});
    EXPECT_LT(r.max_relative_error, kGradTolerance);
}

TEST(Backward, SumGivesOnes) {
    Tensor x = Tensor::full({2, 3, 4}, 0.5f, true);
    Tape<float> tape;
    {
        TapeScope<float> scope(tape);
        tape.backward(ops::sum(x));
    }
    for (float g : x.grad()) {
        EXPECT_EQ(g, 1.0f);
    }
    EXPECT_TRUE(tape.empty());
}

TEST(Backward, SquareGivesTwiceInput) {
    Tensor x({2}, {1, 2}, true);
    Tape<float> tape;
    TapeScope<float> scope(tape);
    tape.backward(ops::sum(x * x));
    EXPECT_FLOAT_EQ(x.grad()[0], 2.0f);
    EXPECT_FLOAT_EQ(x.grad()[1], 4.0f);
}

TEST(Backward, GeluOfLinearMatchesFiniteDifferences) {
    Rng rng(21);
    auto r = check_gradients(
        [](const Inputs& in) { return ops::gelu(ops::add(ops::matmul(in[0], in[1]), in[2])); },
        {random_tensor({4, 5}, rng), random_tensor({5, 3}, rng), random_tensor({3}, rng)});
    EXPECT_LT(r.max_relative_error, kGradTolerance);
}

TEST(Backward, NonScalarLossIsRejected) {
    Tensor x = Tensor::ones({3}, true);
    Tape<float> tape;
    TapeScope<float> scope(tape);
    Tensor y = ops::scale(x, 2.0f);
    EXPECT_THROW(tape.backward(y), ShapeError);
}

TEST(Backward, EmptyTapeIsRejected) {
    Tape<float> tape;
    EXPECT_THROW(tape.backward(Tensor::scalar(1.0f, true)), Error);
}

TEST(Backward, VisitsNodesInReverseRecordingOrder) {
    Tape<double> tape;
    std::vector<int> visits;
    auto leaf = std::make_shared<detail::TensorNode<double>>();
    leaf->shape = {};
    leaf->data = {1.0};
    leaf->requires_grad = true;
    detail::NodePtr<double> prev = leaf;
    for (int i = 0; i < 4; ++i) {
        auto out = std::make_shared<detail::TensorNode<double>>();
        out->shape = {};
        out->data = {1.0};
        out->requires_grad = true;
        tape.record({"probe", {prev}, out, [&visits, i, prev](const detail::TensorNode<double>& o) {
                         visits.push_back(i);
                         detail::grad_buffer(*prev)[0] += o.grad[0];
                     }});
        prev = out;
    }
    tape.backward(Tensor64::from_node(prev));
    EXPECT_EQ(visits, (std::vector<int>{3, 2, 1, 0}));
    EXPECT_DOUBLE_EQ(leaf->grad[0], 1.0);
}

TEST(Backward, FrozenTensorsNeverAccumulate) {
    Tensor w = Tensor::ones({2, 2});
    Tensor x = Tensor::ones({2, 2}, true);
    Tape<float> tape;
    TapeScope<float> scope(tape);
    tape.backward(ops::sum(ops::matmul(x, w)));
    EXPECT_FALSE(w.has_grad());
    EXPECT_TRUE(x.has_grad());
}

TEST(Backward, NothingIsRecordedWithoutATape) {
    Tensor x = Tensor::ones({2, 2}, true);
    Tensor y = ops::sum(ops::mul(x, x));
    EXPECT_FALSE(y.requires_grad());
}

TEST(ConvTransposed, OutputSizeFollowsFormula) {
    Rng rng(8);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t h = 1 + rng.uniform_index(6);
        const std::size_t k = 1 + rng.uniform_index(5);
        const std::size_t stride = 1 + rng.uniform_index(3);
        const std::size_t pad = rng.uniform_index(k);
        if ((h - 1) * stride + k <= 2 * pad) {
            continue;
        }
        Tensor x = Tensor::ones({1, 2, h, h});
        Tensor w = Tensor::ones({2, 3, k, k});
        Tensor y = ops::conv2d_transposed(x, w, Tensor{}, {stride, pad});
        const std::size_t expected = (h - 1) * stride - 2 * pad + k;
        EXPECT_EQ(y.dim(2), expected);
        EXPECT_EQ(y.dim(3), expected);
    }
}

TEST(Conv2d, MatchesDirectLoopOracle) {
    Rng rng(17);
    Tensor64 x = random_tensor({2, 3, 5, 6}, rng, -1, 1, false);
    Tensor64 w = random_tensor({4, 3, 3, 3}, rng, -1, 1, false);
    Tensor64 b = random_tensor({4}, rng, -1, 1, false);
    const std::size_t stride = 2;
    const std::size_t pad = 1;
    Tensor64 y = ops::conv2d(x, w, b, {stride, pad});
    ASSERT_EQ(y.shape(), (Shape{2, 4, 3, 3}));
    for (std::size_t n = 0; n < 2; ++n) {
        for (std::size_t co = 0; co < 4; ++co) {
            for (std::size_t oy = 0; oy < 3; ++oy) {
                for (std::size_t ox = 0; ox < 3; ++ox) {
                    double acc = b[co];
                    for (std::size_t ci = 0; ci < 3; ++ci) {
                        for (std::size_t ky = 0; ky < 3; ++ky) {
                            for (std::size_t kx = 0; kx < 3; ++kx) {
                                const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                                const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= 5 || ix >= 6) {
                                    continue;
                                }
                                acc += x[((n * 3 + ci) * 5 + iy) * 6 + ix] * w[((co * 3 + ci) * 3 + ky) * 3 + kx];
                            }
                        }
                    }
                    EXPECT_NEAR(y[((n * 4 + co) * 3 + oy) * 3 + ox], acc, 1e-12);
                }
            }
        }
    }
}

TEST(ConvTransposed, MatchesScatterOracle) {
    Rng rng(19);
    Tensor64 x = random_tensor({1, 2, 3, 3}, rng, -1, 1, false);
    Tensor64 w = random_tensor({2, 3, 4, 4}, rng, -1, 1, false);
    const std::size_t stride = 2;
    const std::size_t pad = 1;
    Tensor64 y = ops::conv2d_transposed(x, w, Tensor64{}, {stride, pad});
    ASSERT_EQ(y.shape(), (Shape{1, 3, 6, 6}));
    std::vector<double> expected(3 * 6 * 6, 0.0);
    for (std::size_t ci = 0; ci < 2; ++ci) {
        for (std::size_t iy = 0; iy < 3; ++iy) {
            for (std::size_t ix = 0; ix < 3; ++ix) {
                for (std::size_t co = 0; co < 3; ++co) {
                    for (std::size_t ky = 0; ky < 4; ++ky) {
                        for (std::size_t kx = 0; kx < 4; ++kx) {
                            const long oy = static_cast<long>(iy * stride + ky) - static_cast<long>(pad);
                            const long ox = static_cast<long>(ix * stride + kx) - static_cast<long>(pad);
                            if (oy < 0 || ox < 0 || oy >= 6 || ox >= 6) {
                                continue;
                            }
                            expected[(co * 6 + oy) * 6 + ox] +=
                                x[(ci * 3 + iy) * 3 + ix] * w[((ci * 3 + co) * 4 + ky) * 4 + kx];
                        }
                    }
                }
            }
        }
    }
    for (std::size_t i = 0; i < expected.size(); ++i) {
        EXPECT_NEAR(y[i], expected[i], 1e-12);
    }
}

TEST(ShapeOps, ReshapeAndTransposeRoundTripsAreBitIdentical) {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t r = 1 + rng.uniform_index(7);
        const std::size_t c = 1 + rng.uniform_index(7);
        std::vector<float> data(r * c);
        for (auto& v : data) {
            v = static_cast<float>(rng.normal());
        }
        Tensor x({r, c}, data);
        Tensor back = ops::reshape(ops::reshape(x, {r * c}), {r, c});
        Tensor twice = ops::transpose(ops::transpose(x));
        EXPECT_EQ(std::memcmp(back.data().data(), data.data(), data.size() * sizeof(float)), 0);
        EXPECT_EQ(std::memcmp(twice.data().data(), data.data(), data.size() * sizeof(float)), 0);
        EXPECT_EQ(twice.shape(), x.shape());
    }
}

TEST(ShapeOps, BroadcastAddsBiasAcrossRows) {
    Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b({3}, {10, 20, 30});
    Tensor y = x + b;
    EXPECT_EQ(std::vector<float>(y.data().begin(), y.data().end()), (std::vector<float>{11, 22, 33, 14, 25, 36}));
    EXPECT_THROW(x + Tensor::ones({2}), ShapeError);
}

TEST(Dropout, EvalModeIsIdentity) {
    Rng rng(1);
    Tensor x({4}, {1, -2, 3, -4});
    Tensor y = ops::dropout(x, 0.5, false, rng);
    EXPECT_EQ(y.node(), x.node());
    EXPECT_THROW(ops::dropout(x, 1.0, true, rng), ConfigError);
}

TEST(Dropout, TrainModeZeroesAndRescales) {
    Rng rng(1);
    Tensor x = Tensor::ones({10000});
    Tensor y = ops::dropout(x, 0.1, true, rng);
    std::size_t zeros = 0;
    for (float v : y.data()) {
        if (v == 0.0f) {
            ++zeros;
        } else {
            EXPECT_FLOAT_EQ(v, 1.0f / 0.9f);
        }
    }
    EXPECT_NEAR(static_cast<double>(zeros) / 10000.0, 0.1, 0.02);
}

TEST(BatchNorm, EvalWithUnitStatsIsIdentity) {
    Rng rng(4);
    Tensor x({2, 3, 2, 2}, std::vector<float>(24, 0.0f));
    for (auto& v : x.mutable_data()) {
        v = static_cast<float>(rng.normal());
    }
    Tensor rm = Tensor::zeros({3});
    Tensor rv = Tensor::ones({3});
    Tensor y = ops::batch_norm(x, Tensor::ones({3}), Tensor::zeros({3}), rm, rv, {false, 0.1, 1e-12});
    for (std::size_t i = 0; i < x.numel(); ++i) {
        EXPECT_NEAR(y[i], x[i], 1e-6);
    }
}

TEST(BatchNorm, TrainModeUpdatesRunningStatistics) {
    Tensor x({4, 1}, {1, 2, 3, 4});
    Tensor rm = Tensor::zeros({1});
    Tensor rv = Tensor::ones({1});
    ops::batch_norm(x, Tensor::ones({1}), Tensor::zeros({1}), rm, rv, {true, 0.5, 1e-5});
    EXPECT_FLOAT_EQ(rm[0], 0.5f * 2.5f);
    // unbiased variance of 1..4 is 5/3
    EXPECT_FLOAT_EQ(rv[0], 0.5f + 0.5f * (5.0f / 3.0f));
}

TEST(CrossEntropy, MatchesLogSumExp) {
    Tensor64 logits({1, 3}, {1.0, 2.0, 3.0});
    const double expected = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0)) - 2.0;
    EXPECT_NEAR(ops::cross_entropy(logits, {1}).item(), expected, 1e-12);
    EXPECT_THROW(ops::cross_entropy(logits, {3}), ShapeError);
}

class OpGradientSweep : public ::testing::TestWithParam<std::size_t> {};

TEST_P(OpGradientSweep, MatchesFiniteDifferencesOnThreeShapes) {
    const auto cases = op_cases();
    const auto& c = cases[GetParam()];
    Rng rng(1000 + GetParam());
    for (std::size_t variant = 0; variant < 3; ++variant) {
        auto r = check_gradients(c.fn, c.make_inputs(rng, variant));
        EXPECT_LT(r.max_relative_error, kGradTolerance)
            << c.name << " variant " << variant << " input " << r.worst_input << " element " << r.worst_element;
    }
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradientSweep, ::testing::Range<std::size_t>(0, op_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                             return op_cases()[info.param].name;
                         });

class BlockGradientSweep : public ::testing::TestWithParam<std::size_t> {};

TEST_P(BlockGradientSweep, MatchesFiniteDifferencesOnThreeShapes) {
    const auto cases = testing::block_cases();
    const auto& c = cases[GetParam()];
    Rng rng(2000 + GetParam());
    for (std::size_t variant = 0; variant < 3; ++variant) {
        auto r = c.run(rng, variant);
        EXPECT_LT(r.max_relative_error, kGradTolerance)
            << c.name << " variant " << variant << " input " << r.worst_input << " element " << r.worst_element;
    }
}

INSTANTIATE_TEST_SUITE_P(AllBlocks, BlockGradientSweep,
                         ::testing::Range<std::size_t>(0, testing::block_cases().size()),
                         [](const ::testing::TestParamInfo<std::size_t>& info) {
                             return testing::block_cases()[info.param].name;
                         });

}  // namespace
}  // namespace gsvit
