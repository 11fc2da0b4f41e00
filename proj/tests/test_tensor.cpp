#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fudfend/tensor.hpp"

using namespace fudfend;

namespace {

using T = Tensor<double>;

T rand_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = true) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return T::from_data(std::move(shape), std::move(v), requires_grad);
}

bool all_finite(const T& t) {
    for (double v : t.data())
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace

TEST_CASE("matmul forward") {
    Tape<double> tape;
    auto eye = T::from_data({2, 2}, {1, 0, 0, 1});
    auto m = T::from_data({2, 2}, {1, 2, 3, 4});
    auto out = matmul(tape, eye, m);
    CHECK(out.data() == std::vector<double>{1, 2, 3, 4});

    auto a = T::from_data({1, 2}, {1, 2});
    auto b = T::from_data({2, 1}, {3, 4});
    auto c = matmul(tape, a, b);
    CHECK(c.shape() == Shape{1, 1});
    CHECK(c.data()[0] == 11.0);

    // matrix-vector form
    auto v = T::from_data({2}, {3, 4});
    auto mv = matmul(tape, m, v);
    CHECK(mv.shape() == Shape{2});
    CHECK(mv.data() == std::vector<double>{11, 25});
}

TEST_CASE("matmul rejects inner-dimension mismatch naming both shapes") {
    Tape<double> tape;
    auto a = T::zeros({4, 3});
    auto b = T::zeros({2, 5});
    CHECK_THROWS_MATCHES(matmul(tape, a, b), ShapeError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("{4,3}") &&
                             Catch::Matchers::ContainsSubstring("{2,5}")));
}

TEST_CASE("matmul gradients match finite differences") {
    std::mt19937_64 rng(7);
    auto a = rand_tensor({4, 3}, rng);
    auto b = rand_tensor({3, 2}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, matmul(t, a, b)); }, {a, b}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("elementwise activations at fixed points") {
    Tape<double> tape;
    auto z = T::scalar(0.0);
    CHECK(sigmoid(tape, z).item() == 0.5);
    CHECK(tanh(tape, z).item() == 0.0);
    auto neg = T::scalar(-3.0);
    CHECK(relu(tape, neg).item() == 0.0);
}

TEST_CASE("sigmoid gradients at -2,-1,1,2 match finite differences") {
    for (double v : {-2.0, -1.0, 1.0, 2.0}) {
        auto x = T::scalar(v, true);
        double err = finite_diff_check(
            [&](Tape<double>& t) { return sum(t, sigmoid(t, x)); }, {x}, 1e-5);
        CHECK(err < 1e-6);
    }
}

TEST_CASE("binary ops: exact shape or scalar broadcast only") {
    Tape<double> tape;
    auto a = T::from_data({2}, {1, 2});
    auto s = T::scalar(10.0);
    CHECK(add(tape, a, s).data() == std::vector<double>{11, 12});
    CHECK(mul(tape, s, a).data() == std::vector<double>{10, 20});

    auto bad = T::zeros({3});
    CHECK_THROWS_AS(add(tape, a, bad), ShapeError);
    CHECK_THROWS_AS(mul(tape, a, T::zeros({2, 1})), ShapeError);
}

TEST_CASE("binary op gradients incl. scalar broadcast") {
    std::mt19937_64 rng(11);
    auto a = rand_tensor({3, 2}, rng);
    auto b = rand_tensor({3, 2}, rng);
    auto s = rand_tensor({1}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) {
            return sum(t, mul(t, add(t, a, b), add(t, mul(t, a, s), b)));
        },
        {a, b, s}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("softmax of zeros is uniform") {
    Tape<double> tape;
    auto g = softmax(tape, T::zeros({3}));
    for (double v : g.data()) CHECK(v == Catch::Approx(1.0 / 3).margin(1e-12));
}

TEST_CASE("softmax shift invariance") {
    std::mt19937_64 rng(3);
    auto x = rand_tensor({5}, rng, false);
    Tape<double> tape;
    auto base = softmax(tape, x);
    auto shifted_in = T::zeros({5});
    for (std::size_t i = 0; i < 5; ++i) shifted_in.data()[i] = x.data()[i] + 17.25;
    auto shifted = softmax(tape, shifted_in);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(shifted.data()[i] == Catch::Approx(base.data()[i]).margin(1e-9));
}

TEST_CASE("softmax [1,2,3] matches direct high-precision evaluation") {
    Tape<double> tape;
    auto y = softmax(tape, T::from_data({3}, {1, 2, 3}));
    long double e1 = std::exp(-2.0L), e2 = std::exp(-1.0L), e3 = 1.0L;
    long double z = e1 + e2 + e3;
    CHECK(y.data()[0] == Catch::Approx((double)(e1 / z)).margin(1e-9));
    CHECK(y.data()[1] == Catch::Approx((double)(e2 / z)).margin(1e-9));
    CHECK(y.data()[2] == Catch::Approx((double)(e3 / z)).margin(1e-9));
}

TEST_CASE("softmax slices: nonnegative, sum to one, on random 2-D inputs") {
    std::mt19937_64 rng(19);
    for (int it = 0; it < 50; ++it) {
        auto x = rand_tensor({4, 6}, rng, false);
        for (auto& v : x.data()) v *= 30.0;  // spread logits
        Tape<double> tape;
        auto y = softmax(tape, x);
        REQUIRE(all_finite(y));
        for (std::size_t r = 0; r < 4; ++r) {
            double s = 0;
            for (std::size_t j = 0; j < 6; ++j) {
                double v = y.data()[r * 6 + j];
                CHECK(v >= 0.0);
                s += v;
            }
            CHECK(s == Catch::Approx(1.0).margin(1e-6));
        }
    }
}

TEST_CASE("softmax gradients match finite differences") {
    std::mt19937_64 rng(23);
    auto x = rand_tensor({2, 4}, rng);
    auto w = rand_tensor({2, 4}, rng, false);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, mul(t, softmax(t, x), w)); }, {x}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("max_over_time basics") {
    Tape<double> tape;
    auto single = T::from_data({1, 3}, {4, -1, 2});
    CHECK(max_over_time(tape, single, 1).data() == std::vector<double>{4, -1, 2});

    auto m = T::from_data({2, 2}, {1, 5, 3, 2});
    CHECK(max_over_time(tape, m, 2).data() == std::vector<double>{3, 5});

    // rows beyond valid_len are ignored bitwise
    auto padded = T::from_data({4, 2}, {1, 5, 3, 2, 99, 99, -7, 42});
    auto a = max_over_time(tape, m, 2);
    auto b = max_over_time(tape, padded, 2);
    CHECK(a.data() == b.data());

    CHECK_THROWS_AS(max_over_time(tape, m, 0), ShapeError);
    CHECK_THROWS_AS(max_over_time(tape, m, 3), ShapeError);
}

TEST_CASE("max_over_time tie routes gradient to lowest index") {
    Tape<double> tape;
    auto m = T::from_data({2, 1}, {7, 7}, true);
    auto out = max_over_time(tape, m, 2);
    auto loss = sum(tape, out);
    backward(tape, loss);
    CHECK(m.grad() == std::vector<double>{1, 0});
}

TEST_CASE("max_over_time gradients match finite differences") {
    std::mt19937_64 rng(29);
    auto m = rand_tensor({6, 4}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, max_over_time(t, m, 5)); }, {m}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("conv1d degenerate and hand cases") {
    Tape<double> tape;
    // width-1 all-ones filter sums the embedding coordinates per position
    auto seq = T::from_data({3, 2}, {1, 2, 3, 4, 5, 6});
    auto ones = T::from_data({1, 2, 1}, {1, 1});
    auto out = conv1d(tape, seq, ones, 3);
    CHECK(out.data() == std::vector<double>{3, 7, 11});

    // window dot products: [5,3,9] with filter [1,-1] -> [5-3, 3-9]
    auto s = T::from_data({3, 1}, {5, 3, 9});
    auto f = T::from_data({2, 1, 1}, {1, -1});
    auto o = conv1d(tape, s, f, 3);
    CHECK(o.data() == std::vector<double>{2, -6});

    CHECK_THROWS_AS(conv1d(tape, s, f, 1), SequenceTooShort);
}

TEST_CASE("conv1d gradients for inputs and filters match finite differences") {
    std::mt19937_64 rng(31);
    auto seq = rand_tensor({7, 3}, rng);
    auto filt = rand_tensor({2, 3, 4}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, relu(t, conv1d(t, seq, filt, 6))); },
        {seq, filt}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("concat, take_row, take gradients") {
    std::mt19937_64 rng(37);
    auto a = rand_tensor({3}, rng);
    auto b = rand_tensor({2}, rng);
    auto m = rand_tensor({3, 2}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) {
            auto cat = concat(t, {a, take_row(t, m, 1), b});
            return mul(t, sum(t, cat), take(t, m, 4));
        },
        {a, b, m}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("backward: sum gives all-ones, sum of squares gives 2x") {
    {
        Tape<double> tape;
        auto x = T::from_data({3}, {5, -2, 0.5}, true);
        backward(tape, sum(tape, x));
        CHECK(x.grad() == std::vector<double>{1, 1, 1});
    }
    {
        Tape<double> tape;
        auto x = T::from_data({2}, {1, 2}, true);
        backward(tape, sum(tape, mul(tape, x, x)));
        CHECK(x.grad() == std::vector<double>{2, 4});
    }
}

TEST_CASE("backward rejects non-scalar loss") {
    Tape<double> tape;
    auto x = T::from_data({2}, {1, 2}, true);
    auto y = mul(tape, x, x);
    CHECK_THROWS_AS(backward(tape, y), UsageError);
}

TEST_CASE("backward clears the tape; retained tape doubles gradients exactly") {
    Tape<double> tape;
    auto x = T::from_data({2}, {3, -1}, true);
    auto loss = sum(tape, mul(tape, x, x));
    backward(tape, loss, /*retain_tape=*/true);
    auto once = x.grad();
    backward(tape, loss);
    CHECK(tape.size() == 0);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(x.grad()[i] == 2.0 * once[i]);
}

TEST_CASE("NoGradGuard suppresses recording") {
    Tape<double> tape;
    auto x = T::from_data({2}, {1, 2}, true);
    {
        NoGradGuard guard;
        auto y = mul(tape, x, x);
        CHECK_FALSE(y.requires_grad());
    }
    CHECK(tape.size() == 0);
}

TEST_CASE("finite_diff_check: quadratic is exact up to rounding") {
    auto x = T::from_data({3}, {1, -2, 0.5}, true);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, mul(t, x, x)); }, {x}, 1e-5);
    CHECK(err < 1e-9);
}

TEST_CASE("finite_diff_check: sigmoid chain under 1e-6 at h=1e-5") {
    std::mt19937_64 rng(41);
    auto x = rand_tensor({4}, rng);
    auto w = rand_tensor({4}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, sigmoid(t, mul(t, x, w))); }, {x, w}, 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("finite_diff_check flags a corrupted backward rule") {
    auto x = T::from_data({2}, {0.7, -0.3}, true);
    // y = x^2 recorded with a deliberately wrong rule (3x instead of 2x)
    auto corrupted_square = [&](Tape<double>& t) {
        auto y = T::zeros(x.shape());
        for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = x.data()[i] * x.data()[i];
        y.set_requires_grad(true);
        y.grad();
        t.record([x = x, y]() {
            for (std::size_t i = 0; i < x.size(); ++i)
                x.grad()[i] += 3.0 * x.data()[i] * y.grad()[i];
        });
        return sum(t, y);
    };
    double err = finite_diff_check(corrupted_square, {x}, 1e-5);
    CHECK(err > 1e-2);
}

TEST_CASE("gradient accumulation is additive across separate passes") {
    auto x = T::from_data({2}, {1.5, -2.5}, true);
    std::vector<double> first;
    for (int pass = 0; pass < 2; ++pass) {
        Tape<double> tape;
        auto loss = sum(tape, mul(tape, x, x));
        backward(tape, loss);
        if (pass == 0) first = x.grad();
    }
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(x.grad()[i] == 2.0 * first[i]);
}

TEST_CASE("ops stay finite on random finite inputs") {
    std::mt19937_64 rng(43);
    for (int it = 0; it < 25; ++it) {
        Tape<double> tape;
        auto a = rand_tensor({5, 3}, rng, false);
        auto b = rand_tensor({3, 4}, rng, false);
        for (auto& v : a.data()) v *= 50.0;
        for (auto& v : b.data()) v *= 50.0;
        auto m = matmul(tape, a, b);
        CHECK(all_finite(m));
        CHECK(all_finite(sigmoid(tape, m)));
        CHECK(all_finite(tanh(tape, m)));
        CHECK(all_finite(softmax(tape, m)));
        CHECK(all_finite(max_over_time(tape, relu(tape, m), 5)));
    }
}

TEST_CASE("randomized finite-difference sweep over every differentiable op") {
    std::mt19937_64 rng(47);
    for (int it = 0; it < 10; ++it) {
        std::uniform_int_distribution<std::size_t> dims(2, 5);
        const std::size_t L = dims(rng) + 2, d = dims(rng), c = dims(rng), w = 2;
        auto seq = rand_tensor({L, d}, rng);
        auto filt = rand_tensor({w, d, c}, rng);
        auto gate = rand_tensor({c}, rng);
        double err = finite_diff_check(
            [&](Tape<double>& t) {
                auto conv = conv1d(t, seq, filt, L - 1);
                auto pooled = max_over_time(t, relu(t, conv), L - w);
                auto gmix = mul(t, softmax(t, pooled), tanh(t, gate));
                return sum(t, sigmoid(t, gmix));
            },
            {seq, filt, gate}, 1e-5);
        CHECK(err < 1e-6);
    }
}
