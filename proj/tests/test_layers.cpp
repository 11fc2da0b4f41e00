#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "fudfend/layers.hpp"

using namespace fudfend;

namespace {

using T = Tensor<double>;

T rand_tensor(Shape shape, std::mt19937_64& rng, bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = dist(rng);
    return T::from_data(std::move(shape), std::move(v), requires_grad);
}

GruParams<double> zero_gru(std::size_t d, std::size_t H) {
    GruParams<double> p;
    p.input_dim = d;
    p.hidden_dim = H;
    p.w_update = T::zeros({H, d + H}, true);
    p.b_update = T::zeros({H}, true);
    p.w_reset = T::zeros({H, d + H}, true);
    p.b_reset = T::zeros({H}, true);
    p.w_cand = T::zeros({H, d + H}, true);
    p.b_cand = T::zeros({H}, true);
    return p;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("gru: zero parameters give a zero hidden state") {
    std::mt19937_64 rng(1);
    auto p = zero_gru(3, 4);
    auto seq = rand_tensor({5, 3}, rng);
    Tape<double> tape;
    auto h = gru_forward(tape, seq, 5, p);
    for (double v : h.data()) CHECK(v == 0.0);
}

TEST_CASE("gru: single-token 1-dim step matches the hand recurrence") {
    auto p = zero_gru(1, 1);
    // w rows act on [x, h_prev]
    p.w_update.data() = {0.3, 0.0};
    p.b_update.data() = {-0.2};
    p.w_reset.data() = {0.9, 0.0};
    p.b_reset.data() = {0.1};
    p.w_cand.data() = {-0.7, 0.4};
    p.b_cand.data() = {0.25};
    const double x = 0.8;
    auto seq = T::from_data({1, 1}, {x});
    Tape<double> tape;
    auto h = gru_forward(tape, seq, 1, p);

    const double z = sig(0.3 * x - 0.2);
    const double n = std::tanh(-0.7 * x + 0.25);  // h0 = 0, so the reset path vanishes
    const double expected = (1.0 - z) * n;
    CHECK(h.item() == Catch::Approx(expected).margin(1e-9));
}

TEST_CASE("gru: trailing padding rows leave the state bitwise unchanged") {
    std::mt19937_64 rng(5);
    auto p = make_gru<double>(3, 4, rng);
    auto seq = rand_tensor({4, 3}, rng);
    auto padded = T::zeros({7, 3});
    std::copy(seq.data().begin(), seq.data().end(), padded.data().begin());
    padded.data()[4 * 3 + 1] = 123.0;  // junk beyond valid_len must never be read

    Tape<double> tape;
    auto a = gru_forward(tape, seq, 4, p);
    auto b = gru_forward(tape, padded, 4, p);
    CHECK(a.data() == b.data());
}

TEST_CASE("gru: rejects empty sequences") {
    std::mt19937_64 rng(6);
    auto p = make_gru<double>(2, 3, rng);
    Tape<double> tape;
    CHECK_THROWS_AS(gru_forward(tape, T::zeros({4, 2}), 0, p), InputError);
}

TEST_CASE("gru: parameter gradients match finite differences") {
    std::mt19937_64 rng(9);
    auto p = make_gru<double>(3, 2, rng);
    auto seq = rand_tensor({4, 3}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, gru_forward(t, seq, 4, p)); },
        p.parameters(), 1e-5);
    CHECK(err < 1e-4);
}

TEST_CASE("mlp: identity layer passes input through; zero weights give the bias") {
    MlpParams<double> ident;
    ident.weights.push_back(T::from_data({2, 2}, {1, 0, 0, 1}, true));
    ident.biases.push_back(T::zeros({2}, true));
    auto x = T::from_data({2}, {3.5, -1.25});
    Tape<double> tape;
    CHECK(mlp_forward(tape, x, ident).data() == x.data());

    MlpParams<double> zero;
    zero.weights.push_back(T::zeros({2, 2}, true));
    zero.biases.push_back(T::from_data({2}, {0.5, -2.0}, true));
    CHECK(mlp_forward(tape, x, zero).data() == std::vector<double>{0.5, -2.0});
}

TEST_CASE("mlp: two-layer relu network matches hand computation") {
    MlpParams<double> p;
    p.weights.push_back(T::from_data({2, 2}, {1, -1, 2, 0.5}, true));
    p.biases.push_back(T::from_data({2}, {0.1, -0.6}, true));
    p.weights.push_back(T::from_data({1, 2}, {0.3, -0.8}, true));
    p.biases.push_back(T::from_data({1}, {0.05}, true));
    auto x = T::from_data({2}, {0.4, 0.9});
    Tape<double> tape;
    auto y = mlp_forward(tape, x, p);

    const double h0 = std::max(0.0, 1 * 0.4 - 1 * 0.9 + 0.1);
    const double h1 = std::max(0.0, 2 * 0.4 + 0.5 * 0.9 - 0.6);
    const double expected = 0.3 * h0 - 0.8 * h1 + 0.05;
    CHECK(y.item() == Catch::Approx(expected).margin(1e-9));
}

TEST_CASE("mlp: dimension mismatch is rejected") {
    std::mt19937_64 rng(10);
    auto p = make_mlp<double>({3, 4, 2}, rng);
    Tape<double> tape;
    CHECK_THROWS_AS(mlp_forward(tape, T::zeros({5}), p), ShapeError);
}

TEST_CASE("textcnn: constant sequence with width-1 filters collapses pooling") {
    std::mt19937_64 rng(13);
    auto p = make_textcnn<double>(3, {1}, 2, 4, rng);
    auto seq = T::zeros({5, 3});
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t j = 0; j < 3; ++j) seq.data()[r * 3 + j] = double(j) * 0.4 - 0.3;

    Tape<double> tape;
    auto out = textcnn_forward(tape, seq, 5, p);
    REQUIRE(out.shape() == Shape{4});

    // every window sees the same token, so pooling returns the single response
    std::vector<double> resp(2, 0.0);
    for (std::size_t ch = 0; ch < 2; ++ch) {
        double s = 0;
        for (std::size_t j = 0; j < 3; ++j) s += seq.data()[j] * p.filters[0].data()[j * 2 + ch];
        resp[ch] = std::max(0.0, s);
    }
    for (std::size_t o = 0; o < 4; ++o) {
        double expected = p.proj_b.data()[o];
        for (std::size_t ch = 0; ch < 2; ++ch)
            expected += p.proj_w.data()[o * 2 + ch] * resp[ch];
        CHECK(out.data()[o] == Catch::Approx(expected).margin(1e-9));
    }
}

TEST_CASE("textcnn: width-1 pooled output is invariant to token permutation") {
    std::mt19937_64 rng(17);
    auto p = make_textcnn<double>(3, {1}, 4, 5, rng);
    auto seq = rand_tensor({6, 3}, rng);
    auto perm = T::zeros({6, 3});
    const std::size_t order[6] = {4, 2, 0, 5, 1, 3};
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t j = 0; j < 3; ++j)
            perm.data()[r * 3 + j] = seq.data()[order[r] * 3 + j];

    Tape<double> tape;
    auto a = textcnn_forward(tape, seq, 6, p);
    auto b = textcnn_forward(tape, perm, 6, p);
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a.data()[i] == Catch::Approx(b.data()[i]).margin(1e-12));
}

TEST_CASE("textcnn: output dim equals expert_dim for any width bank") {
    std::mt19937_64 rng(19);
    auto seq = rand_tensor({8, 4}, rng);
    Tape<double> tape;
    for (auto widths : {std::vector<std::size_t>{1}, {1, 2}, {2, 3, 5}}) {
        auto p = make_textcnn<double>(4, widths, 3, 6, rng);
        CHECK(textcnn_forward(tape, seq, 8, p).shape() == Shape{6});
    }
}

TEST_CASE("textcnn: sequences shorter than a width propagate sequence-too-short") {
    std::mt19937_64 rng(23);
    auto p = make_textcnn<double>(3, {1, 4}, 2, 4, rng);
    auto seq = rand_tensor({8, 3}, rng);
    Tape<double> tape;
    CHECK_THROWS_AS(textcnn_forward(tape, seq, 2, p), SequenceTooShort);
}

TEST_CASE("textcnn: trailing padding rows leave the output bitwise unchanged") {
    std::mt19937_64 rng(27);
    auto p = make_textcnn<double>(3, {1, 2}, 3, 5, rng);
    auto seq = rand_tensor({5, 3}, rng);
    auto padded = T::zeros({9, 3});
    std::copy(seq.data().begin(), seq.data().end(), padded.data().begin());
    padded.data()[6 * 3] = -55.0;

    Tape<double> tape;
    auto a = textcnn_forward(tape, seq, 5, p);
    auto b = textcnn_forward(tape, padded, 5, p);
    CHECK(a.data() == b.data());
}

TEST_CASE("textcnn: all parameter gradients match finite differences") {
    std::mt19937_64 rng(29);
    auto p = make_textcnn<double>(3, {1, 2}, 2, 4, rng);
    auto seq = rand_tensor({6, 3}, rng);
    double err = finite_diff_check(
        [&](Tape<double>& t) { return sum(t, textcnn_forward(t, seq, 6, p)); },
        p.parameters(), 1e-5);
    CHECK(err < 1e-6);
}

TEST_CASE("all three layers pass an end-to-end gradient check") {
    std::mt19937_64 rng(31);
    auto gru = make_gru<double>(3, 4, rng);
    auto cnn = make_textcnn<double>(3, {1, 2}, 2, 4, rng);
    auto mlp = make_mlp<double>({8, 6, 2}, rng);
    auto seq = rand_tensor({5, 3}, rng);

    std::vector<Tensor<double>> params;
    for (auto& v : gru.parameters()) params.push_back(v);
    for (auto& v : cnn.parameters()) params.push_back(v);
    for (auto& v : mlp.parameters()) params.push_back(v);

    double err = finite_diff_check(
        [&](Tape<double>& t) {
            auto h = gru_forward(t, seq, 5, gru);
            auto r = textcnn_forward(t, seq, 5, cnn);
            auto both = concat(t, {h, r});
            return sum(t, sigmoid(t, mlp_forward(t, both, mlp)));
        },
        params, 1e-5);
    CHECK(err < 1e-4);
}
