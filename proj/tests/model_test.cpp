#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tend/errors.hpp"
#include "tend/model.hpp"
#include "tend/rng.hpp"

#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace tend;
using namespace tend::testutil;

TEST_CASE("architecture arithmetic follows the halving rule") {
    for (const int side : {64, 128, 256}) {
        ArchitectureSpec spec;
        spec.input_side = side;
        spec.channels = 3;
        spec.validate();
        CHECK(spec.latent_side() == side / 32);
        CHECK(spec.head_side() == side / 64);
        CHECK(spec.fc_in() == 512 * (side / 64) * (side / 64));
    }
    ArchitectureSpec s128;
    CHECK(s128.fc_in() == 2048);
    ArchitectureSpec s64;
    s64.input_side = 64;
    CHECK(s64.fc_in() == 512);

    for (const int bad : {32, 96, 100}) {
        ArchitectureSpec spec;
        spec.input_side = bad;
        CHECK_THROWS_AS(spec.validate(), ConfigError);
    }
    ArchitectureSpec bad_ch;
    bad_ch.channels = 2;
    CHECK_THROWS_AS(bad_ch.validate(), ConfigError);
}

TEST_CASE("forward shapes for 64 and 128 pixel inputs") {
    for (const int side : {64, 128}) {
        ArchitectureSpec spec;
        spec.input_side = side;
        spec.channels = side == 64 ? 1 : 3;
        TendModel model(spec, 7);
        model.set_backbone_training(false);
        model.set_head_training(false);

        Rng rng(3);
        const Tensor x = random_tensor(2, spec.channels, side, side, rng, 0.25);
        const Tensor latent = model.encode(x);
        CHECK(latent.n == 2);
        CHECK(latent.c == 256);
        CHECK(latent.h == side / 32);
        CHECK(latent.w == side / 32);

        const Tensor recon = model.decode(latent);
        CHECK(recon.same_shape(x));
        for (const double v : recon.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }

        const Tensor c = model.compress(latent);
        CHECK(c.n == 2);
        CHECK(c.chw() == 512);
        const Tensor logit = model.classify_logit(c);
        CHECK(logit.n == 2);
        CHECK(logit.chw() == 1);
    }
}

TEST_CASE("shape mismatches are rejected") {
    ArchitectureSpec spec;
    spec.input_side = 64;
    spec.channels = 1;
    TendModel model(spec, 1);
    model.set_backbone_training(false);

    CHECK_THROWS_AS(model.encode(Tensor::zeros(1, 1, 32, 32)), ConfigError);
    CHECK_THROWS_AS(model.encode(Tensor::zeros(1, 3, 64, 64)), ConfigError);
    CHECK_THROWS_AS(model.decode(Tensor::zeros(1, 256, 4, 4)), ConfigError);
    CHECK_THROWS_AS(model.compress(Tensor::zeros(1, 128, 2, 2)), ConfigError);
    CHECK_THROWS_AS(model.classify_logit(Tensor::zeros(1, 100, 1, 1)), ConfigError);
}

TEST_CASE("zero weights leave only the normalization bias path") {
    ArchitectureSpec spec;
    spec.input_side = 64;
    spec.channels = 1;
    TendModel model(spec, 5);
    for (const auto& p : model.all_params())
        std::fill(p.value->begin(), p.value->end(), 0.0);
    // Batch-norm scale is a parameter too; zeroing it kills every path, so
    // the latent, compressed feature, and logit must all collapse to zero.
    model.set_backbone_training(false);
    model.set_head_training(false);

    Rng rng(11);
    const Tensor x = random_tensor(2, 1, 64, 64, rng, 0.3);
    const Tensor latent = model.encode(x);
    for (const double v : latent.data) CHECK(v == 0.0);
    const Tensor c = model.compress(latent);
    for (const double v : c.data) CHECK(v == 0.0);
    const Tensor logit = model.classify_logit(c);
    CHECK(logit.data[0] == 0.0);
    CHECK(1.0 / (1.0 + std::exp(-logit.data[0])) == 0.5);
}

TEST_CASE("initialization is seed-deterministic") {
    ArchitectureSpec spec;
    spec.input_side = 64;
    spec.channels = 1;
    TendModel a(spec, 42), b(spec, 42), c(spec, 43);

    const auto pa = a.all_params();
    const auto pb = b.all_params();
    const auto pc = c.all_params();
    REQUIRE(pa.size() == pb.size());
    bool any_diff_seed43 = false;
    for (size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(*pa[i].value == *pb[i].value);
        if (*pa[i].value != *pc[i].value) any_diff_seed43 = true;
    }
    CHECK(any_diff_seed43);
    CHECK(a.backbone_hash() == b.backbone_hash());
    CHECK(a.backbone_hash() != c.backbone_hash());
}

TEST_CASE("inference passes are reproducible and batch-split invariant") {
    ArchitectureSpec spec;
    spec.input_side = 64;
    spec.channels = 1;
    TendModel model(spec, 9);
    model.set_backbone_training(false);
    model.set_head_training(false);

    Rng rng(21);
    const Tensor x = random_tensor(3, 1, 64, 64, rng, 0.25);
    const Tensor c1 = model.compress(model.encode(x));
    const Tensor c2 = model.compress(model.encode(x));
    CHECK(c1.data == c2.data);

    // Per-sample convolution makes batched and one-at-a-time from identical.
    for (int i = 0; i < 3; ++i) {
        Tensor xi = Tensor::zeros(1, 1, 64, 64);
        std::copy(x.sample(i), x.sample(i) + x.chw(), xi.data.begin());
        const Tensor ci = model.compress(model.encode(xi));
        for (int j = 0; j < 512; ++j) CHECK(ci.data[j] == c1.sample(i)[j]);
    }
}

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(101);
    Conv2d conv(2, 3, 4, 2, 1);
    conv.init_params(rng);
    check_layer_gradients(conv, random_tensor(2, 2, 6, 6, rng), 1001);
}

TEST_CASE("transposed conv gradients match finite differences") {
    Rng rng(102);
    ConvTranspose2d tconv(3, 2, 4, 2, 1);
    tconv.init_params(rng);
    check_layer_gradients(tconv, random_tensor(2, 3, 3, 3, rng), 1002);
}

TEST_CASE("transposed conv inverts the conv shape map") {
    Rng rng(103);
    ConvTranspose2d tconv(5, 4, 4, 2, 1);
    tconv.init_params(rng);
    const Tensor out = tconv.forward(random_tensor(1, 5, 8, 8, rng));
    CHECK(out.c == 4);
    CHECK(out.h == 16);
    CHECK(out.w == 16);
}

TEST_CASE("batch-norm training-mode gradients match finite differences") {
    Rng rng(104);
    BatchNorm2d bn(3);
    check_layer_gradients(bn, random_tensor(2, 3, 4, 4, rng, 2.0), 1004);
}

TEST_CASE("batch-norm normalizes batches and then freezes into running stats") {
    Rng rng(105);
    BatchNorm2d bn(2);
    const Tensor x = random_tensor(4, 2, 5, 5, rng, 3.0);

    bn.set_training(true);
    const Tensor y = bn.forward(x);
    for (int c = 0; c < 2; ++c) {
        double mean = 0.0, var = 0.0;
        const int plane = 25;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < plane; ++j) mean += y.sample(i)[c * plane + j];
        mean /= 4.0 * plane;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < plane; ++j) {
                const double d = y.sample(i)[c * plane + j] - mean;
                var += d * d;
            }
        var /= 4.0 * plane;
        CHECK(mean == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps in the denominator
    }

    bn.set_training(false);
    const Tensor e1 = bn.forward(x);
    const Tensor e2 = bn.forward(x);
    CHECK(e1.data == e2.data);  // eval mode never mutates statistics
}

TEST_CASE("linear gradients match finite differences") {
    Rng rng(106);
    Linear lin(7, 5);
    lin.init_params(rng);
    check_layer_gradients(lin, random_tensor(3, 7, 1, 1, rng), 1006, 64);
}

TEST_CASE("sigmoid and relu gradients match finite differences") {
    Rng rng(107);
    Sigmoid sig;
    check_layer_gradients(sig, random_tensor(2, 3, 2, 2, rng), 1007, 64);

    // Keep inputs away from the relu kink so central differences are valid.
    ReLU relu;
    Tensor x = random_tensor(2, 3, 2, 2, rng);
    for (auto& v : x.data)
        if (std::abs(v) < 0.1) v = v < 0 ? v - 0.1 : v + 0.1;
    check_layer_gradients(relu, x, 1008, 64);
}

TEST_CASE("stacked layers backpropagate through the chain") {
    Rng rng(108);
    Sequential seq;
    seq.add<Conv2d>(1, 2, 4, 2, 1);
    seq.add<BatchNorm2d>(2);
    seq.add<Conv2d>(2, 3, 4, 2, 1);
    seq.add<Flatten>();
    seq.add<Linear>(3 * 2 * 2, 4);
    seq.init_params(rng);
    seq.set_training(true);
    check_layer_gradients(seq, random_tensor(2, 1, 8, 8, rng), 1009);
}

TEST_CASE("adam descends a convex quadratic") {
    std::vector<double> value = {5.0, -3.0}, grad = {0.0, 0.0};
    Adam opt({{"q", &value, &grad}}, 0.05);
    for (int i = 0; i < 400; ++i) {
        grad[0] = 2.0 * (value[0] - 1.0);
        grad[1] = 2.0 * (value[1] + 2.0);
        opt.step();
    }
    CHECK(value[0] == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(value[1] == doctest::Approx(-2.0).epsilon(1e-2));
}

TEST_CASE("backbone hash covers parameters and running statistics") {
    ArchitectureSpec spec;
    spec.input_side = 64;
    spec.channels = 1;
    TendModel model(spec, 3);
    const uint64_t h0 = model.backbone_hash();

    // Forward in eval mode: nothing may change.
    model.set_backbone_training(false);
    Rng rng(5);
    model.encode(random_tensor(1, 1, 64, 64, rng, 0.2));
    CHECK(model.backbone_hash() == h0);

    // Forward in training mode updates running stats, and the hash sees it.
    model.set_backbone_training(true);
    model.encode(random_tensor(2, 1, 64, 64, rng, 0.2));
    CHECK(model.backbone_hash() != h0);

    // Head parameters are not part of the backbone hash.
    model.set_backbone_training(false);
    const uint64_t h1 = model.backbone_hash();
    const auto head = model.head_params();
    (*head[0].value)[0] += 1.0;
    CHECK(model.backbone_hash() == h1);
}
