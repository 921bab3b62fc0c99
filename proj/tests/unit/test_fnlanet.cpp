#include "endo/fnlanet/checkpoint.hpp"
#include "endo/fnlanet/gradcheck.hpp"
#include "endo/fnlanet/network.hpp"
#include "endo/fnlanet/train.hpp"
#include "endo/imgcore/error.hpp"
#include "support/gradient_suite.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

using namespace endo::nn;

namespace {

Tensor4 random_tensor(int n, int h, int w, int c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor4 t(n, h, w, c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    for (auto& v : t.data) v = u(rng);
    return t;
}

struct Ctx {
    ParamStore store;
    std::mt19937_64 init{3};
    std::mt19937_64 drop{5};
    LayerContext make(Tape* tape, bool training = false) {
        LayerContext c;
        c.store = &store;
        c.tape = tape;
        c.init_rng = &init;
        c.dropout_rng = &drop;
        c.training = training;
        c.dropout_rate = 0.2;
        return c;
    }
};

double dot(const Tensor4& a, const Tensor4& b) {
    return std::inner_product(a.data.begin(), a.data.end(), b.data.begin(), 0.0);
}

NetConfig toy_config(Attention a = Attention::none) {
    NetConfig c;
    c.resolution_stages = 3;
    c.blocks_per_stage = {2, 3, 4};
    c.growth_rate = 3;
    c.attention = a;
    return c;
}

}  // namespace

TEST_CASE("conv2d matches a nested-loop oracle") {
    ParamStore store;
    const Tensor4 x = random_tensor(1, 5, 6, 4, 1);
    const Tensor4 wt = random_tensor(1, 1, 1, 3 * 3 * 4 * 3, 2);
    const Tensor4 bt = random_tensor(1, 1, 1, 3, 3);
    const int w = store.add("w", {3, 3, 4, 3}, wt.data);
    const int b = store.add("b", {3}, bt.data);
    Tape tape(&store);
    const Tensor4& y = tape.value(tape.conv2d(tape.constant(x), w, b, 3, 1));
    REQUIRE(y.h == 5);
    REQUIRE(y.w == 6);
    REQUIRE(y.c == 3);
    double worst = 0.0;
    for (int oy = 0; oy < 5; ++oy) {
        for (int ox = 0; ox < 6; ++ox) {
            for (int co = 0; co < 3; ++co) {
                double acc = bt.data[co];
                for (int ky = 0; ky < 3; ++ky) {
                    for (int kx = 0; kx < 3; ++kx) {
                        const int iy = oy + ky - 1;
                        const int ix = ox + kx - 1;
                        if (iy < 0 || iy >= 5 || ix < 0 || ix >= 6) continue;
                        for (int ci = 0; ci < 4; ++ci) acc += x(0, iy, ix, ci) * wt.data[((ky * 3 + kx) * 4 + ci) * 3 + co];
                    }
                }
                worst = std::max(worst, std::abs(y(0, oy, ox, co) - acc) / std::max(std::abs(acc), 1e-300));
            }
        }
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("conv2d identity, bias and shape rules") {
    ParamStore store;
    const int one = store.add("one", {1, 1, 1, 1}, {1.0});
    const int zero_b = store.add("zb", {1}, {0.0});
    const int zeros = store.add("zeros", {1, 1, 1, 1}, {0.0});
    const int bias = store.add("bias", {1}, {0.75});
    const Tensor4 x = random_tensor(2, 4, 4, 1, 4);
    Tape tape(&store);
    const Var vx = tape.constant(x);
    CHECK(tape.value(tape.conv2d(vx, one, zero_b, 1, 1)).data == x.data);
    for (double v : tape.value(tape.conv2d(vx, zeros, bias, 1, 1)).data) CHECK(v == 0.75);

    const int w2 = store.add("w2", {2, 2, 1, 3}, std::vector<double>(12, 0.1));
    const int b3 = store.add("b3", {3}, std::vector<double>(3, 0.0));
    const Tensor4& down = tape.value(tape.conv2d(vx, w2, b3, 2, 2));
    CHECK(down.h == 2);
    CHECK(down.w == 2);
    CHECK(down.c == 3);
    CHECK_THROWS_AS(tape.conv2d(tape.constant(random_tensor(1, 4, 4, 2, 5)), one, zero_b, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(tape.conv2d(tape.constant(random_tensor(1, 5, 4, 1, 5)), w2, b3, 2, 2), std::invalid_argument);
}

TEST_CASE("conv_transpose2d impulse, zero input and adjointness") {
    ParamStore store;
    const Tensor4 wt = random_tensor(1, 1, 1, 2 * 2 * 3 * 4, 6);  // rows (ky, kx, cout=3), cols cin=4
    const int w = store.add("w", {2, 2, 3, 4}, wt.data);
    const int b0 = store.add("b0", {3}, std::vector<double>(3, 0.0));
    const int b = store.add("b", {3}, {0.1, 0.2, 0.3});
    Tape tape(&store);

    Tensor4 impulse(1, 3, 3, 4);
    impulse(0, 1, 2, 1) = 1.0;
    const Tensor4& stamp = tape.value(tape.conv_transpose2d(tape.constant(impulse), w, b0));
    REQUIRE(stamp.h == 6);
    REQUIRE(stamp.w == 6);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) {
            for (int c = 0; c < 3; ++c) {
                const bool inside = y / 2 == 1 && x / 2 == 2;
                const double expect = inside ? wt.data[(((y % 2) * 2 + (x % 2)) * 3 + c) * 4 + 1] : 0.0;
                CHECK(stamp(0, y, x, c) == expect);
            }
        }
    }
    const Tensor4& biased = tape.value(tape.conv_transpose2d(tape.constant(Tensor4(1, 2, 2, 4)), w, b));
    for (std::size_t i = 0; i < biased.size(); ++i) CHECK(biased.data[i] == doctest::Approx(0.1 * (1 + i % 3)));

    // The same array read as conv2d(k=2, s=2) weights maps 3 channels to 4.
    const int bz4 = store.add("bz4", {4}, std::vector<double>(4, 0.0));
    const Tensor4 x = random_tensor(2, 6, 8, 3, 7);
    const Tensor4 y = random_tensor(2, 3, 4, 4, 8);
    const double lhs = dot(tape.value(tape.conv2d(tape.constant(x), w, bz4, 2, 2)), y);
    const double rhs = dot(x, tape.value(tape.conv_transpose2d(tape.constant(y), w, b0)));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(std::abs(lhs), 1.0));
    CHECK_THROWS_AS(tape.conv_transpose2d(tape.constant(Tensor4(1, 2, 2, 3)), w, b0), std::invalid_argument);
}

TEST_CASE("dense block channel arithmetic and dropout modes") {
    Ctx c;
    auto count = c.make(nullptr);
    CHECK(dense_block(count, "d", Feat{-1, 10}, 4, 5, true, true).c == 30);

    const Tensor4 x = random_tensor(2, 4, 4, 10, 9);
    Tape tape(&c.store);
    auto infer = c.make(&tape);
    const Var vx = tape.constant(x);
    const Feat a = dense_block(infer, "d", Feat{vx, 10}, 4, 5, true, true);
    const Feat b = dense_block(infer, "d", Feat{vx, 10}, 4, 5, true, true);
    CHECK(tape.value(a.v).c == 30);
    CHECK(tape.value(a.v).data == tape.value(b.v).data);

    auto train_no_rate = c.make(&tape, true);
    train_no_rate.dropout_rate = 0.0;
    auto train_no_drop = c.make(&tape, true);
    const Feat r0 = dense_block(train_no_rate, "d", Feat{vx, 10}, 4, 5, true, true);
    const Feat nd = dense_block(train_no_drop, "d", Feat{vx, 10}, 4, 5, true, false);
    CHECK(tape.value(r0.v).data == tape.value(nd.v).data);
    std::mt19937_64 rng(1);
    CHECK(tape.dropout(vx, 0.0, rng) == vx);
    CHECK_THROWS_AS(dense_block(count, "e", Feat{-1, 4}, 0, 5, true, true), std::invalid_argument);
}

TEST_CASE("fNLA block: identity, channel arithmetic, softmax rows") {
    const Tensor4 x = random_tensor(2, 4, 4, 16, 10);
    const Tensor4 y = random_tensor(2, 2, 2, 12, 11);
    Ctx c;
    auto count = c.make(nullptr);
    CHECK(fnla_block(count, "cat", Feat{-1, 16}, Feat{-1, 12}, Aggregation::concat).c == 18);
    CHECK(fnla_block(count, "add", Feat{-1, 16}, Feat{-1, 12}, Aggregation::add).c == 16);
    CHECK(fnla_block(count, "mul", Feat{-1, 16}, Feat{-1, 12}, Aggregation::mul).c == 16);
    auto& ow = c.store["mul/omega/w"].value;
    std::fill(ow.begin(), ow.end(), 0.0);
    c.store["mul/omega/b"].value[0] = 50.0;

    Tape tape(&c.store);
    auto ctx = c.make(&tape);
    const Var vx = tape.constant(x);
    const Var vy = tape.constant(y);
    const Feat m = fnla_block(ctx, "mul", Feat{vx, 16}, Feat{vy, 12}, Aggregation::mul);
    CHECK(tape.value(m.v).data == x.data);
    for (int n = 0; n < 2; ++n) {
        const auto& a = tape.last_attention(n);
        REQUIRE(a.size() == 256);
        for (int r = 0; r < 16; ++r) {
            const double s = std::accumulate(a.begin() + r * 16, a.begin() + (r + 1) * 16, 0.0);
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
    }
    const Feat cat = fnla_block(ctx, "cat", Feat{vx, 16}, Feat{vy, 12}, Aggregation::concat);
    CHECK(tape.value(cat.v).c == 18);
    CHECK_THROWS_AS(fnla_block(ctx, "cat", Feat{vx, 16}, Feat{vx, 16}, Aggregation::concat), std::invalid_argument);
    CHECK(head_width(5) == 1);
    CHECK(head_width(40) == 5);
}

TEST_CASE("sNLA block: single position and permutation equivariance") {
    Ctx c;
    Tape tape(&c.store);
    auto ctx = c.make(&tape);
    const Tensor4 one = random_tensor(1, 1, 1, 8, 12);
    const Var v1 = tape.constant(one);
    const Feat out = snla_block(ctx, "s", Feat{v1, 8}, Aggregation::mul);
    REQUIRE(tape.last_attention(0).size() == 1);
    CHECK(tape.last_attention(0)[0] == 1.0);
    // Single position: O = g(x), so the output is x * sigmoid(omega(g(x))).
    const Var g = tape.conv2d(v1, c.store.find("s/g/w"), c.store.find("s/g/b"), 1, 1);
    const Var s = tape.sigmoid(tape.conv2d(g, c.store.find("s/omega/w"), c.store.find("s/omega/b"), 1, 1));
    for (int ch = 0; ch < 8; ++ch) CHECK(tape.value(out.v).data[ch] == doctest::Approx(one.data[ch] * tape.value(s).data[0]).epsilon(1e-14));

    for (Aggregation mode : {Aggregation::mul, Aggregation::add, Aggregation::concat}) {
        const std::string p = "perm" + std::to_string(static_cast<int>(mode));
        const Tensor4 x = random_tensor(1, 4, 5, 8, 13);
        std::vector<int> perm(20);
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(14);
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor4 xp = x;
        for (int i = 0; i < 20; ++i) std::copy_n(x.data.begin() + perm[i] * 8, 8, xp.data.begin() + i * 8);
        const Tensor4 a = tape.value(snla_block(ctx, p, Feat{tape.constant(x), 8}, mode).v);
        const Tensor4 b = tape.value(snla_block(ctx, p, Feat{tape.constant(xp), 8}, mode).v);
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            for (int ch = 0; ch < a.c; ++ch) worst = std::max(worst, std::abs(b.data[i * a.c + ch] - a.data[perm[i] * a.c + ch]));
        }
        CHECK(worst < 1e-12);
    }
    auto& ow = c.store["s/omega/w"].value;
    std::fill(ow.begin(), ow.end(), 0.0);
    c.store["s/omega/b"].value[0] = 50.0;
    const Tensor4 x = random_tensor(1, 3, 3, 8, 15);
    CHECK(tape.value(snla_block(ctx, "s", Feat{tape.constant(x), 8}, Aggregation::mul).v).data == x.data);
}

TEST_CASE("parameter counts") {
    CHECK(Network(NetConfig{}, 1).count_params() == 364766);
    NetConfig mul;
    mul.attention = Attention::fnla_mul;
    CHECK(Network(mul, 1).count_params() == 423715);
    CHECK(std::abs(364766.0 / 380000.0 - 1.0) < 0.15);
    CHECK(std::abs(423715.0 / 430000.0 - 1.0) < 0.15);

    Ctx c;
    auto ctx = c.make(nullptr);
    conv_layer(ctx, "pw", Feat{-1, 3}, 2, 1, 1);
    CHECK(c.store.count_trainable() == 8);

    Network toy(toy_config(), 2);
    CHECK(toy.encoder_channels() == std::vector<int>{1 + 2 * 3, 3 + 3 * 3, 4 + 4 * 3});
    NetConfig bad = toy_config();
    bad.blocks_per_stage = {2, 3};
    CHECK_THROWS_AS(Network(bad, 1), std::invalid_argument);
    bad = toy_config();
    bad.growth_rate = 0;
    CHECK_THROWS_AS(Network(bad, 1), std::invalid_argument);
}

TEST_CASE("toy network forward: shape, softmax, determinism, batch independence") {
    for (Attention a : {Attention::none, Attention::fnla_mul, Attention::fnla_add, Attention::fnla_concat, Attention::snla_only}) {
        Network net(toy_config(a), 4);
        const Tensor4 x = random_tensor(2, 48, 48, 1, 16, 0.0, 1.0);
        const Tensor4 p = net.predict(x);
        REQUIRE(p.n == 2);
        REQUIRE(p.h == 48);
        REQUIRE(p.w == 48);
        REQUIRE(p.c == 2);
        double worst = 0.0;
        for (std::size_t i = 0; i < p.size(); i += 2) worst = std::max(worst, std::abs(p.data[i] + p.data[i + 1] - 1.0));
        CHECK(worst < 1e-6);
        CHECK(net.predict(x).data == p.data);
        if (a == Attention::none || a == Attention::fnla_mul) {
            Tensor4 first(1, 48, 48, 1), second(1, 48, 48, 1);
            std::copy_n(x.data.begin(), 48 * 48, first.data.begin());
            std::copy_n(x.data.begin() + 48 * 48, 48 * 48, second.data.begin());
            const Tensor4 p1 = net.predict(first);
            const Tensor4 p2 = net.predict(second);
            double diff = 0.0;
            for (std::size_t i = 0; i < p1.size(); ++i) {
                diff = std::max({diff, std::abs(p1.data[i] - p.data[i]), std::abs(p2.data[i] - p.data[p1.size() + i])});
            }
            CHECK(diff < 1e-12);
        }
    }
    Network net(toy_config(), 4);
    CHECK_THROWS_AS(net.predict(Tensor4(1, 50, 48, 1)), std::invalid_argument);
    net.params()["enc0/dense/b0/grow/conv/w"].value[0] = std::nan("");
    try {
        net.predict(Tensor4(1, 48, 48, 1, 0.5));
        FAIL("expected a fault");
    } catch (const endo::Fault& f) {
        CHECK(std::string(f.what()).find("enc0/dense/b0/grow") != std::string::npos);
    }
}

TEST_CASE("gradient checks for every layer type") {
    for (const auto& r : endo::testing::run_gradient_suite()) {
        INFO(r.layer << " max relative error " << r.max_rel_error << " over " << r.checked);
        CHECK(r.checked > 0);
        CHECK(r.pass);
    }
}

TEST_CASE("Nadam and the learning-rate schedule") {
    TrainConfig cfg;
    CHECK(learning_rate(cfg, 20) == doctest::Approx(8.179e-4).epsilon(1e-4));
    CHECK(learning_rate(cfg, 0) == 1e-3);
    CHECK(TrainConfig::for_role("edge").lr_decay == 0.99);
    CHECK(TrainConfig::for_role("edge").epochs == 200);
    CHECK(TrainConfig::for_role("body").lr_decay == 0.97);
    CHECK(TrainConfig::for_role("roi").epochs == 100);
    CHECK_THROWS_AS(TrainConfig::for_role("nucleus"), std::invalid_argument);

    Network net(toy_config(), 9);
    const Tensor4 x = random_tensor(2, 16, 16, 1, 30, 0.0, 1.0);
    const Tensor4 t = random_tensor(2, 16, 16, 1, 31, 0.0, 1.0);
    std::vector<std::vector<double>> before;
    for (const auto& p : net.params().all()) {
        if (p.trainable) before.push_back(p.value);
    }
    const double loss = backward_and_step(net, x, t, 0.0, cfg);
    CHECK(std::isfinite(loss));
    std::size_t k = 0;
    for (const auto& p : net.params().all()) {
        if (p.trainable) CHECK(p.value == before[k++]);
    }
    // A real step lowers the loss on the same batch.
    NetConfig nodrop = toy_config();
    nodrop.dropout_rate = 0.0;
    Network fit(nodrop, 9);
    const double l0 = backward_and_step(fit, x, t, 1e-2, cfg);
    double l = l0;
    for (int i = 0; i < 5; ++i) l = backward_and_step(fit, x, t, 1e-2, cfg);
    CHECK(l < l0);
}

TEST_CASE("batch sampling and augmentation") {
    std::vector<TrainingSample> data;
    std::mt19937_64 gen(32);
    for (int i = 0; i < 40; ++i) {
        TrainingSample s;
        s.image = endo::img::ProbMap(16, 16, 0.1 * (i % 10));
        s.target = endo::img::ProbMap(16, 16, 0.0);
        s.has_guttae = i < 12;
        s.total_grade = 2 + i % 5;
        data.push_back(s);
    }
    TrainConfig cfg;
    for (int b = 0; b < 100; ++b) {
        const auto idx = make_batch_indices(data, cfg, gen);
        REQUIRE(idx.size() == 15);
        std::vector<std::size_t> sorted = idx;
        std::sort(sorted.begin(), sorted.end());
        CHECK(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end());
        int level[3] = {0, 0, 0};
        for (auto i : idx) {
            if (data[i].has_guttae) ++level[complexity_level(data[i].total_grade)];
        }
        CHECK(level[0] >= 2);
        CHECK(level[1] >= 2);
        CHECK(level[2] >= 2);
    }
    CHECK(complexity_level(2) == 0);
    CHECK(complexity_level(4) == 1);
    CHECK(complexity_level(6) == 2);
    CHECK_THROWS_AS(make_batch_indices({}, cfg, gen), std::invalid_argument);

    endo::img::ProbMap m(7, 5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : m.data()) v = u(gen);
    CHECK(flip_lr(flip_lr(m)) == m);
    CHECK(flip_ud(flip_ud(m)) == m);
    CHECK(flip_lr(m)(0, 2) == m(6, 2));
    const ElasticField zero = random_elastic_field(4, 0.0, gen);
    CHECK(elastic_deform(m, zero) == m);
    const ElasticField f = random_elastic_field(4, 6.0, gen);
    const auto d = elastic_deform(m, f);
    CHECK(d != m);
    for (double v : d.data()) CHECK((v >= 0.0 && v <= 1.0));

    // Image and target receive the same transform.
    std::vector<TrainingSample> same(3);
    for (auto& s : same) {
        s.image = m;
        s.target = m;
    }
    TrainConfig small;
    small.batch_size = 3;
    small.guttae_per_batch = 0;
    const Batch b = make_batch(same, small, gen);
    CHECK(b.images.data == b.targets.data);
}

TEST_CASE("training is reproducible for a fixed seed") {
    std::vector<TrainingSample> data;
    for (int i = 0; i < 4; ++i) {
        TrainingSample s;
        s.image = endo::img::ProbMap(16, 16, 0.0);
        s.target = endo::img::ProbMap(16, 16, 0.0);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                const bool edge = (x + i) % 6 == 0 || (y + 2 * i) % 6 == 0;
                s.image(x, y) = edge ? 0.2 : 0.8;
                s.target(x, y) = edge ? 1.0 : 0.0;
            }
        }
        data.push_back(s);
    }
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 2;
    cfg.guttae_per_batch = 0;
    cfg.seed = 3;
    const auto run = [&] {
        Network net(toy_config(), 10);
        auto log = train(net, data, cfg);
        return std::make_pair(log, net.predict(stack_maps(std::vector{data[0].image})).data);
    };
    const auto a = run();
    const auto b = run();
    REQUIRE(a.first.size() == 2);
    CHECK(a.first[1].learning_rate == doctest::Approx(0.99e-3));
    CHECK(a.first[0].batches == 2);
    CHECK(a.first[0].loss == b.first[0].loss);
    CHECK(a.first[1].loss == b.first[1].loss);
    CHECK(a.second == b.second);
    int seen = 0;
    Network net(toy_config(), 10);
    cfg.epochs = 5;
    train(net, data, cfg, [&](const EpochRecord&) { return ++seen < 2; });
    CHECK(seen == 2);
}

TEST_CASE("checkpoint round trip and corruption") {
    const auto dir = std::filesystem::temp_directory_path() / "endo_ckpt_test";
    std::filesystem::create_directories(dir);
    NetConfig cfg = toy_config(Attention::fnla_add);
    cfg.normalization = Normalization::batch_renorm;
    Network net(cfg, 11);
    net.params()["head/bn/mean"].value[1] = 0.25;
    const CheckpointInfo info{"edge", 7, 1e-3, 0.99};
    save_checkpoint(dir / "a.ckpt", net, info);
    const auto loaded = load_checkpoint(dir / "a.ckpt");
    CHECK(loaded.info.role == "edge");
    CHECK(loaded.info.epoch == 7);
    CHECK(loaded.info.lr_decay == 0.99);
    CHECK(loaded.net->config().attention == Attention::fnla_add);
    CHECK(loaded.net->config().normalization == Normalization::batch_renorm);
    CHECK(loaded.net->count_params() == net.count_params());
    const auto& src = net.params().all();
    const auto& dst = loaded.net->params().all();
    REQUIRE(src.size() == dst.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        REQUIRE(src[i].size() == dst[i].size());
        for (std::size_t k = 0; k < src[i].size(); ++k) CHECK(dst[i].value[k] == static_cast<double>(static_cast<float>(src[i].value[k])));
    }
    save_checkpoint(dir / "b.ckpt", *loaded.net, loaded.info);
    const auto read = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
    };
    CHECK(read(dir / "a.ckpt") == read(dir / "b.ckpt"));

    std::string bytes = read(dir / "a.ckpt");
    bytes[bytes.size() - 5] ^= 0x40;
    std::ofstream(dir / "c.ckpt", std::ios::binary) << bytes;
    CHECK_THROWS_AS(load_checkpoint(dir / "c.ckpt"), CheckpointError);
    std::ofstream(dir / "d.ckpt", std::ios::binary) << read(dir / "a.ckpt").substr(0, 300);
    CHECK_THROWS_AS(load_checkpoint(dir / "d.ckpt"), CheckpointError);
    std::ofstream(dir / "e.ckpt", std::ios::binary) << "hello\n";
    CHECK_THROWS_AS(load_checkpoint(dir / "e.ckpt"), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), CheckpointError);
    std::filesystem::remove_all(dir);

    const NetConfig back = net_config_from_json(net_config_to_json(cfg));
    CHECK(back.blocks_per_stage == cfg.blocks_per_stage);
    CHECK(back.growth_rate == 3);
    CHECK_THROWS_AS(net_config_from_json("{\"attention\": \"sideways\"}"), std::invalid_argument);
    CHECK_THROWS_AS(net_config_from_json("not json"), std::invalid_argument);
}
