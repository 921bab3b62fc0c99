#include "endo/evalmetrics/evalmetrics.hpp"
#include "endo/imgcore/error.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace endo;
using namespace endo::eval;

namespace {

// O(n^2) oracle, written independently of the library.
double brute_mhd(const PointSet& a, const PointSet& b) {
    auto directed = [](const PointSet& p, const PointSet& q) {
        double s = 0.0;
        for (const auto& u : p) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& v : q) best = std::min(best, std::hypot(u[0] - v[0], u[1] - v[1]));
            s += best;
        }
        return s / static_cast<double>(p.size());
    };
    return std::max(directed(a, b), directed(b, a));
}

img::ProbMap random_binary(int w, int h, std::mt19937_64& rng) {
    img::ProbMap m(w, h);
    std::bernoulli_distribution coin(0.4);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = coin(rng) ? 1.0 : 0.0;
    return m;
}

}  // namespace

TEST_CASE("accuracy and dice identities") {
    std::mt19937_64 rng(5);
    const auto a = random_binary(20, 16, rng);
    img::ProbMap inv(20, 16);
    for (std::size_t i = 0; i < a.size(); ++i) inv[i] = 1.0 - a[i];
    CHECK(pixel_accuracy(a, a) == 100.0);
    CHECK(dice(a, a) == 100.0);
    CHECK(pixel_accuracy(a, inv) == 0.0);
    CHECK(dice(a, inv) == 0.0);

    img::ProbMap half = a;
    for (std::size_t i = 0; i < half.size(); i += 2) half[i] = 1.0 - half[i];
    CHECK(pixel_accuracy(a, half) == 50.0);

    // Equal-size masks overlapping by half.
    img::ProbMap p(8, 1), q(8, 1);
    for (int x = 0; x < 4; ++x) p(x, 0) = 1.0;
    for (int x = 2; x < 6; ++x) q(x, 0) = 1.0;
    CHECK(dice(p, q) == 50.0);
    CHECK(dice(img::ProbMap(4, 4), img::ProbMap(4, 4)) == 100.0);

    // Symmetric after binarization, soft values included.
    img::ProbMap s(20, 16);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = u(rng);
    CHECK(dice(a, s) == dice(s, a));
    CHECK(pixel_accuracy(a, s) == pixel_accuracy(s, a));

    CHECK_THROWS_AS(dice(a, img::ProbMap(3, 3)), std::invalid_argument);
    CHECK_THROWS_AS(pixel_accuracy(a, img::ProbMap(3, 3)), std::invalid_argument);
}

TEST_CASE("mhd examples") {
    CHECK(mhd({{0, 0}}, {{3, 4}}) == 5.0);
    const PointSet s = {{1, 2}, {3, 4}, {5, 0}};
    CHECK(mhd(s, s) == 0.0);
    CHECK_THROWS_AS(mhd({}, s), std::invalid_argument);
    CHECK_THROWS_AS(mhd(s, {}), std::invalid_argument);
}

TEST_CASE("mhd matches the brute-force oracle exactly") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    std::uniform_int_distribution<int> size(1, 200);
    std::uniform_int_distribution<int> grid(0, 30);
    for (int trial = 0; trial < 100; ++trial) {
        PointSet a(static_cast<std::size_t>(size(rng)));
        PointSet b(static_cast<std::size_t>(size(rng)));
        // Half the trials on integer pixels, where ties are common.
        const bool pixels = trial % 2 == 0;
        for (auto& p : a) p = pixels ? Point{double(grid(rng)), double(grid(rng))} : Point{u(rng), u(rng)};
        for (auto& p : b) p = pixels ? Point{double(grid(rng)), double(grid(rng))} : Point{u(rng), u(rng)};
        const double got = mhd(a, b);
        CHECK(got == brute_mhd(a, b));
        CHECK(got == mhd(b, a));
        CHECK(got >= 0.0);
    }
}

TEST_CASE("evaluate_maps") {
    img::ProbMap e(10, 10);
    e(3, 3) = 1.0;
    img::ProbMap f(10, 10);
    f(6, 7) = 0.9;
    const auto r = evaluate_maps(e, f);
    REQUIRE(r.mhd);
    CHECK(*r.mhd == 5.0);
    CHECK(r.dice == 0.0);
    CHECK(r.accuracy == 98.0);
    CHECK_FALSE(evaluate_maps(e, img::ProbMap(10, 10)).mhd);
}

TEST_CASE("mae_mape") {
    const std::vector<double> t = {100, 200, 50};
    const auto z = mae_mape(std::span<const double>(t), std::span<const double>(t));
    CHECK(z.mae == 0.0);
    CHECK(z.mape == 0.0);

    const std::vector<double> e1 = {110};
    const std::vector<double> t1 = {100};
    const auto r1 = mae_mape(std::span<const double>(e1), std::span<const double>(t1));
    CHECK(r1.mae == doctest::Approx(10.0));
    CHECK(r1.mape == doctest::Approx(10.0));

    const std::vector<std::optional<double>> e2 = {100.0, std::nullopt, 60.0};
    const auto r2 = mae_mape(std::span<const std::optional<double>>(e2), std::span<const double>(t));
    CHECK(r2.n_missing == 1);
    CHECK(r2.n_present == 2);
    CHECK(r2.mae == doctest::Approx(5.0));
    CHECK(r2.mape == doctest::Approx((0.0 + 100.0 + 20.0) / 3.0));

    const std::vector<double> bad = {1.0, 2.0};
    CHECK_THROWS_AS(mae_mape(std::span<const double>(bad), std::span<const double>(t)), std::invalid_argument);
}

TEST_CASE("bland_altman") {
    const std::vector<double> t = {1, 2, 3, 4, 5};
    const auto same = bland_altman(t, t);
    CHECK(same.bias == 0.0);
    CHECK(same.within_fraction == 1.0);
    CHECK(same.degenerate);

    std::vector<double> shifted = t;
    for (auto& v : shifted) v += 2.5;
    const auto off = bland_altman(shifted, t);
    CHECK(off.bias == doctest::Approx(2.5));
    CHECK(off.sd == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(off.within_fraction == 1.0);

    CHECK_THROWS_AS(bland_altman(std::vector<double>{1, 2}, std::vector<double>{1, 2}), std::invalid_argument);

    // Within-fraction of normal differences, and its invariance to a common shift.
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd(0.0, 3.0);
    std::uniform_real_distribution<double> u(500.0, 3000.0);
    std::vector<double> truth(10000), est(10000);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        truth[i] = u(rng);
        est[i] = truth[i] + nd(rng);
    }
    const auto ba = bland_altman(est, truth);
    CHECK(std::abs(ba.within_fraction - 0.95) <= 0.01);
    std::vector<double> t2 = truth, e2 = est;
    for (auto& v : t2) v += 17.0;
    for (auto& v : e2) v += 17.0;
    CHECK(bland_altman(e2, t2).within_fraction == ba.within_fraction);
}

TEST_CASE("fit_error_model recovers the SD decay rate") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> un(20.0, 220.0);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> n(3000), e(3000);
    for (std::size_t i = 0; i < n.size(); ++i) {
        n[i] = std::round(un(rng));
        e[i] = 50.0 * std::exp(-0.02 * n[i]) * z(rng);
    }
    const auto m = fit_error_model(e, n);
    CHECK(m.sd_b == doctest::Approx(-0.02).epsilon(0.2));
    CHECK(m.n_bins >= 10);
    for (double x = 20; x <= 220; x += 10) {
        CHECK(m.sd_at(x) > 0.0);
        CHECK(std::abs(m.mean_at(x)) < 5.0);
    }
    const auto again = fit_error_model(e, n);
    CHECK(again.mean_a == m.mean_a);
    CHECK(again.mean_b == m.mean_b);
    CHECK(again.mean_c == m.mean_c);
    CHECK(again.sd_a == m.sd_a);
    CHECK(again.sd_b == m.sd_b);

    const auto csv = error_model_plot_csv(m, 20, 220, 5);
    CHECK(csv.rfind("n,mean,lower,upper\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
}

TEST_CASE("fit_error_model on zero errors and bad input") {
    std::vector<double> n, e;
    for (int i = 0; i < 200; ++i) {
        n.push_back(30.0 + i);
        e.push_back(0.0);
    }
    const auto m = fit_error_model(e, n);
    for (double x = 30; x < 230; x += 20) {
        CHECK(std::abs(m.mean_at(x)) < 1e-9);
        CHECK(std::abs(m.sd_at(x)) < 1e-9);
    }
    CHECK_THROWS_AS(fit_error_model(std::vector<double>(5, 0.0), std::vector<double>(5, 10.0)), std::invalid_argument);
    std::vector<double> neg = n;
    neg[3] = 0.0;
    CHECK_THROWS_AS(fit_error_model(e, neg), std::invalid_argument);
    // Twelve points spread too thin for any bin.
    std::vector<double> sparse_n, sparse_e;
    for (int i = 0; i < 12; ++i) {
        sparse_n.push_back(10.0 + 100.0 * i);
        sparse_e.push_back(1.0);
    }
    CHECK_THROWS_AS(fit_error_model(sparse_e, sparse_n), Fault);
}

TEST_CASE("success_rate") {
    std::vector<std::optional<bio::BiomarkerReport>> r(10);
    CHECK(success_rate(r) == 0.0);
    for (int i = 0; i < 7; ++i) r[static_cast<std::size_t>(i)] = bio::BiomarkerReport{};
    CHECK(success_rate(r) == doctest::Approx(70.0));
    for (auto& x : r) x = bio::BiomarkerReport{};
    CHECK(success_rate(r) == 100.0);
}
