#include <doctest.h>

#include "gradcheck.hpp"
#include "toothseg/losses/losses.hpp"

using namespace toothseg;
using nn::TensorD;
using nn::Var;
namespace L = toothseg::losses;

namespace {

TensorD scalar_t(double v) { return TensorD({1}, std::vector<double>{v}); }

TensorD random_probs(nn::Dims dims, nn::Rng& rng, double lo = 0.05, double hi = 0.95) {
    TensorD t(dims);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
    return t;
}

TensorD random_binary(nn::Dims dims, nn::Rng& rng, double p1 = 0.3) {
    TensorD t(dims);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = rng.bernoulli(p1) ? 1.0 : 0.0;
    return t;
}

// Independent plain-loop binary cross-entropy for reduction identities.
double bce_oracle(const TensorD& p, const TensorD& y, double clamp = 1e-7) {
    double acc = 0;
    for (std::int64_t i = 0; i < p.numel(); ++i) {
        const double pc = std::min(1.0 - clamp, std::max(clamp, p[i]));
        acc += -y[i] * std::log(pc) - (1.0 - y[i]) * std::log(1.0 - pc);
    }
    return acc / static_cast<double>(p.numel());
}

}  // namespace

TEST_CASE("loss params validation") {
    L::LossParams lp;
    CHECK_NOTHROW(lp.validate());
    lp.beta = 1.0;
    CHECK_THROWS(lp.validate());
    lp = {};
    lp.gamma = 0.0;
    CHECK_THROWS(lp.validate());
    lp = {};
    lp.alpha = 1.5;
    CHECK_THROWS(lp.validate());
}

TEST_CASE("loss name parsing") {
    CHECK(L::parse_loss_name("focal") == L::LossKind::Focal);
    CHECK(L::parse_loss_name("focal_tversky") == L::LossKind::FocalTversky);
    CHECK(L::parse_loss_name("combo") == L::LossKind::Combo);
    CHECK_THROWS(L::parse_loss_name("dice"));
}

TEST_CASE("focal loss frozen values") {
    // 0.9 * 0.25 * ln 2, evaluated independently
    CHECK(L::focal_loss_value(scalar_t(0.5), scalar_t(1.0), 0.9, 2.0) ==
          doctest::Approx(0.1559581156259877).epsilon(1e-12));
    // perfect prediction: only the probability clamp keeps it nonzero
    CHECK(L::focal_loss_value(scalar_t(1.0), scalar_t(1.0), 0.9, 2.0) < 1e-6);
    CHECK(L::focal_loss_value(scalar_t(0.0), scalar_t(0.0), 0.9, 2.0) < 1e-6);
}

TEST_CASE("focal loss reduces to scaled BCE at gamma=0, alpha=0.5") {
    nn::Rng rng(5);
    const auto p = random_probs({6, 6, 6}, rng);
    const auto y = random_binary({6, 6, 6}, rng);
    const double fl = L::focal_loss_value(p, y, 0.5, 0.0);
    CHECK(fl == doctest::Approx(0.5 * bce_oracle(p, y)).epsilon(1e-9));
}

TEST_CASE("tversky index frozen values") {
    // |PG|=2, |P\G|=1, |G\P|=1, beta=0.9 -> 2/(2+0.9+0.1), epsilon-shifted
    const TensorD g({6}, std::vector<double>{1, 1, 1, 0, 0, 0});
    const TensorD p({6}, std::vector<double>{1, 1, 0, 1, 0, 0});
    CHECK(L::tversky_index_value(p, g, 0.9, 1e-6) ==
          doctest::Approx(0.6666667777777407).epsilon(1e-12));
    // identical binary masks -> 1 up to epsilon
    CHECK(L::tversky_index_value(g, g, 0.9, 1e-6) == doctest::Approx(1.0).epsilon(1e-6));
    // disjoint nonempty -> ~0
    const TensorD q({6}, std::vector<double>{0, 0, 0, 1, 1, 1});
    CHECK(L::tversky_index_value(q, g, 0.9, 1e-6) < 1e-5);
}

TEST_CASE("focal tversky frozen values and gamma=1 identity") {
    // TI = (3+e)/(4+e) ~ 0.75, gamma=2 -> sqrt(0.25) = 0.5
    const TensorD g({6}, std::vector<double>{1, 1, 1, 1, 0, 0});
    const TensorD p({6}, std::vector<double>{1, 1, 1, 0, 1, 0});
    CHECK(L::focal_tversky_loss_value(p, g, 0.9, 2.0, 1e-6) == doctest::Approx(0.5).epsilon(1e-6));
    // TI = 1 -> 0
    CHECK(L::focal_tversky_loss_value(g, g, 0.9, 2.0, 1e-6) == doctest::Approx(0.0).epsilon(1e-4));

    nn::Rng rng(6);
    const auto pr = random_probs({4, 4, 4}, rng);
    const auto yr = random_binary({4, 4, 4}, rng);
    const double ftl1 = L::focal_tversky_loss_value(pr, yr, 0.9, 1.0, 1e-6);
    const double ti = L::tversky_index_value(pr, yr, 0.9, 1e-6);
    CHECK(ftl1 == doctest::Approx(1.0 - ti).epsilon(1e-12));
}

TEST_CASE("balanced BCE frozen values and reduction") {
    CHECK(L::balanced_bce_value(scalar_t(0.5), scalar_t(1.0), 0.9) ==
          doctest::Approx(0.6238324625039507).epsilon(1e-12));
    CHECK(L::balanced_bce_value(scalar_t(1.0), scalar_t(1.0), 0.9) < 1e-6);
    nn::Rng rng(7);
    const auto p = random_probs({5, 5, 5}, rng);
    const auto y = random_binary({5, 5, 5}, rng);
    CHECK(L::balanced_bce_value(p, y, 0.5) == doctest::Approx(0.5 * bce_oracle(p, y)).epsilon(1e-9));
}

TEST_CASE("soft dice frozen values") {
    // |X|=4, |Y|=6, |X and Y|=3 -> 0.6
    TensorD x({8}, std::vector<double>{1, 1, 1, 1, 0, 0, 0, 0});
    TensorD y({8}, std::vector<double>{1, 1, 1, 0, 1, 1, 1, 0});
    CHECK(L::soft_dice_value(x, y, 1e-6) == doctest::Approx(0.6).epsilon(1e-6));
    CHECK(L::soft_dice_value(x, x, 1e-6) == doctest::Approx(1.0).epsilon(1e-6));
    TensorD z({8}, std::vector<double>{0, 0, 0, 0, 1, 1, 1, 1});
    CHECK(L::soft_dice_value(x, z, 1e-6) < 1e-5);
}

TEST_CASE("combo loss reductions") {
    nn::Rng rng(8);
    const auto p = random_probs({4, 4, 4}, rng);
    const auto y = random_binary({4, 4, 4}, rng);
    // delta = 1 -> BBCE exactly
    CHECK(L::combo_loss_value(p, y, 0.9, 1.0, 1e-6) ==
          doctest::Approx(L::balanced_bce_value(p, y, 0.9)).epsilon(1e-12));
    // delta = 0, p == y -> -dice of perfect match
    CHECK(L::combo_loss_value(y, y, 0.9, 0.0, 1e-6) == doctest::Approx(-1.0).epsilon(1e-5));
    // delta = 0.5, perfect prediction -> ~ -0.5
    CHECK(L::combo_loss_value(y, y, 0.9, 0.5, 1e-6) == doctest::Approx(-0.5).epsilon(1e-4));
}

TEST_CASE("loss positivity and range properties") {
    nn::Rng rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        const auto p = random_probs({4, 4, 4}, rng, 0.001, 0.999);
        const auto y = random_binary({4, 4, 4}, rng);
        CHECK(L::focal_loss_value(p, y, 0.9, 2.0) >= 0.0);
        CHECK(L::focal_tversky_loss_value(p, y, 0.9, 2.0, 1e-6) >= 0.0);
        CHECK(L::balanced_bce_value(p, y, 0.9) >= 0.0);
        const double ti = L::tversky_index_value(p, y, 0.9, 1e-6);
        CHECK(ti >= 0.0);
        CHECK(ti <= 1.0 + 1e-12);
        CHECK(L::combo_loss_value(p, y, 0.9, 0.5, 1e-6) >= -(1.0 - 0.5) - 1e-12);
    }
}

TEST_CASE("focal loss is strictly decreasing in p_t") {
    double prev = 1e100;
    for (double pt = 0.01; pt < 1.0; pt += 0.01) {
        const double v = L::focal_loss_value(scalar_t(pt), scalar_t(1.0), 0.9, 2.0);
        CHECK(v < prev);
        prev = v;
    }
}

TEST_CASE("tversky index strictly increases when a false-negative voxel improves") {
    nn::Rng rng(10);
    TensorD y({4, 4, 4});
    TensorD p = random_probs({4, 4, 4}, rng);
    y[7] = 1.0;
    y[21] = 1.0;
    p[21] = 0.2;  // false negative: low probability on a positive voxel
    const double before = L::tversky_index_value(p, y, 0.9, 1e-6);
    p[21] = 0.6;
    const double after = L::tversky_index_value(p, y, 0.9, 1e-6);
    CHECK(after > before);
}

TEST_CASE("all six loss gradients match finite differences") {
    nn::Rng rng(12);
    const auto p0 = random_probs({6, 6, 6}, rng);
    const auto y = random_binary({6, 6, 6}, rng);

    using Fn = std::function<nn::Var<double>(const nn::Var<double>&)>;
    const std::vector<std::pair<std::string, Fn>> cases = {
        {"focal", [&](const Var<double>& p) { return L::focal_loss(p, y, 0.9, 2.0); }},
        {"tversky", [&](const Var<double>& p) { return L::tversky_index(p, y, 0.9, 1e-6); }},
        {"focal_tversky",
         [&](const Var<double>& p) { return L::focal_tversky_loss(p, y, 0.9, 2.0, 1e-6); }},
        {"bbce", [&](const Var<double>& p) { return L::balanced_bce(p, y, 0.9); }},
        {"dice", [&](const Var<double>& p) { return L::soft_dice(p, y, 1e-6); }},
        {"combo", [&](const Var<double>& p) { return L::combo_loss(p, y, 0.9, 0.5, 1e-6); }},
    };

    for (const auto& [name, fn] : cases) {
        CAPTURE(name);
        Var<double> vp(p0, true);
        auto l = fn(vp);
        nn::backward(l);
        auto fd = gradcheck::central_differences(
            [&](const std::vector<double>& v) {
                return fn(Var<double>(TensorD(p0.dims(), v))).value()[0];
            },
            p0.vec(), 1e-6);
        CHECK(gradcheck::max_rel_error(vp.grad().vec(), fd) < 1e-4);
    }
}

TEST_CASE("losses reject shape mismatches") {
    nn::Rng rng(13);
    const auto p = random_probs({2, 2, 2}, rng);
    const auto y = random_binary({2, 2, 3}, rng);
    CHECK_THROWS(L::focal_loss_value(p, y, 0.9, 2.0));
    CHECK_THROWS(L::tversky_index_value(p, y, 0.9, 1e-6));
    CHECK_THROWS(L::balanced_bce_value(p, y, 0.9));
    CHECK_THROWS(L::soft_dice_value(p, y, 1e-6));
}
