#include <cmath>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"
#include "tstlab/optim.hpp"

using namespace tstlab;

namespace {

// Textbook AdamW in plain double, kept independent of the kernel path.
struct RefAdam {
    std::vector<double> p, m, v;
    double b1, b2, wd, eps;
    int64_t t = 0;

    void step(const std::vector<double>& g, double lr) {
        ++t;
        double bias1 = 1.0 - std::pow(b1, (double)t);
        double bias2 = 1.0 - std::pow(b2, (double)t);
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            double mhat = m[j] / bias1;
            double vhat = v[j] / bias2;
            p[j] -= lr * wd * p[j] + lr * mhat / (std::sqrt(vhat) + 1e-8);
        }
    }
};

}  // namespace

TEST_CASE("wsd schedule hits the documented breakpoints") {
    TrainPlan plan;
    plan.total_steps = 1000;
    plan.warmup_steps = 100;
    plan.decay_fraction = 0.1;
    plan.peak_lr = 3e-3;

    CHECK(wsd_lr(0, plan) == 0.0);
    CHECK(wsd_lr(50, plan) == doctest::Approx(plan.peak_lr * 0.5));
    CHECK(wsd_lr(100, plan) == plan.peak_lr);  // ramp top
    CHECK(wsd_lr(500, plan) == plan.peak_lr);  // mid-stable, exactly peak
    CHECK(wsd_lr(899, plan) == plan.peak_lr);  // last stable step
    CHECK(wsd_lr(950, plan) == doctest::Approx(plan.peak_lr * 0.5));
    CHECK(wsd_lr(999, plan) == doctest::Approx(plan.peak_lr * 0.01));  // 1/decay_steps left

    CHECK_THROWS_AS(wsd_lr(-1, plan), ContractError);
    CHECK_THROWS_AS(wsd_lr(1000, plan), ContractError);

    plan.warmup_steps = 0;
    CHECK(wsd_lr(0, plan) == plan.peak_lr);  // no ramp, straight to peak
}

TEST_CASE("adamw matches a hand-stepped reference over several steps") {
    std::vector<double> init{0.5, -1.25, 2.0, 0.0};
    Tensor<double> w({4}, init, true);
    AdamW<double> opt({{"w", w}}, 0.9, 0.95, 0.1, 0.0);
    RefAdam ref{init, {0, 0, 0, 0}, {0, 0, 0, 0}, 0.9, 0.95, 0.1, 1e-8};

    Rng rng(31);
    for (int s = 0; s < 5; ++s) {
        std::vector<double> g{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        for (size_t j = 0; j < 4; ++j) w.grad()[j] = g[j];
        double lr = 1e-2 / (double)(s + 1);
        opt.step(lr);
        ref.step(g, lr);
        for (size_t j = 0; j < 4; ++j)
            CHECK(w.values()[j] == doctest::Approx(ref.p[j]).epsilon(1e-12));
    }
    CHECK(opt.steps_taken() == 5);
}

TEST_CASE("zero gradients leave parameters alone unless decay bites") {
    Tensor<double> w({3}, {1.0, -2.0, 3.0}, true);
    AdamW<double> opt({{"w", w}}, 0.9, 0.95, 0.0, 1.0);
    opt.zero_grad();
    opt.step(0.1);
    CHECK(testutil::to_vec(w.values()) == std::vector<double>{1.0, -2.0, 3.0});

    // decoupled decay scales by (1 - lr*wd) per step
    Tensor<double> u({2}, {4.0, -8.0}, true);
    AdamW<double> dec({{"u", u}}, 0.9, 0.95, 0.5, 0.0);
    dec.step(0.1);
    CHECK(u.values()[0] == doctest::Approx(4.0 * 0.95).epsilon(1e-15));
    CHECK(u.values()[1] == doctest::Approx(-8.0 * 0.95).epsilon(1e-15));
}

TEST_CASE("global norm clipping rescales before the update") {
    auto run = [](double clip, std::vector<double> g) {
        Tensor<double> w({2}, {0.0, 0.0}, true);
        AdamW<double> opt({{"w", w}}, 0.9, 0.95, 0.0, clip);
        w.grad()[0] = g[0];
        w.grad()[1] = g[1];
        opt.step(1e-3);
        return std::vector<double>(w.values().begin(), w.values().end());
    };
    // norm 5 clipped to 1 must equal feeding the pre-scaled gradient
    auto clipped = run(1.0, {3.0, 4.0});
    auto manual = run(0.0, {0.6, 0.8});
    CHECK(clipped[0] == doctest::Approx(manual[0]).epsilon(1e-12));
    CHECK(clipped[1] == doctest::Approx(manual[1]).epsilon(1e-12));
    // under the ceiling nothing changes
    auto soft = run(10.0, {3.0, 4.0});
    auto free_run = run(0.0, {3.0, 4.0});
    CHECK(soft[0] == free_run[0]);
    CHECK(soft[1] == free_run[1]);
}

TEST_CASE("non-finite gradients abort the step naming the parameter") {
    Tensor<double> a({2}, {1.0, 2.0}, true);
    Tensor<double> b({2}, {3.0, 4.0}, true);
    AdamW<double> opt({{"a", a}, {"b", b}}, 0.9, 0.95, 0.1, 1.0);
    a.grad()[0] = 0.5;
    a.grad()[1] = 0.5;
    b.grad()[0] = std::numeric_limits<double>::quiet_NaN();
    try {
        opt.step(1e-3);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("b at index 0") != std::string::npos);
    }
    // state untouched: params, moments and step count all unchanged
    CHECK(testutil::to_vec(a.values()) == std::vector<double>{1.0, 2.0});
    CHECK(testutil::to_vec(b.values()) == std::vector<double>{3.0, 4.0});
    CHECK(opt.steps_taken() == 0);
    CHECK(opt.moment1(0) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("moment reset drops history for one parameter only") {
    Tensor<double> a({2}, {1.0, 2.0}, true);
    Tensor<double> b({2}, {3.0, 4.0}, true);
    AdamW<double> opt({{"a", a}, {"b", b}}, 0.9, 0.95, 0.0, 0.0);
    a.grad()[0] = 1.0;
    a.grad()[1] = 1.0;
    b.grad()[0] = 1.0;
    b.grad()[1] = 1.0;
    opt.step(1e-3);
    CHECK(opt.moment1(0)[0] != 0.0);
    CHECK(opt.moment1(1)[0] != 0.0);
    opt.reset_moments("a");
    CHECK(opt.moment1(0) == std::vector<double>{0.0, 0.0});
    CHECK(opt.moment2(0) == std::vector<double>{0.0, 0.0});
    CHECK(opt.moment1(1)[0] != 0.0);
    CHECK_THROWS_AS(opt.reset_moments("missing"), ContractError);
}

TEST_CASE("restored step count continues the bias-correction sequence") {
    std::vector<double> init{0.7, -0.3};
    Rng rng(32);
    std::vector<std::vector<double>> grads;
    for (int s = 0; s < 3; ++s) grads.push_back({rng.normal(), rng.normal()});

    // uninterrupted
    Tensor<double> w1({2}, init, true);
    AdamW<double> full({{"w", w1}}, 0.9, 0.95, 0.1, 1.0);
    for (auto& g : grads) {
        w1.grad()[0] = g[0];
        w1.grad()[1] = g[1];
        full.step(1e-3);
    }

    // stop after two steps, rebuild, restore moments and counter, take step 3
    Tensor<double> w2({2}, init, true);
    AdamW<double> first({{"w", w2}}, 0.9, 0.95, 0.1, 1.0);
    for (int s = 0; s < 2; ++s) {
        w2.grad()[0] = grads[(size_t)s][0];
        w2.grad()[1] = grads[(size_t)s][1];
        first.step(1e-3);
    }
    Tensor<double> w3({2}, std::vector<double>(w2.values().begin(), w2.values().end()),
                      true);
    AdamW<double> resumed({{"w", w3}}, 0.9, 0.95, 0.1, 1.0);
    resumed.moment1(0) = first.moment1(0);
    resumed.moment2(0) = first.moment2(0);
    resumed.set_steps_taken(first.steps_taken());
    w3.grad()[0] = grads[2][0];
    w3.grad()[1] = grads[2][1];
    resumed.step(1e-3);

    CHECK(w3.values()[0] == w1.values()[0]);  // bitwise, same arithmetic path
    CHECK(w3.values()[1] == w1.values()[1]);

    CHECK_THROWS_AS(AdamW<double>({}, 0.9, 0.95, 0.0, 0.0), ContractError);
}
