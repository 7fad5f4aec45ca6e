#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "testutil.hpp"
#include "tstlab/losses.hpp"

using namespace tstlab;

namespace {

// Independent softmax: plain exp/sum in double, no shared code with the loss.
std::vector<double> softmax_row(const double* z, int64_t v) {
    double mx = *std::max_element(z, z + v);
    std::vector<double> p((size_t)v);
    double sum = 0.0;
    for (int64_t j = 0; j < v; ++j) sum += (p[(size_t)j] = std::exp(z[j] - mx));
    for (auto& x : p) x /= sum;
    return p;
}

struct Instance {
    int64_t n, v, s;
    Tensor<double> logits;
    IntTensor bags;
};

// Random instance with distinct targets per bag (bags are sets of tokens).
Instance random_instance(Rng& rng, int64_t n, int64_t v, int64_t s, bool with_grad) {
    Instance ins{n, v, s, Tensor<double>({n, v}, with_grad), IntTensor({n, s})};
    for (auto& z : ins.logits.values()) z = 3.0 * (rng.uniform() - 0.5);
    for (int64_t r = 0; r < n; ++r) {
        std::set<int32_t> bag;
        while ((int64_t)bag.size() < s) bag.insert((int32_t)rng.uniform_int(v));
        int64_t i = 0;
        for (int32_t y : bag) ins.bags.data[(size_t)(r * s + i++)] = y;
    }
    return ins;
}

double oracle_kl_uniform_bag(const Instance& ins) {
    double total = 0.0;
    for (int64_t r = 0; r < ins.n; ++r) {
        auto p = softmax_row(ins.logits.values().data() + r * ins.v, ins.v);
        double q = 1.0 / (double)ins.s, kl = 0.0;
        for (int64_t i = 0; i < ins.s; ++i)
            kl += q * std::log(q / p[(size_t)ins.bags.data[(size_t)(r * ins.s + i)]]);
        total += kl;
    }
    return total / (double)ins.n;
}

double oracle_neg_log_bag_mass(const Instance& ins) {
    double total = 0.0;
    for (int64_t r = 0; r < ins.n; ++r) {
        auto p = softmax_row(ins.logits.values().data() + r * ins.v, ins.v);
        double mass = 0.0;
        for (int64_t i = 0; i < ins.s; ++i)
            mass += p[(size_t)ins.bags.data[(size_t)(r * ins.s + i)]];
        total += -std::log(mass);
    }
    return total / (double)ins.n;
}

}  // namespace

TEST_CASE("corrected is simplified minus log bag size, with identical gradients") {
    Rng rng(11);
    BagWeighting uni;
    for (int trial = 0; trial < 50; ++trial) {
        int64_t v = 2 + (int64_t)rng.uniform_int(31);
        int64_t s = 1 + (int64_t)rng.uniform_int(std::min<int64_t>(8, v));
        int64_t n = 1 + (int64_t)rng.uniform_int(6);
        Instance a = random_instance(rng, n, v, s, true);

        Graph<double> g1, g2;
        auto simp = mce_loss(g1, a.logits, a.bags, MceVariant::simplified, uni);
        double simp_val = simp.values()[0];
        g1.backward(simp);
        std::vector<double> gsimp(a.logits.grad().begin(), a.logits.grad().end());

        std::fill(a.logits.grad().begin(), a.logits.grad().end(), 0.0);
        auto corr = mce_loss(g2, a.logits, a.bags, MceVariant::corrected, uni);
        CHECK(std::abs(corr.values()[0] - (simp_val - std::log((double)s))) < 1e-9);
        g2.backward(corr);
        for (size_t i = 0; i < gsimp.size(); ++i)
            CHECK(std::abs(a.logits.grad()[i] - gsimp[i]) < 1e-12);
    }
}

TEST_CASE("corrected equals the KL oracle and is nonnegative") {
    Rng rng(12);
    BagWeighting uni;
    for (int trial = 0; trial < 50; ++trial) {
        int64_t v = 2 + (int64_t)rng.uniform_int(31);
        int64_t s = 1 + (int64_t)rng.uniform_int(std::min<int64_t>(8, v));
        Instance a = random_instance(rng, 3, v, s, false);
        Graph<double> g;
        auto corr = mce_loss(g, a.logits, a.bags, MceVariant::corrected, uni);
        CHECK(corr.values()[0] >= 0.0);
        CHECK(std::abs(corr.values()[0] - oracle_kl_uniform_bag(a)) < 1e-9);
    }
}

TEST_CASE("corrected vanishes when the softmax is uniform on the bag") {
    int64_t v = 12, s = 4;
    Instance a{1, v, s, Tensor<double>({1, v}), IntTensor({1, s})};
    for (auto& z : a.logits.values()) z = -1e3;
    int32_t bag[] = {2, 5, 7, 11};
    for (int64_t i = 0; i < s; ++i) {
        a.bags.data[(size_t)i] = bag[i];
        a.logits.values()[(size_t)bag[i]] = 1.5;
    }
    Graph<double> g;
    auto corr = mce_loss(g, a.logits, a.bags, MceVariant::corrected, BagWeighting{});
    CHECK(std::abs(corr.values()[0]) < 1e-12);
}

TEST_CASE("alternative equals minus log of the bag mass") {
    Rng rng(13);
    BagWeighting uni;
    for (int trial = 0; trial < 50; ++trial) {
        int64_t v = 2 + (int64_t)rng.uniform_int(31);
        int64_t s = 1 + (int64_t)rng.uniform_int(std::min<int64_t>(8, v));
        Instance a = random_instance(rng, 4, v, s, false);
        Graph<double> g;
        auto alt = mce_loss(g, a.logits, a.bags, MceVariant::alternative, uni);
        CHECK(std::abs(alt.values()[0] - oracle_neg_log_bag_mass(a)) < 1e-9);
    }
}

TEST_CASE("alternative is zero when the bag covers the vocabulary") {
    int64_t v = 9;
    Instance a{2, v, v, Tensor<double>({2, v}), IntTensor({2, v})};
    Rng rng(14);
    for (auto& z : a.logits.values()) z = 2.0 * rng.uniform();
    for (int64_t r = 0; r < 2; ++r)
        for (int64_t i = 0; i < v; ++i) a.bags.data[(size_t)(r * v + i)] = (int32_t)i;
    Graph<double> g;
    auto alt = mce_loss(g, a.logits, a.bags, MceVariant::alternative, BagWeighting{});
    CHECK(std::abs(alt.values()[0]) < 1e-12);
}

TEST_CASE("alternative counts duplicate targets once") {
    int64_t v = 6, s = 3;
    Instance a{1, v, s, Tensor<double>({1, v}), IntTensor({1, s})};
    Rng rng(15);
    for (auto& z : a.logits.values()) z = rng.uniform();
    a.bags.data = {4, 4, 1};
    Graph<double> g;
    auto alt = mce_loss(g, a.logits, a.bags, MceVariant::alternative, BagWeighting{});
    auto p = softmax_row(a.logits.values().data(), v);
    CHECK(std::abs(alt.values()[0] - (-std::log(p[4] + p[1]))) < 1e-12);
}

TEST_CASE("bag size one reproduces plain cross entropy bit for bit") {
    Rng rng(16);
    int64_t n = 7, v = 13;
    Tensor<double> logits({n, v}, true);
    for (auto& z : logits.values()) z = 2.5 * (rng.uniform() - 0.5);
    IntTensor labels({n});
    for (auto& y : labels.data) y = (int32_t)rng.uniform_int(v);
    labels.data[3] = kIgnoreIndex;

    Graph<double> g1;
    auto ce = ce_loss(g1, logits, labels);
    g1.backward(ce);
    double ce_val = ce.values()[0];
    std::vector<double> gce(logits.grad().begin(), logits.grad().end());

    std::fill(logits.grad().begin(), logits.grad().end(), 0.0);
    IntTensor bags = labels.reshaped({n, 1});
    Graph<double> g2;
    auto mce = mce_loss(g2, logits, bags, MceVariant::simplified, BagWeighting{});
    g2.backward(mce);

    CHECK(mce.values()[0] == ce_val);
    for (size_t i = 0; i < gce.size(); ++i) CHECK(logits.grad()[i] == gce[i]);
}

TEST_CASE("slot weights reshape the loss as documented") {
    Rng rng(17);
    int64_t n = 5, v = 20, s = 4;
    Instance a = random_instance(rng, n, v, s, false);

    // brute-force per-slot means
    std::vector<double> slot_mean((size_t)s, 0.0);
    for (int64_t r = 0; r < n; ++r) {
        auto p = softmax_row(a.logits.values().data() + r * v, v);
        for (int64_t i = 0; i < s; ++i)
            slot_mean[(size_t)i] -=
                std::log(p[(size_t)a.bags.data[(size_t)(r * s + i)]]) / (double)n;
    }
    auto combine = [&](const BagWeighting& w) {
        double num = 0.0, den = 0.0;
        for (int64_t i = 0; i < s; ++i) {
            num += w.weight((int)i + 1) * slot_mean[(size_t)i];
            den += w.weight((int)i + 1);
        }
        return num / den;
    };

    for (WeightKind kind : {WeightKind::uniform, WeightKind::power_law,
                            WeightKind::exponential, WeightKind::first_token}) {
        BagWeighting w;
        w.kind = kind;
        Graph<double> g;
        LossReport rep;
        auto loss = mce_loss(g, a.logits, a.bags, MceVariant::simplified, w, &rep);
        CHECK(std::abs(loss.values()[0] - combine(w)) < 1e-12);
        for (int64_t i = 0; i < s; ++i)
            CHECK(std::abs(rep.per_slot[(size_t)i] - slot_mean[(size_t)i]) < 1e-12);
    }

    BagWeighting fitted;
    fitted.kind = WeightKind::fitted;
    fitted.c0 = 0.1;
    fitted.a = 1.0;
    fitted.k = -1.3;
    Graph<double> g;
    auto loss = mce_loss(g, a.logits, a.bags, MceVariant::simplified, fitted);
    CHECK(std::abs(loss.values()[0] - combine(fitted)) < 1e-12);
}

TEST_CASE("weight kinds evaluate and clip as specified") {
    BagWeighting w;
    w.kind = WeightKind::power_law;
    CHECK(w.weight(1) == 1.0);
    CHECK(w.weight(4) == doctest::Approx(0.25));
    w.kind = WeightKind::exponential;
    CHECK(w.weight(2) == doctest::Approx(std::exp(-2.0)));
    w.kind = WeightKind::first_token;
    CHECK(w.weight(1) == 1.0);
    CHECK(w.weight(2) == 0.0);
    w.kind = WeightKind::fitted;
    w.c0 = -1.0;
    w.a = 0.5;
    w.k = -1.0;
    CHECK(w.weight(1) == doctest::Approx(1e-6));  // clipped at the floor
    w.c0 = 0.2;
    CHECK(w.weight(2) == doctest::Approx(0.45));

    CHECK(weight_kind_from("power_law") == WeightKind::power_law);
    CHECK(std::string(weight_kind_name(WeightKind::fitted)) == "fitted");
    CHECK_THROWS_AS(weight_kind_from("nope"), ConfigError);
    CHECK(mce_variant_from("corrected") == MceVariant::corrected);
    CHECK(std::string(mce_variant_name(MceVariant::alternative)) == "alternative");
    CHECK_THROWS_AS(mce_variant_from("nope"), ConfigError);
}

TEST_CASE("ignored slots and rows are excluded from the mean") {
    int64_t n = 3, v = 5, s = 2;
    Tensor<double> logits({n, v});
    Rng rng(18);
    for (auto& z : logits.values()) z = rng.uniform();
    IntTensor bags({n, s});
    bags.data = {0, 1, 2, kIgnoreIndex, kIgnoreIndex, kIgnoreIndex};

    Graph<double> g;
    LossReport rep;
    auto loss =
        mce_loss(g, logits, bags, MceVariant::simplified, BagWeighting{}, &rep);
    CHECK(rep.positions == 2);
    CHECK(rep.valid_total == 3);
    CHECK(rep.valid_per_slot == std::vector<int64_t>{2, 1});

    // row 2 contributes nothing: value must match the 2-row instance
    Tensor<double> two({2, v},
                       std::vector<double>(logits.values().begin(),
                                           logits.values().begin() + 2 * v));
    IntTensor tb({2, s});
    std::copy_n(bags.data.begin(), 4, tb.data.begin());
    Graph<double> g2;
    auto ref = mce_loss(g2, two, tb, MceVariant::simplified, BagWeighting{});
    CHECK(loss.values()[0] == ref.values()[0]);
}

TEST_CASE("loss contracts reject bad inputs") {
    Tensor<double> logits({2, 4}, {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8});
    IntTensor bags({2, 2});
    bags.data = {0, 1, 2, 3};

    Graph<double> g;
    BagWeighting pw;
    pw.kind = WeightKind::power_law;
    CHECK_THROWS_AS(mce_loss(g, logits, bags, MceVariant::corrected, pw), ContractError);

    IntTensor bad({2, 2});
    bad.data = {0, 1, 4, 2};
    CHECK_THROWS_AS(mce_loss(g, logits, bad, MceVariant::simplified, BagWeighting{}),
                    ContractError);
    bad.data = {0, 1, -2, 2};
    CHECK_THROWS_AS(mce_loss(g, logits, bad, MceVariant::simplified, BagWeighting{}),
                    ContractError);

    IntTensor all_ign({2, 2});
    all_ign.data = {kIgnoreIndex, kIgnoreIndex, kIgnoreIndex, kIgnoreIndex};
    CHECK_THROWS_AS(mce_loss(g, logits, all_ign, MceVariant::simplified, BagWeighting{}),
                    ContractError);

    IntTensor labels({2});
    labels.data = {kIgnoreIndex, kIgnoreIndex};
    CHECK_THROWS_AS(ce_loss(g, logits, labels), ContractError);
    labels.data = {0, 9};
    CHECK_THROWS_AS(ce_loss(g, logits, labels), ContractError);

    IntTensor wrong({3, 2});
    wrong.data = {0, 1, 0, 1, 0, 1};
    CHECK_THROWS_AS(mce_loss(g, logits, wrong, MceVariant::simplified, BagWeighting{}),
                    ShapeError);
}

TEST_CASE("loss_for_phase dispatches on label rank") {
    Rng rng(19);
    int64_t b = 2, l = 3, s = 2, v = 6;
    Tensor<double> logits3({b, l, v});
    for (auto& z : logits3.values()) z = rng.uniform();

    IntTensor bag_labels({b, l, s});
    for (auto& y : bag_labels.data) y = (int32_t)rng.uniform_int(v);
    Graph<double> g1;
    auto sup = loss_for_phase(g1, Phase::superposition, logits3, bag_labels,
                              MceVariant::corrected, BagWeighting{});
    Graph<double> g2;
    auto direct = mce_loss(g2, logits3.reshaped({b * l, v}),
                           bag_labels.reshaped({b * l, s}), MceVariant::corrected,
                           BagWeighting{});
    CHECK(sup.values()[0] == direct.values()[0]);

    IntTensor flat_labels({b, l});
    for (auto& y : flat_labels.data) y = (int32_t)rng.uniform_int(v);
    Graph<double> g3;
    auto rec = loss_for_phase(g3, Phase::recovery, logits3, flat_labels,
                              MceVariant::corrected, BagWeighting{});
    Graph<double> g4;
    auto ce = ce_loss(g4, logits3.reshaped({b * l, v}), flat_labels.reshaped({b * l}));
    CHECK(rec.values()[0] == ce.values()[0]);

    Graph<double> g5;
    CHECK_THROWS_AS(loss_for_phase(g5, Phase::superposition, logits3, flat_labels,
                                   MceVariant::simplified, BagWeighting{}),
                    ShapeError);
    CHECK_THROWS_AS(loss_for_phase(g5, Phase::recovery, logits3, bag_labels,
                                   MceVariant::simplified, BagWeighting{}),
                    ShapeError);
}
