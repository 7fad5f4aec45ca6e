#include <fstream>
#include <numeric>

#include "doctest.h"
#include "testutil.hpp"
#include "tstlab/data.hpp"

using namespace tstlab;

TEST_CASE("corpus files round-trip and validate") {
    testutil::TmpDir tmp("corpus");
    Corpus c;
    c.vocab = 17;
    c.tokens = {0, 5, 16, 3, 3, 7, 1};
    c.source = "unit";
    auto path = tmp.path() / "toks.tstc";
    save_corpus(c, path);
    Corpus d = load_corpus(path);
    CHECK(d.vocab == 17);
    CHECK(d.tokens == c.tokens);

    // raw bytes without the magic load as a byte corpus
    auto raw = tmp.path() / "raw.bin";
    {
        std::ofstream f(raw, std::ios::binary);
        const unsigned char bytes[] = {65, 0, 255, 10};
        f.write((const char*)bytes, 4);
    }
    Corpus r = load_corpus(raw);
    CHECK(r.vocab == 256);
    CHECK(r.tokens == std::vector<int32_t>{65, 0, 255, 10});

    CHECK_THROWS_AS(load_corpus(tmp.path() / "missing.tstc"), IoError);
}

TEST_CASE("corpus rejects ids outside the declared vocab") {
    testutil::TmpDir tmp("corpus-bad");
    Corpus c;
    c.vocab = 4;
    c.tokens = {0, 1, 2, 3};
    auto path = tmp.path() / "t.tstc";
    save_corpus(c, path);
    // corrupt one id beyond the vocab, directly in the file
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-4, std::ios::end);
        int32_t bad = 9;
        f.write((const char*)&bad, 4);
    }
    CHECK_THROWS_AS(load_corpus(path), DataError);
}

TEST_CASE("markov synthesis is deterministic and respects the spec") {
    MarkovSpec spec;
    spec.order = 2;
    spec.vocab = 8;
    spec.length = 4096;
    spec.seed = 5;
    Corpus a = synth_markov(spec), b = synth_markov(spec);
    CHECK(a.tokens == b.tokens);
    CHECK(a.vocab == 8);
    CHECK(a.size() == 4096);
    for (int32_t t : a.tokens) {
        REQUIRE(t >= 0);
        REQUIRE(t < 8);
    }
    spec.seed = 6;
    CHECK(synth_markov(spec).tokens != a.tokens);
}

TEST_CASE("markov transition rows are distributions") {
    MarkovChain chain(2, 6, 11, 0.3);
    CHECK(chain.states() == 36);
    const auto& rows = chain.rows();
    for (int64_t s = 0; s < chain.states(); ++s) {
        double total = 0.0;
        for (int32_t y = 0; y < 6; ++y) {
            double p = rows[(size_t)(s * 6 + y)];
            REQUIRE(p >= 0.0);
            total += p;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("fold_inputs groups contiguous bags for every bag size") {
    Rng rng(3);
    for (int s = 1; s <= 8; ++s) {
        int64_t b = 3, l = 8 * s;
        IntTensor toks({b, l});
        for (auto& t : toks.data) t = (int32_t)rng.uniform_int(100);
        IntTensor folded = fold_inputs(toks, s);
        REQUIRE(folded.shape == Shape{b, l / s, s});
        for (int64_t r = 0; r < b; ++r)
            for (int64_t j = 0; j < l / s; ++j)
                for (int64_t i = 0; i < s; ++i)
                    CHECK(folded.data[(size_t)((r * (l / s) + j) * s + i)] ==
                          toks.data[(size_t)(r * l + j * s + i)]);
    }
    IntTensor odd({1, 7});
    CHECK_THROWS_AS(fold_inputs(odd, 2), ShapeError);
}

TEST_CASE("shift_labels matches the index-arithmetic oracle for every bag size") {
    Rng rng(4);
    for (int s = 1; s <= 8; ++s) {
        int64_t b = 2, l = 6 * s;
        // labels[k] is the next token after position k: base + k + 1
        IntTensor labels({b, l});
        for (int64_t r = 0; r < b; ++r)
            for (int64_t k = 0; k < l; ++k)
                labels.data[(size_t)(r * l + k)] = (int32_t)(1000 * r + k + 1);
        IntTensor bagged = shift_labels(labels, s);
        REQUIRE(bagged.shape == Shape{b, l / s, s});
        for (int64_t r = 0; r < b; ++r)
            for (int64_t j = 0; j < l / s; ++j)
                for (int64_t i = 0; i < s; ++i) {
                    int32_t got = bagged.data[(size_t)((r * (l / s) + j) * s + i)];
                    // bag j, slot i targets absolute token position j*s + s + i
                    int64_t target = j * s + s + i;
                    if (target <= l)
                        CHECK(got == (int32_t)(1000 * r + target));
                    else
                        CHECK(got == kIgnoreIndex);
                }
        // the last bag keeps exactly one valid slot
        int64_t last = (l / s - 1) * s;
        CHECK(bagged.data[(size_t)(last + 0)] != kIgnoreIndex);
        for (int64_t i = 1; i < s; ++i)
            CHECK(bagged.data[(size_t)(last + i)] == kIgnoreIndex);
    }
}

TEST_CASE("overlap_labels clips at the row end") {
    int64_t b = 1, l = 5;
    int s = 3;
    IntTensor labels({b, l});
    std::iota(labels.data.begin(), labels.data.end(), 100);
    IntTensor out = overlap_labels(labels, s);
    REQUIRE(out.shape == Shape{b, l, (int64_t)s});
    for (int64_t t = 0; t < l; ++t)
        for (int64_t i = 0; i < s; ++i) {
            int32_t got = out.data[(size_t)(t * s + i)];
            if (t + i < l)
                CHECK(got == (int32_t)(100 + t + i));
            else
                CHECK(got == kIgnoreIndex);
        }
}

TEST_CASE("batch stream windows, accounting, restart and seek") {
    Corpus c;
    c.vocab = 1000;
    c.tokens.resize(100);
    std::iota(c.tokens.begin(), c.tokens.end(), 0);

    BatchStream st(c, 90, 2, 4, 1, Phase::recovery);
    CHECK(st.window() == 4);
    CHECK(st.batch_tokens() == 8);
    auto b1 = st.next();
    REQUIRE(b1.has_value());
    CHECK(b1->inputs.shape == Shape{2, 4});
    // row 0 covers tokens [0,4), row 1 covers [4,8); labels are the successors
    for (int64_t k = 0; k < 4; ++k) {
        CHECK(b1->inputs.data[(size_t)k] == (int32_t)k);
        CHECK(b1->labels.data[(size_t)k] == (int32_t)(k + 1));
        CHECK(b1->inputs.data[(size_t)(4 + k)] == (int32_t)(4 + k));
        CHECK(b1->labels.data[(size_t)(4 + k)] == (int32_t)(5 + k));
    }
    CHECK(st.cursor() == 8);

    // drains when fewer than rows*window+1 tokens remain, then restarts
    int batches = 1;
    while (st.next()) ++batches;
    CHECK(batches == 11);  // 90 tokens: 11 windows of 8 plus label slack
    CHECK(st.epoch() == 0);
    st.restart();
    CHECK(st.epoch() == 1);
    auto again = st.next();
    REQUIRE(again.has_value());
    CHECK(again->inputs.data[0] == 0);

    // seek replays the same position
    st.seek(16, 3);
    auto seeked = st.next();
    REQUIRE(seeked.has_value());
    CHECK(seeked->inputs.data[0] == 16);
    CHECK(st.epoch() == 3);
    CHECK_THROWS_AS(st.seek(-1, 0), ContractError);
    CHECK_THROWS_AS(st.seek(91, 0), ContractError);
}

TEST_CASE("superposition stream consumes rows * base_len * bag tokens per batch") {
    Corpus c;
    c.vocab = 1000;
    c.tokens.resize(400);
    std::iota(c.tokens.begin(), c.tokens.end(), 0);

    for (int s = 1; s <= 8; ++s) {
        BatchStream st(c, 400, 3, 4, s, Phase::superposition);
        CHECK(st.batch_tokens() == 3 * 4 * s);
        auto b = st.next();
        REQUIRE(b.has_value());
        CHECK(b->inputs.shape == Shape{3, 4, (int64_t)s});
        CHECK(b->labels.shape == Shape{3, 4, (int64_t)s});
        CHECK(st.cursor() == 3 * 4 * s);
        // bag contents come straight from the corpus window
        for (int64_t j = 0; j < 4; ++j)
            for (int64_t i = 0; i < s; ++i)
                CHECK(b->inputs.data[(size_t)(j * s + i)] == (int32_t)(j * s + i));
    }

    CHECK_THROWS_AS(BatchStream(c, 10, 4, 8, 2, Phase::superposition), DataError);
    CHECK_THROWS_AS(BatchStream(c, 500, 1, 1, 1, Phase::recovery), ContractError);
}
