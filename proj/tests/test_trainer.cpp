#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "testutil.hpp"
#include "tstlab/analysis.hpp"
#include "tstlab/checkpoint.hpp"
#include "tstlab/metrics.hpp"
#include "tstlab/superpose.hpp"
#include "tstlab/trainer.hpp"

using namespace tstlab;

namespace {

RunConfig small_run(int64_t s, double r) {
    std::vector<std::string> sets{
        "run_name=t",
        "precision=double",
        "model.d_model=16",
        "model.n_layers=1",
        "model.n_heads=2",
        "model.d_ff=32",
        "model.vocab=13",
        "plan.total_steps=12",
        "plan.batch_rows=2",
        "plan.base_len=8",
        "plan.warmup_steps=2",
        "plan.seed=5",
        "data.vocab=13",
        "data.length=6000",
        "data.order=1",
        "eval.every=5",
        "eval.rows=2",
        "eval.batches=2",
        "superposition.s=" + std::to_string(s),
        "superposition.r=" + std::to_string(r),
    };
    return parse_run_config("{}", sets);
}

}  // namespace

TEST_CASE("bag of one embeds and forwards exactly like the flat path") {
    ModelConfig mc;
    mc.d_model = 16;
    mc.n_layers = 2;
    mc.n_heads = 2;
    mc.d_ff = 32;
    mc.vocab = 9;
    mc.init_seed = 3;
    auto m = init_model<double>(mc);
    Rng rng(6);
    int64_t b = 2, l = 5;
    IntTensor flat({b, l});
    for (auto& t : flat.data) t = (int32_t)rng.uniform_int(mc.vocab);
    IntTensor bag1 = flat.reshaped({b, l, 1});

    Graph<double> g1, g2;
    auto zf = model_forward_flat(g1, m, flat);
    auto zb = model_forward_bagged(g2, m, bag1);
    CHECK(testutil::to_vec(zf.values()) == testutil::to_vec(zb.values()));

    Graph<double> g3, g4;
    auto ef = gather_rows(g3, m.embedding, bag1);
    auto eb = superpose_embed(g4, m.embedding, bag1);
    CHECK(testutil::to_vec(ef.values()) == testutil::to_vec(eb.values()));
}

TEST_CASE("superposed embedding is the bag mean, accumulated in double") {
    Rng rng(7);
    int64_t v = 6, d = 4, bl = 3, s = 3;
    Tensor<double> table({v, d});
    for (auto& x : table.values()) x = rng.normal();
    IntTensor bags({1, bl, s});
    for (auto& t : bags.data) t = (int32_t)rng.uniform_int(v);

    Graph<double> g;
    auto out = superpose_embed(g, table, bags);
    REQUIRE(out.shape() == Shape{bl, d});
    for (int64_t p = 0; p < bl; ++p)
        for (int64_t c = 0; c < d; ++c) {
            double want = 0.0;
            for (int64_t i = 0; i < s; ++i)
                want += table.values()[(size_t)(bags.data[(size_t)(p * s + i)] * d + c)];
            want /= (double)s;
            CHECK(out.values()[(size_t)(p * d + c)] == doctest::Approx(want).epsilon(1e-15));
        }

    // gradient splits the upstream signal evenly across the bag
    Tensor<double> gt({v, d}, true);
    for (size_t i = 0; i < gt.values().size(); ++i) gt.values()[i] = table.values()[i];
    Graph<double> g2;
    auto node = superpose_embed(g2, gt, bags);
    auto loss = sum_all(g2, node);
    g2.backward(loss);
    std::vector<double> want_grad((size_t)(v * d), 0.0);
    for (int64_t p = 0; p < bl; ++p)
        for (int64_t i = 0; i < s; ++i)
            for (int64_t c = 0; c < d; ++c)
                want_grad[(size_t)(bags.data[(size_t)(p * s + i)] * d + c)] += 1.0 / (double)s;
    for (size_t i = 0; i < want_grad.size(); ++i)
        CHECK(gt.grad()[i] == doctest::Approx(want_grad[i]).epsilon(1e-12));

    IntTensor bad({1, 1, 2});
    bad.data = {0, 6};
    Graph<double> g3;
    CHECK_THROWS_AS(superpose_embed(g3, table, bad), ContractError);
}

TEST_CASE("bagged forward is causal across latent positions") {
    ModelConfig mc;
    mc.d_model = 16;
    mc.n_layers = 1;
    mc.n_heads = 2;
    mc.d_ff = 32;
    mc.vocab = 7;
    mc.init_seed = 9;
    auto m = init_model<double>(mc);
    Rng rng(10);
    int64_t l = 4, s = 3;
    IntTensor base({1, l, s});
    for (auto& t : base.data) t = (int32_t)rng.uniform_int(mc.vocab);

    Graph<double> g0;
    auto refv = testutil::to_vec(model_forward_bagged(g0, m, base).values());

    for (int64_t j = 0; j < l; ++j) {
        IntTensor bumped = base;
        size_t at = (size_t)(j * s + 1);
        bumped.data[at] = (bumped.data[at] + 1) % (int32_t)mc.vocab;
        Graph<double> g;
        auto outv = testutil::to_vec(model_forward_bagged(g, m, bumped).values());
        for (int64_t u = 0; u < l; ++u) {
            bool same = true;
            for (int64_t k = 0; k < mc.vocab; ++k)
                same = same && outv[(size_t)(u * mc.vocab + k)] ==
                                   refv[(size_t)(u * mc.vocab + k)];
            if (u < j) CHECK(same);
            else if (u == j) CHECK_FALSE(same);
        }
    }
}

TEST_CASE("mode-checked forward rejects mismatched ranks") {
    ModelConfig mc;
    mc.d_model = 16;
    mc.n_layers = 1;
    mc.n_heads = 2;
    mc.d_ff = 32;
    mc.vocab = 5;
    auto m = init_model<double>(mc);
    IntTensor flat({1, 4});
    flat.data = {0, 1, 2, 3};
    IntTensor bagged({1, 2, 2});
    bagged.data = {0, 1, 2, 3};

    Graph<double> g;
    CHECK_THROWS_AS(model_forward(g, m, flat, Ablation::full), ContractError);
    CHECK_THROWS_AS(model_forward(g, m, bagged, Ablation::output_only), ContractError);
    CHECK(model_forward(g, m, bagged, Ablation::input_only).shape() ==
          Shape{1, 2, mc.vocab});
    Graph<double> g2;
    CHECK(model_forward(g2, m, flat, Ablation::none).shape() == Shape{1, 4, mc.vocab});
}

TEST_CASE("two-phase run accounts for every data token") {
    testutil::TmpDir tmp("run");
    RunConfig cfg = small_run(2, 0.5);
    Corpus corpus = open_corpus(cfg.data);
    RunResult res = run_two_phase(cfg, corpus, (tmp.path() / "a").string());

    // 6 superposed steps at 2*8*2 tokens, then 6 plain steps at 2*8
    CHECK(res.steps == 12);
    CHECK(res.data_tokens_seen == 6 * 32 + 6 * 16);

    auto recs = read_metrics(tmp.path() / "a" / "metrics.jsonl");
    REQUIRE((int64_t)recs.size() == 12);
    CHECK(recs[0].phase == Phase::superposition);
    CHECK(recs[0].loss_kind == "mce_simplified");
    CHECK(recs[0].data_tokens_seen == 32);
    CHECK(recs[6].phase == Phase::recovery);
    CHECK(recs[6].loss_kind == "ce");
    CHECK(recs[11].data_tokens_seen == res.data_tokens_seen);
    CHECK(recs[4].has_eval);   // every=5
    CHECK(recs[5].has_eval);   // boundary
    CHECK(recs[11].has_eval);  // final
    CHECK_FALSE(recs[7].has_eval);

    namespace fs = std::filesystem;
    CHECK(fs::exists(tmp.path() / "a" / "config.json"));
    CHECK(fs::exists(tmp.path() / "a" / "summary.json"));
    CHECK(fs::exists(tmp.path() / "a" / "checkpoints" / "boundary.tstk"));
    CHECK(fs::exists(tmp.path() / "a" / "checkpoints" / "final.tstk"));

    auto ck = load_checkpoint<double>(tmp.path() / "a" / "checkpoints" / "boundary.tstk");
    CHECK(ck.step == 6);
    // the boundary file describes the state entering step 6, i.e. recovery
    CHECK(ck.phase == Phase::recovery);
    CHECK(ck.data_tokens_seen == 6 * 32);
    CHECK(ck.opt_steps == 6);

    nlohmann::json summary;
    std::ifstream(tmp.path() / "a" / "summary.json") >> summary;
    CHECK(summary.at("status") == "ok");
    CHECK(summary.at("s") == 2);
    CHECK(summary.at("data_tokens_seen") == res.data_tokens_seen);
    CHECK(summary.at("final_eval_ce") == res.final_eval_ce);
}

TEST_CASE("replaying the config snapshot reproduces the metrics stream") {
    testutil::TmpDir tmp("replay");
    RunConfig cfg = small_run(2, 0.5);
    Corpus corpus = open_corpus(cfg.data);
    run_two_phase(cfg, corpus, (tmp.path() / "a").string());

    std::ifstream snap(tmp.path() / "a" / "config.json");
    std::stringstream ss;
    ss << snap.rdbuf();
    RunConfig replay = parse_run_config(ss.str(), {});
    run_two_phase(replay, open_corpus(replay.data), (tmp.path() / "b").string());

    auto ra = read_metrics(tmp.path() / "a" / "metrics.jsonl");
    auto rb = read_metrics(tmp.path() / "b" / "metrics.jsonl");
    std::string why;
    CHECK_MESSAGE(metrics_match(ra, rb, &why), why);
}

TEST_CASE("r=0 never superposes and r=1 never recovers") {
    testutil::TmpDir tmp("edges");
    RunConfig flat = small_run(2, 0.0);
    Corpus corpus = open_corpus(flat.data);
    run_two_phase(flat, corpus, (tmp.path() / "r0").string());
    for (const auto& rec : read_metrics(tmp.path() / "r0" / "metrics.jsonl")) {
        CHECK(rec.phase == Phase::recovery);
        CHECK(rec.loss_kind == "ce");
    }
    CHECK_FALSE(std::filesystem::exists(tmp.path() / "r0" / "checkpoints" / "boundary.tstk"));

    RunConfig all = small_run(2, 1.0);
    run_two_phase(all, corpus, (tmp.path() / "r1").string());
    auto recs = read_metrics(tmp.path() / "r1" / "metrics.jsonl");
    for (const auto& rec : recs) CHECK(rec.phase == Phase::superposition);
    CHECK(recs.back().data_tokens_seen == 12 * 32);
}

TEST_CASE("ablation runs reshape the data path as advertised") {
    testutil::TmpDir tmp("abl");
    RunConfig cfg = small_run(2, 0.5);
    Corpus corpus = open_corpus(cfg.data);

    auto inp = run_ablation("input_only", cfg, corpus, (tmp.path() / "in").string());
    auto in_recs = read_metrics(tmp.path() / "in" / "metrics.jsonl");
    CHECK(in_recs[0].loss_kind == "ce");  // bagged inputs, plain first-slot target
    CHECK(in_recs[0].phase == Phase::superposition);
    CHECK(in_recs[0].data_tokens_seen == 32);  // still consumes the stretched window

    auto out = run_ablation("output_only", cfg, corpus, (tmp.path() / "out").string());
    auto out_recs = read_metrics(tmp.path() / "out" / "metrics.jsonl");
    CHECK(out_recs[0].loss_kind == "mce_simplified");
    CHECK(out_recs[0].data_tokens_seen == 16);  // flat window, no stretch

    auto re = run_ablation("reinit_io", cfg, corpus, (tmp.path() / "re").string());
    nlohmann::json summary;
    std::ifstream(tmp.path() / "re" / "summary.json") >> summary;
    CHECK(summary.at("ablation") == "full");
    CHECK(summary.at("status") == "ok");

    // reinit run diverges from the plain one after the boundary
    auto plain = run_two_phase(cfg, corpus, (tmp.path() / "pl").string());
    auto re_recs = read_metrics(tmp.path() / "re" / "metrics.jsonl");
    auto pl_recs = read_metrics(tmp.path() / "pl" / "metrics.jsonl");
    CHECK(re_recs[5].loss == pl_recs[5].loss);  // identical first phase
    CHECK(re_recs[6].loss != pl_recs[6].loss);
    CHECK(re.final_eval_ce != plain.final_eval_ce);

    CHECK_THROWS_AS(run_ablation("sideways", cfg, corpus, (tmp.path() / "x").string()),
                    ConfigError);
    RunConfig s1 = small_run(1, 0.5);
    CHECK_THROWS_AS(run_ablation("full", s1, corpus, (tmp.path() / "y").string()),
                    ConfigError);
    RunConfig r0 = small_run(2, 0.0);
    CHECK_THROWS_AS(run_ablation("full", r0, corpus, (tmp.path() / "z").string()),
                    ConfigError);
}

TEST_CASE("reset_optimizer drops every moment at the boundary") {
    testutil::TmpDir tmp("resetopt");
    RunConfig cfg = small_run(2, 0.5);
    Corpus corpus = open_corpus(cfg.data);
    auto keep = run_two_phase(cfg, corpus, (tmp.path() / "keep").string());
    cfg.sup.reset_optimizer = true;
    auto drop = run_two_phase(cfg, corpus, (tmp.path() / "drop").string());
    auto ka = read_metrics(tmp.path() / "keep" / "metrics.jsonl");
    auto da = read_metrics(tmp.path() / "drop" / "metrics.jsonl");
    CHECK(ka[5].loss == da[5].loss);
    // the step-6 loss is computed before the first diverging update lands
    CHECK(ka[6].loss == da[6].loss);
    CHECK(ka[7].loss != da[7].loss);
    CHECK(keep.final_eval_ce != drop.final_eval_ce);
}

TEST_CASE("the trainer rejects a corpus that disagrees with the config") {
    testutil::TmpDir tmp("vocab");
    RunConfig cfg = small_run(2, 0.5);
    Corpus corpus = open_corpus(cfg.data);
    corpus.vocab = 29;
    CHECK_THROWS_AS(run_two_phase(cfg, corpus, (tmp.path() / "a").string()), DataError);
}

TEST_CASE("open_corpus dispatches on the data kind") {
    testutil::TmpDir tmp("open");
    DataSpec spec;
    spec.kind = "markov";
    spec.markov.vocab = 5;
    spec.markov.order = 1;
    spec.markov.length = 100;
    Corpus a = open_corpus(spec);
    CHECK(a.vocab == 5);
    CHECK(a.size() == 100);

    Corpus file;
    file.vocab = 4;
    file.tokens = {0, 1, 2, 3, 2, 1};
    save_corpus(file, tmp.path() / "t.tstc");
    DataSpec disk;
    disk.kind = "tokens";
    disk.path = (tmp.path() / "t.tstc").string();
    Corpus b = open_corpus(disk);
    CHECK(b.vocab == 4);
    CHECK(b.tokens == file.tokens);
}

TEST_CASE("in-process sweep writes one run per cell plus the grid") {
    testutil::TmpDir tmp("sweep-run");
    RunConfig cfg = small_run(2, 0.5);
    cfg.sweep.s = {1, 2};
    cfg.sweep.r = {0.5};
    cfg.sweep.seeds = {1, 2};
    int failures = run_sweep(cfg, (tmp.path() / "grid").string(), 1);
    CHECK(failures == 0);

    namespace fs = std::filesystem;
    int cells = 0;
    for (auto& e : fs::directory_iterator(tmp.path() / "grid"))
        if (e.is_directory()) ++cells;
    CHECK(cells == 4);
    CHECK(fs::exists(tmp.path() / "grid" / "summary.csv"));
    CHECK(fs::exists(tmp.path() / "grid" / "s2_r0.5_seed1" / "summary.json"));

    std::ifstream csv(tmp.path() / "grid" / "summary.csv");
    std::string header;
    std::getline(csv, header);
    CHECK(header == "r\\s,1,2");
}
