// Plain next-token training reference. Deliberately self-contained: no bag
// embedding, no bag losses, no two-phase trainer are linked or instantiated
// here. An r=0 run of the main binary must match this one metric for metric,
// which is only convincing if this binary cannot contain that code path.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tstlab/analysis.hpp"
#include "tstlab/checkpoint.hpp"
#include "tstlab/config.hpp"
#include "tstlab/metrics.hpp"
#include "tstlab/optim.hpp"

namespace fs = std::filesystem;
using namespace tstlab;

namespace {

template <class T>
Checkpoint<T> snapshot(ModelState<T>& model, AdamW<T>& opt, uint64_t step, uint64_t tokens,
                       uint64_t cursor, uint64_t epoch, const std::string& config_text) {
    Checkpoint<T> ck;
    ck.step = step;
    ck.phase = Phase::recovery;
    ck.data_tokens_seen = tokens;
    ck.cursor = cursor;
    ck.epoch = epoch;
    ck.opt_steps = (uint64_t)opt.steps_taken();
    ck.config_text = config_text;
    auto params = named_params(model);
    ck.entries.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        auto& e = ck.entries[i];
        e.name = params[i].first;
        e.shape = params[i].second.shape();
        auto vals = params[i].second.values();
        e.values.assign(vals.begin(), vals.end());
        e.m = opt.moment1(i);
        e.v = opt.moment2(i);
    }
    return ck;
}

template <class T>
int train_plain(const RunConfig& cfg, const Corpus& corpus, const fs::path& dir) {
    validate(cfg);
    if (corpus.vocab != cfg.model.vocab) {
        std::fprintf(stderr, "corpus vocab does not match model vocab\n");
        return 3;
    }

    fs::create_directories(dir / "checkpoints");
    std::string config_text = render_run_config(cfg);
    {
        std::ofstream f(dir / "config.json");
        f << config_text;
        if (!f) throw IoError("cannot write config snapshot under " + dir.string());
    }
    MetricsWriter metrics(dir / "metrics.jsonl");

    const TrainPlan& plan = cfg.plan;
    int64_t holdout = (int64_t)std::llround(cfg.data.holdout_fraction * (double)corpus.size());
    int64_t train_limit = corpus.size() - holdout;

    ModelConfig mc = cfg.model;
    mc.init_seed = plan.seed;
    ModelState<T> model = init_model<T>(mc);
    AdamW<T> opt(named_params(model), plan.beta1, plan.beta2, plan.weight_decay,
                 plan.clip_norm);

    int64_t total = plan.total_steps;
    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto holdout_ce = [&] {
        return eval_ce<T>(model, corpus, train_limit, cfg.eval.rows, plan.base_len,
                          cfg.eval.batches);
    };

    int64_t tokens = 0;
    double last_loss = 0.0;

    BatchStream stream(corpus, train_limit, (int)plan.batch_rows, (int)plan.base_len, 1,
                       Phase::recovery);
    stream.seek(0, 0);
    for (int64_t step = 0; step < total; ++step) {
        auto batch = stream.next();
        if (!batch) {
            stream.restart();
            batch = stream.next();
            if (!batch) throw DataError("train region cannot fit one batch");
        }
        Graph<T> g;
        Tensor<T> logits = model_forward_flat(g, model, batch->inputs);
        LossReport rep;
        Tensor<T> loss = ce_loss(g, logits.reshaped({batch->labels.size(), mc.vocab}),
                                 batch->labels.reshaped({batch->labels.size()}), &rep);
        g.backward(loss);
        double lr = wsd_lr(step, plan);
        opt.step(lr);
        opt.zero_grad();
        tokens += stream.batch_tokens();
        last_loss = (double)loss.item();

        MetricsRecord rec;
        rec.step = step;
        rec.phase = Phase::recovery;
        rec.loss_kind = "ce";
        rec.loss = last_loss;
        rec.lr = lr;
        rec.data_tokens_seen = tokens;
        rec.wallclock = elapsed();
        if ((cfg.eval.every > 0 && (step + 1) % cfg.eval.every == 0) || step + 1 == total) {
            rec.has_eval = true;
            rec.eval_ce = holdout_ce();
        }
        metrics.append(rec);
    }

    save_checkpoint(dir / "checkpoints" / "final.tstk",
                    snapshot(model, opt, (uint64_t)total, (uint64_t)tokens,
                             (uint64_t)stream.cursor(), (uint64_t)stream.epoch(), config_text));

    double final_eval = holdout_ce();
    nlohmann::json j{{"run_name", cfg.run_name},
                     {"status", "ok"},
                     {"s", cfg.sup.s},
                     {"r", cfg.sup.r},
                     {"seed", plan.seed},
                     {"ablation", ablation_name(cfg.sup.ablation)},
                     {"steps", total},
                     {"data_tokens_seen", tokens},
                     {"final_train_loss", last_loss},
                     {"final_eval_ce", final_eval},
                     {"param_count", param_count(cfg.model)},
                     {"wallclock", elapsed()}};
    std::ofstream f(dir / "summary.json");
    f << j.dump(2) << "\n";
    std::printf("%s: final_loss=%.4f eval_ce=%.4f tokens=%lld wallclock=%.1fs\n",
                dir.string().c_str(), last_loss, final_eval, (long long)tokens, elapsed());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"plain next-token training reference"};
    std::string config_path, out;
    std::vector<std::string> sets;
    int64_t seed = -1;
    std::string precision;
    app.add_option("--config", config_path, "run config file");
    app.add_option("--set", sets, "dotted-key override, key=value, repeatable");
    app.add_option("--out", out, "output directory")->required();
    app.add_option("--seed", seed, "override plan.seed");
    app.add_option("--precision", precision, "single | double")
        ->check(CLI::IsMember({"single", "double"}));

    try {
        app.parse(argc, argv);
        if (seed >= 0) sets.push_back("plan.seed=" + std::to_string(seed));
        if (!precision.empty()) sets.push_back("precision=" + precision);
        RunConfig cfg = config_path.empty() ? parse_run_config("{}", sets)
                                            : load_run_config(config_path, sets);
        if (phase_boundary(cfg.sup, cfg.plan.total_steps) != 0) {
            std::fprintf(stderr, "reference build trains plain next-token only (needs r=0)\n");
            return 2;
        }
        Corpus corpus = cfg.data.kind == "markov" ? synth_markov(cfg.data.markov)
                                                  : load_corpus(cfg.data.path);
        if (cfg.plan.precision == Precision::double_fp)
            return train_plain<double>(cfg, corpus, out);
        return train_plain<float>(cfg, corpus, out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric abort: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 5;
    }
}
