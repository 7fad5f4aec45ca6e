#include "tstlab/trainer.hpp"

#include <chrono>
#include <fstream>

#include "json.hpp"
#include "tstlab/analysis.hpp"
#include "tstlab/checkpoint.hpp"
#include "tstlab/metrics.hpp"
#include "tstlab/optim.hpp"
#include "tstlab/superpose.hpp"

namespace tstlab {

namespace {

namespace fs = std::filesystem;

// [B,l,s] bag targets -> [B,l] keeping slot 1 only: next-token prediction at
// bag granularity, for the input-only ablation.
IntTensor first_slot(const IntTensor& bags) {
    int64_t b = bags.dim(0), l = bags.dim(1), s = bags.dim(2);
    IntTensor out({b, l});
    for (int64_t i = 0; i < b * l; ++i) out.data[(size_t)i] = bags.data[(size_t)(i * s)];
    return out;
}

template <class T>
Checkpoint<T> snapshot(ModelState<T>& model, AdamW<T>& opt, uint64_t step, Phase phase,
                       uint64_t tokens, uint64_t cursor, uint64_t epoch,
                       const std::string& config_text) {
    Checkpoint<T> ck;
    ck.step = step;
    ck.phase = phase;
    ck.data_tokens_seen = tokens;
    ck.cursor = cursor;
    ck.epoch = epoch;
    ck.opt_steps = (uint64_t)opt.steps_taken();
    ck.config_text = config_text;
    auto params = named_params(model);
    ck.entries.resize(params.size());
    for (size_t i = 0; i < params.size(); ++i) {
        if (params[i].first != opt.name(i))
            throw ContractError("snapshot: optimizer order diverged at " + params[i].first);
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
void apply_checkpoint(const Checkpoint<T>& ck, ModelState<T>& model, AdamW<T>& opt) {
    auto params = named_params(model);
    if (ck.entries.size() != params.size())
        throw IoError("checkpoint: parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& e = ck.entries[i];
        if (e.name != params[i].first)
            throw IoError("checkpoint: expected parameter " + params[i].first + ", found " +
                          e.name);
        if (e.shape != params[i].second.shape())
            throw IoError("checkpoint: shape mismatch in " + e.name);
        auto vals = params[i].second.values();
        std::copy(e.values.begin(), e.values.end(), vals.begin());
        opt.moment1(i) = e.m;
        opt.moment2(i) = e.v;
    }
    opt.set_steps_taken((int64_t)ck.opt_steps);
}

template <class T>
RunResult run_loop(const RunConfig& cfg, const Corpus& corpus, const fs::path& dir) {
    validate(cfg);
    if (corpus.vocab != cfg.model.vocab)
        throw DataError("corpus vocab " + std::to_string(corpus.vocab) +
                        " does not match model vocab " + std::to_string(cfg.model.vocab));

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
    int64_t eval_need = cfg.eval.rows * plan.base_len * cfg.eval.batches + 1;
    if (holdout < eval_need)
        throw DataError("holdout of " + std::to_string(holdout) + " tokens cannot feed " +
                        std::to_string(cfg.eval.batches) + " eval batches (" +
                        std::to_string(eval_need) + " needed)");

    // One seed governs a run; the model block holds architecture only.
    ModelConfig mc = cfg.model;
    mc.init_seed = plan.seed;
    ModelState<T> model = init_model<T>(mc);
    AdamW<T> opt(named_params(model), plan.beta1, plan.beta2, plan.weight_decay,
                 plan.clip_norm);

    int64_t total = plan.total_steps;
    int64_t boundary = phase_boundary(cfg.sup, total);
    Ablation mode = cfg.sup.ablation;
    std::string sup_kind = mode == Ablation::input_only
                               ? "ce"
                               : std::string("mce_") + mce_variant_name(cfg.sup.variant);

    auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&t0] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    auto holdout_ce = [&] {
        return eval_ce<T>(model, corpus, train_limit, cfg.eval.rows, plan.base_len,
                          cfg.eval.batches);
    };

    RunResult res;
    res.run_dir = dir.string();
    int64_t tokens = 0, steps_done = 0;
    double last_loss = 0.0;

    auto write_summary = [&](const std::string& status, const std::string& message) {
        nlohmann::json j{{"run_name", cfg.run_name},
                         {"status", status},
                         {"s", cfg.sup.s},
                         {"r", cfg.sup.r},
                         {"seed", plan.seed},
                         {"ablation", ablation_name(cfg.sup.ablation)},
                         {"steps", steps_done},
                         {"data_tokens_seen", tokens},
                         {"final_train_loss", last_loss},
                         {"final_eval_ce", res.final_eval_ce},
                         {"param_count", param_count(cfg.model)},
                         {"wallclock", elapsed()}};
        if (!message.empty()) j["message"] = message;
        std::ofstream f(dir / "summary.json");
        f << j.dump(2) << "\n";
    };

    int64_t cursor = 0, epoch = 0;
    try {
        if (boundary > 0) {
            Phase stream_phase =
                mode == Ablation::output_only ? Phase::recovery : Phase::superposition;
            BatchStream stream(corpus, train_limit, (int)plan.batch_rows, (int)plan.base_len,
                               (int)cfg.sup.s, stream_phase);
            for (int64_t step = 0; step < boundary; ++step) {
                auto batch = stream.next();
                if (!batch) {
                    stream.restart();
                    batch = stream.next();
                    if (!batch) throw DataError("train region cannot fit one batch");
                }
                Graph<T> g;
                Tensor<T> logits = model_forward(g, model, batch->inputs, mode);
                LossReport rep;
                Tensor<T> loss;
                if (mode == Ablation::input_only) {
                    IntTensor lab = first_slot(batch->labels);
                    loss = ce_loss(g, logits.reshaped({lab.size(), mc.vocab}),
                                   lab.reshaped({lab.size()}), &rep);
                } else {
                    IntTensor bags = mode == Ablation::output_only
                                         ? overlap_labels(batch->labels, (int)cfg.sup.s)
                                         : batch->labels;
                    loss = loss_for_phase(g, Phase::superposition, logits, bags,
                                          cfg.sup.variant, cfg.sup.weighting, &rep);
                }
                g.backward(loss);
                double lr = wsd_lr(step, plan);
                opt.step(lr);
                opt.zero_grad();
                tokens += stream.batch_tokens();
                last_loss = (double)loss.item();
                steps_done = step + 1;

                MetricsRecord rec;
                rec.step = step;
                rec.phase = Phase::superposition;
                rec.loss_kind = sup_kind;
                rec.loss = last_loss;
                rec.lr = lr;
                rec.data_tokens_seen = tokens;
                rec.wallclock = elapsed();
                if ((cfg.eval.every > 0 && (step + 1) % cfg.eval.every == 0) ||
                    step + 1 == boundary || step + 1 == total) {
                    rec.has_eval = true;
                    rec.eval_ce = holdout_ce();
                }
                metrics.append(rec);
            }

            // The handoff always goes through disk: write the boundary state,
            // read it back, rebuild model and optimizer from the file.
            fs::path bpath = dir / "checkpoints" / "boundary.tstk";
            save_checkpoint(bpath, snapshot(model, opt, (uint64_t)boundary, Phase::recovery,
                                            (uint64_t)tokens, (uint64_t)stream.cursor(),
                                            (uint64_t)stream.epoch(), config_text));
            Checkpoint<T> loaded = load_checkpoint<T>(bpath);
            model = init_model<T>(mc);
            opt = AdamW<T>(named_params(model), plan.beta1, plan.beta2, plan.weight_decay,
                           plan.clip_norm);
            apply_checkpoint(loaded, model, opt);
            cursor = (int64_t)loaded.cursor;
            epoch = (int64_t)loaded.epoch;
            tokens = (int64_t)loaded.data_tokens_seen;

            if (cfg.sup.reinit_io) {
                reinit_io(model, cfg.sup.reinit_seed);
                opt.reset_moments("embedding");
                opt.reset_moments("head");
            }
            if (cfg.sup.reset_optimizer)
                opt = AdamW<T>(named_params(model), plan.beta1, plan.beta2, plan.weight_decay,
                               plan.clip_norm);
        }

        BatchStream stream(corpus, train_limit, (int)plan.batch_rows, (int)plan.base_len, 1,
                           Phase::recovery);
        stream.seek(cursor, epoch);
        for (int64_t step = boundary; step < total; ++step) {
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
            steps_done = step + 1;

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
                        snapshot(model, opt, (uint64_t)total, Phase::recovery, (uint64_t)tokens,
                                 (uint64_t)stream.cursor(), (uint64_t)stream.epoch(),
                                 config_text));
    } catch (const NumericError& e) {
        res.final_eval_ce = 0.0;
        write_summary("numeric_abort", e.what());
        throw;
    }

    res.final_eval_ce = holdout_ce();
    res.final_train_loss = last_loss;
    res.data_tokens_seen = tokens;
    res.steps = total;
    res.wallclock = elapsed();
    write_summary("ok", "");
    return res;
}

}  // namespace

RunResult run_two_phase(const RunConfig& cfg, const Corpus& corpus, const std::string& run_dir) {
    if (cfg.plan.precision == Precision::double_fp)
        return run_loop<double>(cfg, corpus, run_dir);
    return run_loop<float>(cfg, corpus, run_dir);
}

RunResult run_ablation(const std::string& kind, RunConfig cfg, const Corpus& corpus,
                       const std::string& run_dir) {
    if (kind == "reinit_io") {
        cfg.sup.ablation = Ablation::full;
        cfg.sup.reinit_io = true;
    } else {
        cfg.sup.ablation = ablation_from(kind);
    }
    validate(cfg.sup);
    if (cfg.sup.s < 2 || phase_boundary(cfg.sup, cfg.plan.total_steps) == 0)
        throw ConfigError("ablation run needs s >= 2 and r > 0");
    return run_two_phase(cfg, corpus, run_dir);
}

}  // namespace tstlab
