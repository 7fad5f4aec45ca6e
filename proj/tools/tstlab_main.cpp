#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tstlab/analysis.hpp"
#include "tstlab/checkpoint.hpp"
#include "tstlab/gradcheck.hpp"
#include "tstlab/trainer.hpp"

namespace fs = std::filesystem;
using namespace tstlab;

namespace {

// 0 ok, 1 usage (CLI11 uses >= 100 for parse errors), then one code per
// failure class so scripts can tell them apart.
constexpr int kConfigExit = 2;
constexpr int kDataExit = 3;
constexpr int kNumericExit = 4;
constexpr int kOtherExit = 5;

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    int64_t seed = -1;
    std::string precision;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "run config file (JSON, // comments allowed)");
    cmd->add_option("--set", o.sets, "dotted-key override, key=value, repeatable, last wins");
    cmd->add_option("--out", o.out, "output directory (default $TSTLAB_OUT/<run name>)");
    cmd->add_option("--seed", o.seed, "override plan.seed");
    cmd->add_option("--precision", o.precision, "single | double")
        ->check(CLI::IsMember({"single", "double"}));
}

RunConfig load_cfg(const CommonOpts& o) {
    // --seed / --precision are sugar for trailing --set overrides.
    std::vector<std::string> sets = o.sets;
    if (o.seed >= 0) sets.push_back("plan.seed=" + std::to_string(o.seed));
    if (!o.precision.empty()) sets.push_back("precision=" + o.precision);
    return o.config_path.empty() ? parse_run_config("{}", sets)
                                 : load_run_config(o.config_path, sets);
}

fs::path resolve_out(const CommonOpts& o, const std::string& leaf) {
    if (!o.out.empty()) return o.out;
    const char* env = std::getenv("TSTLAB_OUT");
    return fs::path(env && *env ? env : "runs") / leaf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
    if (!f) throw IoError("cannot write " + path.string());
}

template <class T>
void restore_entries(const Checkpoint<T>& ck, ModelState<T>& model) {
    auto params = named_params(model);
    if (params.size() != ck.entries.size())
        throw IoError("checkpoint does not match the configured model");
    for (size_t i = 0; i < params.size(); ++i) {
        const auto& e = ck.entries[i];
        if (e.name != params[i].first || e.shape != params[i].second.shape())
            throw IoError("checkpoint does not match the configured model (at " + e.name + ")");
        auto vals = params[i].second.values();
        std::copy(e.values.begin(), e.values.end(), vals.begin());
    }
}

// Config priority for checkpoint-driven verbs: explicit --config file, else
// the snapshot embedded in the checkpoint; overrides apply either way.
template <class T>
std::pair<Checkpoint<T>, RunConfig> load_ck_and_cfg(const std::string& ck_path,
                                                    const CommonOpts& o) {
    Checkpoint<T> ck = load_checkpoint<T>(ck_path);
    std::vector<std::string> sets = o.sets;
    if (o.seed >= 0) sets.push_back("plan.seed=" + std::to_string(o.seed));
    RunConfig cfg = o.config_path.empty() ? parse_run_config(ck.config_text, sets)
                                          : load_run_config(o.config_path, sets);
    return {std::move(ck), std::move(cfg)};
}

template <class T>
void do_eval(const std::string& ck_path, const CommonOpts& o) {
    auto [ck, cfg] = load_ck_and_cfg<T>(ck_path, o);
    ModelConfig mc = cfg.model;
    mc.init_seed = cfg.plan.seed;
    ModelState<T> model = init_model<T>(mc);
    restore_entries(ck, model);
    Corpus corpus = open_corpus(cfg.data);
    int64_t holdout = (int64_t)std::llround(cfg.data.holdout_fraction * (double)corpus.size());
    double ce = eval_ce<T>(model, corpus, corpus.size() - holdout, cfg.eval.rows,
                           cfg.plan.base_len, cfg.eval.batches);
    std::printf("eval_ce=%.6f step=%llu tokens_seen=%llu holdout_tokens=%lld\n", ce,
                (unsigned long long)ck.step, (unsigned long long)ck.data_tokens_seen,
                (long long)holdout);
}

template <class T>
void do_generate(const std::string& ck_path, const CommonOpts& o, const std::string& prompt_text,
                 int64_t length, double temperature) {
    auto [ck, cfg] = load_ck_and_cfg<T>(ck_path, o);
    ModelConfig mc = cfg.model;
    mc.init_seed = cfg.plan.seed;
    ModelState<T> model = init_model<T>(mc);
    restore_entries(ck, model);

    std::vector<int32_t> prompt;
    std::istringstream ss(prompt_text);
    for (std::string tok; ss >> tok;) {
        if (!tok.empty() && tok.back() == ',') tok.pop_back();
        try {
            prompt.push_back((int32_t)std::stol(tok));
        } catch (const std::exception&) {
            throw DataError("prompt token '" + tok + "' is not an integer id");
        }
    }
    uint64_t seed = o.seed >= 0 ? (uint64_t)o.seed : 7;
    std::vector<int32_t> out = generate(model, prompt, length, temperature, seed);
    for (size_t i = 0; i < out.size(); ++i) std::printf("%s%d", i ? " " : "", out[i]);
    std::printf("\n");
}

// ---------------------------------------------------------------------------
// selftest: quick oracle suites over the loss family and the model gradients.
// Double precision by default so the tolerances can stay tight.

template <class T>
int selftest_run() {
    // Float differences carry the quantization of a float loss value, about
    // 3e-5 on the derivative at this eps, so the single-precision pass only
    // screens for structural mistakes; the tight run is the double one.
    const bool dbl = sizeof(T) == 8;
    const double tol_val = dbl ? 1e-9 : 1e-4;
    const double tol_grad = dbl ? 1e-3 : 5e-2;
    const double grad_floor = dbl ? 1e-6 : 1e-2;
    const T fd_eps = (T)(dbl ? 1e-5 : 1e-2);
    int failed = 0;
    auto report = [&failed](const char* name, bool ok, double worst) {
        std::printf("%-36s %s  (worst %.3g)\n", name, ok ? "ok" : "FAIL", worst);
        if (!ok) ++failed;
    };
    Rng rng(20260816);
    BagWeighting uni;

    {
        // corrected = simplified - log(bag size) on full bags, same gradient
        double wv = 0.0, wg = 0.0;
        for (int it = 0; it < 1000; ++it) {
            int64_t v = 2 + rng.uniform_int(31);
            int64_t s = 1 + rng.uniform_int(8);
            int64_t n = 1 + rng.uniform_int(6);
            Tensor<T> za = Tensor<T>::randn({n, v}, rng, (T)2, true);
            Tensor<T> zb({n, v}, true);
            std::copy(za.values().begin(), za.values().end(), zb.values().begin());
            IntTensor bags({n, s});
            for (auto& y : bags.data) y = (int32_t)rng.uniform_int(v);
            Graph<T> ga, gb;
            LossReport ra, rb;
            ga.backward(mce_loss(ga, za, bags, MceVariant::simplified, uni, &ra));
            gb.backward(mce_loss(gb, zb, bags, MceVariant::corrected, uni, &rb));
            wv = std::max(wv, std::fabs(rb.value - (ra.value - std::log((double)s))));
            auto gva = za.grad(), gvb = zb.grad();
            for (size_t i = 0; i < gva.size(); ++i)
                wg = std::max(wg, std::fabs((double)gva[i] - (double)gvb[i]));
        }
        report("corrected = simplified - log s", wv < tol_val, wv);
        report("identical gradients", wg < 1e-12, wg);
    }

    {
        // corrected against a naive KL(uniform-bag || softmax) oracle,
        // distinct bag members so the uniform target has entropy log s
        double wv = 0.0;
        std::vector<int32_t> ids;
        for (int it = 0; it < 200; ++it) {
            int64_t v = 3 + rng.uniform_int(30);
            int64_t s = 2 + rng.uniform_int(std::min<int64_t>(8, v) - 1);
            int64_t n = 1 + rng.uniform_int(4);
            Tensor<T> z = Tensor<T>::randn({n, v}, rng, (T)2);
            IntTensor bags({n, s});
            ids.resize((size_t)v);
            for (int64_t row = 0; row < n; ++row) {
                std::iota(ids.begin(), ids.end(), 0);
                for (int64_t i = 0; i < s; ++i) {
                    std::swap(ids[(size_t)i], ids[(size_t)(i + rng.uniform_int(v - i))]);
                    bags.data[(size_t)(row * s + i)] = ids[(size_t)i];
                }
            }
            Graph<T> g;
            LossReport rep;
            mce_loss(g, z, bags, MceVariant::corrected, uni, &rep);
            double oracle = 0.0;
            auto zv = z.values();
            for (int64_t row = 0; row < n; ++row) {
                const T* zr = zv.data() + row * v;
                double mx = -1e300;
                for (int64_t c = 0; c < v; ++c) mx = std::max(mx, (double)zr[c]);
                double den = 0.0;
                for (int64_t c = 0; c < v; ++c) den += std::exp((double)zr[c] - mx);
                for (int64_t i = 0; i < s; ++i) {
                    double logp =
                        (double)zr[bags.data[(size_t)(row * s + i)]] - mx - std::log(den);
                    oracle += (std::log(1.0 / (double)s) - logp) / (double)(s * n);
                }
            }
            wv = std::max(wv, std::fabs(rep.value - oracle));
        }
        report("corrected matches KL oracle", wv < tol_val, wv);
    }

    {
        // corrected loss vanishes when the softmax is uniform on the bag
        int64_t v = 8, s = 4;
        int32_t members[4] = {2, 5, 1, 7};
        Tensor<T> z = Tensor<T>::full({1, v}, (T)-40);
        for (int32_t y : members) z.values()[(size_t)y] = (T)40;
        IntTensor bags({1, s});
        std::copy(members, members + 4, bags.data.begin());
        Graph<T> g;
        LossReport rep;
        mce_loss(g, z, bags, MceVariant::corrected, uni, &rep);
        report("zero at the bag optimum", std::fabs(rep.value) < tol_val, std::fabs(rep.value));
    }

    {
        // alternative = -log(total bag probability); zero on full coverage
        double wv = 0.0;
        std::vector<int32_t> ids;
        for (int it = 0; it < 200; ++it) {
            int64_t v = 3 + rng.uniform_int(30);
            int64_t s = 2 + rng.uniform_int(std::min<int64_t>(8, v) - 1);
            int64_t n = 1 + rng.uniform_int(4);
            Tensor<T> z = Tensor<T>::randn({n, v}, rng, (T)2);
            IntTensor bags({n, s});
            ids.resize((size_t)v);
            for (int64_t row = 0; row < n; ++row) {
                std::iota(ids.begin(), ids.end(), 0);
                for (int64_t i = 0; i < s; ++i) {
                    std::swap(ids[(size_t)i], ids[(size_t)(i + rng.uniform_int(v - i))]);
                    bags.data[(size_t)(row * s + i)] = ids[(size_t)i];
                }
            }
            Graph<T> g;
            LossReport rep;
            mce_loss(g, z, bags, MceVariant::alternative, uni, &rep);
            double oracle = 0.0;
            auto zv = z.values();
            for (int64_t row = 0; row < n; ++row) {
                const T* zr = zv.data() + row * v;
                double mx = -1e300;
                for (int64_t c = 0; c < v; ++c) mx = std::max(mx, (double)zr[c]);
                double den = 0.0;
                for (int64_t c = 0; c < v; ++c) den += std::exp((double)zr[c] - mx);
                double mass = 0.0;
                for (int64_t i = 0; i < s; ++i)
                    mass += std::exp((double)zr[bags.data[(size_t)(row * s + i)]] - mx) / den;
                oracle += -std::log(mass) / (double)n;
            }
            wv = std::max(wv, std::fabs(rep.value - oracle));
        }
        int64_t v = 6;
        Tensor<T> z = Tensor<T>::randn({2, v}, rng, (T)2);
        IntTensor bags({2, v});
        ids.resize((size_t)v);
        for (int64_t row = 0; row < 2; ++row) {
            std::iota(ids.begin(), ids.end(), 0);
            for (int64_t i = 0; i < v; ++i) {
                std::swap(ids[(size_t)i], ids[(size_t)(i + rng.uniform_int(v - i))]);
                bags.data[(size_t)(row * v + i)] = ids[(size_t)i];
            }
        }
        Graph<T> g;
        LossReport rep;
        mce_loss(g, z, bags, MceVariant::alternative, uni, &rep);
        report("alternative matches bag-mass oracle", wv < tol_val, wv);
        report("alternative zero on full coverage", std::fabs(rep.value) < tol_val,
               std::fabs(rep.value));
    }

    {
        // bag of one reduces to plain next-token CE bit for bit
        int64_t v = 13, n = 9;
        Tensor<T> za = Tensor<T>::randn({n, v}, rng, (T)2, true);
        Tensor<T> zb({n, v}, true);
        std::copy(za.values().begin(), za.values().end(), zb.values().begin());
        IntTensor labels({n}), bags({n, 1});
        for (int64_t i = 0; i < n; ++i) {
            int32_t y = i == 4 ? kIgnoreIndex : (int32_t)rng.uniform_int(v);
            labels.data[(size_t)i] = y;
            bags.data[(size_t)i] = y;
        }
        Graph<T> ga, gb;
        LossReport ra, rb;
        ga.backward(ce_loss(ga, za, labels, &ra));
        gb.backward(mce_loss(gb, zb, bags, MceVariant::simplified, uni, &rb));
        bool same = ra.value == rb.value;
        auto gva = za.grad(), gvb = zb.grad();
        for (size_t i = 0; i < gva.size(); ++i) same = same && gva[i] == gvb[i];
        report("bag of one is plain ce (bitwise)", same, std::fabs(ra.value - rb.value));
    }

    {
        // full-model analytic gradients against central differences
        ModelConfig mc;
        mc.d_model = 8;
        mc.n_layers = 1;
        mc.n_heads = 2;
        mc.d_ff = 16;
        mc.vocab = 11;
        mc.max_seq = 16;
        mc.init_seed = 3;
        ModelState<T> model = init_model<T>(mc);
        auto params = named_params(model);
        int64_t b = 2, l = 6, s = 3;
        IntTensor inputs({b, l});
        for (auto& t : inputs.data) t = (int32_t)rng.uniform_int(mc.vocab);
        IntTensor flat_labels({b * l});
        for (auto& y : flat_labels.data) y = (int32_t)rng.uniform_int(mc.vocab);
        flat_labels.data[3] = kIgnoreIndex;
        IntTensor bag_labels({b * l, s});
        for (auto& y : bag_labels.data) y = (int32_t)rng.uniform_int(mc.vocab);
        bag_labels.data[1] = kIgnoreIndex;  // slot 2 of position 0
        BagWeighting pw;
        pw.kind = WeightKind::power_law;

        auto ce_make = [&](Graph<T>& g) {
            Tensor<T> logits = model_forward_flat(g, model, inputs);
            return ce_loss(g, logits.reshaped({b * l, (int64_t)mc.vocab}), flat_labels);
        };
        GradCheckReport r1 = grad_check(params, ce_make, fd_eps, grad_floor);
        report("model gradcheck, ce", r1.max_rel_err < tol_grad, r1.max_rel_err);

        auto mce_make = [&](Graph<T>& g) {
            Tensor<T> logits = model_forward_flat(g, model, inputs);
            return mce_loss(g, logits.reshaped({b * l, (int64_t)mc.vocab}), bag_labels,
                            MceVariant::simplified, pw);
        };
        GradCheckReport r2 = grad_check(params, mce_make, fd_eps, grad_floor);
        report("model gradcheck, weighted bag loss", r2.max_rel_err < tol_grad, r2.max_rel_err);
    }

    {
        // warmup-stable-decay spot values
        TrainPlan p;
        p.total_steps = 1000;
        p.warmup_steps = 100;
        p.peak_lr = 3e-3;
        p.decay_fraction = 0.1;
        double worst = 0.0;
        worst = std::max(worst, std::fabs(wsd_lr(0, p)));
        worst = std::max(worst, std::fabs(wsd_lr(100, p) - p.peak_lr));
        worst = std::max(worst, std::fabs(wsd_lr(500, p) - p.peak_lr));
        worst = std::max(worst, std::fabs(wsd_lr(950, p) - p.peak_lr / 2));
        report("wsd schedule spot values", worst < 1e-15, worst);
    }

    if (failed == 0)
        std::printf("selftest passed\n");
    else
        std::printf("selftest FAILED: %d suite(s)\n", failed);
    return failed == 0 ? 0 : kOtherExit;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"token-bag pre-training laboratory"};
    app.require_subcommand(1);
    int rc = 0;

    CommonOpts topt;
    auto* train = app.add_subcommand("train", "one two-phase training run");
    add_common(train, topt);
    train->callback([&] {
        RunConfig cfg = load_cfg(topt);
        fs::path dir = resolve_out(topt, cfg.run_name);
        Corpus corpus = open_corpus(cfg.data);
        RunResult r = run_two_phase(cfg, corpus, dir.string());
        std::printf("%s: final_loss=%.4f eval_ce=%.4f tokens=%lld wallclock=%.1fs\n",
                    dir.string().c_str(), r.final_train_loss, r.final_eval_ce,
                    (long long)r.data_tokens_seen, r.wallclock);
    });

    CommonOpts sopt;
    int jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "grid of runs over (s, r, seed)");
    add_common(sweep, sopt);
    sweep->add_option("--jobs", jobs, "worker processes for cells")->check(CLI::Range(1, 256));
    sweep->callback([&] {
        RunConfig cfg = load_cfg(sopt);
        fs::path dir = resolve_out(sopt, cfg.run_name + "-sweep");
        int failed = run_sweep(cfg, dir.string(), jobs);
        size_t cells = cfg.sweep.s.size() * cfg.sweep.r.size() * cfg.sweep.seeds.size();
        std::printf("%s: %zu cell(s), %d failed, table in summary.csv\n", dir.string().c_str(),
                    cells, failed);
        if (failed > 0) rc = kOtherExit;
    });

    CommonOpts aopt;
    std::string kind;
    auto* ablate = app.add_subcommand("ablate", "superposition ablation run");
    add_common(ablate, aopt);
    ablate->add_option("--kind", kind, "full | input_only | output_only | reinit_io")
        ->required()
        ->check(CLI::IsMember({"full", "input_only", "output_only", "reinit_io"}));
    ablate->callback([&] {
        RunConfig cfg = load_cfg(aopt);
        fs::path dir = resolve_out(aopt, cfg.run_name + "-" + kind);
        Corpus corpus = open_corpus(cfg.data);
        RunResult r = run_ablation(kind, cfg, corpus, dir.string());
        std::printf("%s: final_loss=%.4f eval_ce=%.4f tokens=%lld wallclock=%.1fs\n",
                    dir.string().c_str(), r.final_train_loss, r.final_eval_ce,
                    (long long)r.data_tokens_seen, r.wallclock);
    });

    CommonOpts eopt;
    std::string eval_ck;
    auto* evalc = app.add_subcommand("eval", "held-out CE of a checkpoint");
    add_common(evalc, eopt);
    evalc->add_option("--checkpoint", eval_ck, "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    evalc->callback([&] {
        if (checkpoint_precision(eval_ck) == Precision::double_fp)
            do_eval<double>(eval_ck, eopt);
        else
            do_eval<float>(eval_ck, eopt);
    });

    CommonOpts gopt;
    std::string gen_ck, prompt;
    int64_t gen_len = 32;
    double temperature = 0.0;
    auto* gen = app.add_subcommand("generate", "sample tokens from a checkpoint");
    add_common(gen, gopt);
    gen->add_option("--checkpoint", gen_ck, "checkpoint file")
        ->required()
        ->check(CLI::ExistingFile);
    gen->add_option("--prompt", prompt, "space-separated token ids")->required();
    gen->add_option("--length", gen_len, "tokens to generate");
    gen->add_option("--temperature", temperature, "0 = greedy");
    gen->callback([&] {
        if (checkpoint_precision(gen_ck) == Precision::double_fp)
            do_generate<double>(gen_ck, gopt, prompt, gen_len, temperature);
        else
            do_generate<float>(gen_ck, gopt, prompt, gen_len, temperature);
    });

    CommonOpts mopt;
    int64_t max_distance = 16;
    int32_t vocab_cap = 0;
    auto* mifit = app.add_subcommand("mi-fit", "token MI curve and power-law fit");
    add_common(mifit, mopt);
    mifit->add_option("--max-distance", max_distance, "largest distance to estimate")
        ->check(CLI::Range(1, 4096));
    mifit->add_option("--vocab-cap", vocab_cap, "bucket tokens beyond the top cap-1 (0 = off)");
    mifit->callback([&] {
        RunConfig cfg = load_cfg(mopt);
        Corpus corpus = open_corpus(cfg.data);
        int32_t cap = vocab_cap > 0 ? vocab_cap : (int32_t)corpus.vocab;
        MiCurve curve = estimate_mi(corpus, max_distance, cap);
        PowerLawFit fit = fit_power_law(curve);
        fs::path dir = resolve_out(mopt, "mi");
        fs::create_directories(dir);
        write_text(dir / "mi_curve.csv", mi_curve_csv(curve));
        write_text(dir / "power_law.csv", power_law_csv(fit));
        std::printf("mi fit: c0=%.4f a=%.4f k=%.4f rss=%.3g points=%lld%s\n", fit.c0, fit.a,
                    fit.k, fit.rss, (long long)fit.points, fit.degenerate ? " (degenerate)" : "");
        std::printf("wrote %s\n", (dir / "mi_curve.csv").string().c_str());
    });

    std::string st_precision = "double";
    auto* selftest = app.add_subcommand("selftest", "loss and gradient oracle suites");
    selftest->add_option("--precision", st_precision, "single | double")
        ->check(CLI::IsMember({"single", "double"}));
    selftest->callback([&] {
        rc = st_precision == "single" ? selftest_run<float>() : selftest_run<double>();
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfigExit;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kDataExit;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric abort: %s\n", e.what());
        return kNumericExit;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kOtherExit;
    }
    return rc;
}
