#include "tstlab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace tstlab {

using nlohmann::json;

int64_t phase_boundary(const SuperpositionSpec& spec, int64_t total_steps) {
    if (spec.s == 1) return 0;  // bag of one is the baseline already
    return (int64_t)std::llround(spec.r * (double)total_steps);
}

void validate(const SuperpositionSpec& spec) {
    if (spec.s < 1) throw ConfigError("superposition: s must be at least 1");
    if (spec.r < 0.0 || spec.r > 1.0) throw ConfigError("superposition: r outside [0,1]");
    if (spec.variant == MceVariant::corrected && spec.weighting.kind != WeightKind::uniform)
        throw ConfigError("superposition: corrected variant requires uniform weighting");
    if (spec.ablation == Ablation::none)
        throw ConfigError("superposition: ablation must be full, input_only or output_only");
    if (spec.weighting.kind == WeightKind::fitted) {
        for (int i = 1; i <= (int)spec.s; ++i)
            if (!std::isfinite(spec.weighting.weight(i)))
                throw ConfigError("superposition: fitted weighting not finite at slot " +
                                  std::to_string(i));
    }
}

namespace {

// --- struct <-> json ---

json to_json(const ModelConfig& m) {
    return json{{"d_model", m.d_model}, {"n_layers", m.n_layers},
                {"n_heads", m.n_heads}, {"d_ff", m.d_ff},
                {"vocab", m.vocab},     {"max_seq", m.max_seq},
                {"init_scale", m.init_scale},
                {"rope_raw_positions", m.rope_raw_positions},
                {"rope_base", m.rope_base}};
}

json to_json(const TrainPlan& p) {
    return json{{"total_steps", p.total_steps},
                {"batch_rows", p.batch_rows},
                {"base_len", p.base_len},
                {"peak_lr", p.peak_lr},
                {"warmup_steps", p.warmup_steps},
                {"decay_fraction", p.decay_fraction},
                {"beta1", p.beta1},
                {"beta2", p.beta2},
                {"weight_decay", p.weight_decay},
                {"clip_norm", p.clip_norm},
                {"seed", p.seed}};
}

json to_json(const SuperpositionSpec& s) {
    json w{{"kind", weight_kind_name(s.weighting.kind)}};
    if (s.weighting.kind == WeightKind::fitted) {
        w["c0"] = s.weighting.c0;
        w["a"] = s.weighting.a;
        w["k"] = s.weighting.k;
    }
    return json{{"s", s.s},
                {"r", s.r},
                {"weighting", w},
                {"variant", mce_variant_name(s.variant)},
                {"ablation", ablation_name(s.ablation)},
                {"reinit_io", s.reinit_io},
                {"reinit_seed", s.reinit_seed},
                {"reset_optimizer", s.reset_optimizer}};
}

json to_json(const DataSpec& d) {
    return json{{"kind", d.kind},
                {"path", d.path},
                {"order", d.markov.order},
                {"vocab", d.markov.vocab},
                {"length", d.markov.length},
                {"seed", d.markov.seed},
                {"alpha", d.markov.alpha},
                {"holdout_fraction", d.holdout_fraction}};
}

json to_json(const EvalSpec& e) {
    return json{{"every", e.every}, {"rows", e.rows}, {"batches", e.batches}};
}

json to_json(const SweepSpec& s) {
    return json{{"s", s.s}, {"r", s.r}, {"seeds", s.seeds}};
}

json to_json(const RunConfig& c) {
    return json{{"run_name", c.run_name},
                {"precision", precision_name(c.plan.precision)},
                {"model", to_json(c.model)},
                {"plan", to_json(c.plan)},
                {"superposition", to_json(c.sup)},
                {"data", to_json(c.data)},
                {"eval", to_json(c.eval)},
                {"sweep", to_json(c.sweep)}};
}

// Reads one field, appending a message instead of throwing so every problem
// surfaces in a single pass.
template <class T>
void get_field(const json& j, const char* section, const char* key, T& out,
               std::vector<std::string>& errs) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        errs.push_back(std::string(section) + "." + key + ": " + e.what());
    }
}

void check_known(const json& j, const char* section, std::initializer_list<const char*> known,
                 std::vector<std::string>& errs) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) { ok = true; break; }
        if (!ok) errs.push_back(std::string(section) + ": unknown key '" + it.key() + "'");
    }
}

RunConfig from_json(const json& j, std::vector<std::string>& errs) {
    RunConfig c;
    check_known(j, "config",
                {"run_name", "precision", "model", "plan", "superposition", "data", "eval",
                 "sweep"},
                errs);
    get_field(j, "config", "run_name", c.run_name, errs);
    if (j.contains("precision")) {
        std::string p = j.at("precision").get<std::string>();
        if (p == "single") c.plan.precision = Precision::single_fp;
        else if (p == "double") c.plan.precision = Precision::double_fp;
        else errs.push_back("precision: expected 'single' or 'double', got '" + p + "'");
    }

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_known(m, "model",
                    {"d_model", "n_layers", "n_heads", "d_ff", "vocab", "max_seq", "init_scale",
                     "rope_raw_positions", "rope_base"},
                    errs);
        get_field(m, "model", "d_model", c.model.d_model, errs);
        get_field(m, "model", "n_layers", c.model.n_layers, errs);
        get_field(m, "model", "n_heads", c.model.n_heads, errs);
        get_field(m, "model", "d_ff", c.model.d_ff, errs);
        get_field(m, "model", "vocab", c.model.vocab, errs);
        get_field(m, "model", "max_seq", c.model.max_seq, errs);
        get_field(m, "model", "init_scale", c.model.init_scale, errs);
        get_field(m, "model", "rope_raw_positions", c.model.rope_raw_positions, errs);
        get_field(m, "model", "rope_base", c.model.rope_base, errs);
    }

    if (j.contains("plan")) {
        const json& p = j.at("plan");
        check_known(p, "plan",
                    {"total_steps", "batch_rows", "base_len", "peak_lr", "warmup_steps",
                     "decay_fraction", "beta1", "beta2", "weight_decay", "clip_norm", "seed"},
                    errs);
        get_field(p, "plan", "total_steps", c.plan.total_steps, errs);
        get_field(p, "plan", "batch_rows", c.plan.batch_rows, errs);
        get_field(p, "plan", "base_len", c.plan.base_len, errs);
        get_field(p, "plan", "peak_lr", c.plan.peak_lr, errs);
        get_field(p, "plan", "warmup_steps", c.plan.warmup_steps, errs);
        get_field(p, "plan", "decay_fraction", c.plan.decay_fraction, errs);
        get_field(p, "plan", "beta1", c.plan.beta1, errs);
        get_field(p, "plan", "beta2", c.plan.beta2, errs);
        get_field(p, "plan", "weight_decay", c.plan.weight_decay, errs);
        get_field(p, "plan", "clip_norm", c.plan.clip_norm, errs);
        get_field(p, "plan", "seed", c.plan.seed, errs);
    }

    if (j.contains("superposition")) {
        const json& s = j.at("superposition");
        check_known(s, "superposition",
                    {"s", "r", "weighting", "variant", "ablation", "reinit_io", "reinit_seed",
                     "reset_optimizer"},
                    errs);
        get_field(s, "superposition", "s", c.sup.s, errs);
        get_field(s, "superposition", "r", c.sup.r, errs);
        if (s.contains("weighting")) {
            const json& w = s.at("weighting");
            check_known(w, "superposition.weighting", {"kind", "c0", "a", "k"}, errs);
            std::string kind = "uniform";
            get_field(w, "superposition.weighting", "kind", kind, errs);
            try {
                c.sup.weighting.kind = weight_kind_from(kind);
            } catch (const ConfigError& e) {
                errs.push_back(std::string("superposition.weighting: ") + e.what());
            }
            get_field(w, "superposition.weighting", "c0", c.sup.weighting.c0, errs);
            get_field(w, "superposition.weighting", "a", c.sup.weighting.a, errs);
            get_field(w, "superposition.weighting", "k", c.sup.weighting.k, errs);
        }
        if (s.contains("variant")) {
            try {
                c.sup.variant = mce_variant_from(s.at("variant").get<std::string>());
            } catch (const ConfigError& e) {
                errs.push_back(std::string("superposition.variant: ") + e.what());
            }
        }
        if (s.contains("ablation")) {
            try {
                c.sup.ablation = ablation_from(s.at("ablation").get<std::string>());
            } catch (const ConfigError& e) {
                errs.push_back(std::string("superposition.ablation: ") + e.what());
            }
        }
        get_field(s, "superposition", "reinit_io", c.sup.reinit_io, errs);
        get_field(s, "superposition", "reinit_seed", c.sup.reinit_seed, errs);
        get_field(s, "superposition", "reset_optimizer", c.sup.reset_optimizer, errs);
    }

    if (j.contains("data")) {
        const json& d = j.at("data");
        check_known(d, "data",
                    {"kind", "path", "order", "vocab", "length", "seed", "alpha",
                     "holdout_fraction"},
                    errs);
        get_field(d, "data", "kind", c.data.kind, errs);
        get_field(d, "data", "path", c.data.path, errs);
        get_field(d, "data", "order", c.data.markov.order, errs);
        get_field(d, "data", "vocab", c.data.markov.vocab, errs);
        get_field(d, "data", "length", c.data.markov.length, errs);
        get_field(d, "data", "seed", c.data.markov.seed, errs);
        get_field(d, "data", "alpha", c.data.markov.alpha, errs);
        get_field(d, "data", "holdout_fraction", c.data.holdout_fraction, errs);
    }

    if (j.contains("eval")) {
        const json& e = j.at("eval");
        check_known(e, "eval", {"every", "rows", "batches"}, errs);
        get_field(e, "eval", "every", c.eval.every, errs);
        get_field(e, "eval", "rows", c.eval.rows, errs);
        get_field(e, "eval", "batches", c.eval.batches, errs);
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        check_known(s, "sweep", {"s", "r", "seeds"}, errs);
        get_field(s, "sweep", "s", c.sweep.s, errs);
        get_field(s, "sweep", "r", c.sweep.r, errs);
        get_field(s, "sweep", "seeds", c.sweep.seeds, errs);
    }
    return c;
}

void apply_override(json& j, const std::string& kv, std::vector<std::string>& errs) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
        errs.push_back("override '" + kv + "' is not key=value");
        return;
    }
    std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    json parsed;
    try {
        parsed = json::parse(val);
    } catch (const json::exception&) {
        parsed = val;  // bare strings need no quotes on the command line
    }
    json* node = &j;
    size_t start = 0;
    while (true) {
        size_t dot = key.find('.', start);
        std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) {
            errs.push_back("override '" + kv + "' has an empty key segment");
            return;
        }
        if (dot == std::string::npos) {
            (*node)[part] = parsed;
            return;
        }
        node = &(*node)[part];
        if (!node->is_object() && !node->is_null()) {
            errs.push_back("override '" + kv + "': '" + key.substr(0, dot) +
                           "' is not a section");
            return;
        }
        start = dot + 1;
    }
}

}  // namespace

void validate(const RunConfig& cfg) {
    std::vector<std::string> errs;
    auto gather = [&errs](auto&& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            errs.push_back(e.what());
        }
    };
    gather([&] { validate(cfg.model); });
    gather([&] { validate(cfg.plan); });
    gather([&] { validate(cfg.sup); });

    if (cfg.run_name.empty()) errs.push_back("run_name must not be empty");
    if (cfg.data.kind != "markov" && cfg.data.kind != "tokens" && cfg.data.kind != "text")
        errs.push_back("data.kind must be markov, tokens or text");
    if (cfg.data.kind != "markov" && cfg.data.path.empty())
        errs.push_back("data.path required for kind '" + cfg.data.kind + "'");
    if (cfg.data.kind == "markov") {
        if (cfg.data.markov.order < 1) errs.push_back("data.order must be at least 1");
        if (cfg.data.markov.vocab < 2) errs.push_back("data.vocab must be at least 2");
        if (cfg.data.markov.length < 1) errs.push_back("data.length must be positive");
        if (!(cfg.data.markov.alpha > 0.0)) errs.push_back("data.alpha must be positive");
        if (cfg.data.markov.vocab != cfg.model.vocab)
            errs.push_back("data.vocab must match model.vocab");
    }
    if (cfg.data.holdout_fraction < 0.0 || cfg.data.holdout_fraction >= 1.0)
        errs.push_back("data.holdout_fraction outside [0,1)");
    if (cfg.eval.every < 0) errs.push_back("eval.every must be non-negative");
    if (cfg.eval.rows < 1) errs.push_back("eval.rows must be positive");
    if (cfg.eval.batches < 1) errs.push_back("eval.batches must be positive");
    if (cfg.model.max_seq < cfg.plan.base_len)
        errs.push_back("model.max_seq is smaller than plan.base_len");
    for (int64_t s : cfg.sweep.s)
        if (s < 1) errs.push_back("sweep.s entries must be at least 1");
    for (double r : cfg.sweep.r)
        if (r < 0.0 || r > 1.0) errs.push_back("sweep.r entries must lie in [0,1]");
    if (cfg.sweep.seeds.empty()) errs.push_back("sweep.seeds must not be empty");

    if (!errs.empty()) {
        std::string msg = "config invalid:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
}

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config root must be an object");

    std::vector<std::string> errs;
    for (const auto& kv : overrides) apply_override(j, kv, errs);
    RunConfig c = from_json(j, errs);
    if (!errs.empty()) {
        std::string msg = "config invalid:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw ConfigError(msg);
    }

    if (c.plan.warmup_steps < 0)
        c.plan.warmup_steps = std::min<int64_t>(2000, c.plan.total_steps / 10);
    validate(c);
    return c;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_run_config(ss.str(), overrides);
}

std::string render_run_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

}  // namespace tstlab
