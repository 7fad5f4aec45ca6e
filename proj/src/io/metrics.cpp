#include "tstlab/metrics.hpp"

#include "json.hpp"

namespace tstlab {

using nlohmann::json;

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : path_(path) {
    out_.open(path, std::ios::trunc);
    if (!out_) throw IoError("cannot open metrics log '" + path.string() + "'");
}

void MetricsWriter::append(const MetricsRecord& r) {
    json j{{"step", r.step},
           {"phase", phase_name(r.phase)},
           {"loss_kind", r.loss_kind},
           {"loss", r.loss},
           {"lr", r.lr},
           {"data_tokens_seen", r.data_tokens_seen},
           {"wallclock", r.wallclock}};
    if (r.has_eval) j["eval_ce"] = r.eval_ce;
    out_ << j.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("metrics write failed on '" + path_.string() + "'");
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics log '" + path.string() + "'");
    std::vector<MetricsRecord> out;
    std::string line;
    int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("metrics line " + std::to_string(lineno) + ": " + e.what());
        }
        MetricsRecord r;
        r.step = j.at("step").get<int64_t>();
        std::string ph = j.at("phase").get<std::string>();
        if (ph == phase_name(Phase::superposition)) r.phase = Phase::superposition;
        else if (ph == phase_name(Phase::recovery)) r.phase = Phase::recovery;
        else throw DataError("metrics line " + std::to_string(lineno) + ": bad phase " + ph);
        r.loss_kind = j.at("loss_kind").get<std::string>();
        r.loss = j.at("loss").get<double>();
        r.lr = j.at("lr").get<double>();
        r.data_tokens_seen = j.at("data_tokens_seen").get<int64_t>();
        r.wallclock = j.at("wallclock").get<double>();
        if (j.contains("eval_ce")) {
            r.has_eval = true;
            r.eval_ce = j.at("eval_ce").get<double>();
        }
        out.push_back(std::move(r));
    }
    return out;
}

bool metrics_match(const std::vector<MetricsRecord>& a, const std::vector<MetricsRecord>& b,
                   std::string* why) {
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (a.size() != b.size())
        return fail("record counts differ: " + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()));
    for (size_t i = 0; i < a.size(); ++i) {
        const auto& x = a[i];
        const auto& y = b[i];
        std::string at = "record " + std::to_string(i) + ": ";
        if (x.step != y.step) return fail(at + "step");
        if (x.phase != y.phase) return fail(at + "phase");
        if (x.loss_kind != y.loss_kind) return fail(at + "loss_kind");
        if (x.loss != y.loss) return fail(at + "loss");
        if (x.lr != y.lr) return fail(at + "lr");
        if (x.data_tokens_seen != y.data_tokens_seen) return fail(at + "data_tokens_seen");
        if (x.has_eval != y.has_eval) return fail(at + "eval presence");
        if (x.has_eval && x.eval_ce != y.eval_ce) return fail(at + "eval_ce");
    }
    return true;
}

}  // namespace tstlab
