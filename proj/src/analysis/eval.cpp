#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tstlab/analysis.hpp"

namespace tstlab {

std::vector<SweepCell> collect_sweep(const std::vector<std::string>& run_dirs) {
    std::vector<SweepCell> cells;
    for (const auto& dir : run_dirs) {
        SweepCell cell;
        cell.run_dir = dir;
        std::ifstream in(std::filesystem::path(dir) / "summary.json");
        if (in) {
            try {
                nlohmann::json j = nlohmann::json::parse(in);
                cell.s = j.at("s").get<int64_t>();
                cell.r = j.at("r").get<double>();
                cell.seed = j.at("seed").get<uint64_t>();
                cell.final_ce = j.at("final_eval_ce").get<double>();
                cell.ok = j.at("status").get<std::string>() == "ok";
            } catch (const nlohmann::json::exception&) {
                cell.ok = false;
            }
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

std::string summarize_sweep(const std::vector<SweepCell>& cells) {
    std::vector<int64_t> ss;
    std::vector<double> rs;
    for (const auto& c : cells) {
        if (c.s < 1) continue;  // summary never parsed, nothing to place on the grid
        if (std::find(ss.begin(), ss.end(), c.s) == ss.end()) ss.push_back(c.s);
        if (std::find(rs.begin(), rs.end(), c.r) == rs.end()) rs.push_back(c.r);
    }
    std::sort(ss.begin(), ss.end());
    std::sort(rs.begin(), rs.end());

    std::ostringstream os;
    os << "r\\s";
    for (int64_t s : ss) os << ',' << s;
    os << '\n';
    for (double r : rs) {
        os << r;
        for (int64_t s : ss) {
            double sum = 0.0;
            int64_t n = 0;
            for (const auto& c : cells)
                if (c.ok && c.s == s && c.r == r) {
                    sum += c.final_ce;
                    ++n;
                }
            if (n == 0) os << ",-";
            else os << ',' << sum / (double)n;
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace tstlab
