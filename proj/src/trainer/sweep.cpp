#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "tstlab/analysis.hpp"
#include "tstlab/trainer.hpp"

namespace tstlab {

namespace fs = std::filesystem;

Corpus open_corpus(const DataSpec& data) {
    if (data.kind == "markov") return synth_markov(data.markov);
    return load_corpus(data.path);
}

namespace {

struct Cell {
    int64_t s;
    double r;
    uint64_t seed;
    std::string name;
    fs::path dir;
};

std::vector<Cell> grid_cells(const RunConfig& cfg, const fs::path& out_dir) {
    std::vector<Cell> cells;
    for (int64_t s : cfg.sweep.s)
        for (double r : cfg.sweep.r)
            for (uint64_t seed : cfg.sweep.seeds) {
                std::ostringstream nm;
                nm << "s" << s << "_r" << r << "_seed" << seed;
                cells.push_back({s, r, seed, nm.str(), out_dir / nm.str()});
            }
    return cells;
}

RunConfig cell_config(const RunConfig& cfg, const Cell& cell) {
    RunConfig cc = cfg;
    cc.run_name = cell.name;
    cc.sup.s = cell.s;
    cc.sup.r = cell.r;
    cc.plan.seed = cell.seed;
    return cc;
}

// Fans cells out to child processes, at most `jobs` alive at once. The child
// command is `<self> train --config <cell>.config.json --out <cell dir>`, so
// this path only works inside the CLI binary; library callers and tests use
// the in-process path (jobs <= 1).
int run_cells_forked(const RunConfig& cfg, const std::vector<Cell>& cells,
                     const fs::path& out_dir, int jobs) {
    int failures = 0;
    std::vector<pid_t> running;
    auto wait_one = [&] {
        int status = 0;
        pid_t pid = waitpid(-1, &status, 0);
        if (pid < 0) throw IoError("waitpid failed");
        for (size_t k = 0; k < running.size(); ++k)
            if (running[k] == pid) {
                running.erase(running.begin() + (long)k);
                break;
            }
        bool ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
        if (!ok) ++failures;
    };

    for (const Cell& cell : cells) {
        while ((int)running.size() >= jobs) wait_one();
        fs::path cfg_path = out_dir / (cell.name + ".config.json");
        {
            std::ofstream f(cfg_path);
            f << render_run_config(cell_config(cfg, cell));
            if (!f) throw IoError("cannot write " + cfg_path.string());
        }
        std::string cfg_arg = cfg_path.string();
        std::string out_arg = cell.dir.string();
        pid_t pid = fork();
        if (pid < 0) throw IoError("fork failed");
        if (pid == 0) {
            const char* argv[] = {"tstlab", "train",         "--config", cfg_arg.c_str(),
                                  "--out",  out_arg.c_str(), nullptr};
            execv("/proc/self/exe", const_cast<char* const*>(argv));
            _exit(127);
        }
        running.push_back(pid);
    }
    while (!running.empty()) wait_one();
    return failures;
}

}  // namespace

int run_sweep(const RunConfig& cfg, const std::string& out_dir, int jobs) {
    validate(cfg);
    fs::create_directories(out_dir);
    std::vector<Cell> cells = grid_cells(cfg, out_dir);

    int failures = 0;
    if (jobs > 1) {
        failures = run_cells_forked(cfg, cells, out_dir, jobs);
    } else {
        Corpus corpus = open_corpus(cfg.data);
        for (const Cell& cell : cells) {
            try {
                run_two_phase(cell_config(cfg, cell), corpus, cell.dir.string());
            } catch (const std::exception& e) {
                std::fprintf(stderr, "cell %s failed: %s\n", cell.name.c_str(), e.what());
                ++failures;
            }
        }
    }

    std::vector<std::string> dirs;
    dirs.reserve(cells.size());
    for (const Cell& cell : cells) dirs.push_back(cell.dir.string());
    std::string table = summarize_sweep(collect_sweep(dirs));
    std::ofstream f(fs::path(out_dir) / "summary.csv");
    f << table;
    if (!f) throw IoError("cannot write sweep summary under " + out_dir);
    return failures;
}

}  // namespace tstlab
