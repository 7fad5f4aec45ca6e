#include "tstlab/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace tstlab {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'T', 'K'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint truncated");
    return v;
}

template <class T>
void write_vec(std::ostream& os, const std::vector<T>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), (std::streamsize)(v.size() * sizeof(T)));
}

template <class T>
void read_vec(std::istream& is, std::vector<T>& v, uint64_t n) {
    v.resize(n);
    is.read(reinterpret_cast<char*>(v.data()), (std::streamsize)(n * sizeof(T)));
    if (!is) throw IoError("checkpoint truncated");
}

std::string read_string(std::istream& is, uint64_t n) {
    std::string s(n, '\0');
    is.read(s.data(), (std::streamsize)n);
    if (!is) throw IoError("checkpoint truncated");
    return s;
}

template <class T>
constexpr uint8_t precision_tag() {
    return sizeof(T) == 4 ? 0 : 1;
}

}  // namespace

template <class T>
void save_checkpoint(const std::filesystem::path& path, const Checkpoint<T>& ck) {
    // Write to a sibling then rename, so a crash never leaves a half file
    // under the final name.
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open checkpoint '" + tmp.string() + "'");
        f.write(kMagic, 4);
        write_raw(f, kVersion);
        write_raw(f, precision_tag<T>());
        write_raw(f, (uint8_t)(ck.phase == Phase::superposition ? 0 : 1));
        write_raw(f, (uint16_t)0);
        write_raw(f, ck.step);
        write_raw(f, ck.data_tokens_seen);
        write_raw(f, ck.cursor);
        write_raw(f, ck.epoch);
        write_raw(f, ck.opt_steps);
        write_raw(f, (uint64_t)ck.config_text.size());
        f.write(ck.config_text.data(), (std::streamsize)ck.config_text.size());
        write_raw(f, (uint32_t)ck.entries.size());
        for (const auto& e : ck.entries) {
            if (e.m.size() != e.values.size() || e.v.size() != e.values.size())
                throw ContractError("checkpoint: moment sizes differ from values in " + e.name);
            if ((int64_t)e.values.size() != shape_numel(e.shape))
                throw ContractError("checkpoint: shape does not match value count in " + e.name);
            write_raw(f, (uint32_t)e.name.size());
            f.write(e.name.data(), (std::streamsize)e.name.size());
            write_raw(f, (uint32_t)e.shape.size());
            for (int64_t d : e.shape) write_raw(f, d);
            write_vec(f, e.values);
            write_vec(f, e.m);
            write_vec(f, e.v);
        }
        f.flush();
        if (!f) throw IoError("checkpoint write failed on '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("checkpoint rename failed: " + ec.message());
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
    char head[4] = {};
    f.read(head, 4);
    if (f.gcount() != 4 || std::memcmp(head, kMagic, 4) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    uint32_t version = read_raw<uint32_t>(f);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    uint8_t prec = read_raw<uint8_t>(f);
    if (prec != precision_tag<T>())
        throw IoError("checkpoint precision does not match the requested scalar type");
    uint8_t phase = read_raw<uint8_t>(f);
    if (phase > 1) throw IoError("checkpoint phase flag corrupt");
    (void)read_raw<uint16_t>(f);

    Checkpoint<T> ck;
    ck.phase = phase == 0 ? Phase::superposition : Phase::recovery;
    ck.step = read_raw<uint64_t>(f);
    ck.data_tokens_seen = read_raw<uint64_t>(f);
    ck.cursor = read_raw<uint64_t>(f);
    ck.epoch = read_raw<uint64_t>(f);
    ck.opt_steps = read_raw<uint64_t>(f);
    uint64_t cfg_len = read_raw<uint64_t>(f);
    ck.config_text = read_string(f, cfg_len);
    uint32_t n = read_raw<uint32_t>(f);
    ck.entries.resize(n);
    for (auto& e : ck.entries) {
        uint32_t name_len = read_raw<uint32_t>(f);
        e.name = read_string(f, name_len);
        uint32_t ndim = read_raw<uint32_t>(f);
        e.shape.resize(ndim);
        uint64_t count = 1;
        for (auto& d : e.shape) {
            d = read_raw<int64_t>(f);
            if (d < 1) throw IoError("checkpoint dim corrupt in " + e.name);
            count *= (uint64_t)d;
        }
        read_vec(f, e.values, count);
        read_vec(f, e.m, count);
        read_vec(f, e.v, count);
    }
    return ck;
}

Precision checkpoint_precision(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint '" + path.string() + "'");
    char head[4] = {};
    f.read(head, 4);
    if (f.gcount() != 4 || std::memcmp(head, kMagic, 4) != 0)
        throw IoError("not a checkpoint file: " + path.string());
    uint32_t version = read_raw<uint32_t>(f);
    if (version != kVersion)
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    uint8_t prec = read_raw<uint8_t>(f);
    if (prec > 1) throw IoError("checkpoint precision flag corrupt");
    return prec == 0 ? Precision::single_fp : Precision::double_fp;
}

template void save_checkpoint<float>(const std::filesystem::path&, const Checkpoint<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const Checkpoint<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace tstlab
