#include <cstring>
#include <fstream>

#include "tstlab/data.hpp"

namespace tstlab {

namespace {

constexpr char kMagic[4] = {'T', 'S', 'T', 'C'};
constexpr uint32_t kVersion = 1;

template <class T>
void write_raw(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("corpus file truncated");
    return v;
}

}  // namespace

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open corpus file: " + path.string());

    char head[4] = {};
    f.read(head, 4);
    Corpus c;
    c.source = path.string();

    if (f.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0) {
        uint32_t version = read_raw<uint32_t>(f);
        if (version != kVersion)
            throw DataError("unsupported corpus version " + std::to_string(version));
        uint32_t width = read_raw<uint32_t>(f);
        if (width != 2 && width != 4)
            throw DataError("corpus id width must be 2 or 4, got " + std::to_string(width));
        uint32_t vocab = read_raw<uint32_t>(f);
        uint64_t count = read_raw<uint64_t>(f);
        if (vocab < 2) throw DataError("corpus vocab must be at least 2");
        c.vocab = (int32_t)vocab;
        c.tokens.resize(count);
        if (width == 2) {
            std::vector<uint16_t> raw(count);
            f.read(reinterpret_cast<char*>(raw.data()), (std::streamsize)(count * 2));
            if (!f) throw DataError("corpus file truncated");
            for (uint64_t i = 0; i < count; ++i) c.tokens[i] = raw[i];
        } else {
            f.read(reinterpret_cast<char*>(c.tokens.data()), (std::streamsize)(count * 4));
            if (!f) throw DataError("corpus file truncated");
        }
    } else {
        // Plain text: bytes are the tokens.
        f.clear();
        f.seekg(0);
        std::vector<char> bytes((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
        c.vocab = 256;
        c.tokens.reserve(bytes.size());
        for (char b : bytes) c.tokens.push_back((int32_t)(unsigned char)b);
    }

    if (c.tokens.empty()) throw DataError("corpus is empty: " + path.string());
    for (size_t i = 0; i < c.tokens.size(); ++i)
        if (c.tokens[i] < 0 || c.tokens[i] >= c.vocab)
            throw DataError("corpus token " + std::to_string(c.tokens[i]) + " at " +
                            std::to_string(i) + " outside vocab " + std::to_string(c.vocab));
    return c;
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
    if (c.vocab < 2) throw DataError("refusing to save corpus with vocab < 2");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write corpus file: " + path.string());
    uint32_t width = c.vocab <= 65536 ? 2 : 4;
    f.write(kMagic, 4);
    write_raw(f, kVersion);
    write_raw(f, width);
    write_raw(f, (uint32_t)c.vocab);
    write_raw(f, (uint64_t)c.tokens.size());
    if (width == 2) {
        std::vector<uint16_t> raw(c.tokens.size());
        for (size_t i = 0; i < c.tokens.size(); ++i) raw[i] = (uint16_t)c.tokens[i];
        f.write(reinterpret_cast<const char*>(raw.data()), (std::streamsize)(raw.size() * 2));
    } else {
        f.write(reinterpret_cast<const char*>(c.tokens.data()),
                (std::streamsize)(c.tokens.size() * 4));
    }
    if (!f) throw IoError("short write saving corpus: " + path.string());
}

}  // namespace tstlab
