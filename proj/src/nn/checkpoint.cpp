#include "liftgan/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace liftgan::nn {

namespace {

constexpr char kMagic[8] = {'L', 'G', 'P', 'A', 'R', 'A', 'M', 'S'};
constexpr std::uint32_t kVersion = 1;
// Guards against allocating absurd sizes from a corrupt header.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

template <typename T>
void put_le(std::ostream& out, T v) {
    unsigned char bytes[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw CheckpointError(std::string("checkpoint truncated while reading ") + what);
    }
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
    return v;
}

struct Record {
    std::string name;
    Tensor value;
};

std::vector<Record> read_records(std::istream& in) {
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw CheckpointError("not a parameter checkpoint");
    const auto version = get_le<std::uint32_t>(in, "version");
    if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    const auto count = get_le<std::uint64_t>(in, "parameter count");
    std::vector<Record> records;
    for (std::uint64_t k = 0; k < count; ++k) {
        const auto len = get_le<std::uint64_t>(in, "name length");
        if (len > 4096) throw CheckpointError("corrupt parameter name length");
        std::string name(len, '\0');
        if (!in.read(name.data(), static_cast<std::streamsize>(len))) throw CheckpointError("checkpoint truncated in name");
        const auto rank = get_le<std::uint64_t>(in, "rank");
        if (rank > 8) throw CheckpointError("corrupt rank for '" + name + "'");
        Shape shape;
        std::uint64_t n = 1;
        for (std::uint64_t d = 0; d < rank; ++d) {
            const auto dim = get_le<std::uint64_t>(in, "dimension");
            n *= dim;
            if (n > kMaxElements) throw CheckpointError("corrupt shape for '" + name + "'");
            shape.push_back(static_cast<std::size_t>(dim));
        }
        std::vector<double> values(static_cast<std::size_t>(n));
        for (auto& v : values) v = std::bit_cast<double>(get_le<std::uint64_t>(in, "values"));
        records.push_back({std::move(name), Tensor(std::move(shape), std::move(values))});
    }
    return records;
}

}  // namespace

void save_params(const ParamSet& params, std::ostream& out) {
    out.write(kMagic, 8);
    put_le<std::uint32_t>(out, kVersion);
    put_le<std::uint64_t>(out, params.size());
    for (const auto& p : params) {
        put_le<std::uint64_t>(out, p.name.size());
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        put_le<std::uint64_t>(out, p.value.rank());
        for (auto d : p.value.shape()) put_le<std::uint64_t>(out, d);
        for (double v : p.value.values()) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw CheckpointError("failed writing checkpoint");
}

void save_params(const ParamSet& params, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
    save_params(params, out);
    out.close();
    if (!out) throw CheckpointError("failed writing " + path.string());
}

void load_params(ParamSet& params, std::istream& in) {
    auto records = read_records(in);
    if (records.size() != params.size()) {
        throw CheckpointError("checkpoint holds " + std::to_string(records.size()) + " parameters, expected " +
                              std::to_string(params.size()));
    }
    for (const auto& r : records) {
        const Parameter* p = params.find(r.name);
        if (!p) throw CheckpointError("checkpoint parameter '" + r.name + "' is unknown");
        if (p->value.shape() != r.value.shape()) {
            throw CheckpointError("checkpoint parameter '" + r.name + "' has shape " + shape_str(r.value.shape()) +
                                  ", expected " + shape_str(p->value.shape()));
        }
    }
    for (auto& r : records) params[r.name].value = std::move(r.value);
}

void load_params(ParamSet& params, const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path.string());
    load_params(params, in);
}

ParamSet read_params(std::istream& in) {
    ParamSet out;
    for (auto& r : read_records(in)) out.add(std::move(r.name), std::move(r.value));
    return out;
}

}  // namespace liftgan::nn
