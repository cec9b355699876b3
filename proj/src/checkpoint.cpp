#include "dfr/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace dfr {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'R', 'C', 'K', 'P', 'T', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw ContractError("checkpoint: truncated file");
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const std::string& config_text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ContractError("checkpoint: cannot write '" + path + "'");
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, 1);
    put<std::uint64_t>(out, config_text.size());
    out.write(config_text.data(), static_cast<std::streamsize>(config_text.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params.items()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
        out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
        const auto& shape = p.value.shape();
        put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.size()));
        for (int extent : shape) put<std::int32_t>(out, extent);
        const auto& data = p.value.data();
        out.write(reinterpret_cast<const char*>(data.data()),
                  static_cast<std::streamsize>(data.size() * sizeof(double)));
    }
    if (!out) throw ContractError("checkpoint: write to '" + path + "' failed");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw ContractError("checkpoint: bad magic in '" + path + "'");
    }
    Checkpoint ckpt;
    ckpt.version = get<std::uint32_t>(in);
    if (ckpt.version != 1) {
        throw ContractError("checkpoint: unsupported version " + std::to_string(ckpt.version));
    }
    const auto cfg_len = get<std::uint64_t>(in);
    ckpt.config_text.resize(cfg_len);
    in.read(ckpt.config_text.data(), static_cast<std::streamsize>(cfg_len));
    const auto n = get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < n; ++i) {
        const auto name_len = get<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const auto rank = get<std::uint32_t>(in);
        Shape shape(rank);
        for (auto& extent : shape) extent = get<std::int32_t>(in);
        std::vector<double> data(static_cast<std::size_t>(numel_of(shape)));
        in.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!in) throw ContractError("checkpoint: truncated tensor '" + name + "'");
        ckpt.entries.push_back({std::move(name), Tensor::from_data(shape, std::move(data), true)});
    }
    return ckpt;
}

void Checkpoint::apply_to(ParameterSet& params) const {
    for (const auto& entry : entries) {
        bool found = false;
        for (auto& p : params.items()) {
            if (p.name != entry.name) continue;
            if (p.value.shape() != entry.value.shape()) {
                throw ContractError("checkpoint: shape mismatch for '" + entry.name + "'");
            }
            p.value.data() = entry.value.data();
            found = true;
            break;
        }
        if (!found) throw ContractError("checkpoint: no parameter named '" + entry.name + "'");
    }
}

}  // namespace dfr
