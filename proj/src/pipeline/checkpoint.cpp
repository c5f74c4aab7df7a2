#include "pipeline/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_set>

#include "json.hpp"

using nlohmann::json;

namespace cdrn {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'R', 'N'};

template <typename T>
void put(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_bytes(std::ostream& out, const void* data, std::size_t n) {
    out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
}

void put_string(std::ostream& out, const std::string& s) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    put_bytes(out, s.data(), s.size());
}

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) fail("checkpoint: cannot open '" + p + "'");
    }

    template <typename T>
    T get(const char* what) {
        T v;
        in.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in) fail("checkpoint '" + path + "': truncated while reading " + what);
        return v;
    }

    void get_bytes(void* dst, std::size_t n, const char* what) {
        in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (!in) fail("checkpoint '" + path + "': truncated payload in " + what);
    }

    std::string get_string(const char* what) {
        const auto len = get<std::uint32_t>(what);
        if (len > (1u << 20)) fail("checkpoint '" + path + "': corrupt header (name length)");
        std::string s(len, '\0');
        get_bytes(s.data(), len, what);
        return s;
    }
};

}  // namespace

const Checkpoint::NamedTensor* Checkpoint::find(std::string_view name) const {
    for (const NamedTensor& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("checkpoint: cannot write '" + path + "'");
    put_bytes(out, kMagic, 4);
    put<std::uint32_t>(out, Checkpoint::kVersion);

    put<std::uint64_t>(out, ckpt.tensors.size());
    std::unordered_set<std::string> seen;
    for (const auto& t : ckpt.tensors) {
        if (!seen.insert(t.name).second)
            fail("checkpoint: duplicate tensor name '" + t.name + "'");
        put_string(out, t.name);
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (int e : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(e));
        if (t.values.size() != shape_numel(t.shape))
            fail("checkpoint: payload for '" + t.name + "' does not match its shape");
        put_bytes(out, t.values.data(), t.values.size() * sizeof(float));
    }

    put<std::uint8_t>(out, ckpt.has_optimizer ? 1 : 0);
    if (ckpt.has_optimizer) {
        put<std::uint64_t>(out, ckpt.optimizer_step);
        put<double>(out, ckpt.optimizer_config.lr);
        put<double>(out, ckpt.optimizer_config.beta1);
        put<double>(out, ckpt.optimizer_config.beta2);
        put<double>(out, ckpt.optimizer_config.eps);
        put<std::uint64_t>(out, ckpt.optimizer_slots.size());
        for (const auto& s : ckpt.optimizer_slots) {
            put_string(out, s.name);
            put<std::uint64_t>(out, s.m.size());
            put_bytes(out, s.m.data(), s.m.size() * sizeof(float));
            put_bytes(out, s.v.data(), s.v.size() * sizeof(float));
        }
    }

    json trailer;
    trailer["stage"] = ckpt.stage;
    trailer["epoch"] = ckpt.epoch;
    trailer["global_step"] = ckpt.global_step;
    trailer["config_checksum"] = ckpt.config_checksum;
    const std::string tj = trailer.dump();
    put<std::uint64_t>(out, tj.size());
    put_bytes(out, tj.data(), tj.size());
    if (!out) fail("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[4];
    r.get_bytes(magic, 4, "magic");
    if (std::memcmp(magic, kMagic, 4) != 0)
        fail("checkpoint '" + path + "': corrupt header (bad magic)");
    const auto version = r.get<std::uint32_t>("version");
    if (version != Checkpoint::kVersion)
        fail("checkpoint '" + path + "': unknown format version " + std::to_string(version));

    Checkpoint ckpt;
    const auto count = r.get<std::uint64_t>("tensor count");
    std::unordered_set<std::string> seen;
    for (std::uint64_t i = 0; i < count; ++i) {
        Checkpoint::NamedTensor t;
        t.name = r.get_string("tensor name");
        if (!seen.insert(t.name).second)
            fail("checkpoint '" + path + "': duplicate tensor name '" + t.name + "'");
        const auto rank = r.get<std::uint32_t>("rank");
        if (rank > 8) fail("checkpoint '" + path + "': corrupt header (rank)");
        std::size_t numel = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const auto e = r.get<std::uint64_t>("extent");
            if (e > (1u << 28)) fail("checkpoint '" + path + "': corrupt header (extent)");
            t.shape.push_back(static_cast<int>(e));
            numel *= e;
        }
        t.values.resize(numel);
        r.get_bytes(t.values.data(), numel * sizeof(float), ("tensor '" + t.name + "'").c_str());
        ckpt.tensors.push_back(std::move(t));
    }

    ckpt.has_optimizer = r.get<std::uint8_t>("optimizer flag") != 0;
    if (ckpt.has_optimizer) {
        ckpt.optimizer_step = r.get<std::uint64_t>("optimizer step");
        ckpt.optimizer_config.lr = r.get<double>("optimizer lr");
        ckpt.optimizer_config.beta1 = r.get<double>("optimizer beta1");
        ckpt.optimizer_config.beta2 = r.get<double>("optimizer beta2");
        ckpt.optimizer_config.eps = r.get<double>("optimizer eps");
        const auto slots = r.get<std::uint64_t>("optimizer slot count");
        for (std::uint64_t i = 0; i < slots; ++i) {
            Checkpoint::OptimizerSlot s;
            s.name = r.get_string("optimizer slot name");
            const auto numel = r.get<std::uint64_t>("optimizer slot size");
            if (numel > (1u << 28)) fail("checkpoint '" + path + "': corrupt optimizer block");
            s.m.resize(numel);
            s.v.resize(numel);
            r.get_bytes(s.m.data(), numel * sizeof(float), "optimizer m");
            r.get_bytes(s.v.data(), numel * sizeof(float), "optimizer v");
            ckpt.optimizer_slots.push_back(std::move(s));
        }
    }

    const auto trailer_len = r.get<std::uint64_t>("trailer length");
    if (trailer_len > (1u << 24)) fail("checkpoint '" + path + "': corrupt trailer");
    std::string tj(trailer_len, '\0');
    r.get_bytes(tj.data(), trailer_len, "trailer");
    json trailer = json::parse(tj, nullptr, false);
    if (trailer.is_discarded()) fail("checkpoint '" + path + "': corrupt trailer JSON");
    ckpt.stage = trailer.value("stage", 0);
    ckpt.epoch = trailer.value("epoch", 0);
    ckpt.global_step = trailer.value("global_step", std::uint64_t(0));
    ckpt.config_checksum = trailer.value("config_checksum", std::uint32_t(0));
    return ckpt;
}

}  // namespace cdrn
