#include "uedsr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "uedsr/errors.hpp"

namespace uedsr {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'C', 'Z', 'N', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kFloat32 = 0;

template <typename V>
void put(std::vector<char>& out, V value) {
    const auto* raw = reinterpret_cast<const char*>(&value);
    out.insert(out.end(), raw, raw + sizeof(V));
}

class Reader {
public:
    Reader(const std::filesystem::path& path, std::vector<char> data) : path_(path), data_(std::move(data)) {}

    template <typename V>
    V take() {
        V v;
        std::memcpy(&v, bytes(sizeof(V)), sizeof(V));
        return v;
    }
    const char* bytes(std::size_t n) {
        if (n > data_.size() - pos_) throw IntegrityError(path_.string(), "truncated checkpoint");
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    std::filesystem::path path_;
    std::vector<char> data_;
    std::size_t pos_ = 0;
};

}  // namespace

void store_network_config(KeyValueConfig& out, const NetworkConfig& c) {
    out.set("base_channels", c.base_channels);
    out.set("bins", c.bins);
    out.set("dilation_first", c.dilation_first);
    out.set("dilation_second", c.dilation_second);
    out.set("encoder_blocks", c.encoder_blocks);
    out.set("n_latent_frames", c.n_latent_frames);
    out.set("rho", c.rho);
    out.set("delta_t_fraction", c.delta_t_fraction);
}

NetworkConfig load_network_config(const KeyValueConfig& in, NetworkConfig c) {
    c.base_channels = static_cast<int>(in.get_int("base_channels", c.base_channels));
    c.bins = static_cast<int>(in.get_int("bins", c.bins));
    c.dilation_first = static_cast<int>(in.get_int("dilation_first", c.dilation_first));
    c.dilation_second = static_cast<int>(in.get_int("dilation_second", c.dilation_second));
    c.encoder_blocks = static_cast<int>(in.get_int("encoder_blocks", c.encoder_blocks));
    c.n_latent_frames = static_cast<int>(in.get_int("n_latent_frames", c.n_latent_frames));
    c.rho = static_cast<int>(in.get_int("rho", c.rho));
    c.delta_t_fraction = in.get_double("delta_t_fraction", c.delta_t_fraction);
    c.validate();
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState<float>& state) {
    std::vector<char> buf(kMagic, kMagic + 4);
    put<std::uint32_t>(buf, kVersion);
    KeyValueConfig cfg;
    store_network_config(cfg, state.config());
    const std::string text = cfg.dump();
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(text.size()));
    buf.insert(buf.end(), text.begin(), text.end());
    put<std::uint32_t>(buf, static_cast<std::uint32_t>(state.parameters().size()));
    for (const auto& p : state.parameters()) {
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.name.size()));
        buf.insert(buf.end(), p.name.begin(), p.name.end());
        put<std::uint32_t>(buf, static_cast<std::uint32_t>(p.value.shape.size()));
        for (int d : p.value.shape) put<std::uint32_t>(buf, static_cast<std::uint32_t>(d));
        put<std::uint8_t>(buf, kFloat32);
        const std::uint64_t bytes = p.value.data.size() * sizeof(float);
        put<std::uint64_t>(buf, bytes);
        const auto* raw = reinterpret_cast<const char*>(p.value.data.data());
        buf.insert(buf.end(), raw, raw + bytes);
    }

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IntegrityError(tmp.string(), "cannot open for writing");
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!out) throw IntegrityError(tmp.string(), "write failed");
    }
    std::filesystem::rename(tmp, path);
}

ModelState<float> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError(path.string(), "cannot open checkpoint");
    Reader r(path, std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
    if (std::memcmp(r.bytes(4), kMagic, 4) != 0) throw IntegrityError(path.string(), "bad magic, expected CZN1");
    if (r.take<std::uint32_t>() != kVersion) throw IntegrityError(path.string(), "unsupported checkpoint version");
    const auto text_len = r.take<std::uint32_t>();
    const std::string text(r.bytes(text_len), text_len);
    const NetworkConfig config = load_network_config(KeyValueConfig::parse(text, path.string()));
    ModelState<float> state(config);

    const auto count = r.take<std::uint32_t>();
    if (count != state.parameters().size())
        throw IntegrityError(path.string(), "parameter count " + std::to_string(count) + " does not match config");
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = r.take<std::uint32_t>();
        const std::string name(r.bytes(name_len), name_len);
        const auto ndim = r.take<std::uint32_t>();
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d) shape.push_back(static_cast<int>(r.take<std::uint32_t>()));
        if (r.take<std::uint8_t>() != kFloat32) throw IntegrityError(path.string(), "unsupported dtype for " + name);
        const auto bytes = r.take<std::uint64_t>();
        Tensor<float>* target = nullptr;
        try {
            target = &state.at(name);
        } catch (const ValidationError&) {
            throw IntegrityError(path.string(), "unexpected parameter '" + name + "'");
        }
        if (target->shape != shape || bytes != target->data.size() * sizeof(float))
            throw IntegrityError(path.string(), "shape mismatch for '" + name + "': " + shape_string(shape));
        std::memcpy(target->data.data(), r.bytes(bytes), bytes);
    }
    if (!r.done()) throw IntegrityError(path.string(), "trailing bytes after parameters");
    return state;
}

}  // namespace uedsr
