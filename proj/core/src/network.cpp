#include "uedsr/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "uedsr/errors.hpp"

namespace uedsr {

void NetworkConfig::validate() const {
    if (base_channels < 1) throw ValidationError("base_channels must be >= 1");
    if (bins < 1) throw ValidationError("bins must be >= 1");
    if (dilation_first < 1 || dilation_second < 1) throw ValidationError("dilation rates must be >= 1");
    if (encoder_blocks < 1) throw ValidationError("encoder_blocks must be >= 1");
    if (n_latent_frames < 1) throw ValidationError("n_latent_frames must be >= 1");
    if (rho < 1) throw ValidationError("rho must be >= 1");
    if (!(delta_t_fraction > 0.0 && delta_t_fraction <= 1.0)) throw ValidationError("delta_t_fraction must lie in (0,1]");
}

void NetworkConfig::check_geometry(int width, int height) const {
    if (width < 4 || height < 4 || width % 4 != 0 || height % 4 != 0)
        throw GeometryError("image " + std::to_string(width) + "x" + std::to_string(height) +
                            " must have dimensions divisible by 4");
    if (width % rho != 0 || height % rho != 0)
        throw GeometryError("image " + std::to_string(width) + "x" + std::to_string(height) +
                            " not divisible by rho=" + std::to_string(rho));
}

namespace {

std::string scale_name(int index) { return "s" + std::to_string(kScales[index]); }

}  // namespace

std::vector<ParameterSpec> parameter_layout(const NetworkConfig& cfg) {
    cfg.validate();
    const int c = cfg.base_channels;
    std::vector<ParameterSpec> out;
    auto conv = [&](const std::string& name, int cin, int cout, Init init = Init::HeUniform) {
        out.push_back({name + ".weight", {cout, cin, 3, 3}, init});
        out.push_back({name + ".bias", {cout}, Init::Zero});
    };
    auto block = [&](const std::string& name, int cin, int cout) {
        conv(name + ".conv1", cin, cout);
        conv(name + ".conv2", cout, cout);
    };
    auto upscale = [&](const std::string& name, int cin, int cout) {
        out.push_back({name + ".upscale.weight", {cin, cout, 2, 2}, Init::HeUniform});
        out.push_back({name + ".upscale.bias", {cout}, Init::Zero});
        conv(name + ".proj", cout, cout);
    };

    for (int i = 0; i < 3; ++i) {
        for (int b = 0; b < cfg.encoder_blocks; ++b) {
            block("blur_enc." + scale_name(i) + ".b" + std::to_string(b), b == 0 ? 1 : c, c);
            block("event_enc." + scale_name(i) + ".b" + std::to_string(b), b == 0 ? cfg.event_channels() : c, c);
        }
    }
    block("mbef.fuse.s4", 2 * c, c);
    upscale("mbef.up.s4", c, c);
    block("mbef.fuse.s2", 3 * c, c);
    upscale("mbef.up.s2", c, c);
    block("mbef.fuse.s1", 3 * c, c);
    for (int i = 0; i < 3; ++i) {
        conv("aae." + scale_name(i) + ".conv1", c, c);
        conv("aae." + scale_name(i) + ".conv2", c, 1);
    }
    upscale("msd.up2", 2 * c, c);
    upscale("msd.up4a", 2 * c, c);
    upscale("msd.up4b", c, c);
    block("msd.trunk", 4 * c, c);
    conv("msd.head_md", c, c);
    conv("msd.head_esr", c, c);
    block("cip.img.md", c, c);
    block("cip.img.esr", c, c);
    conv("cip.img.out", 2 * c, 1, Init::Zero);
    block("cip.evt.esr", c, c);
    block("cip.evt.md", c, c);
    conv("cip.evt.out", 2 * c + cfg.bins, cfg.event_channels(), Init::Zero);
    return out;
}

template <typename T>
ModelState<T>::ModelState(NetworkConfig config) : config_(config) {
    for (const ParameterSpec& spec : parameter_layout(config_)) {
        index_.emplace(spec.name, params_.size());
        params_.push_back({spec.name, Tensor<T>(spec.shape)});
    }
}

template <typename T>
ModelState<T> ModelState<T>::initialized(const NetworkConfig& config, std::uint64_t seed) {
    ModelState state(config);
    std::mt19937_64 rng(seed);
    const auto layout = parameter_layout(config);
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].init != Init::HeUniform) continue;
        const auto& s = layout[i].shape;
        // Conv {out, in, k, k}: fan-in in*k*k. Transposed {in, out, 2, 2}: each output sums `in` taps.
        const bool transposed = layout[i].name.find(".upscale.") != std::string::npos;
        const double fan_in = transposed ? s[0] : static_cast<double>(s[1]) * s[2] * s[3];
        std::uniform_real_distribution<double> dist(-std::sqrt(6.0 / fan_in), std::sqrt(6.0 / fan_in));
        for (T& v : state.params_[i].value.data) v = static_cast<T>(dist(rng));
    }
    return state;
}

template <typename T>
std::size_t ModelState<T>::index_of(std::string_view name) const {
    const auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ValidationError("unknown parameter '" + std::string(name) + "'");
    return it->second;
}

template <typename T>
Tensor<T>& ModelState<T>::at(std::string_view name) {
    return params_[index_of(name)].value;
}

template <typename T>
const Tensor<T>& ModelState<T>::at(std::string_view name) const {
    return params_[index_of(name)].value;
}

template <typename T>
std::size_t ModelState<T>::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
}

template <typename T>
bool ModelState<T>::all_finite() const {
    for (const auto& p : params_)
        for (T v : p.value.data)
            if (!std::isfinite(v)) return false;
    return true;
}

template <typename T>
Var ParameterBinding<T>::operator()(std::string_view name) {
    const std::string key(name);
    if (const auto it = vars_.find(key); it != vars_.end()) return it->second;
    const std::size_t index = state_.index_of(name);
    const Var v = tape_.leaf(state_.parameters()[index].value, requires_grad_);
    vars_.emplace(key, v);
    bound_.emplace_back(index, v);
    return v;
}

std::array<Image, 3> blur_pyramid(const Image& blurry) {
    if (blurry.width() % 4 != 0 || blurry.height() % 4 != 0 || blurry.empty())
        throw GeometryError("blur pyramid needs dimensions divisible by 4");
    return {blurry, area_downsample(blurry, 2), area_downsample(blurry, 4)};
}

std::array<Image, 3> mask_pyramid(const EventMask& lr_mask, int rho, int hr_width, int hr_height) {
    if (lr_mask.width * rho != hr_width || lr_mask.height * rho != hr_height)
        throw GeometryError("event mask geometry inconsistent with rho");
    std::array<Image, 3> out;
    out[0] = Image(hr_width, hr_height);
    for (int y = 0; y < hr_height; ++y)
        for (int x = 0; x < hr_width; ++x) out[0].at(x, y) = lr_mask.at(y / rho, x / rho);
    for (int i = 1; i < 3; ++i) {
        const int s = kScales[i];
        Image m(hr_width / s, hr_height / s, EventMask::kQuietWeight);
        for (int y = 0; y < hr_height; ++y)
            for (int x = 0; x < hr_width; ++x) m.at(x / s, y / s) = std::max(m.at(x / s, y / s), out[0].at(x, y));
        out[i] = std::move(m);
    }
    return out;
}

InputPreparer::InputPreparer(const Image& blurry, const EventStream& lr_events, const NetworkConfig& config)
    : config_(config), lr_events_(lr_events) {
    config_.validate();
    config_.check_geometry(blurry.width(), blurry.height());
    if (lr_events.width() * config_.rho != blurry.width() || lr_events.height() * config_.rho != blurry.height())
        throw GeometryError("LR events " + std::to_string(lr_events.width()) + "x" + std::to_string(lr_events.height()) +
                            " do not match image " + std::to_string(blurry.width()) + "x" +
                            std::to_string(blurry.height()) + " at rho=" + std::to_string(config_.rho));
    pyramid_ = blur_pyramid(blurry);
    masks_ = mask_pyramid(event_mask(lr_events), config_.rho, blurry.width(), blurry.height());
    const EventTensor whole = encode_voxel_grid(lr_events, config_.bins);
    for (int i = 0; i < 3; ++i)
        whole_exposure_[i] = rescale_tensor(whole, static_cast<double>(config_.rho) / kScales[i]);
}

std::array<EventTensor, 3> InputPreparer::representation(Microseconds t) const {
    const Microseconds window = representation_window(lr_events_, config_.delta_t_fraction);
    const EventTensor dt = encode_voxel_grid(slice_window(lr_events_, t, window), config_.bins);
    std::array<EventTensor, 3> out;
    for (int i = 0; i < 3; ++i)
        out[i] = concat_channels(rescale_tensor(dt, static_cast<double>(config_.rho) / kScales[i]), whole_exposure_[i]);
    return out;
}

template <typename T>
NetworkInputs<T> InputPreparer::at(Microseconds t) const {
    const auto rep = representation(t);
    NetworkInputs<T> in;
    in.blurry = pyramid_[0];
    for (int i = 0; i < 3; ++i) {
        in.scales[i].blurry = to_tensor<T>(pyramid_[i]);
        in.scales[i].events = to_tensor<T>(rep[i]);
        in.scales[i].mask = to_tensor<T>(masks_[i]);
    }
    in.event_dt_hr = to_tensor<T>(slice_channels(rep[0], 0, config_.bins));
    return in;
}

template <typename T>
Tensor<T> to_tensor(const Image& image) {
    const auto px = image.pixels();
    return Tensor<T>({1, image.height(), image.width()}, std::vector<T>(px.begin(), px.end()));
}

template <typename T>
Tensor<T> to_tensor(const EventTensor& tensor) {
    return Tensor<T>({tensor.channels, tensor.height, tensor.width},
                     std::vector<T>(tensor.values.begin(), tensor.values.end()));
}

template <typename T>
Image to_image(const Tensor<T>& tensor) {
    if (tensor.shape.size() != 3 || tensor.shape[0] != 1) throw GeometryError("expected a single-channel map");
    return Image(tensor.shape[2], tensor.shape[1], std::vector<double>(tensor.data.begin(), tensor.data.end()));
}

template <typename T>
EventTensor to_event_tensor(const Tensor<T>& tensor) {
    if (tensor.shape.size() != 3) throw GeometryError("expected a 3-d tensor");
    EventTensor out(tensor.shape[0], tensor.shape[1], tensor.shape[2]);
    std::copy(tensor.data.begin(), tensor.data.end(), out.values.begin());
    return out;
}

namespace graph {

template <typename T>
Var conv_layer(Tape<T>& tape, ParameterBinding<T>& p, const std::string& prefix, Var x, int dilation) {
    return ops::conv2d(tape, x, p(prefix + ".weight"), p(prefix + ".bias"), dilation);
}

template <typename T>
Var conv_block(Tape<T>& tape, ParameterBinding<T>& p, const std::string& prefix, Var x) {
    const NetworkConfig& cfg = p.config();
    const Var h = ops::relu(tape, conv_layer(tape, p, prefix + ".conv1", x, cfg.dilation_first));
    return ops::relu(tape, conv_layer(tape, p, prefix + ".conv2", h, cfg.dilation_second));
}

template <typename T>
Var upscale_project(Tape<T>& tape, ParameterBinding<T>& p, const std::string& prefix, Var x, bool rectify) {
    const Var up = ops::conv_transpose2x(tape, x, p(prefix + ".upscale.weight"), p(prefix + ".upscale.bias"));
    const Var proj = conv_layer(tape, p, prefix + ".proj", up, p.config().dilation_first);
    return rectify ? ops::relu(tape, proj) : proj;
}

namespace {

template <typename T>
std::array<Var, 3> encode(Tape<T>& tape, ParameterBinding<T>& p, const std::string& stem, const std::array<Var, 3>& in) {
    std::array<Var, 3> out{};
    for (int i = 0; i < 3; ++i) {
        Var h = in[i];
        for (int b = 0; b < p.config().encoder_blocks; ++b)
            h = conv_block(tape, p, stem + "." + scale_name(i) + ".b" + std::to_string(b), h);
        out[i] = h;
    }
    return out;
}

template <typename T>
Var constant_map(Tape<T>& tape, const Tensor<T>& map) {
    return tape.leaf(map, false);
}

}  // namespace

template <typename T>
std::array<Var, 3> encode_blur(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& blurry) {
    return encode(tape, p, "blur_enc", blurry);
}

template <typename T>
std::array<Var, 3> encode_events(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& events) {
    return encode(tape, p, "event_enc", events);
}

template <typename T>
std::array<Var, 3> mbef(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& m_b,
                        const std::array<Var, 3>& m_e) {
    std::array<Var, 3> fused{};
    const Var in4[] = {m_b[2], m_e[2]};
    fused[2] = conv_block(tape, p, "mbef.fuse.s4", ops::concat<T>(tape, in4));
    const Var u2 = upscale_project(tape, p, "mbef.up.s4", fused[2], false);
    const Var in2[] = {m_b[1], m_e[1], u2};
    fused[1] = conv_block(tape, p, "mbef.fuse.s2", ops::concat<T>(tape, in2));
    const Var u1 = upscale_project(tape, p, "mbef.up.s2", fused[1], false);
    const Var in1[] = {m_b[0], m_e[0], u1};
    fused[0] = conv_block(tape, p, "mbef.fuse.s1", ops::concat<T>(tape, in1));
    return fused;
}

template <typename T>
Var aae_attention(Tape<T>& tape, ParameterBinding<T>& p, int scale_index, Var m_fu) {
    const std::string prefix = "aae." + scale_name(scale_index);
    const Var h = ops::relu(tape, conv_layer(tape, p, prefix + ".conv1", m_fu, p.config().dilation_first));
    return ops::sigmoid(tape, conv_layer(tape, p, prefix + ".conv2", h, p.config().dilation_second));
}

template <typename T>
Var aae_enhance(Tape<T>& tape, Var m_fu, Var m_b, Var attention, const Tensor<T>& event_mask) {
    Tensor<T> quiet = event_mask;
    for (T& v : quiet.data) v = T(1) - v;
    const Var w1 = ops::mul_map(tape, attention, constant_map(tape, event_mask));
    const Var w2 = ops::mul_map(tape, attention, constant_map(tape, quiet));
    const Var parts[] = {ops::mul_map(tape, m_b, w2), ops::mul_map(tape, m_fu, w1)};
    return ops::concat<T>(tape, parts);
}

template <typename T>
std::pair<Var, Var> msd(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& m_att) {
    const Var up2 = upscale_project(tape, p, "msd.up2", m_att[1], true);
    const Var up4 = upscale_project(tape, p, "msd.up4b", upscale_project(tape, p, "msd.up4a", m_att[2], true), true);
    const Var parts[] = {m_att[0], up2, up4};
    const Var trunk = conv_block(tape, p, "msd.trunk", ops::concat<T>(tape, parts));
    const int d = p.config().dilation_first;
    return {conv_layer(tape, p, "msd.head_md", trunk, d), conv_layer(tape, p, "msd.head_esr", trunk, d)};
}

template <typename T>
CipHeads cip(Tape<T>& tape, ParameterBinding<T>& p, Var m_md, Var m_esr, Var blurry, Var event_dt_hr) {
    const int d = p.config().dilation_first;
    const Var img_parts[] = {conv_block(tape, p, "cip.img.md", m_md), conv_block(tape, p, "cip.img.esr", m_esr)};
    const Var residual = conv_layer(tape, p, "cip.img.out", ops::concat<T>(tape, img_parts), d);
    const Var sharp = ops::add(tape, residual, blurry);
    const Var evt_parts[] = {conv_block(tape, p, "cip.evt.esr", m_esr), conv_block(tape, p, "cip.evt.md", m_md),
                             event_dt_hr};
    const Var events = conv_layer(tape, p, "cip.evt.out", ops::concat<T>(tape, evt_parts), d);
    return {residual, sharp, events};
}

template <typename T>
ForwardGraph<T> forward(Tape<T>& tape, ParameterBinding<T>& p, const NetworkInputs<T>& inputs) {
    std::array<Var, 3> blurry{}, events{};
    for (int i = 0; i < 3; ++i) {
        blurry[i] = tape.leaf(inputs.scales[i].blurry);
        events[i] = tape.leaf(inputs.scales[i].events);
    }
    const auto m_b = encode_blur(tape, p, blurry);
    const auto m_e = encode_events(tape, p, events);
    const auto m_fu = mbef(tape, p, m_b, m_e);
    ForwardGraph<T> out{};
    std::array<Var, 3> m_att{};
    for (int i = 0; i < 3; ++i) {
        out.attention[i] = aae_attention(tape, p, i, m_fu[i]);
        m_att[i] = aae_enhance(tape, m_fu[i], m_b[i], out.attention[i], inputs.scales[i].mask);
    }
    const auto [m_md, m_esr] = msd(tape, p, m_att);
    const CipHeads heads = cip(tape, p, m_md, m_esr, blurry[0], tape.leaf(inputs.event_dt_hr));
    out.residual = heads.residual;
    out.sharp = heads.sharp;
    out.events = heads.events;
    return out;
}

}  // namespace graph

template <typename T>
ModelOutput run(const ModelState<T>& state, const NetworkInputs<T>& inputs) {
    Tape<T> tape;
    ParameterBinding<T> p(tape, state, false);
    const auto g = graph::forward(tape, p, inputs);
    ModelOutput out;
    // added in double precision so that a zero residual returns the input bitwise
    out.sharp = inputs.blurry;
    const Image residual = to_image(tape.value(g.residual));
    for (std::size_t i = 0; i < residual.size(); ++i) out.sharp.pixels()[i] += residual.pixels()[i];
    out.hr_event_tensor = to_event_tensor(tape.value(g.events));
    for (int i = 0; i < 3; ++i) out.attention_maps[i] = to_image(tape.value(g.attention[i]));
    return out;
}

template <typename T>
ModelOutput forward(const Image& blurry, const EventStream& lr_events, Microseconds t, const ModelState<T>& state) {
    const InputPreparer prep(blurry, lr_events, state.config());
    return run(state, prep.template at<T>(t));
}

template <typename T>
SequencePrediction predict_sequence(const Image& blurry, const EventStream& lr_events,
                                    const std::vector<Microseconds>& timestamps, const ModelState<T>& state) {
    const InputPreparer prep(blurry, lr_events, state.config());
    std::vector<Image> frames;
    SequencePrediction out;
    for (Microseconds t : timestamps) {
        ModelOutput o = run(state, prep.template at<T>(t));
        frames.push_back(std::move(o.sharp));
        out.event_tensors.push_back(std::move(o.hr_event_tensor));
    }
    out.frames = FrameSequence(std::move(frames), timestamps);
    return out;
}

#define UEDSR_INSTANTIATE_NETWORK(T)                                                                              \
    template class ModelState<T>;                                                                                 \
    template class ParameterBinding<T>;                                                                           \
    template NetworkInputs<T> InputPreparer::at<T>(Microseconds) const;                                           \
    template Tensor<T> to_tensor<T>(const Image&);                                                                \
    template Tensor<T> to_tensor<T>(const EventTensor&);                                                          \
    template Image to_image<T>(const Tensor<T>&);                                                                 \
    template EventTensor to_event_tensor<T>(const Tensor<T>&);                                                    \
    template Var graph::conv_layer<T>(Tape<T>&, ParameterBinding<T>&, const std::string&, Var, int);             \
    template Var graph::conv_block<T>(Tape<T>&, ParameterBinding<T>&, const std::string&, Var);                  \
    template Var graph::upscale_project<T>(Tape<T>&, ParameterBinding<T>&, const std::string&, Var, bool);       \
    template std::array<Var, 3> graph::encode_blur<T>(Tape<T>&, ParameterBinding<T>&, const std::array<Var, 3>&); \
    template std::array<Var, 3> graph::encode_events<T>(Tape<T>&, ParameterBinding<T>&,                          \
                                                        const std::array<Var, 3>&);                               \
    template std::array<Var, 3> graph::mbef<T>(Tape<T>&, ParameterBinding<T>&, const std::array<Var, 3>&,         \
                                               const std::array<Var, 3>&);                                        \
    template Var graph::aae_attention<T>(Tape<T>&, ParameterBinding<T>&, int, Var);                              \
    template Var graph::aae_enhance<T>(Tape<T>&, Var, Var, Var, const Tensor<T>&);                               \
    template std::pair<Var, Var> graph::msd<T>(Tape<T>&, ParameterBinding<T>&, const std::array<Var, 3>&);       \
    template graph::CipHeads graph::cip<T>(Tape<T>&, ParameterBinding<T>&, Var, Var, Var, Var);                         \
    template graph::ForwardGraph<T> graph::forward<T>(Tape<T>&, ParameterBinding<T>&, const NetworkInputs<T>&);  \
    template ModelOutput run<T>(const ModelState<T>&, const NetworkInputs<T>&);                                  \
    template ModelOutput forward<T>(const Image&, const EventStream&, Microseconds, const ModelState<T>&);        \
    template SequencePrediction predict_sequence<T>(const Image&, const EventStream&,                             \
                                                    const std::vector<Microseconds>&, const ModelState<T>&);

UEDSR_INSTANTIATE_NETWORK(float)
UEDSR_INSTANTIATE_NETWORK(double)
#undef UEDSR_INSTANTIATE_NETWORK

}  // namespace uedsr
