#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "uedsr/autograd.hpp"
#include "uedsr/event_core.hpp"
#include "uedsr/image.hpp"
#include "uedsr/sensor_sim.hpp"
#include "uedsr/tensor.hpp"

namespace uedsr {

// Scale reduction factors of the three branches, finest first.
inline constexpr std::array<int, 3> kScales{1, 2, 4};

struct NetworkConfig {
    int base_channels = 16;
    int bins = kDefaultBins;  // per representation; the event input has 2 * bins channels
    int dilation_first = 1;
    int dilation_second = 2;
    int encoder_blocks = 2;
    int n_latent_frames = kLatentFrames;
    int rho = 4;
    double delta_t_fraction = 0.2;

    int event_channels() const noexcept { return 2 * bins; }
    void validate() const;
    // Throws GeometryError unless an HR image of this size is admissible.
    void check_geometry(int width, int height) const;

    friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

enum class Init { HeUniform, Zero };

struct ParameterSpec {
    std::string name;
    std::vector<int> shape;
    Init init;
};

// Every learnable tensor of the network, in a fixed order.
std::vector<ParameterSpec> parameter_layout(const NetworkConfig& config);

template <typename T>
class ModelState {
public:
    struct Parameter {
        std::string name;
        Tensor<T> value;

        friend bool operator==(const Parameter&, const Parameter&) = default;
    };

    // All parameters zero.
    explicit ModelState(NetworkConfig config);
    // He-uniform convolutions; zero biases and zero image/event output layers,
    // so the untrained network returns the blurry input unchanged.
    static ModelState initialized(const NetworkConfig& config, std::uint64_t seed);

    const NetworkConfig& config() const noexcept { return config_; }
    std::vector<Parameter>& parameters() noexcept { return params_; }
    const std::vector<Parameter>& parameters() const noexcept { return params_; }

    Tensor<T>& at(std::string_view name);
    const Tensor<T>& at(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    std::size_t scalar_count() const;
    bool all_finite() const;

    template <typename U>
    ModelState<U> cast() const {
        ModelState<U> out(config_);
        for (std::size_t i = 0; i < params_.size(); ++i) out.parameters()[i].value = params_[i].value.template cast<U>();
        return out;
    }

    friend bool operator==(const ModelState&, const ModelState&) = default;

private:
    NetworkConfig config_;
    std::vector<Parameter> params_;
    std::unordered_map<std::string, std::size_t> index_;
};

// Pushes parameters onto a tape on first use.
template <typename T>
class ParameterBinding {
public:
    ParameterBinding(Tape<T>& tape, const ModelState<T>& state, bool requires_grad)
        : tape_(tape), state_(state), requires_grad_(requires_grad) {}

    Var operator()(std::string_view name);
    const std::vector<std::pair<std::size_t, Var>>& bound() const noexcept { return bound_; }
    const NetworkConfig& config() const noexcept { return state_.config(); }

private:
    Tape<T>& tape_;
    const ModelState<T>& state_;
    bool requires_grad_;
    std::unordered_map<std::string, Var> vars_;
    std::vector<std::pair<std::size_t, Var>> bound_;
};

template <typename T>
struct ScaleInputs {
    Tensor<T> blurry;  // {1, H/s, W/s}
    Tensor<T> events;  // {2*bins, H/s, W/s}
    Tensor<T> mask;    // {1, H/s, W/s}, event mask weights
};

template <typename T>
struct NetworkInputs {
    Image blurry;  // full resolution, double precision; the residual is added to it
    std::array<ScaleInputs<T>, 3> scales;
    Tensor<T> event_dt_hr;  // time-dependent channels at HR geometry, {bins, H, W}
};

// Area-downsampled copies at scales 1, 2 and 4.
std::array<Image, 3> blur_pyramid(const Image& blurry);

// Event mask at each scale: the LR mask replicated to HR geometry, then
// max-pooled to the coarser scales.
std::array<Image, 3> mask_pyramid(const EventMask& lr_mask, int rho, int hr_width, int hr_height);

// Double-precision preprocessing of one (blurry, LR events) pair. Everything
// that does not depend on t is computed once.
class InputPreparer {
public:
    InputPreparer(const Image& blurry, const EventStream& lr_events, const NetworkConfig& config);

    template <typename T>
    NetworkInputs<T> at(Microseconds t) const;

    // LR representation (2*bins channels) rescaled to the geometry of each scale.
    std::array<EventTensor, 3> representation(Microseconds t) const;

    const std::array<Image, 3>& pyramid() const noexcept { return pyramid_; }
    const std::array<Image, 3>& masks() const noexcept { return masks_; }

private:
    NetworkConfig config_;
    EventStream lr_events_;
    std::array<Image, 3> pyramid_;
    std::array<Image, 3> masks_;
    std::array<EventTensor, 3> whole_exposure_;
};

template <typename T>
Tensor<T> to_tensor(const Image& image);
template <typename T>
Tensor<T> to_tensor(const EventTensor& tensor);
template <typename T>
Image to_image(const Tensor<T>& tensor);
template <typename T>
EventTensor to_event_tensor(const Tensor<T>& tensor);

// Graph stages. Scale-indexed arrays hold scale 1, 2, 4 in that order.
namespace graph {

template <typename T>
Var conv_layer(Tape<T>& tape, ParameterBinding<T>& p, const std::string& prefix, Var x, int dilation);

// Two dilated 3x3 convolutions, each followed by a rectifier.
template <typename T>
Var conv_block(Tape<T>& tape, ParameterBinding<T>& p, const std::string& prefix, Var x);

// Learned x2 upscale (transposed convolution) followed by a single convolution.
template <typename T>
Var upscale_project(Tape<T>& tape, ParameterBinding<T>& p, const std::string& prefix, Var x, bool rectify);

template <typename T>
std::array<Var, 3> encode_blur(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& blurry);

template <typename T>
std::array<Var, 3> encode_events(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& events);

// Coarse-to-fine blur/event fusion.
template <typename T>
std::array<Var, 3> mbef(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& m_b,
                        const std::array<Var, 3>& m_e);

// Sigmoid of the per-scale attention subnetwork: one channel in (0, 1).
template <typename T>
Var aae_attention(Tape<T>& tape, ParameterBinding<T>& p, int scale_index, Var m_fu);

// concat(M_b * A * (1 - EM), M_fu * A * EM).
template <typename T>
Var aae_enhance(Tape<T>& tape, Var m_fu, Var m_b, Var attention, const Tensor<T>& event_mask);

// Multi-scale decoder: returns (M_md, M_esr) at full resolution.
template <typename T>
std::pair<Var, Var> msd(Tape<T>& tape, ParameterBinding<T>& p, const std::array<Var, 3>& m_att);

struct CipHeads {
    Var residual;  // sharp - blurry
    Var sharp;
    Var events;
};

// Cross-interaction heads.
template <typename T>
CipHeads cip(Tape<T>& tape, ParameterBinding<T>& p, Var m_md, Var m_esr, Var blurry, Var event_dt_hr);

template <typename T>
struct ForwardGraph {
    Var residual;
    Var sharp;
    Var events;
    std::array<Var, 3> attention;
};

template <typename T>
ForwardGraph<T> forward(Tape<T>& tape, ParameterBinding<T>& p, const NetworkInputs<T>& inputs);

}  // namespace graph

struct ModelOutput {
    Image sharp;                          // HR, unclamped
    EventTensor hr_event_tensor;          // 2*bins channels at HR
    std::array<Image, 3> attention_maps;  // scales 1, 2, 4
};

template <typename T>
ModelOutput run(const ModelState<T>& state, const NetworkInputs<T>& inputs);

template <typename T>
ModelOutput forward(const Image& blurry, const EventStream& lr_events, Microseconds t, const ModelState<T>& state);

struct SequencePrediction {
    FrameSequence frames;
    std::vector<EventTensor> event_tensors;
};

template <typename T>
SequencePrediction predict_sequence(const Image& blurry, const EventStream& lr_events,
                                    const std::vector<Microseconds>& timestamps, const ModelState<T>& state);

}  // namespace uedsr
