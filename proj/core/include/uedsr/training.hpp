#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "uedsr/autograd.hpp"
#include "uedsr/config_file.hpp"
#include "uedsr/network.hpp"
#include "uedsr/sensor_sim.hpp"

namespace uedsr {

struct TrainConfig {
    double alpha = 1.0;  // weight of the event loss
    double beta = 1.0;   // weight of the attention loss
    double lr = 1e-4;
    double lr_decay = 0.98;
    int lr_decay_every = 5;  // epochs
    int epochs = 1;
    int batch_size = 2;
    int max_iterations = 0;  // optimizer steps; 0 = no limit
    int keys_per_step = 1;   // latent timestamps supervised per sample and step; 0 = all
    bool augment = true;
    bool flips = true;
    double rotation_range_deg = 10.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void store_train_config(KeyValueConfig& out, const TrainConfig& config);
TrainConfig load_train_config(const KeyValueConfig& in, TrainConfig defaults = {});

// Learning rate used during a zero-based epoch.
double lr_at_epoch(const TrainConfig& config, int epoch);

// Latent-frame indices supervised for one sample in one step: all of them when
// keys_per_step is 0 or >= n_keys, otherwise distinct random ones in ascending order.
std::vector<int> draw_keys(int n_keys, int keys_per_step, std::mt19937_64& rng);

struct LossComponents {
    double md = 0.0;
    double esr = 0.0;
    double att = 0.0;
};

// Mean absolute error; all three throw GeometryError on mismatched shapes.
double loss_md(const Image& pred, const Image& gt);
double loss_esr(const EventTensor& pred, const EventTensor& gt);
// Mean over scales of the MAE between each prediction and the HR target
// area-downsampled to that prediction's geometry.
double loss_att(std::span<const Image> pred, const Image& gt);

// md + alpha * esr + beta * att. Throws DivergenceError if any component is
// not finite.
double loss_total(const LossComponents& components, const TrainConfig& config);

struct Augmentation {
    bool flip_horizontal = false;
    bool flip_vertical = false;
    double rotation_deg = 0.0;

    bool identity() const noexcept { return !flip_horizontal && !flip_vertical && rotation_deg == 0.0; }
};

Augmentation draw_augmentation(const TrainConfig& config, std::uint64_t seed);

// Applies flips, then a rotation about the image centre, to every image and
// to the coordinates of both event streams. Images are resampled bilinearly
// with zero padding; rotated events are rounded to the nearest pixel and
// dropped if they leave the sensor.
DatasetSample augment(const DatasetSample& sample, const Augmentation& augmentation);
DatasetSample augment(const DatasetSample& sample, const TrainConfig& config, std::uint64_t seed);

Image flip_image(const Image& image, bool horizontal, bool vertical);
Image rotate_image(const Image& image, double degrees);
EventStream flip_events(const EventStream& stream, bool horizontal, bool vertical);
EventStream rotate_events(const EventStream& stream, double degrees);

// Supervision for one key frame of one sample.
template <typename T>
struct StepTargets {
    Tensor<T> sharp;                     // {1, H, W}
    Tensor<T> events;                    // {2*bins, H, W}
    std::array<Tensor<T>, 3> attention;  // scales 1, 2, 4
};

template <typename T>
StepTargets<T> make_targets(const DatasetSample& sample, int key_index, const NetworkConfig& config);

template <typename T>
struct LossEvaluation {
    LossComponents components;
    double total = 0.0;
    Image prediction;
    // One entry per parameter in layout order; empty unless requested.
    std::vector<Tensor<T>> gradients;
};

template <typename T>
LossEvaluation<T> evaluate_loss(const ModelState<T>& state, const NetworkInputs<T>& inputs,
                                const StepTargets<T>& targets, const TrainConfig& config, bool with_gradients);

class Adam {
public:
    Adam(const ModelState<float>& state, const TrainConfig& config);
    // One update with the given gradients, which must follow the layout order.
    void step(ModelState<float>& state, const std::vector<Tensor<float>>& gradients, double lr);
    long long steps() const noexcept { return t_; }

private:
    double beta1_, beta2_, epsilon_;
    long long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

struct EpochRecord {
    int epoch = 0;
    double l_md = 0.0;
    double l_esr = 0.0;
    double l_att = 0.0;
    double l_total = 0.0;
    double lr = 0.0;
    double psnr_train = 0.0;
    double ssim_train = 0.0;
    double seconds = 0.0;
    int steps = 0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::vector<double> step_losses;  // L_total of every optimizer step
    double wall_seconds = 0.0;

    void write_csv(const std::filesystem::path& path) const;
    std::string csv() const;
};

struct TrainOptions {
    // Written after every completed epoch when non-empty.
    std::filesystem::path checkpoint_path;
    std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
    ModelState<float> state;
    TrainReport report;
};

TrainResult train(const std::vector<DatasetSample>& dataset, const ModelState<float>& initial,
                  const TrainConfig& config, const TrainOptions& options = {});
TrainResult train(const std::vector<DatasetSample>& dataset, const NetworkConfig& network,
                  const TrainConfig& config, const TrainOptions& options = {});

}  // namespace uedsr
