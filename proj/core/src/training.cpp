#include "uedsr/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

#include "uedsr/checkpoint.hpp"
#include "uedsr/errors.hpp"
#include "uedsr/metrics.hpp"

namespace uedsr {

void TrainConfig::validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw RangeError("alpha and beta must be >= 0");
    if (!(lr > 0.0)) throw RangeError("lr must be > 0");
    if (!(lr_decay > 0.0)) throw RangeError("lr_decay must be > 0");
    if (lr_decay_every < 1) throw RangeError("lr_decay_every must be >= 1");
    if (epochs < 0) throw RangeError("epochs must be >= 0");
    if (batch_size < 1) throw RangeError("batch_size must be >= 1");
    if (max_iterations < 0) throw RangeError("max_iterations must be >= 0");
    if (keys_per_step < 0) throw RangeError("keys_per_step must be >= 0");
    if (!(rotation_range_deg >= 0.0) || rotation_range_deg > 180.0)
        throw RangeError("rotation_range_deg must be in [0, 180]");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw RangeError("adam betas must be in [0, 1)");
    if (!(adam_epsilon > 0.0)) throw RangeError("adam_epsilon must be > 0");
}

void store_train_config(KeyValueConfig& out, const TrainConfig& c) {
    out.set("alpha", c.alpha);
    out.set("beta", c.beta);
    out.set("lr", c.lr);
    out.set("lr_decay", c.lr_decay);
    out.set("lr_decay_every", c.lr_decay_every);
    out.set("epochs", c.epochs);
    out.set("batch_size", c.batch_size);
    out.set("max_iterations", c.max_iterations);
    out.set("keys_per_step", c.keys_per_step);
    out.set("augment", c.augment);
    out.set("flips", c.flips);
    out.set("rotation_range_deg", c.rotation_range_deg);
    out.set("adam_beta1", c.adam_beta1);
    out.set("adam_beta2", c.adam_beta2);
    out.set("adam_epsilon", c.adam_epsilon);
    out.set("seed", c.seed);
}

TrainConfig load_train_config(const KeyValueConfig& in, TrainConfig c) {
    c.alpha = in.get_double("alpha", c.alpha);
    c.beta = in.get_double("beta", c.beta);
    c.lr = in.get_double("lr", c.lr);
    c.lr_decay = in.get_double("lr_decay", c.lr_decay);
    c.lr_decay_every = static_cast<int>(in.get_int("lr_decay_every", c.lr_decay_every));
    c.epochs = static_cast<int>(in.get_int("epochs", c.epochs));
    c.batch_size = static_cast<int>(in.get_int("batch_size", c.batch_size));
    c.max_iterations = static_cast<int>(in.get_int("max_iterations", c.max_iterations));
    c.keys_per_step = static_cast<int>(in.get_int("keys_per_step", c.keys_per_step));
    c.augment = in.get_bool("augment", c.augment);
    c.flips = in.get_bool("flips", c.flips);
    c.rotation_range_deg = in.get_double("rotation_range_deg", c.rotation_range_deg);
    c.adam_beta1 = in.get_double("adam_beta1", c.adam_beta1);
    c.adam_beta2 = in.get_double("adam_beta2", c.adam_beta2);
    c.adam_epsilon = in.get_double("adam_epsilon", c.adam_epsilon);
    c.seed = in.get_uint64("seed", c.seed);
    c.validate();
    return c;
}

double lr_at_epoch(const TrainConfig& config, int epoch) {
    return config.lr * std::pow(config.lr_decay, epoch / config.lr_decay_every);
}

namespace {

double mean_abs_diff(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
    return sum / static_cast<double>(a.size());
}

}  // namespace

double loss_md(const Image& pred, const Image& gt) {
    require_same_geometry(pred, gt, "loss_md");
    if (pred.empty()) throw GeometryError("loss_md: empty image");
    return mean_abs_diff(pred.pixels(), gt.pixels());
}

double loss_esr(const EventTensor& pred, const EventTensor& gt) {
    if (pred.channels != gt.channels || pred.height != gt.height || pred.width != gt.width)
        throw GeometryError("loss_esr: tensor shapes differ");
    if (pred.values.empty()) throw GeometryError("loss_esr: empty tensor");
    return mean_abs_diff(pred.values, gt.values);
}

double loss_att(std::span<const Image> pred, const Image& gt) {
    if (pred.empty()) throw GeometryError("loss_att: no predictions");
    double sum = 0.0;
    for (const Image& p : pred) {
        if (p.empty() || gt.width() % p.width() != 0 || gt.height() % p.height() != 0 ||
            gt.width() / p.width() != gt.height() / p.height())
            throw GeometryError("loss_att: prediction " + std::to_string(p.width()) + "x" +
                                std::to_string(p.height()) + " is not an integer reduction of " +
                                std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
        const int factor = gt.width() / p.width();
        sum += loss_md(p, factor == 1 ? gt : area_downsample(gt, factor));
    }
    return sum / static_cast<double>(pred.size());
}

double loss_total(const LossComponents& c, const TrainConfig& config) {
    if (!std::isfinite(c.md) || !std::isfinite(c.esr) || !std::isfinite(c.att)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "non-finite loss component: l_md=%g l_esr=%g l_att=%g", c.md, c.esr, c.att);
        throw DivergenceError(buf);
    }
    return c.md + config.alpha * c.esr + config.beta * c.att;
}

// ---- augmentation ----

Augmentation draw_augmentation(const TrainConfig& config, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Augmentation a;
    if (config.flips) {
        // none, horizontal, vertical, both
        const int kind = std::uniform_int_distribution<int>(0, 3)(rng);
        a.flip_horizontal = (kind & 1) != 0;
        a.flip_vertical = (kind & 2) != 0;
    }
    if (config.rotation_range_deg > 0.0)
        a.rotation_deg = std::uniform_real_distribution<double>(-config.rotation_range_deg, config.rotation_range_deg)(rng);
    return a;
}

Image flip_image(const Image& image, bool horizontal, bool vertical) {
    const int w = image.width(), h = image.height();
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            out.at(horizontal ? w - 1 - x : x, vertical ? h - 1 - y : y) = image.at(x, y);
    return out;
}

Image rotate_image(const Image& image, double degrees) {
    const int w = image.width(), h = image.height();
    const double theta = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
    auto sample = [&](int x, int y) { return x < 0 || y < 0 || x >= w || y >= h ? 0.0 : image.at(x, y); };
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // inverse rotation of the destination pixel
            const double dx = x - cx, dy = y - cy;
            const double sx = c * dx + s * dy + cx;
            const double sy = -s * dx + c * dy + cy;
            const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            const double fx = sx - x0, fy = sy - y0;
            out.at(x, y) = (1 - fy) * ((1 - fx) * sample(x0, y0) + fx * sample(x0 + 1, y0)) +
                           fy * ((1 - fx) * sample(x0, y0 + 1) + fx * sample(x0 + 1, y0 + 1));
        }
    return out;
}

EventStream flip_events(const EventStream& stream, bool horizontal, bool vertical) {
    std::vector<Event> events(stream.events().begin(), stream.events().end());
    for (Event& e : events) {
        if (horizontal) e.x = stream.width() - 1 - e.x;
        if (vertical) e.y = stream.height() - 1 - e.y;
    }
    return EventStream(stream.width(), stream.height(), stream.t_start(), stream.t_end(), std::move(events));
}

EventStream rotate_events(const EventStream& stream, double degrees) {
    const double theta = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const double cx = (stream.width() - 1) / 2.0, cy = (stream.height() - 1) / 2.0;
    std::vector<Event> events;
    events.reserve(stream.size());
    for (Event e : stream.events()) {
        const double dx = e.x - cx, dy = e.y - cy;
        const long x = std::lround(c * dx - s * dy + cx);
        const long y = std::lround(s * dx + c * dy + cy);
        if (x < 0 || y < 0 || x >= stream.width() || y >= stream.height()) continue;
        e.x = static_cast<std::int32_t>(x);
        e.y = static_cast<std::int32_t>(y);
        events.push_back(e);
    }
    return EventStream(stream.width(), stream.height(), stream.t_start(), stream.t_end(), std::move(events));
}

DatasetSample augment(const DatasetSample& sample, const Augmentation& a) {
    if (a.identity()) return sample;
    auto image = [&](const Image& im) {
        Image out = flip_image(im, a.flip_horizontal, a.flip_vertical);
        return a.rotation_deg == 0.0 ? out : rotate_image(out, a.rotation_deg);
    };
    auto events = [&](const EventStream& st) {
        EventStream out = flip_events(st, a.flip_horizontal, a.flip_vertical);
        return a.rotation_deg == 0.0 ? out : rotate_events(out, a.rotation_deg);
    };
    DatasetSample out = sample;
    out.hr_blurry = image(sample.hr_blurry);
    std::vector<Image> frames;
    for (const Image& f : sample.hr_sharp.frames()) frames.push_back(image(f));
    out.hr_sharp = FrameSequence(std::move(frames), sample.hr_sharp.timestamps());
    for (Image& m : out.gt_attention) m = image(m);
    out.lr_events = events(sample.lr_events);
    out.hr_events = events(sample.hr_events);
    return out;
}

DatasetSample augment(const DatasetSample& sample, const TrainConfig& config, std::uint64_t seed) {
    return augment(sample, draw_augmentation(config, seed));
}

// ---- loss graph ----

template <typename T>
StepTargets<T> make_targets(const DatasetSample& sample, int key_index, const NetworkConfig& config) {
    if (key_index < 0 || static_cast<std::size_t>(key_index) >= sample.hr_sharp.size())
        throw RangeError("key frame index " + std::to_string(key_index) + " out of range");
    const Microseconds t = sample.hr_sharp.timestamps()[key_index];
    StepTargets<T> out;
    out.sharp = to_tensor<T>(sample.hr_sharp[key_index]);
    out.events = to_tensor<T>(build_representation(sample.hr_events, t, config.delta_t_fraction, config.bins));
    const Image& att = sample.gt_attention[key_index];
    for (int i = 0; i < 3; ++i)
        out.attention[i] = to_tensor<T>(kScales[i] == 1 ? att : area_downsample(att, kScales[i]));
    return out;
}

template <typename T>
LossEvaluation<T> evaluate_loss(const ModelState<T>& state, const NetworkInputs<T>& inputs,
                                const StepTargets<T>& targets, const TrainConfig& config, bool with_gradients) {
    Tape<T> tape;
    ParameterBinding<T> p(tape, state, with_gradients);
    const auto g = graph::forward(tape, p, inputs);

    const std::array<Var, 5> terms{ops::l1_mean(tape, g.sharp, targets.sharp),
                                   ops::l1_mean(tape, g.events, targets.events),
                                   ops::l1_mean(tape, g.attention[0], targets.attention[0]),
                                   ops::l1_mean(tape, g.attention[1], targets.attention[1]),
                                   ops::l1_mean(tape, g.attention[2], targets.attention[2])};
    const T att_weight = static_cast<T>(config.beta / 3.0);
    const std::array<T, 5> weights{T(1), static_cast<T>(config.alpha), att_weight, att_weight, att_weight};
    const Var total = ops::weighted_sum<T>(tape, terms, weights);

    LossEvaluation<T> out;
    auto scalar = [&](Var v) { return static_cast<double>(tape.value(v).data[0]); };
    out.components.md = scalar(terms[0]);
    out.components.esr = scalar(terms[1]);
    out.components.att = (scalar(terms[2]) + scalar(terms[3]) + scalar(terms[4])) / 3.0;
    loss_total(out.components, config);  // divergence check
    out.total = scalar(total);
    out.prediction = to_image(tape.value(g.sharp));

    if (with_gradients) {
        tape.backward(total);
        for (const auto& param : state.parameters()) out.gradients.emplace_back(param.value.shape);
        for (const auto& [index, var] : p.bound()) out.gradients[index] = tape.grad(var);
    }
    return out;
}

template StepTargets<float> make_targets<float>(const DatasetSample&, int, const NetworkConfig&);
template StepTargets<double> make_targets<double>(const DatasetSample&, int, const NetworkConfig&);
template LossEvaluation<float> evaluate_loss<float>(const ModelState<float>&, const NetworkInputs<float>&,
                                                    const StepTargets<float>&, const TrainConfig&, bool);
template LossEvaluation<double> evaluate_loss<double>(const ModelState<double>&, const NetworkInputs<double>&,
                                                      const StepTargets<double>&, const TrainConfig&, bool);

// ---- optimizer ----

Adam::Adam(const ModelState<float>& state, const TrainConfig& config)
    : beta1_(config.adam_beta1), beta2_(config.adam_beta2), epsilon_(config.adam_epsilon) {
    for (const auto& p : state.parameters()) {
        m_.emplace_back(p.value.numel(), 0.0);
        v_.emplace_back(p.value.numel(), 0.0);
    }
}

void Adam::step(ModelState<float>& state, const std::vector<Tensor<float>>& gradients, double lr) {
    auto& params = state.parameters();
    if (gradients.size() != params.size()) throw GeometryError("adam: gradient count does not match parameters");
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& w = params[i].value.data;
        const auto& g = gradients[i].data;
        if (g.size() != w.size()) throw GeometryError("adam: gradient shape mismatch for " + params[i].name);
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j];
            m[j] = beta1_ * m[j] + (1.0 - beta1_) * gj;
            v[j] = beta2_ * v[j] + (1.0 - beta2_) * gj * gj;
            const double update = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + epsilon_);
            w[j] = static_cast<float>(w[j] - update);
        }
    }
}

// ---- report ----

std::string TrainReport::csv() const {
    std::string out = "epoch,l_md,l_esr,l_att,l_total,lr,psnr_train\n";
    char buf[256];
    for (const EpochRecord& r : epochs) {
        std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f\n", r.epoch, r.l_md, r.l_esr, r.l_att,
                      r.l_total, r.lr, r.psnr_train);
        out += buf;
    }
    return out;
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError(path.string(), "cannot open for writing");
    out << csv();
    if (!out) throw IntegrityError(path.string(), "write failed");
}

// ---- loop ----

namespace {

std::uint64_t mix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return mix(mix(mix(seed) ^ a) ^ b);
}

constexpr std::uint64_t kOrderStream = 0x6f72646572ULL;

void check_dataset(const std::vector<DatasetSample>& dataset, const NetworkConfig& net) {
    if (dataset.empty()) throw ValidationError("training set is empty");
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const DatasetSample& s = dataset[i];
        validate_sample(s);
        if (s.rho != net.rho)
            throw GeometryError("sample " + std::to_string(i) + " has rho=" + std::to_string(s.rho) +
                                " but the network expects rho=" + std::to_string(net.rho));
        net.check_geometry(s.hr_blurry.width(), s.hr_blurry.height());
    }
}

}  // namespace

std::vector<int> draw_keys(int n_keys, int keys_per_step, std::mt19937_64& rng) {
    if (keys_per_step == 0 || keys_per_step >= n_keys) {
        std::vector<int> all(n_keys);
        std::iota(all.begin(), all.end(), 0);
        return all;
    }
    if (keys_per_step == 1) return {std::uniform_int_distribution<int>(0, n_keys - 1)(rng)};
    std::vector<int> pool(n_keys);
    std::iota(pool.begin(), pool.end(), 0);
    for (int i = 0; i < keys_per_step; ++i)
        std::swap(pool[i], pool[std::uniform_int_distribution<int>(i, n_keys - 1)(rng)]);
    pool.resize(keys_per_step);
    std::sort(pool.begin(), pool.end());
    return pool;
}

TrainResult train(const std::vector<DatasetSample>& dataset, const ModelState<float>& initial,
                  const TrainConfig& config, const TrainOptions& options) {
    config.validate();
    const NetworkConfig& net = initial.config();
    check_dataset(dataset, net);

    const auto wall_start = std::chrono::steady_clock::now();
    TrainResult result{initial, {}};
    ModelState<float>& state = result.state;
    Adam adam(state, config);

    const int n = static_cast<int>(dataset.size());
    long long total_steps = 0;
    auto budget_left = [&] { return config.max_iterations == 0 || total_steps < config.max_iterations; };

    for (int epoch = 0; epoch < config.epochs && budget_left(); ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        const double lr = lr_at_epoch(config, epoch);
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::mt19937_64 order_rng(derive_seed(config.seed, kOrderStream, static_cast<std::uint64_t>(epoch)));
        std::shuffle(order.begin(), order.end(), order_rng);

        EpochRecord record;
        record.epoch = epoch;
        record.lr = lr;
        int seen = 0;
        for (int first = 0; first < n && budget_left(); first += config.batch_size) {
            const int last = std::min(n, first + config.batch_size);
            const float inv_batch = 1.0f / static_cast<float>(last - first);
            std::vector<Tensor<float>> grads;
            for (const auto& p : state.parameters()) grads.emplace_back(p.value.shape);
            double step_total = 0.0;

            for (int b = first; b < last; ++b) {
                const int idx = order[b];
                const std::uint64_t s =
                    derive_seed(config.seed, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(idx));
                const DatasetSample augmented =
                    config.augment ? augment(dataset[idx], config, s) : DatasetSample{};
                const DatasetSample& sample = config.augment ? augmented : dataset[idx];
                std::mt19937_64 key_rng(mix(s));
                const std::vector<int> keys = draw_keys(static_cast<int>(sample.hr_sharp.size()),
                                                        config.keys_per_step, key_rng);
                const float weight = inv_batch / static_cast<float>(keys.size());
                const InputPreparer prep(sample.hr_blurry, sample.lr_events, net);

                for (int key : keys) {
                    const auto inputs = prep.at<float>(sample.hr_sharp.timestamps()[key]);
                    const auto targets = make_targets<float>(sample, key, net);
                    const auto eval = evaluate_loss(state, inputs, targets, config, true);

                    for (std::size_t i = 0; i < grads.size(); ++i) {
                        auto& acc = grads[i].data;
                        const auto& g = eval.gradients[i].data;
                        for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j] * weight;
                    }
                    record.l_md += eval.components.md;
                    record.l_esr += eval.components.esr;
                    record.l_att += eval.components.att;
                    record.l_total += eval.total;
                    record.psnr_train += psnr(eval.prediction, sample.hr_sharp[key]);
                    record.ssim_train += ssim(eval.prediction, sample.hr_sharp[key]);
                    step_total += eval.total / static_cast<double>(keys.size());
                    ++seen;
                }
            }

            adam.step(state, grads, lr);
            if (!state.all_finite())
                throw DivergenceError("parameters became non-finite at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(total_steps));
            result.report.step_losses.push_back(step_total / (last - first));
            ++total_steps;
            ++record.steps;
        }

        if (seen > 0) {
            record.l_md /= seen;
            record.l_esr /= seen;
            record.l_att /= seen;
            record.l_total /= seen;
            record.psnr_train /= seen;
            record.ssim_train /= seen;
        }
        record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count();
        result.report.epochs.push_back(record);
        if (!options.checkpoint_path.empty()) save_checkpoint(options.checkpoint_path, state);
        if (options.on_epoch) options.on_epoch(record);
    }
    result.report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    return result;
}

TrainResult train(const std::vector<DatasetSample>& dataset, const NetworkConfig& network,
                  const TrainConfig& config, const TrainOptions& options) {
    return train(dataset, ModelState<float>::initialized(network, config.seed), config, options);
}

}  // namespace uedsr
