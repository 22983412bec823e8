#include "cli_config.hpp"

#include "uedsr/checkpoint.hpp"
#include "uedsr/errors.hpp"

namespace uedsr::cli {

namespace {

SceneSpec load_scene(const KeyValueConfig& in, SceneSpec s, int rho) {
    s.width = static_cast<int>(in.get_int("scene.width", s.width));
    s.height = static_cast<int>(in.get_int("scene.height", s.height));
    s.rho = rho;
    s.exposure_us = in.get_int("scene.exposure_us", s.exposure_us);
    s.subframes_per_interval = static_cast<int>(in.get_int("scene.subframes_per_interval", s.subframes_per_interval));
    s.max_displacement_px = in.get_double("scene.max_displacement_px", s.max_displacement_px);
    s.max_rotation_deg = in.get_double("scene.max_rotation_deg", s.max_rotation_deg);
    s.max_zoom = in.get_double("scene.max_zoom", s.max_zoom);
    s.n_shapes = static_cast<int>(in.get_int("scene.n_shapes", s.n_shapes));
    s.n_gratings = static_cast<int>(in.get_int("scene.n_gratings", s.n_gratings));
    s.grating_amplitude = in.get_double("scene.grating_amplitude", s.grating_amplitude);
    s.min_wavelength_px = in.get_double("scene.min_wavelength_px", s.min_wavelength_px);
    s.blur_mask_threshold = in.get_double("scene.blur_mask_threshold", s.blur_mask_threshold);
    s.zero_velocity = in.get_bool("scene.zero_velocity", s.zero_velocity);
    return s;
}

SimulatorConfig load_simulator(const KeyValueConfig& in, SimulatorConfig s) {
    s.contrast_threshold = in.get_double("sim.contrast_threshold", s.contrast_threshold);
    s.log_eps = in.get_double("sim.log_eps", s.log_eps);
    s.use_log = in.get_bool("sim.use_log", s.use_log);
    s.threshold_sigma = in.get_double("sim.threshold_sigma", s.threshold_sigma);
    return s;
}

}  // namespace

RunConfig load_run_config(const std::optional<std::filesystem::path>& file, std::optional<std::uint64_t> seed) {
    const KeyValueConfig in = file ? KeyValueConfig::load(*file) : KeyValueConfig{};
    RunConfig c;
    c.network = load_network_config(in);
    c.train = load_train_config(in);
    c.scene = load_scene(in, c.scene, c.network.rho);
    c.simulator = load_simulator(in, c.simulator);
    c.train_samples = static_cast<int>(in.get_int("train_samples", c.train_samples));
    c.test_samples = static_cast<int>(in.get_int("test_samples", c.test_samples));
    c.seed = c.train.seed;
    if (seed) c.seed = c.train.seed = *seed;
    if (c.train_samples < 0 || c.test_samples < 0) throw RangeError("sample counts must be >= 0");

    const auto unused = in.unused_keys();
    if (!unused.empty()) {
        std::string names;
        for (const auto& k : unused) names += (names.empty() ? "" : ", ") + k;
        throw ValidationError(in.source() + ": unknown key(s): " + names);
    }
    return c;
}

KeyValueConfig dump_run_config(const RunConfig& c) {
    KeyValueConfig out;
    store_network_config(out, c.network);
    store_train_config(out, c.train);
    out.set("scene.width", c.scene.width);
    out.set("scene.height", c.scene.height);
    out.set("scene.exposure_us", c.scene.exposure_us);
    out.set("scene.subframes_per_interval", c.scene.subframes_per_interval);
    out.set("scene.max_displacement_px", c.scene.max_displacement_px);
    out.set("scene.max_rotation_deg", c.scene.max_rotation_deg);
    out.set("scene.max_zoom", c.scene.max_zoom);
    out.set("scene.n_shapes", c.scene.n_shapes);
    out.set("scene.n_gratings", c.scene.n_gratings);
    out.set("scene.grating_amplitude", c.scene.grating_amplitude);
    out.set("scene.min_wavelength_px", c.scene.min_wavelength_px);
    out.set("scene.blur_mask_threshold", c.scene.blur_mask_threshold);
    out.set("scene.zero_velocity", c.scene.zero_velocity);
    out.set("sim.contrast_threshold", c.simulator.contrast_threshold);
    out.set("sim.log_eps", c.simulator.log_eps);
    out.set("sim.use_log", c.simulator.use_log);
    out.set("sim.threshold_sigma", c.simulator.threshold_sigma);
    out.set("train_samples", c.train_samples);
    out.set("test_samples", c.test_samples);
    return out;
}

}  // namespace uedsr::cli
