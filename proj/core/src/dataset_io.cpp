#include "uedsr/dataset_io.hpp"

#include <algorithm>
#include <cstdio>

#include "uedsr/config_file.hpp"
#include "uedsr/errors.hpp"
#include "uedsr/evs_io.hpp"
#include "uedsr/png_io.hpp"

namespace uedsr {
namespace {

constexpr int kManifestVersion = 1;

std::string indexed(const char* stem, std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s_%03zu.png", stem, i);
    return buf;
}

std::string join(const std::vector<Microseconds>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(values[i]);
    }
    return out;
}

}  // namespace

std::string sample_id(int index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06d", index);
    return buf;
}

void write_sample(const std::filesystem::path& dir, const DatasetSample& sample) {
    validate_sample(sample);
    std::filesystem::create_directories(dir);
    write_png16(dir / "blurry.png", sample.hr_blurry);
    for (std::size_t i = 0; i < sample.hr_sharp.size(); ++i) {
        write_png16(dir / indexed("sharp", i), sample.hr_sharp[i]);
        write_png16(dir / indexed("attn", i), sample.gt_attention[i]);
    }
    write_evs(dir / "events_lr.evs", sample.lr_events);
    write_evs(dir / "events_hr.evs", sample.hr_events);

    KeyValueConfig manifest;
    manifest.set("version", kManifestVersion);
    manifest.set("rho", sample.rho);
    manifest.set("width", sample.hr_blurry.width());
    manifest.set("height", sample.hr_blurry.height());
    manifest.set("lr_width", sample.lr_events.width());
    manifest.set("lr_height", sample.lr_events.height());
    manifest.set("exposure_start_us", sample.t_start());
    manifest.set("exposure_end_us", sample.t_end());
    manifest.set("exposure_us", sample.t_end() - sample.t_start());
    manifest.set("n_frames", static_cast<long long>(sample.hr_sharp.size()));
    manifest.set("frame_timestamps_us", join(sample.hr_sharp.timestamps()));
    manifest.set("seed", sample.seed);
    manifest.set("sim.contrast_threshold", sample.simulator.contrast_threshold);
    manifest.set("sim.log_eps", sample.simulator.log_eps);
    manifest.set("sim.use_log", sample.simulator.use_log);
    manifest.set("sim.threshold_sigma", sample.simulator.threshold_sigma);
    manifest.set("sim.seed", sample.simulator.seed);
    manifest.save(dir / "manifest");
}

DatasetSample read_sample(const std::filesystem::path& dir) {
    const auto manifest_path = dir / "manifest";
    if (!std::filesystem::exists(manifest_path)) throw IntegrityError(manifest_path.string(), "missing manifest");
    const KeyValueConfig m = KeyValueConfig::load(manifest_path);
    if (m.get_int("version") != kManifestVersion)
        throw ValidationError(manifest_path.string() + ": unsupported manifest version");

    DatasetSample s;
    s.rho = static_cast<int>(m.get_int("rho"));
    s.seed = m.get_uint64("seed");
    s.simulator.contrast_threshold = m.get_double("sim.contrast_threshold");
    s.simulator.log_eps = m.get_double("sim.log_eps");
    s.simulator.use_log = m.get_bool("sim.use_log", true);
    s.simulator.threshold_sigma = m.get_double("sim.threshold_sigma");
    s.simulator.seed = m.get_uint64("sim.seed");

    const auto width = m.get_int("width");
    const auto height = m.get_int("height");
    if (s.rho < 1 || m.get_int("lr_width") * s.rho != width || m.get_int("lr_height") * s.rho != height)
        throw ValidationError(manifest_path.string() + ": rho=" + std::to_string(s.rho) +
                              " does not relate image and event geometry");

    s.hr_blurry = read_png16(dir / "blurry.png");
    const auto n = static_cast<std::size_t>(m.get_int("n_frames"));
    const auto stamps_raw = m.get_int_list("frame_timestamps_us");
    if (stamps_raw.size() != n) throw ValidationError(manifest_path.string() + ": timestamp count != n_frames");
    std::vector<Image> sharp;
    for (std::size_t i = 0; i < n; ++i) {
        sharp.push_back(read_png16(dir / indexed("sharp", i)));
        s.gt_attention.push_back(read_png16(dir / indexed("attn", i)));
    }
    s.hr_sharp = FrameSequence(std::move(sharp), std::vector<Microseconds>(stamps_raw.begin(), stamps_raw.end()));
    s.lr_events = read_evs(dir / "events_lr.evs");
    s.hr_events = read_evs(dir / "events_hr.evs");

    if (s.hr_blurry.width() != width || s.hr_blurry.height() != height)
        throw ValidationError(manifest_path.string() + ": image geometry differs from manifest");
    if (s.hr_events.t_start() != m.get_int("exposure_start_us") || s.hr_events.t_end() != m.get_int("exposure_end_us"))
        throw ValidationError(manifest_path.string() + ": exposure interval differs from event file");
    m.get_int("exposure_us");
    m.get_int("lr_width");
    if (const auto extra = m.unused_keys(); !extra.empty())
        throw ValidationError(manifest_path.string() + ": unknown key '" + extra.front() + "'");
    validate_sample(s);
    return s;
}

std::vector<std::filesystem::path> list_samples(const std::filesystem::path& root, const std::string& split) {
    const auto base = root / split;
    std::vector<std::filesystem::path> out;
    if (!std::filesystem::is_directory(base)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(base))
        if (entry.is_directory() && std::filesystem::exists(entry.path() / "manifest")) out.push_back(entry.path());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace uedsr
