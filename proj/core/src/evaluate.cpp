#include "uedsr/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>

#include "uedsr/checkpoint.hpp"
#include "uedsr/dataset_io.hpp"
#include "uedsr/errors.hpp"
#include "uedsr/metrics.hpp"
#include "uedsr/png_io.hpp"
#include "uedsr/training.hpp"

namespace uedsr {

namespace {

std::string fmt(const char* pattern, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

}  // namespace

std::string EvalReport::csv() const {
    std::string out = std::string(kCsvHeader) + "\n";
    for (const EvalRow& r : rows) {
        out += r.sample_id + "," + std::to_string(r.frame_idx) + "," + fmt("%.17g", r.psnr_deblur) + "," +
               fmt("%.17g", r.ssim_deblur) + "," + fmt("%.17g", r.l1_event) + "," + fmt("%.17g", r.psnr_event) + "\n";
    }
    return out;
}

std::string EvalReport::summary() const {
    std::string out;
    out += "samples = " + std::to_string(sample_ids.size()) + "\n";
    out += "rows = " + std::to_string(rows.size()) + "\n";
    out += "mean_psnr_deblur = " + fmt("%.17g", mean_psnr_deblur) + "\n";
    out += "mean_ssim_deblur = " + fmt("%.17g", mean_ssim_deblur) + "\n";
    out += "mean_l1_event = " + fmt("%.17g", mean_l1_event) + "\n";
    out += "mean_psnr_event = " + fmt("%.17g", mean_psnr_event) + "\n";
    for (std::size_t k = 0; k < frame_psnr_deblur.size(); ++k) {
        out += "frame_" + std::to_string(k) + "_psnr_deblur = " + fmt("%.17g", frame_psnr_deblur[k]) + "\n";
        out += "frame_" + std::to_string(k) + "_ssim_deblur = " + fmt("%.17g", frame_ssim_deblur[k]) + "\n";
    }
    for (std::size_t i = 0; i < sample_ids.size(); ++i)
        out += "event_peak." + sample_ids[i] + " = " + fmt("%.17g", event_peaks[i]) + "\n";
    return out;
}

EventTensor ground_truth_event_tensor(const DatasetSample& sample, int key_index, const NetworkConfig& config) {
    return build_representation(sample.hr_events, sample.hr_sharp.timestamps().at(key_index),
                                 config.delta_t_fraction, config.bins);
}

Predictor model_predictor(const ModelState<float>& state) {
    return [&state](const DatasetSample& s) {
        return predict_sequence(s.hr_blurry, s.lr_events, s.hr_sharp.timestamps(), state);
    };
}

Predictor ground_truth_predictor(const NetworkConfig& config) {
    return [config](const DatasetSample& s) {
        SequencePrediction out{s.hr_sharp, {}};
        for (std::size_t k = 0; k < s.hr_sharp.size(); ++k)
            out.event_tensors.push_back(ground_truth_event_tensor(s, static_cast<int>(k), config));
        return out;
    };
}

Predictor blurry_predictor(const NetworkConfig& config) {
    return [config](const DatasetSample& s) {
        const auto& ts = s.hr_sharp.timestamps();
        SequencePrediction out{FrameSequence(std::vector<Image>(ts.size(), s.hr_blurry), ts), {}};
        for (Microseconds t : ts)
            out.event_tensors.push_back(rescale_tensor(
                build_representation(s.lr_events, t, config.delta_t_fraction, config.bins), s.rho));
        return out;
    };
}

EvalReport evaluate(const std::vector<DatasetSample>& samples, const std::vector<std::string>& ids,
                    const Predictor& predictor, const NetworkConfig& config) {
    if (samples.empty()) throw EmptyReportError("nothing to evaluate: the split is empty");
    if (ids.size() != samples.size()) throw ValidationError("need one id per sample");
    EvalReport report;
    report.sample_ids = ids;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const DatasetSample& s = samples[i];
        validate_sample(s);
        if (s.rho != config.rho)
            throw GeometryError("sample " + ids[i] + " has rho=" + std::to_string(s.rho) +
                                " but the network expects rho=" + std::to_string(config.rho));
        const SequencePrediction pred = predictor(s);
        const std::size_t n = s.hr_sharp.size();
        if (pred.frames.size() != n || pred.event_tensors.size() != n)
            throw GeometryError("sample " + ids[i] + ": prediction has the wrong number of frames");

        std::vector<EventTensor> gt_events;
        double peak = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            gt_events.push_back(ground_truth_event_tensor(s, static_cast<int>(k), config));
            for (double v : gt_events.back().values) peak = std::max(peak, std::abs(v));
        }
        if (peak == 0.0) peak = 1.0;
        report.event_peaks.push_back(peak);

        for (std::size_t k = 0; k < n; ++k) {
            EvalRow row;
            row.sample_id = ids[i];
            row.frame_idx = static_cast<int>(k);
            row.psnr_deblur = psnr(pred.frames[k], s.hr_sharp[k]);
            row.ssim_deblur = ssim(pred.frames[k], s.hr_sharp[k]);
            row.l1_event = loss_esr(pred.event_tensors[k], gt_events[k]);
            row.psnr_event = psnr(pred.event_tensors[k].values, gt_events[k].values, peak);
            report.rows.push_back(row);
        }
    }
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    std::size_t frames = 0;
    for (const EvalRow& r : report.rows) frames = std::max<std::size_t>(frames, r.frame_idx + 1);
    report.frame_psnr_deblur.assign(frames, 0.0);
    report.frame_ssim_deblur.assign(frames, 0.0);
    std::vector<int> counts(frames, 0);
    for (const EvalRow& r : report.rows) {
        report.mean_psnr_deblur += r.psnr_deblur;
        report.mean_ssim_deblur += r.ssim_deblur;
        report.mean_l1_event += r.l1_event;
        report.mean_psnr_event += r.psnr_event;
        report.frame_psnr_deblur[r.frame_idx] += r.psnr_deblur;
        report.frame_ssim_deblur[r.frame_idx] += r.ssim_deblur;
        ++counts[r.frame_idx];
    }
    const double rows = static_cast<double>(report.rows.size());
    report.mean_psnr_deblur /= rows;
    report.mean_ssim_deblur /= rows;
    report.mean_l1_event /= rows;
    report.mean_psnr_event /= rows;
    for (std::size_t k = 0; k < frames; ++k) {
        report.frame_psnr_deblur[k] /= counts[k];
        report.frame_ssim_deblur[k] /= counts[k];
    }
    return report;
}

EvalReport evaluate_split(const std::filesystem::path& root, const std::string& split,
                          const std::filesystem::path& checkpoint) {
    const ModelState<float> state = load_checkpoint(checkpoint);
    std::vector<DatasetSample> samples;
    std::vector<std::string> ids;
    for (const auto& dir : list_samples(root, split)) {
        samples.push_back(read_sample(dir));
        ids.push_back(dir.filename().string());
    }
    return evaluate(samples, ids, model_predictor(state), state.config());
}

void write_prediction_grid(const std::filesystem::path& path, const SequencePrediction& prediction, int bins) {
    const std::size_t n = prediction.frames.size();
    if (n == 0) throw ValidationError("nothing to draw");
    const int w = prediction.frames.width(), h = prediction.frames.height();
    const bool with_events = prediction.event_tensors.size() == n;
    const int gw = static_cast<int>(n) * w, gh = with_events ? 2 * h : h;
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(gw) * gh * 3, 0);
    auto put = [&](int x, int y, double r, double g, double b) {
        const std::size_t o = (static_cast<std::size_t>(y) * gw + x) * 3;
        rgb[o] = static_cast<std::uint8_t>(std::lround(std::clamp(r, 0.0, 1.0) * 255.0));
        rgb[o + 1] = static_cast<std::uint8_t>(std::lround(std::clamp(g, 0.0, 1.0) * 255.0));
        rgb[o + 2] = static_cast<std::uint8_t>(std::lround(std::clamp(b, 0.0, 1.0) * 255.0));
    };
    for (std::size_t k = 0; k < n; ++k) {
        const Image& f = prediction.frames[k];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) put(static_cast<int>(k) * w + x, y, f.at(x, y), f.at(x, y), f.at(x, y));
        if (!with_events) continue;
        const EventTensor& e = prediction.event_tensors[k];
        if (e.height != h || e.width != w) throw GeometryError("event tensor geometry differs from frame geometry");
        std::vector<double> sum(e.plane(), 0.0);
        double peak = 0.0;
        for (int c = 0; c < std::min(bins, e.channels); ++c)
            for (std::size_t i = 0; i < e.plane(); ++i) sum[i] += e.values[c * e.plane() + i];
        for (double v : sum) peak = std::max(peak, std::abs(v));
        if (peak == 0.0) peak = 1.0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double v = sum[static_cast<std::size_t>(y) * w + x] / peak;
                // white background, saturating towards red (+) or blue (-)
                put(static_cast<int>(k) * w + x, h + y, 1.0 - std::max(0.0, -v), 1.0 - std::abs(v),
                    1.0 - std::max(0.0, v));
            }
    }
    write_png_rgb8(path, gw, gh, rgb);
}

}  // namespace uedsr
