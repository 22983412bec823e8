#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "uedsr/network.hpp"
#include "uedsr/sensor_sim.hpp"

namespace uedsr {

struct EvalRow {
    std::string sample_id;
    int frame_idx = 0;
    double psnr_deblur = 0.0;
    double ssim_deblur = 0.0;
    double l1_event = 0.0;
    double psnr_event = 0.0;
};

struct EvalReport {
    std::vector<EvalRow> rows;                // ordered by sample, then frame
    std::vector<std::string> sample_ids;
    std::vector<double> event_peaks;          // per sample: max |gt| used as event PSNR peak
    double mean_psnr_deblur = 0.0;
    double mean_ssim_deblur = 0.0;
    double mean_l1_event = 0.0;
    double mean_psnr_event = 0.0;
    std::vector<double> frame_psnr_deblur;    // mean per latent frame index
    std::vector<double> frame_ssim_deblur;
    double seconds = 0.0;                     // prediction time, not part of csv() or summary()

    static constexpr const char* kCsvHeader = "sample_id,frame_idx,psnr_deblur,ssim_deblur,l1_event,psnr_event";

    std::string csv() const;
    // "key = value" lines with the aggregates.
    std::string summary() const;
};

// Maps one sample to predicted frames at the sample's key timestamps and the
// matching HR event tensors.
using Predictor = std::function<SequencePrediction(const DatasetSample&)>;

Predictor model_predictor(const ModelState<float>& state);
// Returns the ground truth: the upper reference.
Predictor ground_truth_predictor(const NetworkConfig& config);
// Returns the blurry image for every frame and the LR representation
// upsampled to HR: the lower reference.
Predictor blurry_predictor(const NetworkConfig& config);

// HR event representation of a sample at key frame k, as used for supervision.
EventTensor ground_truth_event_tensor(const DatasetSample& sample, int key_index, const NetworkConfig& config);

// Throws EmptyReportError if samples is empty.
EvalReport evaluate(const std::vector<DatasetSample>& samples, const std::vector<std::string>& ids,
                    const Predictor& predictor, const NetworkConfig& config);

// Evaluates every sample of <root>/<split> with the checkpoint.
EvalReport evaluate_split(const std::filesystem::path& root, const std::string& split,
                          const std::filesystem::path& checkpoint);

// Rows of predicted frames (gray) and time-window event channels summed per
// tensor (positive red, negative blue), 8-bit RGB.
void write_prediction_grid(const std::filesystem::path& path, const SequencePrediction& prediction, int bins);

}  // namespace uedsr
