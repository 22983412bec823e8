// uedsr: synthetic data, training, evaluation and inference from the shell.
//
// Exit status: 0 success, 1 invalid input or usage, 2 runtime failure.

#include <CLI11.hpp>

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "cli_config.hpp"
#include "uedsr/calibration.hpp"
#include "uedsr/checkpoint.hpp"
#include "uedsr/dataset_io.hpp"
#include "uedsr/errors.hpp"
#include "uedsr/evaluate.hpp"
#include "uedsr/evs_io.hpp"
#include "uedsr/png_io.hpp"
#include "uedsr/training.hpp"

namespace fs = std::filesystem;
using namespace uedsr;

namespace {

struct Globals {
    std::string config;
    std::uint64_t seed = 0;
    bool seed_given = false;
    std::string out;

    cli::RunConfig load() const {
        return cli::load_run_config(config.empty() ? std::nullopt : std::optional<fs::path>(config),
                                    seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
    }
};

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t split, std::uint64_t index) {
    std::uint64_t x = seed ^ (split << 56) ^ (index * 0x9e3779b97f4a7c15ULL);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError(path.string(), "cannot open for writing");
    out << text;
    if (!out) throw IntegrityError(path.string(), "write failed");
}

// Header line, then one line of `width` values per (channel, row).
void write_event_tensor(const fs::path& path, const EventTensor& t) {
    std::string text = "# channels=" + std::to_string(t.channels) + " height=" + std::to_string(t.height) +
                       " width=" + std::to_string(t.width) + "\n";
    char buf[32];
    for (int c = 0; c < t.channels; ++c)
        for (int y = 0; y < t.height; ++y) {
            for (int x = 0; x < t.width; ++x) {
                std::snprintf(buf, sizeof buf, x == 0 ? "%.9g" : " %.9g", t.at(c, y, x));
                text += buf;
            }
            text += '\n';
        }
    write_text(path, text);
}

EventStream read_events_any(const fs::path& path) {
    return path.extension() == ".csv" ? read_events_csv(path) : read_evs(path);
}

std::string indexed(const char* stem, std::size_t i, const char* ext) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%03zu%s", stem, i, ext);
    return buf;
}

// ---- synth ----

struct SynthArgs {
    int train = -1;
    int test = -1;
};

int run_synth(const Globals& g, const SynthArgs& a) {
    const cli::RunConfig cfg = g.load();
    const fs::path out(g.out);
    const int counts[2] = {a.train >= 0 ? a.train : cfg.train_samples, a.test >= 0 ? a.test : cfg.test_samples};
    const char* splits[2] = {"train", "test"};
    fs::create_directories(out);
    for (int s = 0; s < 2; ++s)
        for (int i = 0; i < counts[s]; ++i) {
            SimulatorConfig sim = cfg.simulator;
            sim.seed = sample_seed(cfg.seed, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(i));
            const DatasetSample sample = generate_scene(cfg.scene, sim);
            const fs::path dir = out / splits[s] / sample_id(i);
            write_sample(dir, sample);
            std::cerr << "synth: " << dir.string() << " (" << sample.hr_events.size() << " HR events, "
                      << sample.lr_events.size() << " LR events)\n";
        }
    cli::dump_run_config(cfg).save(out / "synth_config.txt");
    return 0;
}

// ---- train ----

struct TrainArgs {
    std::string data;
    std::string split = "train";
    std::string init;
};

std::vector<DatasetSample> load_split(const fs::path& root, const std::string& split,
                                      std::vector<std::string>* ids = nullptr) {
    std::vector<DatasetSample> samples;
    for (const auto& dir : list_samples(root, split)) {
        samples.push_back(read_sample(dir));
        if (ids) ids->push_back(dir.filename().string());
    }
    return samples;
}

int run_train(const Globals& g, const TrainArgs& a) {
    const cli::RunConfig cfg = g.load();
    const fs::path out(g.out);
    const fs::path data = a.data.empty() ? out : fs::path(a.data);
    const auto samples = load_split(data, a.split);
    if (samples.empty()) throw ValidationError("no samples under " + (data / a.split).string());

    const ModelState<float> initial =
        a.init.empty() ? ModelState<float>::initialized(cfg.network, cfg.train.seed) : load_checkpoint(a.init);
    if (!a.init.empty() && !(initial.config() == cfg.network))
        throw ValidationError("checkpoint " + a.init + " was built with a different network configuration");

    fs::create_directories(out / "checkpoints");
    TrainOptions options;
    options.checkpoint_path = out / "checkpoints" / "last.czn";
    options.on_epoch = [](const EpochRecord& r) {
        std::fprintf(stderr, "epoch %d: l_total=%.5f l_md=%.5f l_esr=%.5f l_att=%.5f psnr=%.3f lr=%.3g (%.1fs)\n",
                     r.epoch, r.l_total, r.l_md, r.l_esr, r.l_att, r.psnr_train, r.lr, r.seconds);
    };
    const TrainResult result = train(samples, initial, cfg.train, options);
    save_checkpoint(out / "model.czn", result.state);
    result.report.write_csv(out / "train_report.csv");
    cli::dump_run_config(cfg).save(out / "train_config.txt");
    std::fprintf(stderr, "train: %zu steps in %.1fs, checkpoint %s\n", result.report.step_losses.size(),
                 result.report.wall_seconds, (out / "model.czn").c_str());
    return 0;
}

// ---- eval ----

struct EvalArgs {
    std::string data;
    std::string split = "test";
    std::string checkpoint;
    std::string predictor = "model";
};

int run_eval(const Globals& g, const EvalArgs& a) {
    const cli::RunConfig cfg = g.load();
    const fs::path out(g.out);
    const fs::path data = a.data.empty() ? out : fs::path(a.data);
    std::vector<std::string> ids;
    const auto samples = load_split(data, a.split, &ids);
    EvalReport report;
    if (a.predictor == "model") {
        const ModelState<float> state = load_checkpoint(a.checkpoint.empty() ? out / "model.czn" : fs::path(a.checkpoint));
        report = evaluate(samples, ids, model_predictor(state), state.config());
    } else if (a.predictor == "blurry") {
        report = evaluate(samples, ids, blurry_predictor(cfg.network), cfg.network);
    } else {
        report = evaluate(samples, ids, ground_truth_predictor(cfg.network), cfg.network);
    }
    fs::create_directories(out);
    write_text(out / "eval.csv", report.csv());
    write_text(out / "eval_summary.txt", report.summary());
    std::cout << report.summary();
    std::fprintf(stderr, "eval: %zu samples in %.2fs\n", report.sample_ids.size(), report.seconds);
    return 0;
}

// ---- deblur / superres ----

struct InferArgs {
    std::string sample;
    std::string blurry;
    std::string events;
    std::string checkpoint;
    bool grid = false;
};

struct InferInput {
    Image blurry;
    EventStream events{1, 1, 0, 0};
    std::vector<Microseconds> timestamps;
};

InferInput load_infer_input(const InferArgs& a, const NetworkConfig& net) {
    InferInput in;
    if (!a.sample.empty()) {
        if (!a.blurry.empty() || !a.events.empty())
            throw ValidationError("--sample cannot be combined with --blurry/--events");
        DatasetSample s = read_sample(a.sample);
        in.blurry = std::move(s.hr_blurry);
        in.events = std::move(s.lr_events);
        in.timestamps = s.hr_sharp.timestamps();
        return in;
    }
    if (a.blurry.empty() || a.events.empty()) throw ValidationError("need --sample, or both --blurry and --events");
    in.blurry = read_png16(a.blurry);
    in.events = read_events_any(a.events);
    const int n = net.n_latent_frames;
    for (int i = 0; i < n; ++i)
        in.timestamps.push_back(in.events.t_start() +
                                std::llround(static_cast<double>(in.events.duration()) * i / std::max(1, n - 1)));
    in.timestamps.erase(std::unique(in.timestamps.begin(), in.timestamps.end()), in.timestamps.end());
    return in;
}

int run_infer(const Globals& g, const InferArgs& a, bool frames_too) {
    const fs::path out(g.out);
    const ModelState<float> state = load_checkpoint(a.checkpoint.empty() ? out / "model.czn" : fs::path(a.checkpoint));
    const InferInput in = load_infer_input(a, state.config());
    const SequencePrediction pred = predict_sequence(in.blurry, in.events, in.timestamps, state);
    const fs::path dir = out / (frames_too ? "deblur" : "superres");
    fs::create_directories(dir);
    std::string stamps;
    for (std::size_t k = 0; k < pred.frames.size(); ++k) {
        if (frames_too) write_png16(dir / indexed("frame", k, ".png"), pred.frames[k]);
        write_event_tensor(dir / indexed("events", k, ".txt"), pred.event_tensors[k]);
        stamps += std::to_string(in.timestamps[k]) + "\n";
    }
    write_text(dir / "timestamps.txt", stamps);
    if (a.grid) {
        SequencePrediction shown = pred;
        if (!frames_too)
            shown.frames = FrameSequence(std::vector<Image>(pred.frames.size(), Image(pred.frames.width(),
                                                                                        pred.frames.height(), 1.0)),
                                         pred.frames.timestamps());
        write_prediction_grid(dir / "grid.png", shown, state.config().bins);
    }
    std::fprintf(stderr, "%s: %zu outputs in %s\n", frames_too ? "deblur" : "superres", pred.frames.size(),
                 dir.c_str());
    return 0;
}

// ---- calibrate ----

struct CalibrateArgs {
    std::string events;
    std::string frames;
    std::string matches;
    long long range = 0;
    long long step = 0;
    int iterations = 1000;
    double threshold = 1.0;
};

FrameSequence load_frames(const fs::path& dir, int width, int height) {
    if (!fs::is_directory(dir)) throw ValidationError("frame directory " + dir.string() + " does not exist");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::ifstream ts_in(dir / "timestamps.txt");
    if (!ts_in) throw ValidationError((dir / "timestamps.txt").string() + " is missing");
    std::vector<Microseconds> stamps;
    for (long long t; ts_in >> t;) stamps.push_back(t);
    if (stamps.size() != files.size())
        throw ValidationError(std::to_string(files.size()) + " frames but " + std::to_string(stamps.size()) +
                              " timestamps in " + dir.string());
    std::vector<Image> frames;
    for (const auto& f : files) {
        Image im = read_png16(f);
        if (im.width() != width || im.height() != height) {
            if (im.width() % width != 0 || im.width() / width != im.height() / height ||
                im.height() % height != 0)
                throw GeometryError(f.string() + " is not an integer multiple of the event geometry");
            im = area_downsample(im, im.width() / width);
        }
        frames.push_back(std::move(im));
    }
    return FrameSequence(std::move(frames), std::move(stamps));
}

std::vector<PointMatch> load_matches(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot read matches file " + path.string());
    std::vector<PointMatch> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#' || line.rfind("x_src", 0) == 0) continue;
        PointMatch m;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &m.src.x, &m.src.y, &m.dst.x, &m.dst.y) != 4)
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected x_src,y_src,x_dst,y_dst");
        out.push_back(m);
    }
    return out;
}

int run_calibrate(const Globals& g, const CalibrateArgs& a) {
    const cli::RunConfig cfg = g.load();
    const fs::path out(g.out);
    const EventStream stream = read_events_any(a.events);
    const FrameSequence frames = load_frames(a.frames, stream.width(), stream.height());
    CalibrationResult result = estimate_temporal_offset(stream, frames, a.range, a.step);
    if (!a.matches.empty()) {
        const auto matches = load_matches(a.matches);
        const CalibrationResult spatial =
            estimate_homography(matches, RansacOptions{a.iterations, a.threshold, cfg.seed});
        result.homography = spatial.homography;
        result.inliers = spatial.inliers;
    }
    fs::create_directories(out);
    write_text(out / "calibration.txt", result.to_text());
    std::cout << result.to_text();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Event-guided deblurring and event super-resolution"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "key = value configuration file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", g.seed, "seed for every random draw");
    app.add_option("--out", g.out, "output directory")->required();

    SynthArgs synth;
    auto* c_synth = app.add_subcommand("synth", "render synthetic samples into <out>/train and <out>/test");
    c_synth->add_option("--train", synth.train, "number of training samples");
    c_synth->add_option("--test", synth.test, "number of test samples");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "train on <data>/<split>; writes model.czn and train_report.csv");
    c_train->add_option("--data", tr.data, "dataset root (default: --out)");
    c_train->add_option("--split", tr.split, "split to train on")->capture_default_str();
    c_train->add_option("--init", tr.init, "start from this checkpoint")->check(CLI::ExistingFile);

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "evaluate a split; writes eval.csv and eval_summary.txt");
    c_eval->add_option("--data", ev.data, "dataset root (default: --out)");
    c_eval->add_option("--split", ev.split, "split to evaluate")->capture_default_str();
    c_eval->add_option("--checkpoint", ev.checkpoint, "checkpoint (default: <out>/model.czn)");
    c_eval->add_option("--predictor", ev.predictor, "model, blurry or truth")
        ->check(CLI::IsMember({"model", "blurry", "truth"}))
        ->capture_default_str();

    InferArgs deblur, superres;
    auto add_infer = [](CLI::App* c, InferArgs& a) {
        c->add_option("--sample", a.sample, "sample directory")->check(CLI::ExistingDirectory);
        c->add_option("--blurry", a.blurry, "16-bit PNG blurry image")->check(CLI::ExistingFile);
        c->add_option("--events", a.events, "LR events (.evs or .csv)")->check(CLI::ExistingFile);
        c->add_option("--checkpoint", a.checkpoint, "checkpoint (default: <out>/model.czn)");
        c->add_flag("--grid", a.grid, "also write grid.png");
    };
    auto* c_deblur = app.add_subcommand("deblur", "latent frames and HR event tensors for one input");
    add_infer(c_deblur, deblur);
    auto* c_superres = app.add_subcommand("superres", "HR event tensors for one input");
    add_infer(c_superres, superres);

    CalibrateArgs cal;
    auto* c_cal = app.add_subcommand("calibrate", "temporal offset (and homography) between events and frames");
    c_cal->add_option("--events", cal.events, "event file (.evs or .csv)")->required()->check(CLI::ExistingFile);
    c_cal->add_option("--frames", cal.frames, "directory of PNG frames plus timestamps.txt")
        ->required()
        ->check(CLI::ExistingDirectory);
    c_cal->add_option("--range", cal.range, "search range in microseconds")->required();
    c_cal->add_option("--step", cal.step, "search step in microseconds")->required();
    c_cal->add_option("--matches", cal.matches, "CSV x_src,y_src,x_dst,y_dst")->check(CLI::ExistingFile);
    c_cal->add_option("--ransac-iterations", cal.iterations)->capture_default_str();
    c_cal->add_option("--inlier-threshold", cal.threshold, "pixels")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }
    g.seed_given = seed_opt->count() > 0;

    try {
        if (c_synth->parsed()) return run_synth(g, synth);
        if (c_train->parsed()) return run_train(g, tr);
        if (c_eval->parsed()) return run_eval(g, ev);
        if (c_deblur->parsed()) return run_infer(g, deblur, true);
        if (c_superres->parsed()) return run_infer(g, superres, false);
        if (c_cal->parsed()) return run_calibrate(g, cal);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
