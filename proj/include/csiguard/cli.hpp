#pragma once

// Command-line front end: simulate | preprocess | train | infer | eval |
// bench | ablate. Thin orchestration over the library; every run writes its
// resolved config and a manifest of input hashes so results can be
// reproduced exactly. Exit codes: 0 ok, 1 runtime failure, 2 invalid
// config or missing input, 3 alert fired under --fail-on-alert.

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csiguard/common.hpp"
#include "csiguard/config.hpp"
#include "csiguard/evaluation.hpp"
#include "csiguard/experiment.hpp"
#include "csiguard/pipeline.hpp"
#include "csiguard/synthgen.hpp"

namespace csiguard::cli {

namespace fs = std::filesystem;

namespace detail {

inline void write_inputs_manifest(const fs::path& run_dir, const config::RunConfig& cfg,
                                  const std::vector<std::string>& data_dirs) {
    nlohmann::json inputs = nlohmann::json::object();
    for (const std::string& d : data_dirs) {
        nlohmann::json entry{{"csi.bin", content_hash(fs::path(d) / "csi.bin")},
                             {"mv.bin", content_hash(fs::path(d) / "mv.bin")},
                             {"manifest.json", content_hash(fs::path(d) / "manifest.json")}};
        inputs[d] = entry;
    }
    const nlohmann::json manifest{
        {"version", kVersion}, {"seed", cfg.seed}, {"inputs", inputs}};
    io::write_file(run_dir / "manifest.json", manifest.dump(2) + "\n");
}

inline int cmd_simulate(const config::RunConfig& cfg, const std::string& out_dir,
                        int forge_offset) {
    int scene_id = 0;
    for (std::size_t i = 0; i < cfg.sim.persons.size(); ++i) {
        synthgen::SceneSpec scene = synthgen::make_scene(
            cfg.sim.persons[i], cfg.sim.frames_per_scene,
            experiment::seeds::scene(cfg.seed, i), cfg.width, cfg.height);
        scene.fps = cfg.fps;
        scene.gop_length = cfg.gop_length;
        scene.block_size = cfg.block_size;
        const synthgen::Recording rec =
            synthgen::simulate(scene, cfg.csi_model(), cfg.csi.rate_hz);
        char name[64];
        std::snprintf(name, sizeof name, "scene_%03d_p%d", scene_id, scene.persons);
        const fs::path dir = fs::path(out_dir) / name;
        synthgen::write_recording(dir, rec);
        std::printf("%s\n", dir.string().c_str());
        if (forge_offset > 0 && scene.persons > 0) {
            const synthgen::Recording forged =
                synthgen::forge_shift(rec, forge_offset, cfg.min_offset);
            std::snprintf(name, sizeof name, "scene_%03d_p%d_forged", scene_id, scene.persons);
            const fs::path fdir = fs::path(out_dir) / name;
            synthgen::write_recording(fdir, forged);
            std::printf("%s\n", fdir.string().c_str());
        }
        ++scene_id;
    }
    return 0;
}

inline int cmd_preprocess(const config::RunConfig& cfg, const std::string& data_dir) {
    const experiment::PreprocResult pr =
        experiment::preprocess_dir(data_dir, experiment::preproc_params(cfg));
    char name[32];
    for (const mv::BinaryMask& mask : pr.pseudo_masks) {
        std::snprintf(name, sizeof name, "%06d.pgm", mask.frame_index);
        mv::write_mask_pgm(fs::path(data_dir) / "masks" / name, mask);
    }
    int moving = 0;
    for (const sync::SyncedSample& s : pr.samples) moving += s.motion_label;
    std::printf("frames=%zu moving=%d dropped=%d masks=%zu\n", pr.samples.size(), moving,
                pr.dropped_frames, pr.pseudo_masks.size());
    return 0;
}

struct DiskSamples {
    std::vector<synthgen::Recording> recordings;
    std::vector<experiment::PreprocResult> per_rec;
    std::vector<sync::SyncedSample> all;
};

inline DiskSamples gather(const config::RunConfig& cfg, const std::vector<std::string>& dirs) {
    DiskSamples ds;
    const experiment::PreprocParams pp = experiment::preproc_params(cfg);
    for (const std::string& d : dirs) {
        ds.recordings.push_back(experiment::load_recording_dir(d));
        ds.per_rec.push_back(experiment::preprocess(ds.recordings.back(), pp));
        for (const sync::SyncedSample& s : ds.per_rec.back().samples) ds.all.push_back(s);
    }
    if (ds.all.empty()) throw ConfigError("train: no usable frames in the given data");
    return ds;
}

inline int cmd_train(const config::RunConfig& cfg, const std::vector<std::string>& data_dirs,
                     const std::string& run_dir, const std::string& module,
                     std::string segmentor_ckpt) {
    const fs::path run(run_dir);
    fs::create_directories(run / "checkpoints");
    fs::create_directories(run / "logs");
    fs::create_directories(run / "metrics");
    config::save(run / "config.resolved", cfg);
    write_inputs_manifest(run, cfg, data_dirs);

    if (module == "all") {
        DiskSamples ds = gather(cfg, data_dirs);
        const experiment::Workspace ws(cfg, std::move(ds.recordings));
        experiment::ExperimentOutput out = ws.run(cfg);
        experiment::write_run_artifacts(out, run);
        std::printf("detector acc=%.4f\n", out.detector_metrics.acc);
        std::printf("segmentor loss=%.6f pixel_acc=%.4f\n", out.segmentor_test_loss,
                    out.segmentor_pixel_acc);
        std::printf("forgery acc=%.4f clips=%d/%d\n", out.forgery_metrics.acc, out.train_clips,
                    out.test_clips);
        return 0;
    }

    const DiskSamples ds = gather(cfg, data_dirs);
    const sync::SplitSpec frame_spec{cfg.train_frac, cfg.seed + experiment::seeds::kFrameSplit,
                                     cfg.frame_split_mode()};

    if (module == "detector") {
        const sync::DetectorDataset dset = sync::build_detector_dataset(ds.all, frame_spec);
        models::DetectorNet<float> net(experiment::detector_config(cfg),
                                       cfg.seed + experiment::seeds::kDetectorInit);
        training::TrainConfig tc = cfg.train_detector;
        tc.module = "detector";
        tc.seed = cfg.seed + experiment::seeds::kDetectorTrain;
        const auto [tr, val] = experiment::detail::train_val(dset.train);
        const training::TrainResult log = training::train_detector(net, tr, val, tc);
        training::restore_weights(net, log.best_weights);
        models::save_checkpoint(run / "checkpoints" / "detector.ckpt",
                                experiment::fingerprint(cfg, "detector", log.best_epoch, tc.seed),
                                net);
        training::write_train_log_csv(run / "logs" / "detector.csv", log.log);
        const training::BinaryEval ev = training::evaluate_detector(net, dset.test);
        std::vector<int> labels;
        for (const sync::DetectorItem& it : dset.test) labels.push_back(it.label);
        const evaluation::MetricsReport metrics = evaluation::confusion(ev.preds, labels);
        io::write_file(run / "metrics" / "detector.json",
                       evaluation::metrics_json(metrics).dump(2) + "\n");
        std::printf("detector acc=%.4f\n%s", metrics.acc,
                    evaluation::metrics_table(metrics).c_str());
        return 0;
    }

    if (module == "segmentor") {
        const sync::SegmentorDataset dset = sync::build_segmentor_dataset(ds.all, frame_spec);
        models::SegmentorNet<float> net(experiment::segmentor_config(cfg),
                                        cfg.seed + experiment::seeds::kSegmentorInit);
        training::TrainConfig tc = cfg.train_segmentor;
        tc.module = "segmentor";
        tc.seed = cfg.seed + experiment::seeds::kSegmentorTrain;
        const training::SegLossParams lp{cfg.lambda_b, 1.0f};
        const auto [tr, val] = experiment::detail::train_val(dset.train);
        const training::TrainResult log =
            training::train_segmentor(net, cfg.csi.dims(), tr, val, tc, lp);
        training::restore_weights(net, log.best_weights);
        models::save_checkpoint(
            run / "checkpoints" / "segmentor.ckpt",
            experiment::fingerprint(cfg, "segmentor", log.best_epoch, tc.seed), net);
        training::write_train_log_csv(run / "logs" / "segmentor.csv", log.log);
        const training::SegEval ev =
            training::evaluate_segmentor(net, cfg.csi.dims(), dset.test, lp);
        const nlohmann::json j{{"test_loss", ev.loss}, {"pixel_acc", ev.pixel_acc}};
        io::write_file(run / "metrics" / "segmentor.json", j.dump(2) + "\n");
        std::printf("segmentor loss=%.6f pixel_acc=%.4f\n", ev.loss, ev.pixel_acc);
        return 0;
    }

    if (module == "forgery") {
        if (segmentor_ckpt.empty())
            segmentor_ckpt = (run / "checkpoints" / "segmentor.ckpt").string();
        models::SegmentorNet<float> seg(experiment::segmentor_config(cfg),
                                        cfg.seed + experiment::seeds::kSegmentorInit);
        models::load_checkpoint(segmentor_ckpt, experiment::fingerprint(cfg, "segmentor", 0, 0),
                                seg);
        std::vector<sync::ClipPair> clip_train, clip_test;
        for (std::size_t r = 0; r < ds.recordings.size(); ++r) {
            if (ds.recordings[r].scene.persons == 0) continue;
            std::vector<std::shared_ptr<const mv::BinaryMask>> visual;
            std::vector<std::shared_ptr<const mv::ProbMask>> wireless;
            for (const sync::SyncedSample& s : ds.per_rec[r].samples) {
                visual.push_back(std::make_shared<mv::BinaryMask>(s.pseudo_mask));
                wireless.push_back(std::make_shared<mv::ProbMask>(
                    experiment::predict_mask(seg, s.window, cfg.csi.dims())));
            }
            const std::vector<sync::ClipPair> clips = sync::build_forgery_dataset(
                visual, wireless, cfg.g, cfg.forgery_frac, cfg.min_offset,
                experiment::seeds::clips(cfg.seed, r));
            const sync::SplitSpec clip_spec{cfg.train_frac,
                                            cfg.seed + experiment::seeds::kClipSplit,
                                            cfg.clip_split_mode()};
            const sync::SplitIndices idx = sync::split_indices(clips.size(), clip_spec);
            for (std::size_t i : idx.train) clip_train.push_back(clips[i]);
            for (std::size_t i : idx.test) clip_test.push_back(clips[i]);
        }
        if (clip_train.empty())
            throw ConfigError("train: no moving recordings to build forgery clips from");
        models::ForgeryNet<float> net(experiment::forgery_config(cfg),
                                      cfg.seed + experiment::seeds::kForgeryInit);
        training::TrainConfig tc = cfg.train_forgery;
        tc.module = "forgery";
        tc.seed = cfg.seed + experiment::seeds::kForgeryTrain;
        const auto [tr, val] = experiment::detail::train_val(clip_train);
        const training::TrainResult log = training::train_forgery(net, tr, val, tc);
        training::restore_weights(net, log.best_weights);
        models::save_checkpoint(run / "checkpoints" / "forgery.ckpt",
                                experiment::fingerprint(cfg, "forgery", log.best_epoch, tc.seed),
                                net);
        training::write_train_log_csv(run / "logs" / "forgery.csv", log.log);
        evaluation::MetricsReport metrics;
        if (!clip_test.empty()) {
            const training::BinaryEval ev = training::evaluate_forgery(net, clip_test);
            std::vector<int> labels;
            for (const sync::ClipPair& c : clip_test) labels.push_back(c.label);
            metrics = evaluation::confusion(ev.preds, labels);
            io::write_file(run / "metrics" / "forgery.json",
                           evaluation::metrics_json(metrics).dump(2) + "\n");
        }
        std::printf("forgery acc=%.4f clips=%zu/%zu\n", metrics.acc, clip_train.size(),
                    clip_test.size());
        return 0;
    }

    throw ConfigError("train: unknown module \"" + module +
                      "\" (expected detector|segmentor|forgery|all)");
}

inline int cmd_infer(const config::RunConfig& cfg, const std::string& data_dir,
                     const std::string& ckpt_dir, const std::string& run_dir,
                     bool fail_on_alert) {
    experiment::NetBundle nets = experiment::load_bundle(cfg, ckpt_dir);
    const pipeline::PipelineParams pparams{cfg.g, cfg.gate_threshold, cfg.verdict_threshold};
    pipeline::Pipeline pipe(nets.detector, nets.segmentor, nets.forgery, cfg.csi.dims(), pparams);
    pipeline::StreamParams sp;
    sp.m = cfg.m;
    sp.hampel_window = cfg.hampel.window;
    sp.hampel_nsigmas = cfg.hampel.n_sigmas;
    sp.mask_params = cfg.mask_params();
    sp.pipeline = pparams;
    const pipeline::StreamResult res = pipeline::run_stream(data_dir, pipe, sp);

    const fs::path run(run_dir);
    fs::create_directories(run / "metrics");
    config::save(run / "config.resolved", cfg);
    write_inputs_manifest(run, cfg, {data_dir});
    pipeline::write_verdict_log(run / "verdicts.jsonl", res.verdicts);
    const pipeline::Counters& c = res.counters;
    const nlohmann::json stream{{"frames_seen", c.frames_seen},
                                {"detector_calls", c.detector_calls},
                                {"segmentor_calls", c.segmentor_calls},
                                {"forgery_step_calls", c.forgery_step_calls},
                                {"forgery_calls", c.forgery_calls},
                                {"alerts", c.alerts},
                                {"dropped_frames", res.dropped_frames},
                                {"verdicts", res.verdicts.size()}};
    io::write_file(run / "metrics" / "stream.json", stream.dump(2) + "\n");
    const nlohmann::json speed{{"wall_s", res.wall_s},
                               {"detector_fps", res.detector_fps},
                               {"segmentor_fps", res.segmentor_fps},
                               {"forgery_fps", res.forgery_fps},
                               {"detector_time_us", c.detector_time_us},
                               {"segmentor_time_us", c.segmentor_time_us},
                               {"forgery_time_us", c.forgery_time_us}};
    io::write_file(run / "metrics" / "speed.json", speed.dump(2) + "\n");
    std::printf("frames=%lld verdicts=%zu alerts=%lld\n",
                static_cast<long long>(c.frames_seen), res.verdicts.size(),
                static_cast<long long>(c.alerts));
    if (fail_on_alert && c.alerts > 0) return 3;
    return 0;
}

inline int cmd_eval(const std::string& verdicts_path, const std::string& truth_path,
                    const std::string& out_path) {
    const std::vector<pipeline::Verdict> verdicts = pipeline::parse_verdict_log(verdicts_path);
    const std::vector<pipeline::Verdict> truth = pipeline::parse_verdict_log(truth_path);
    std::map<int, int> truth_by_start;
    for (const pipeline::Verdict& v : truth) truth_by_start[v.clip_start] = v.forged ? 1 : 0;
    std::vector<int> preds, labels;
    for (const pipeline::Verdict& v : verdicts) {
        const auto it = truth_by_start.find(v.clip_start);
        if (it == truth_by_start.end())
            throw ValidationError("eval: no truth entry for clip_start " +
                                  std::to_string(v.clip_start));
        preds.push_back(v.forged ? 1 : 0);
        labels.push_back(it->second);
    }
    const evaluation::MetricsReport metrics = evaluation::confusion(preds, labels);
    std::printf("%s", evaluation::metrics_table(metrics).c_str());
    if (!out_path.empty())
        io::write_file(out_path, evaluation::metrics_json(metrics).dump(2) + "\n");
    return 0;
}

inline int cmd_bench(const config::RunConfig& cfg, const std::string& ckpt_dir, int warmup,
                     int iters, const std::string& out_path) {
    experiment::NetBundle nets =
        ckpt_dir.empty() ? experiment::NetBundle(cfg) : experiment::load_bundle(cfg, ckpt_dir);
    Rng rng(cfg.seed);
    csi::CsiWindow window;
    window.frame_index = 0;
    window.subcarriers = cfg.m * cfg.csi.k;
    window.n_tx = cfg.csi.n_tx;
    window.n_rx = cfg.csi.n_rx;
    window.amps.resize(window.entries());
    for (float& a : window.amps) a = static_cast<float>(rng.uniform(0.5, 2.0));
    std::vector<float> clip_input(static_cast<std::size_t>(2) * cfg.height * cfg.width);
    for (float& v : clip_input) v = static_cast<float>(rng.uniform(0.0, 1.0));
    const evaluation::BenchReport report = evaluation::bench(
        nets.detector, nets.segmentor, nets.forgery, cfg.csi.dims(), window, clip_input, warmup,
        iters);
    std::printf("detector_fps=%.1f segmentor_fps=%.1f forgery_fps=%.1f (%s)\n",
                report.detector_fps, report.segmentor_fps, report.forgery_fps,
                report.hardware.c_str());
    if (!out_path.empty())
        io::write_file(out_path, evaluation::bench_json(report).dump(2) + "\n");
    return 0;
}

inline int cmd_ablate(const config::RunConfig& cfg, const std::string& param,
                      const std::vector<int>& values, const std::string& run_dir) {
    const experiment::Workspace ws(cfg);
    const experiment::ExperimentOutput base = ws.run(ws.base_config());
    const std::vector<evaluation::AblationRow> rows =
        experiment::ablate(ws, param, values, &base);
    const fs::path run(run_dir);
    fs::create_directories(run / "metrics");
    config::save(run / "config.resolved", cfg);
    evaluation::write_ablation_csv(run / "metrics" / "ablation.csv", rows);
    for (const evaluation::AblationRow& r : rows)
        std::printf("%s=%d acc=%.4f\n", r.param.c_str(), r.value, r.metrics.acc);
    return 0;
}

}  // namespace detail

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Cross-modal video forgery detection over WiFi CSI and motion vectors"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("-c,--config", config_path, "JSON config file");
    std::optional<std::uint64_t> seed_override;
    app.add_option("--seed", seed_override, "override config seed");
    std::optional<int> m_override, g_override;
    app.add_option("--m", m_override, "override CSI measurements per frame");
    app.add_option("--g", g_override, "override clip length");

    auto* sim = app.add_subcommand("simulate", "generate synthetic recordings");
    std::string sim_out;
    int forge_offset = 0;
    sim->add_option("--out", sim_out, "output directory")->required();
    sim->add_option("--forge-offset", forge_offset,
                    "also write a shifted forged copy of each moving scene");

    auto* pre = app.add_subcommand("preprocess", "write pseudo-masks for a recording");
    std::string pre_data;
    pre->add_option("--data", pre_data, "recording directory")->required();

    auto* tr = app.add_subcommand("train", "train modules on recordings");
    std::vector<std::string> tr_data;
    std::string tr_run, tr_module = "all", tr_seg_ckpt;
    tr->add_option("--data", tr_data, "recording directories")->required();
    tr->add_option("--run", tr_run, "run output directory")->required();
    tr->add_option("--module", tr_module, "detector|segmentor|forgery|all");
    tr->add_option("--segmentor", tr_seg_ckpt, "segmentor checkpoint (forgery training)");

    auto* inf = app.add_subcommand("infer", "run the gated pipeline over a recording");
    std::string inf_data, inf_ckpts, inf_run;
    bool fail_on_alert = false;
    inf->add_option("--data", inf_data, "recording directory")->required();
    inf->add_option("--checkpoints", inf_ckpts, "checkpoint directory")->required();
    inf->add_option("--run", inf_run, "run output directory")->required();
    inf->add_flag("--fail-on-alert", fail_on_alert, "exit 3 if any clip is flagged");

    auto* ev = app.add_subcommand("eval", "score a verdict log against truth");
    std::string ev_verdicts, ev_truth, ev_out;
    ev->add_option("--verdicts", ev_verdicts, "verdict JSONL")->required();
    ev->add_option("--truth", ev_truth, "truth JSONL (same format)")->required();
    ev->add_option("--out", ev_out, "metrics JSON output");

    auto* be = app.add_subcommand("bench", "measure per-module throughput");
    std::string be_ckpts, be_out;
    int be_warmup = 3, be_iters = 20;
    be->add_option("--checkpoints", be_ckpts, "checkpoint directory (default: fresh weights)");
    be->add_option("--warmup", be_warmup, "warmup calls per module");
    be->add_option("--iters", be_iters, "timed calls per module");
    be->add_option("--out", be_out, "bench JSON output");

    auto* ab = app.add_subcommand("ablate", "sweep m or g on the synthetic benchmark");
    std::string ab_param, ab_run;
    std::vector<int> ab_values;
    ab->add_option("--param", ab_param, "m or g")->required();
    ab->add_option("--values", ab_values, "comma-separated values")
        ->required()
        ->delimiter(',');
    ab->add_option("--run", ab_run, "run output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        config::RunConfig cfg =
            config_path.empty() ? config::RunConfig{} : config::load(config_path);
        if (seed_override) cfg.seed = *seed_override;
        if (m_override) cfg.m = *m_override;
        if (g_override) {
            cfg.g = *g_override;
            if (cfg.min_offset < cfg.g) cfg.min_offset = 0;
        }
        cfg = config::resolved(cfg);
        config::validate(cfg);

        if (app.got_subcommand(sim)) return detail::cmd_simulate(cfg, sim_out, forge_offset);
        if (app.got_subcommand(pre)) return detail::cmd_preprocess(cfg, pre_data);
        if (app.got_subcommand(tr))
            return detail::cmd_train(cfg, tr_data, tr_run, tr_module, tr_seg_ckpt);
        if (app.got_subcommand(inf))
            return detail::cmd_infer(cfg, inf_data, inf_ckpts, inf_run, fail_on_alert);
        if (app.got_subcommand(ev)) return detail::cmd_eval(ev_verdicts, ev_truth, ev_out);
        if (app.got_subcommand(be))
            return detail::cmd_bench(cfg, be_ckpts, be_warmup, be_iters, be_out);
        if (app.got_subcommand(ab)) return detail::cmd_ablate(cfg, ab_param, ab_values, ab_run);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ParseError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const DimensionError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const OrderingError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

/// In-process entry point for tests; prepends the program name.
inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("csiguard");
    for (const std::string& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace csiguard::cli
