// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "cli/cli.hpp"
#include "tsflow/checkpoint.hpp"
#include "tsflow/dataset_io.hpp"
#include "tsflow/plot.hpp"
#include "tsflow/report.hpp"
#include "tsflow/tensor_io.hpp"

namespace tsflow::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::array<std::uint8_t, 3> kModelColor{31, 119, 180};
constexpr std::array<std::uint8_t, 3> kOracleColor{20, 20, 20};
constexpr std::array<std::uint8_t, 3> kLinearColor{255, 127, 14};

RunManifest base_manifest(const std::string& command, Json config) {
    RunManifest m;
    m.command = command;
    m.version = code_version();
    m.config = std::move(config);
    m.bucket_scheme = std::string(kBucketSchemeVersion);
    m.block_order = std::string(kBlockOrderTag);
    return m;
}

Json metrics_json(const MetricValues& v) {
    return Json{{"mae", v.mae},         {"rmse", v.rmse},
                {"sam_deg", v.sam_degrees}, {"psnr_db", v.psnr_db},
                {"ssim", v.ssim},       {"masked_pixels", v.masked_pixels}};
}

std::vector<std::size_t> split_ids(const Dataset& data, Split split) {
    const DataSplit s = split_dataset(data.sequences.size());
    if (split == Split::Test) return s.test;
    if (split == Split::Train) return s.train;
    std::vector<std::size_t> all(data.sequences.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    if (rows.size() < 2) throw std::invalid_argument(path.string() + ": no data rows");
    return rows;
}

std::size_t column(const std::vector<std::string>& header, const std::string& name, const fs::path& path) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::invalid_argument(path.string() + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

double to_double(const std::string& s, const fs::path& path) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(path.string() + ": not a number: '" + s + "'");
    }
}

void plot_trend(const fs::path& file, const AnytimeTrend& t) {
    auto series = [](const std::string& label, const std::vector<TrajectoryPoint>& pts, std::array<std::uint8_t, 3> c) {
        Series s{label, {}, {}, c};
        for (const auto& p : pts) {
            s.x.push_back(p.date);
            s.y.push_back(p.mean);
        }
        return s;
    };
    fs::create_directories(file.parent_path());
    write_png(file, render_line_chart({series("oracle", t.oracle, kOracleColor),
                                       series("linear", t.baseline, kLinearColor),
                                       series("generated", t.generated, kModelColor)}));
}

std::size_t find_sequence(const Dataset& data, const std::string& id) {
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
        if (data.sequences[i].id == id) return i;
    throw std::invalid_argument("query: no sequence with id '" + id + "'");
}

}  // namespace

RunManifest run_synth(const SynthOptions& o, const fs::path& out) {
    o.synth.validate();
    const Dataset data = synth_dataset(o.synth);
    write_dataset(out, data);
    std::size_t frames = 0, sar_frames = 0;
    for (const auto& s : data.sequences) {
        frames += s.clean.frames();
        sar_frames += s.sar.frames();
    }
    RunManifest m = base_manifest("synth", to_json(o));
    m.seeds = {{"synth", o.synth.seed}};
    m.outputs = Json{{"sequences", data.sequences.size()}, {"optical_frames", frames}, {"sar_frames", sar_frames}};
    write_manifest(out, m);
    std::cout << "synth: wrote " << data.sequences.size() << " sequences to " << out.string() << '\n';
    return m;
}

RunManifest run_train(const TrainOptions& o, const fs::path& out) {
    o.model.validate();
    o.train.validate();
    if (o.data.empty()) throw ConfigError("data", "a dataset directory is required");
    const Dataset data = read_dataset(o.data);
    const auto ids = split_dataset(data.sequences.size()).train;

    std::optional<Sdt> model;
    if (o.resume) {
        check_resume_compatible(*o.resume, o.model, o.train);
        model.emplace(load_model(*o.resume));
    } else {
        model.emplace(o.model);
    }
    Trainer trainer(*model, data, ids, o.train);
    if (o.resume) load_training_state(*o.resume, trainer);

    const fs::path ckpt = out / "checkpoint";
    trainer.fit([&](const EpochRecord& r) {
        std::printf("epoch %zu/%zu loss %.5f lr %.3g\n", r.epoch + 1, o.train.epochs, r.mean_loss, r.lr);
        std::fflush(stdout);
        if (o.checkpoint_every > 0 && (r.epoch + 1) % o.checkpoint_every == 0) save_checkpoint(ckpt, *model, &trainer);
    });
    save_checkpoint(ckpt, *model, &trainer);

    write_text(out / "loss_curve.csv", loss_curve_csv(trainer.history()));
    Series loss{"loss", {}, {}, kModelColor};
    for (const auto& r : trainer.history()) {
        loss.x.push_back(static_cast<double>(r.epoch));
        loss.y.push_back(r.mean_loss);
    }
    write_png(out / "loss_curve.png", render_line_chart({loss}, ChartOptions{640, 400, true}));

    RunManifest m = base_manifest("train", to_json(o));
    m.seeds = {{"train", o.train.seed}, {"init", o.model.init_seed}};
    m.ablation = o.model.ablation;
    const auto& h = trainer.history();
    m.outputs = Json{{"epochs", trainer.epoch()},
                     {"optimizer_steps", trainer.optimizer().steps()},
                     {"final_loss", h.empty() ? 0.0 : h.back().mean_loss},
                     {"empty_mask_batches", trainer.counters().empty_masks},
                     {"parameter_count", model->params().scalar_count()},
                     {"checkpoint", "checkpoint"},
                     {"loss_curve", "loss_curve.csv"}};
    write_manifest(out, m);
    return m;
}

RunManifest run_eval(const EvalOptions& o, const fs::path& out) {
    o.eval.validate();
    if (o.data.empty()) throw ConfigError("data", "a dataset directory is required");
    if (o.checkpoint.empty()) throw ConfigError("checkpoint", "a checkpoint directory is required");
    const Dataset data = read_dataset(o.data);
    const Sdt model = load_model(o.checkpoint);
    const ProtocolResult r = run_protocol(o.protocol, data, split_ids(data, o.split), model, o.eval);

    write_report(out, "model", r.model);
    write_report(out, "linear", r.baseline);
    if (!r.frames.empty()) {
        NamedTensors frames;
        for (std::size_t i = 0; i < r.frames.size(); ++i) frames.emplace_back(r.frame_ids[i], r.frames[i]);
        save_tensor_set(out / "frames", frames);
    }
    RunManifest m = base_manifest("eval", to_json(o));
    m.seeds = {{"eval", o.eval.seed}};
    m.ablation = model.config().ablation;
    m.outputs = Json{{"protocol", protocol_name(o.protocol)},
                     {"sequences", r.model.rows.size()},
                     {"skipped_sequences", r.skipped_sequences},
                     {"model", metrics_json(r.model.aggregate)},
                     {"linear", metrics_json(r.baseline.aggregate)}};
    if (o.protocol == Protocol::Anytime) {
        write_text(out / "trends.csv", trends_csv(r.trends));
        for (const auto& t : r.trends) plot_trend(out / "trends" / (t.id + ".png"), t);
        double base = 0.0;
        std::size_t n = 0;
        for (const auto& t : r.trends)
            if (!t.baseline_agreement.flat) base += t.baseline_agreement.value, ++n;
        m.outputs["model_trend_agreement"] = r.mean_trend_agreement();
        m.outputs["linear_trend_agreement"] = n ? base / static_cast<double>(n) : 0.0;
    }
    write_manifest(out, m);
    std::printf("eval %s: model MAE %.5f, linear MAE %.5f\n", protocol_name(o.protocol).c_str(), r.model.aggregate.mae,
                r.baseline.aggregate.mae);
    return m;
}

RunManifest run_query(const QueryOptions& o, const fs::path& out) {
    if (o.n_samples == 0) throw ConfigError("n_samples", "must be at least 1");
    if (o.sampler.steps == 0) throw ConfigError("steps", "must be at least 1");
    const Dataset data = read_dataset(o.data);
    const Sdt model = load_model(o.checkpoint);
    const SequenceRecord& rec = data.sequences.at(find_sequence(data, o.sequence));
    const auto& dates = rec.clean.dates;
    if (o.date < dates.front() || o.date > dates.back())
        throw std::out_of_range("query: day " + std::to_string(o.date) + " outside the sequence span [" +
                                std::to_string(dates.front()) + ", " + std::to_string(dates.back()) + "]");

    const Window ctx = anytime_context(dates, o.date, model.config().window);
    const WindowData w = extract_window(rec, ctx, EvalConfig{}.sar_margin_days);
    FrameSet frames;
    frames.mask = slice_frames(rec.masks.values, ctx.start, ctx.length);
    frames.x = compose_observed(w.clean, frames.mask);
    frames.dates = w.dates;

    Conditioning cond{frames.dates, w.sar, w.sar_dates, std::nullopt};
    std::size_t index = 0;
    bool inserted = false;
    const auto at = std::find(frames.dates.begin(), frames.dates.end(), o.date);
    if (at != frames.dates.end() && !o.drop_frame) {
        // Acquired date: keep its stored mask so only clouded pixels are generated.
        index = static_cast<std::size_t>(at - frames.dates.begin());
    } else {
        const QueryPlacement p = place_query(frames, o.date);
        frames = p.frames;
        index = p.index;
        inserted = p.inserted;
        cond.optical_dates = frames.dates;
        cond.query_date = o.date;
    }

    std::vector<Tensor> samples;
    for (std::size_t i = 0; i < o.n_samples; ++i) {
        const Tensor seq = ode_sample(frames.x, frames.mask, cond, model, o.sampler, sequence_seed(o.seed, i));
        samples.push_back(frame_at(seq, index));
    }
    const std::size_t n = samples.front().numel();
    // Offsets from the first sample keep clamped pixels exact: mean == x and spread == 0.
    const double count = static_cast<double>(samples.size());
    const Tensor& first = samples.front();
    std::vector<double> shift(n, 0.0), spread(n, 0.0), mean(n, 0.0);
    for (const auto& s : samples)
        for (std::size_t k = 0; k < n; ++k) shift[k] += (s.at(k) - first.at(k)) / count;
    for (const auto& s : samples)
        for (std::size_t k = 0; k < n; ++k) {
            const double d = s.at(k) - first.at(k) - shift[k];
            spread[k] += d * d;
        }
    for (std::size_t k = 0; k < n; ++k) {
        mean[k] = first.at(k) + shift[k];
        spread[k] = std::sqrt(spread[k] / count);
    }

    const Shape shape = samples.front().shape();
    const std::size_t c = shape[0], h = shape[1], wd = shape[2], plane = h * wd;
    const Tensor mean_frame(shape, mean);
    fs::create_directories(out);
    save_tensor(out / "frame.bin", mean_frame);
    const Tensor nd = ndvi(denormalize_optical(mean_frame), data.config.nir_band, data.config.red_band);
    write_map_png(out / "ndvi.png", h, wd, std::vector<double>(nd.values().begin(), nd.values().end()), -1.0, 1.0);

    RunManifest m = base_manifest("query", to_json(o));
    m.seeds = {{"query", o.seed}};
    m.ablation = model.config().ablation;
    m.outputs = Json{{"frame", "frame.bin"},
                     {"ndvi_map", "ndvi.png"},
                     {"frame_index", index},
                     {"virtual_frame", inserted},
                     {"context_dates", frames.dates}};
    if (o.n_samples > 1) {
        save_tensor(out / "spread.bin", Tensor(shape, spread));
        std::vector<double> band_mean(plane, 0.0);
        double max_spread = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t p = 0; p < plane; ++p) {
                band_mean[p] += spread[ch * plane + p] / static_cast<double>(c);
                max_spread = std::max(max_spread, spread[ch * plane + p]);
            }
        write_map_png(out / "spread.png", h, wd, band_mean, 0.0, std::max(max_spread, 1e-12));
        m.outputs["spread"] = "spread.bin";
        m.outputs["max_spread"] = max_spread;
    }
    write_manifest(out, m);
    std::cout << "query " << o.sequence << " day " << o.date << ": " << o.n_samples << " sample(s) -> "
              << out.string() << '\n';
    return m;
}

RunManifest run_plot(const PlotOptions& o, const fs::path& out) {
    if (o.loss_csv.empty() == o.trends_csv.empty())
        throw ConfigError("plot", "give exactly one of --loss-csv or --trends-csv");
    RunManifest m = base_manifest("plot", to_json(o));
    fs::create_directories(out);
    if (!o.loss_csv.empty()) {
        const auto rows = read_csv(o.loss_csv);
        const std::size_t ec = column(rows[0], "epoch", o.loss_csv), lc = column(rows[0], "loss", o.loss_csv);
        Series s{"loss", {}, {}, kModelColor};
        for (std::size_t i = 1; i < rows.size(); ++i) {
            s.x.push_back(to_double(rows[i].at(ec), o.loss_csv));
            s.y.push_back(to_double(rows[i].at(lc), o.loss_csv));
        }
        write_png(out / "loss_curve.png", render_line_chart({s}, ChartOptions{640, 400, o.log_y}));
        m.outputs = Json{{"plot", "loss_curve.png"}, {"points", s.x.size()}};
    } else {
        const auto rows = read_csv(o.trends_csv);
        const fs::path& f = o.trends_csv;
        const std::size_t ic = column(rows[0], "id", f), dc = column(rows[0], "date", f),
                          sc = column(rows[0], "source", f), mc = column(rows[0], "mean", f);
        std::vector<Series> series{{"generated", {}, {}, kModelColor},
                                   {"oracle", {}, {}, kOracleColor},
                                   {"linear", {}, {}, kLinearColor}};
        std::string id = o.sequence.empty() ? rows[1].at(ic) : o.sequence;
        for (std::size_t i = 1; i < rows.size(); ++i) {
            if (rows[i].at(ic) != id) continue;
            for (auto& s : series)
                if (s.label == rows[i].at(sc)) {
                    s.x.push_back(to_double(rows[i].at(dc), f));
                    s.y.push_back(to_double(rows[i].at(mc), f));
                }
        }
        if (series[0].x.empty()) throw std::invalid_argument("plot: no trend rows for sequence '" + id + "'");
        write_png(out / ("trend_" + id + ".png"), render_line_chart(series));
        m.outputs = Json{{"plot", "trend_" + id + ".png"}, {"points", series[0].x.size()}};
    }
    write_manifest(out, m);
    return m;
}

}  // namespace tsflow::cli
