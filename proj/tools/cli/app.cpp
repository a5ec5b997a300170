// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cli/cli.hpp"
#include "tsflow/checkpoint.hpp"

namespace tsflow::cli {

namespace {

Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const Json::exception& e) {
        throw ConfigError("config", path + " is not valid JSON: " + e.what());
    }
}

// Flags shared by every command: a previous manifest to replay, a JSON overlay, an output dir.
struct Common {
    std::string manifest;
    std::string config;
    std::string out;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--manifest", c.manifest, "Replay the configuration recorded in a run manifest");
    app->add_option("--config", c.config, "JSON file with option overrides");
    app->add_option("--out", c.out, "Output directory")->required();
}

// Layers the manifest config and the config file over `base`; explicit flags are applied later.
template <typename Options, typename FromJson>
Options layered(const Common& c, const std::string& command, Options base, FromJson from_json) {
    if (!c.manifest.empty()) {
        const RunManifest m = read_manifest(c.manifest);
        if (m.command != command)
            throw ConfigError("manifest.command", "recorded '" + m.command + "', expected '" + command + "'");
        base = from_json(m.config, base);
    }
    if (!c.config.empty()) base = from_json(read_json_file(c.config), base);
    return base;
}

template <typename T>
void take(const CLI::Option* opt, const T& value, T& target) {
    if (opt->count() > 0) target = value;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Timestamp-conditioned masked flow matching for optical/SAR image time series", "tsflow"};
    app.set_version_flag("--version", code_version());
    app.require_subcommand(1);

    // synth
    Common synth_c;
    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic optical/SAR dataset");
    add_common(synth, synth_c);
    std::uint64_t synth_seed = 0;
    std::size_t synth_sequences = 0;
    auto* synth_seed_o = synth->add_option("--seed", synth_seed, "Generator seed");
    auto* synth_seq_o = synth->add_option("--sequences", synth_sequences, "Number of sequences");

    // train
    Common train_c;
    CLI::App* train = app.add_subcommand("train", "Train the denoising transformer");
    add_common(train, train_c);
    std::string t_data, t_resume;
    std::size_t t_epochs = 0, t_batch = 0, t_every = 0;
    double t_lr = 0.0;
    std::uint64_t t_seed = 0;
    bool t_spatial = false, t_nobias = false, t_nodelta = false;
    auto* t_data_o = train->add_option("--data", t_data, "Dataset directory");
    auto* t_resume_o = train->add_option("--resume", t_resume, "Checkpoint directory to continue from");
    auto* t_epochs_o = train->add_option("--epochs", t_epochs, "Total number of epochs");
    auto* t_lr_o = train->add_option("--lr", t_lr, "Peak learning rate");
    auto* t_batch_o = train->add_option("--batch-size", t_batch, "Windows per optimizer step");
    auto* t_seed_o = train->add_option("--seed", t_seed, "Seed for initialization and sampling");
    auto* t_every_o = train->add_option("--checkpoint-every", t_every, "Epochs between checkpoints (0: final only)");
    auto* t_spatial_o = train->add_flag("--spatial-only-fusion", t_spatial, "Fuse SAR spatially only");
    auto* t_nobias_o = train->add_flag("--no-rel-bias", t_nobias, "Disable the relative date bias");
    auto* t_nodelta_o = train->add_flag("--lambda-delta-zero", t_nodelta, "Drop query-relative date embeddings");

    // eval
    Common eval_c;
    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint under a protocol");
    add_common(eval, eval_c);
    std::string e_data, e_ckpt, e_protocol, e_split, e_solver;
    std::size_t e_steps = 0;
    std::uint64_t e_seed = 0;
    auto* e_data_o = eval->add_option("--data", e_data, "Dataset directory");
    auto* e_ckpt_o = eval->add_option("--checkpoint", e_ckpt, "Checkpoint directory");
    auto* e_protocol_o = eval->add_option("--protocol", e_protocol, "cloud-removal | missing-frame | anytime");
    auto* e_split_o = eval->add_option("--split", e_split, "test | train | all");
    auto* e_steps_o = eval->add_option("--steps", e_steps, "ODE steps");
    auto* e_solver_o = eval->add_option("--solver", e_solver, "euler | heun");
    auto* e_seed_o = eval->add_option("--seed", e_seed, "Sampling seed");

    // query
    Common query_c;
    CLI::App* query = app.add_subcommand("query", "Generate a frame for any date of one sequence");
    add_common(query, query_c);
    std::string q_data, q_ckpt, q_seq, q_solver;
    int q_date = 0;
    std::size_t q_n = 0, q_steps = 0;
    std::uint64_t q_seed = 0;
    bool q_drop = false;
    auto* q_data_o = query->add_option("--data", q_data, "Dataset directory");
    auto* q_ckpt_o = query->add_option("--checkpoint", q_ckpt, "Checkpoint directory");
    auto* q_seq_o = query->add_option("--sequence", q_seq, "Sequence id");
    auto* q_date_o = query->add_option("--date", q_date, "Day to generate");
    auto* q_n_o = query->add_option("--n-samples", q_n, "Number of samples (>1 writes a spread map)");
    auto* q_steps_o = query->add_option("--steps", q_steps, "ODE steps");
    auto* q_solver_o = query->add_option("--solver", q_solver, "euler | heun");
    auto* q_seed_o = query->add_option("--seed", q_seed, "Sampling seed");
    auto* q_drop_o = query->add_flag("--drop-frame", q_drop, "Regenerate an acquired date in full");

    // plot
    Common plot_c;
    CLI::App* plot = app.add_subcommand("plot", "Render a loss curve or NDVI trend chart");
    add_common(plot, plot_c);
    std::string p_loss, p_trends, p_seq;
    bool p_log = false;
    auto* p_loss_o = plot->add_option("--loss-csv", p_loss, "loss_curve.csv from a training run");
    auto* p_trends_o = plot->add_option("--trends-csv", p_trends, "trends.csv from an anytime evaluation");
    auto* p_seq_o = plot->add_option("--sequence", p_seq, "Sequence id for trend charts");
    auto* p_log_o = plot->add_flag("--log-y", p_log, "Logarithmic y axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            SynthOptions o = layered(synth_c, "synth", SynthOptions{}, synth_options_from_json);
            take(synth_seed_o, synth_seed, o.synth.seed);
            take(synth_seq_o, synth_sequences, o.synth.sequences);
            run_synth(o, synth_c.out);
        } else if (train->parsed()) {
            TrainOptions o = layered(train_c, "train", TrainOptions{}, train_options_from_json);
            take(t_data_o, t_data, o.data);
            if (t_resume_o->count() > 0) o.resume = t_resume;
            take(t_epochs_o, t_epochs, o.train.epochs);
            take(t_lr_o, t_lr, o.train.lr);
            take(t_batch_o, t_batch, o.train.batch_size);
            take(t_seed_o, t_seed, o.train.seed);
            take(t_seed_o, t_seed, o.model.init_seed);
            take(t_every_o, t_every, o.checkpoint_every);
            take(t_spatial_o, t_spatial, o.model.ablation.spatial_only_fusion);
            take(t_nobias_o, t_nobias, o.model.ablation.no_rel_bias);
            take(t_nodelta_o, t_nodelta, o.model.ablation.lambda_delta_zero);
            run_train(o, train_c.out);
        } else if (eval->parsed()) {
            EvalOptions o = layered(eval_c, "eval", EvalOptions{}, eval_options_from_json);
            take(e_data_o, e_data, o.data);
            take(e_ckpt_o, e_ckpt, o.checkpoint);
            if (e_protocol_o->count() > 0) o.protocol = parse_protocol(e_protocol);
            if (e_split_o->count() > 0) o.split = parse_split(e_split);
            take(e_steps_o, e_steps, o.eval.sampler.steps);
            if (e_solver_o->count() > 0) o.eval.sampler.solver = parse_solver(e_solver);
            take(e_seed_o, e_seed, o.eval.seed);
            run_eval(o, eval_c.out);
        } else if (query->parsed()) {
            QueryOptions o = layered(query_c, "query", QueryOptions{}, query_options_from_json);
            take(q_data_o, q_data, o.data);
            take(q_ckpt_o, q_ckpt, o.checkpoint);
            take(q_seq_o, q_seq, o.sequence);
            take(q_date_o, q_date, o.date);
            take(q_n_o, q_n, o.n_samples);
            take(q_steps_o, q_steps, o.sampler.steps);
            if (q_solver_o->count() > 0) o.sampler.solver = parse_solver(q_solver);
            take(q_seed_o, q_seed, o.seed);
            take(q_drop_o, q_drop, o.drop_frame);
            run_query(o, query_c.out);
        } else if (plot->parsed()) {
            PlotOptions o = layered(plot_c, "plot", PlotOptions{}, plot_options_from_json);
            take(p_loss_o, p_loss, o.loss_csv);
            take(p_trends_o, p_trends, o.trends_csv);
            take(p_seq_o, p_seq, o.sequence);
            take(p_log_o, p_log, o.log_y);
            run_plot(o, plot_c.out);
        }
    } catch (const std::logic_error& e) {
        std::cerr << "tsflow: invalid input: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "tsflow: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace tsflow::cli
