// Copyright (C) 2026 The tsflow Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <sstream>
#include <unistd.h>

#include "cli/cli.hpp"
#include "support/oracles.hpp"
#include "tsflow/checkpoint.hpp"
#include "tsflow/dataset_io.hpp"
#include "tsflow/tensor_io.hpp"

using namespace tsflow;
using namespace tsflow::cli;
using tsflow::testing::values_of;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "tsflow");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// One small dataset and a one-epoch checkpoint shared by the command tests.
class CliRun : public ::testing::Test {
protected:
    static fs::path root;

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / ("tsflow_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        std::ofstream(root / "small.json") << R"({"model": {"hidden": 16, "depth": 1}, "train": {"batch_size": 4}})";
        ASSERT_EQ(run({"synth", "--out", (root / "data").string(), "--sequences", "6"}), 0);
        ASSERT_EQ(run({"train", "--data", (root / "data").string(), "--out", (root / "run").string(), "--config",
                       (root / "small.json").string(), "--epochs", "1", "--checkpoint-every", "0"}),
                  0);
    }
    static void TearDownTestSuite() { fs::remove_all(root); }

    static std::string data() { return (root / "data").string(); }
    static std::string ckpt() { return (root / "run" / "checkpoint").string(); }
};
fs::path CliRun::root;

}  // namespace

TEST(Manifest, JsonRoundTrip) {
    RunManifest m;
    m.command = "train";
    m.version = code_version();
    m.config = Json{{"data", "d"}, {"train", {{"lr", 0.001}}}};
    m.seeds = {{"train", 7}, {"init", 7}};
    m.bucket_scheme = "b";
    m.block_order = "o";
    m.ablation.no_rel_bias = true;
    m.outputs = Json{{"final_loss", 0.25}};
    EXPECT_EQ(manifest_from_json(manifest_to_json(m)), m);
}

TEST(Manifest, RejectsUnknownKeysAndForeignFormat) {
    Json j = manifest_to_json(RunManifest{});
    j["extra"] = 1;
    EXPECT_THROW(manifest_from_json(j), ConfigError);
    j = manifest_to_json(RunManifest{});
    j["format"] = "other/1";
    EXPECT_THROW(manifest_from_json(j), ConfigError);
}

TEST(Options, EveryCommandRoundTripsThroughJson) {
    SynthOptions s;
    s.synth.seed = 5;
    s.synth.sequences = 7;
    EXPECT_EQ(synth_options_from_json(to_json(s)), s);

    TrainOptions t;
    t.data = "ds";
    t.resume = "ck";
    t.train.epochs = 3;
    t.model.ablation.spatial_only_fusion = true;
    EXPECT_EQ(train_options_from_json(to_json(t)), t);

    EvalOptions e;
    e.protocol = Protocol::Anytime;
    e.split = Split::All;
    e.eval.sampler.solver = Solver::Heun;
    EXPECT_EQ(eval_options_from_json(to_json(e)), e);

    QueryOptions q;
    q.sequence = "seq_0001";
    q.date = 40;
    q.n_samples = 4;
    q.drop_frame = true;
    EXPECT_EQ(query_options_from_json(to_json(q)), q);

    PlotOptions p;
    p.loss_csv = "loss.csv";
    p.log_y = true;
    EXPECT_EQ(plot_options_from_json(to_json(p)), p);
}

TEST(Options, PartialOverlayKeepsBaseAndRejectsUnknownKeys) {
    TrainOptions base;
    base.data = "keep";
    const TrainOptions o = train_options_from_json(Json{{"train", {{"lr", 0.5}}}}, base);
    EXPECT_EQ(o.data, "keep");
    EXPECT_EQ(o.train.lr, 0.5);
    EXPECT_EQ(o.train.epochs, base.train.epochs);
    EXPECT_EQ(o.model, base.model);
    EXPECT_THROW(train_options_from_json(Json{{"train", {{"learning_rate", 0.5}}}}), ConfigError);
    EXPECT_THROW(eval_options_from_json(Json{{"protocl", "anytime"}}), ConfigError);
    EXPECT_THROW(query_options_from_json(Json{{"date", "soon"}}), ConfigError);
}

TEST(ExitCodes, ParseAndValidationErrorsReturnTwo) {
    EXPECT_EQ(run({}), 2);
    EXPECT_EQ(run({"train", "--data", "x"}), 2);  // --out missing
    EXPECT_EQ(run({"eval", "--out", "x", "--bogus"}), 2);
    EXPECT_EQ(run({"eval", "--out", "x", "--protocol", "inpaint"}), 2);
    EXPECT_EQ(run({"train", "--out", "x", "--epochs", "0", "--data", "x"}), 2);
    EXPECT_EQ(run({"plot", "--out", "x"}), 2);
    EXPECT_EQ(run({"--help"}), 0);
}

TEST(ExitCodes, RuntimeFailureReturnsOne) {
    const fs::path missing = fs::temp_directory_path() / "tsflow_cli_no_such_dataset";
    EXPECT_EQ(run({"eval", "--out", "x", "--data", missing.string(), "--checkpoint", missing.string()}), 1);
}

TEST_F(CliRun, TrainWritesCheckpointCurveAndManifest) {
    EXPECT_TRUE(fs::exists(root / "run" / "loss_curve.csv"));
    EXPECT_TRUE(fs::exists(root / "run" / "loss_curve.png"));
    const RunManifest m = read_manifest(root / "run" / kManifestFile);
    EXPECT_EQ(m.command, "train");
    EXPECT_EQ(m.bucket_scheme, std::string(kBucketSchemeVersion));
    EXPECT_EQ(m.block_order, std::string(kBlockOrderTag));
    EXPECT_EQ(m.outputs.at("epochs"), 1);
    const TrainOptions o = train_options_from_json(m.config);
    EXPECT_EQ(o.model.hidden, 16u);
    EXPECT_EQ(o.train.epochs, 1u);
    EXPECT_EQ(load_model(ckpt()).config(), o.model);
}

TEST_F(CliRun, ManifestReplayReproducesTrainingByteForByte) {
    const fs::path again = root / "replay";
    ASSERT_EQ(run({"train", "--manifest", (root / "run" / kManifestFile).string(), "--out", again.string()}), 0);
    EXPECT_EQ(slurp(again / kManifestFile), slurp(root / "run" / kManifestFile));
    EXPECT_EQ(slurp(again / "loss_curve.csv"), slurp(root / "run" / "loss_curve.csv"));
    for (const auto& e : fs::directory_iterator(again / "checkpoint" / "params"))
        EXPECT_EQ(slurp(e.path()), slurp(root / "run" / "checkpoint" / "params" / e.path().filename()))
            << e.path().filename();
    EXPECT_EQ(run({"eval", "--manifest", (root / "run" / kManifestFile).string(), "--out", again.string()}), 2);
}

TEST_F(CliRun, AblationFlagsReachCheckpointAndManifest) {
    const fs::path out = root / "nobias";
    ASSERT_EQ(run({"train", "--data", data(), "--out", out.string(), "--config", (root / "small.json").string(),
                   "--epochs", "1", "--no-rel-bias", "--checkpoint-every", "0"}),
              0);
    const RunManifest m = read_manifest(out / kManifestFile);
    EXPECT_TRUE(m.ablation.no_rel_bias);
    EXPECT_FALSE(m.ablation.spatial_only_fusion);
    const Sdt model = load_model(out / "checkpoint");
    EXPECT_TRUE(model.config().ablation.no_rel_bias);
    const Sdt init(model.config());
    std::size_t frozen = 0;
    for (const auto& name : model.params().names())
        if (!model.params().trainable(name)) {
            ++frozen;
            EXPECT_EQ(values_of(model.params().get(name)), values_of(init.params().get(name))) << name;
        }
    EXPECT_GT(frozen, 0u);
}

TEST_F(CliRun, EvalWritesReportsForModelAndBaseline) {
    const fs::path out = root / "eval";
    ASSERT_EQ(run({"eval", "--data", data(), "--checkpoint", ckpt(), "--out", out.string(), "--steps", "2"}), 0);
    EXPECT_TRUE(fs::exists(out / "model.csv"));
    EXPECT_TRUE(fs::exists(out / "linear.csv"));
    EXPECT_TRUE(fs::exists(out / "frames"));
    const RunManifest m = read_manifest(out / kManifestFile);
    EXPECT_EQ(m.outputs.at("protocol"), "missing-frame");
    EXPECT_GT(m.outputs.at("model").at("masked_pixels").get<std::size_t>(), 0u);

    const fs::path any = root / "anytime";
    ASSERT_EQ(run({"eval", "--data", data(), "--checkpoint", ckpt(), "--out", any.string(), "--steps", "1",
                   "--protocol", "anytime"}),
              0);
    EXPECT_TRUE(fs::exists(any / "trends.csv"));
    EXPECT_TRUE(fs::exists(any / "trends" / "seq_0004.png"));
    ASSERT_EQ(run({"plot", "--trends-csv", (any / "trends.csv").string(), "--out", (root / "plot").string()}), 0);
    EXPECT_TRUE(fs::exists(root / "plot" / "trend_seq_0004.png"));
}

TEST_F(CliRun, CloudRemovalOnClearDatasetIsRejected) {
    const fs::path clear = root / "clear";
    std::ofstream(root / "clear.json") << R"({"synth": {"cloud_probability": 0.0}})";
    ASSERT_EQ(run({"synth", "--out", clear.string(), "--sequences", "6", "--config", (root / "clear.json").string()}),
              0);
    EXPECT_EQ(run({"eval", "--data", clear.string(), "--checkpoint", ckpt(), "--out", (root / "cr").string(),
                   "--protocol", "cloud-removal"}),
              2);
}

TEST_F(CliRun, QueryRejectsDatesOutsideTheSpan) {
    const Dataset d = read_dataset(data());
    const int last = d.sequences[0].clean.dates.back();
    EXPECT_EQ(run({"query", "--data", data(), "--checkpoint", ckpt(), "--out", (root / "q_out").string(),
                   "--sequence", "seq_0000", "--date", std::to_string(last + 1)}),
              2);
    EXPECT_EQ(run({"query", "--data", data(), "--checkpoint", ckpt(), "--out", (root / "q_out").string(),
                   "--sequence", "seq_9999", "--date", "10"}),
              2);
}

TEST_F(CliRun, SingleSampleQueryWritesNoSpread) {
    const Dataset d = read_dataset(data());
    const auto& dates = d.sequences[1].clean.dates;
    const int day = dates[2] + 1 == dates[3] ? dates[2] : dates[2] + 1;
    const fs::path out = root / "q1";
    ASSERT_EQ(run({"query", "--data", data(), "--checkpoint", ckpt(), "--out", out.string(), "--sequence",
                   "seq_0001", "--date", std::to_string(day), "--steps", "2"}),
              0);
    EXPECT_TRUE(fs::exists(out / "frame.bin"));
    EXPECT_TRUE(fs::exists(out / "ndvi.png"));
    EXPECT_FALSE(fs::exists(out / "spread.bin"));
    EXPECT_EQ(load_tensor(out / "frame.bin").shape(), (Shape{3, 16, 16}));
}

TEST_F(CliRun, SpreadIsNonNegativeAndZeroOnObservedPixels) {
    const Dataset d = read_dataset(data());
    const std::size_t plane = 16 * 16;
    // First acquired frame with a partial cloud mask.
    for (std::size_t s = 0; s < d.sequences.size(); ++s) {
        const auto& rec = d.sequences[s];
        for (std::size_t f = 0; f < rec.clean.frames(); ++f) {
            const auto m = rec.masks.values.values().subspan(f * plane, plane);
            const double covered = std::accumulate(m.begin(), m.end(), 0.0);
            if (covered == 0.0 || covered == static_cast<double>(plane)) continue;

            const fs::path out = root / "spread";
            ASSERT_EQ(run({"query", "--data", data(), "--checkpoint", ckpt(), "--out", out.string(), "--sequence",
                           rec.id, "--date", std::to_string(rec.clean.dates[f]), "--n-samples", "3", "--steps",
                           "2"}),
                      0);
            const Tensor spread = load_tensor(out / "spread.bin");
            ASSERT_EQ(spread.shape(), (Shape{3, 16, 16}));
            bool any_positive = false;
            for (std::size_t c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < plane; ++p) {
                    const double v = spread.at(c * plane + p);
                    EXPECT_GE(v, 0.0);
                    if (m[p] == 0.0) EXPECT_EQ(v, 0.0) << "observed pixel " << p;
                    any_positive |= v > 0.0;
                }
            EXPECT_TRUE(any_positive);
            EXPECT_FALSE(read_manifest(out / kManifestFile).outputs.at("virtual_frame").get<bool>());
            return;
        }
    }
    FAIL() << "no partially clouded frame in the test dataset";
}
