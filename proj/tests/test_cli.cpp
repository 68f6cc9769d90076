// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

#include "nif/scene_io.hpp"

using namespace nif;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int code;
    std::string output;
};

// Runs the CLI with stderr folded into stdout.
RunResult run(const std::string &args, const std::string &env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "\"" + NIF_CLI_PATH + "\" " + args + " 2>&1";
    FILE *p = popen(cmd.c_str(), "r");
    if (!p) return {-1, ""};
    std::string out;
    char buf[4096];
    while (size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string scene(const std::string &name) { return (fs::path(NIF_SOURCE_DIR) / "scenes" / (name + ".json")).string(); }

std::string read_bytes(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> lines_of(const fs::path &p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);)
        if (!l.empty()) out.push_back(l);
    return out;
}

class Cli : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("nif_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    std::string at(const std::string &name) const { return (dir_ / name).string(); }
    fs::path dir_;
};

}  // namespace

TEST_F(Cli, BvhRenderOfSphereScene) {
    RunResult r = run("render --scene " + scene("sphere") + " --spp 2 --res 64x36 --out " + at("a"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("visibility"), std::string::npos);
    HdrImage img = read_pfm(at("a.pfm"));
    EXPECT_EQ(img.width(), 64);
    EXPECT_EQ(img.height(), 36);
    Image8 png = read_png(at("a.png"));
    EXPECT_EQ(png.rgb, tonemap(img).rgb);
    double sum = 0;
    for (size_t i = 0; i < img.pixel_count(); ++i) sum += img.pixel(i).luminance();
    EXPECT_GT(sum, 0);
}

TEST_F(Cli, NifBackendWithoutModelFails) {
    RunResult r = run("render --scene " + scene("sphere") + " --backend nif --out " + at("x"));
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.output.find("--model"), std::string::npos);
    EXPECT_FALSE(fs::exists(at("x.pfm")));
}

TEST_F(Cli, SameSeedSamePfmBytes) {
    const std::string base = "render --scene " + scene("sphere") + " --spp 3 --res 48x27 --seed 9 --out ";
    ASSERT_EQ(run(base + at("a")).code, 0);
    ASSERT_EQ(run(base + at("b")).code, 0);
    EXPECT_EQ(read_bytes(at("a.pfm")), read_bytes(at("b.pfm")));
    ASSERT_EQ(run("render --scene " + scene("sphere") + " --spp 3 --res 48x27 --seed 10 --out " + at("c")).code, 0);
    EXPECT_NE(read_bytes(at("a.pfm")), read_bytes(at("c.pfm")));
}

TEST_F(Cli, TrainProducesLoadableCheckpoint) {
    RunResult r = run("train --scene " + scene("sphere") + " --train-spp 4 --res 64x36 --epochs 2 --grid-r 32 --out " +
                      at("m.nif"));
    ASSERT_EQ(r.code, 0) << r.output;
    NifModel m = load_checkpoint(at("m.nif"));
    EXPECT_TRUE(m.trained());
    EXPECT_EQ(m.object_count(), 2u);
    EXPECT_EQ(m.config().outer.grid_R, 32);
    auto loss = lines_of(at("m.loss.csv"));
    ASSERT_EQ(loss.size(), 3u);
    EXPECT_EQ(loss[0], "epoch,loss,outer_loss,inner_loss");

    RunResult nif = run("render --scene " + scene("sphere") + " --backend nif --model " + at("m.nif") +
                        " --spp 1 --res 32x18 --out " + at("n"));
    ASSERT_EQ(nif.code, 0) << nif.output;
    EXPECT_NE(nif.output.find("outer inference"), std::string::npos);
}

TEST_F(Cli, ZeroEpochsWritesUntrainedCheckpoint) {
    RunResult r = run("train --scene " + scene("sphere") + " --train-spp 1 --res 16x9 --epochs 0 --grid-r 8 --out " +
                      at("u.nif"));
    ASSERT_EQ(r.code, 0) << r.output;
    NifModel m = load_checkpoint(at("u.nif"));
    EXPECT_FALSE(m.trained());
    // The renderer refuses untrained networks.
    RunResult render = run("render --scene " + scene("sphere") + " --backend nif --model " + at("u.nif") +
                           " --spp 1 --res 16x9 --out " + at("n"));
    EXPECT_EQ(render.code, 1);
}

TEST_F(Cli, ImportanceCollectsAtLeastAsManyOuterSamples) {
    std::regex pat("collected (\\d+) outer");
    auto outer_count = [&](const std::string &sampler, int seed) {
        RunResult r = run("train --scene " + scene("sphere") + " --train-spp 4 --res 64x36 --epochs 0 --grid-r 8 --seed " +
                          std::to_string(seed) + " --sampler " + sampler + " --out " + at(sampler + ".nif"));
        EXPECT_EQ(r.code, 0) << r.output;
        std::smatch m;
        EXPECT_TRUE(std::regex_search(r.output, m, pat)) << r.output;
        return m.empty() ? 0L : std::stol(m[1]);
    };
    for (int seed = 1; seed <= 5; ++seed) {
        long imp = outer_count("importance", seed), uni = outer_count("uniform", seed);
        EXPECT_GT(imp, 0);
        EXPECT_GE(imp, uni) << "seed " << seed;
    }
}

TEST_F(Cli, EvalIdenticalPrintsInf) {
    ASSERT_EQ(run("render --scene " + scene("sphere") + " --spp 1 --res 32x18 --out " + at("a")).code, 0);
    RunResult r = run("eval --a " + at("a.pfm") + " --b " + at("a.pfm") + " --out-diff " + at("d.png"));
    ASSERT_EQ(r.code, 0) << r.output;
    EXPECT_NE(r.output.find("PSNR: inf dB"), std::string::npos) << r.output;
    for (uint8_t b : read_png(at("d.png")).rgb) EXPECT_EQ(b, 0);
}

TEST_F(Cli, EvalMatchesHandPsnr) {
    // Black against white: MSE = 255^2, 0 dB.
    Image8 black{4, 4, std::vector<uint8_t>(48, 0)}, white{4, 4, std::vector<uint8_t>(48, 255)};
    // Every byte off by one: MSE = 1, 10 log10(65025) = 48.13 dB.
    Image8 gray{4, 4, std::vector<uint8_t>(48, 100)}, gray1{4, 4, std::vector<uint8_t>(48, 101)};
    write_png(black, at("k.png"));
    write_png(white, at("w.png"));
    write_png(gray, at("g.png"));
    write_png(gray1, at("g1.png"));
    RunResult r0 = run("eval --a " + at("k.png") + " --b " + at("w.png"));
    ASSERT_EQ(r0.code, 0) << r0.output;
    EXPECT_NE(r0.output.find("PSNR: 0.00 dB"), std::string::npos) << r0.output;
    RunResult r1 = run("eval --a " + at("g.png") + " --b " + at("g1.png") + " --amplify 10 --out-diff " + at("d.png"));
    ASSERT_EQ(r1.code, 0) << r1.output;
    EXPECT_NE(r1.output.find("PSNR: 48.13 dB"), std::string::npos) << r1.output;
    EXPECT_TRUE(fs::exists(at("d.png")));
}

TEST_F(Cli, BenchRowPerScene) {
    RunResult r = run("bench --scenes " + scene("sphere") + "," + scene("overlap") +
                      " --spp 1 --res 32x18 --train-spp 1 --epochs 1 --grid-r 8 --inner-grid-r 8 --dist-grid-r 8"
                      " --repeats 1 --model-dir " + at("models") + " --out " + at("bench.csv"));
    ASSERT_EQ(r.code, 0) << r.output;
    auto rows = read_bench_csv(at("bench.csv"));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].scene, "sphere");
    EXPECT_EQ(rows[1].scene, "overlap");
    for (const BenchRow &row : rows) {
        const double stages =
            row.nif_ray_cast_us + row.outer_grid_us + row.outer_inference_us + row.inner_grid_us + row.inner_inference_us;
        EXPECT_NEAR(row.nif_total_us, stages, 0.01 * stages);
        EXPECT_GT(row.shadow_rays, 0u);
        EXPECT_EQ(row.outer_rays + row.inner_rays > 0, true);
    }
    EXPECT_TRUE(fs::exists(at("models/sphere.nif")));
}

TEST_F(Cli, SweepTwoRowsFinite) {
    RunResult r = run("sweep --scene " + scene("sphere") +
                      " --param R --values 16,64 --train-spp 2 --spp 2 --res 32x18 --epochs 2 --out " + at("s.csv"));
    ASSERT_EQ(r.code, 0) << r.output;
    auto lines = lines_of(at("s.csv"));
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "param,network,value,psnr_db,train_seconds");
    for (size_t i = 1; i < 3; ++i) {
        std::stringstream ss(lines[i]);
        std::vector<std::string> f;
        for (std::string c; std::getline(ss, c, ',');) f.push_back(c);
        ASSERT_EQ(f.size(), 5u);
        EXPECT_EQ(f[2], i == 1 ? "16" : "64");
        EXPECT_TRUE(std::isfinite(std::stod(f[3]))) << lines[i];
    }
}

TEST_F(Cli, UsageErrorsExitTwoWithOneLine) {
    for (const std::string args :
         {std::string(""), std::string("frobnicate"), std::string("render"),
          "render --scene " + scene("sphere") + " --backend cuda",
          "render --scene " + scene("sphere") + " --res 12by7 --out " + at("r"),
          "render --scene " + scene("sphere") + " --spp 0", "train --scene " + scene("sphere") + " --sampler best",
          "sweep --scene " + scene("sphere") + " --param Q --values 1"}) {
        RunResult r = run(args);
        EXPECT_EQ(r.code, 2) << args << "\n" << r.output;
        EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1) << args << "\n" << r.output;
    }
}

TEST_F(Cli, RuntimeErrorsExitOne) {
    std::ofstream(at("broken.json")) << "{ nope";
    RunResult r = run("render --scene " + at("broken.json") + " --out " + at("r"));
    EXPECT_EQ(r.code, 1) << r.output;
    EXPECT_EQ(std::count(r.output.begin(), r.output.end(), '\n'), 1) << r.output;
}
