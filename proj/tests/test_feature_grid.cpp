// Copyright 2026 The nif-tracer Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "nif/feature_grid.hpp"

using namespace nif;

namespace {

using Grid2 = FeatureGrid2D<double>;
using Grid1 = FeatureGrid1D<double>;

void fill(std::span<double> xs, double value) {
    for (double &x : xs) x = value;
}

std::array<double, 2> uv(double u, double v) { return {u, v}; }

}  // namespace

TEST(Init, ValuesWithinInitRange) {
    FeatureGrid2D<float> g(64, 4, true, 3);
    float lo = 1, hi = -1;
    for (float x : g.latents()) {
        EXPECT_LE(std::abs(x), 1e-4f);
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    // Both signs occur and the range is not collapsed.
    EXPECT_LT(lo, -5e-5f);
    EXPECT_GT(hi, 5e-5f);
    for (float x : g.grad()) EXPECT_EQ(x, 0.f);
    for (float x : g.adam_m()) EXPECT_EQ(x, 0.f);
    for (float x : g.adam_v()) EXPECT_EQ(x, 0.f);
}

TEST(Init, SeedDeterminism) {
    Grid2 a(16, 3, true, 7), b(16, 3, true, 7), c(16, 3, true, 8);
    EXPECT_TRUE(std::equal(a.latents().begin(), a.latents().end(), b.latents().begin()));
    EXPECT_FALSE(std::equal(a.latents().begin(), a.latents().end(), c.latents().begin()));
}

TEST(Init, RejectsZeroSizes) {
    EXPECT_THROW(Grid2(0, 4, true, 0), Error);
    EXPECT_THROW(Grid2(4, 0, true, 0), Error);
    EXPECT_THROW(Grid1(0, 4, false, 0), Error);
}

TEST(Lookup2D, ConstantGrid) {
    Grid2 g(8, 3, true, 0);
    fill(g.latents(), 0.25);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(0, 1);
    for (int i = 0; i < 200; ++i)
        for (double x : lookup_2d(g, d(rng), d(rng))) EXPECT_NEAR(x, 0.25, 1e-15);
}

TEST(Lookup2D, CellCenterReturnsCell) {
    Grid2 g(5, 2, true, 11);
    for (int iv = 0; iv < 5; ++iv)
        for (int iu = 0; iu < 5; ++iu) {
            auto out = lookup_2d(g, (iu + 0.5) / 5, (iv + 0.5) / 5);
            auto cell = g.cell(g.cell_index(iu, iv));
            EXPECT_DOUBLE_EQ(out[0], cell[0]);
            EXPECT_DOUBLE_EQ(out[1], cell[1]);
        }
}

TEST(Lookup2D, MidpointOfFourCenters) {
    Grid2 g(2, 1, false, 0);
    // Row-major with u along the row: [[1,3],[5,7]].
    g.latents()[g.cell_index(0, 0)] = 1;
    g.latents()[g.cell_index(1, 0)] = 3;
    g.latents()[g.cell_index(0, 1)] = 5;
    g.latents()[g.cell_index(1, 1)] = 7;
    EXPECT_DOUBLE_EQ(lookup_2d(g, 0.5, 0.5)[0], 4.0);
}

TEST(Lookup2D, AzimuthWrapsPolarClamps) {
    Grid2 g(4, 1, true, 0);
    for (int iv = 0; iv < 4; ++iv)
        for (int iu = 0; iu < 4; ++iu) g.latents()[g.cell_index(iu, iv)] = 10 * iv + iu;
    // u = 0 lies halfway between the last and first column centers.
    EXPECT_DOUBLE_EQ(lookup_2d(g, 0.0, 0.125)[0], 1.5);
    // v below the first row center clamps to that row.
    EXPECT_DOUBLE_EQ(lookup_2d(g, 0.125, 0.0)[0], 0.0);
    EXPECT_DOUBLE_EQ(lookup_2d(g, 0.125, 1.0)[0], 30.0);

    Grid2 clamped(4, 1, false, 0);
    std::copy(g.latents().begin(), g.latents().end(), clamped.latents().begin());
    EXPECT_DOUBLE_EQ(lookup_2d(clamped, 0.0, 0.125)[0], 0.0);
}

TEST(Lookup2D, WrapContinuity) {
    Grid2 g(16, 4, true, 5);
    double lo = 1e9, hi = -1e9;
    for (double x : g.latents()) lo = std::min(lo, x), hi = std::max(hi, x);
    const double delta = 1e-6;
    for (double v : {0.1, 0.37, 0.5, 0.93}) {
        auto a = lookup_2d(g, 1 - delta, v), b = lookup_2d(g, delta, v);
        for (int k = 0; k < 4; ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-4 * (hi - lo));
    }
}

TEST(Lookup1D, ConstantCenterMidpoint) {
    Grid1 g(4, 2, false, 0);
    fill(g.latents(), -2.0);
    EXPECT_DOUBLE_EQ(lookup_1d(g, 0.3)[1], -2.0);
    for (int i = 0; i < 4; ++i) g.latents()[2 * i] = i * i;
    EXPECT_DOUBLE_EQ(lookup_1d(g, 2.5 / 4)[0], 4.0);
    EXPECT_DOUBLE_EQ(lookup_1d(g, 0.5)[0], 2.5);
    EXPECT_DOUBLE_EQ(lookup_1d(g, 0.0)[0], 0.0);
    EXPECT_DOUBLE_EQ(lookup_1d(g, 1.0)[0], 9.0);
}

TEST(AccumulateGrad, CellCenterTouchesOneCell) {
    Grid2 g(4, 2, true, 0);
    const std::array<double, 2> g_up{1.5, -2.0};
    g.accumulate_grad(uv(2.5 / 4, 1.5 / 4), g_up);
    const uint32_t hit = g.cell_index(2, 1);
    for (uint32_t c = 0; c < g.cell_count(); ++c) {
        const double e0 = c == hit ? 1.5 : 0.0, e1 = c == hit ? -2.0 : 0.0;
        EXPECT_DOUBLE_EQ(g.grad()[2 * c], e0);
        EXPECT_DOUBLE_EQ(g.grad()[2 * c + 1], e1);
    }
}

TEST(AccumulateGrad, MidpointSplitsEvenly) {
    Grid2 g(2, 1, false, 0);
    const std::array<double, 1> g_up{2.0};
    g.accumulate_grad(uv(0.5, 0.5), g_up);
    for (double x : g.grad()) EXPECT_DOUBLE_EQ(x, 0.5);
    EXPECT_EQ(g.touched_count(), 4u);
}

TEST(AccumulateGrad, PartitionOfUnity) {
    Grid2 g(7, 3, true, 0);
    Grid1 d(9, 3, false, 0);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1), s(-3, 3);
    for (int i = 0; i < 500; ++i) {
        g.zero_grad();
        d.zero_grad();
        const std::array<double, 3> up{s(rng), s(rng), s(rng)};
        g.accumulate_grad(uv(u(rng), u(rng)), up);
        const std::array<double, 1> r{u(rng)};
        d.accumulate_grad(r, up);
        for (int k = 0; k < 3; ++k) {
            double sum2 = 0, sum1 = 0;
            for (size_t c = 0; c < g.cell_count(); ++c) sum2 += g.grad()[3 * c + k];
            for (size_t c = 0; c < d.cell_count(); ++c) sum1 += d.grad()[3 * c + k];
            EXPECT_NEAR(sum2, up[k], 1e-7);
            EXPECT_NEAR(sum1, up[k], 1e-7);
        }
        auto fp = g.footprint(uv(u(rng), u(rng)));
        EXPECT_NEAR(fp.weights[0] + fp.weights[1] + fp.weights[2] + fp.weights[3], 1.0, 1e-7);
    }
}

TEST(AccumulateGrad, MatchesFiniteDifferences) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0, 1), w(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        Grid2 g(3 + trial % 3, 2, trial % 2 == 0, trial);
        for (double &x : g.latents()) x = w(rng);
        const auto coord = uv(u(rng), u(rng));
        const std::array<double, 2> up{w(rng), w(rng)};
        // Scalar objective: dot(upstream, lookup(coord)).
        auto objective = [&] {
            auto out = g.lookup(coord);
            return up[0] * out[0] + up[1] * out[1];
        };
        g.accumulate_grad(coord, up);
        const double h = 1e-5;
        for (size_t i = 0; i < g.scalar_count(); ++i) {
            const double keep = g.latents()[i];
            g.latents()[i] = keep + h;
            const double fp = objective();
            g.latents()[i] = keep - h;
            const double fm = objective();
            g.latents()[i] = keep;
            const double fd = (fp - fm) / (2 * h);
            const double an = g.grad()[i];
            EXPECT_LE(std::abs(fd - an), 1e-6 * std::max(1.0, std::abs(fd))) << "scalar " << i;
        }
    }
}

TEST(AdamStep, FirstStepMovesByLearningRate) {
    Grid1 g(1, 2, false, 0);
    g.latents()[0] = 0.5;
    g.latents()[1] = -0.25;
    AdamParams p;
    p.learning_rate = 0.01;
    g.grad()[0] = 3.0;
    g.grad()[1] = -1e-3;
    g.adam_step(p);
    EXPECT_NEAR(g.latents()[0], 0.5 - 0.01, 1e-9);
    EXPECT_NEAR(g.latents()[1], -0.25 + 0.01, 1e-9);
    EXPECT_EQ(p.step_count, 1u);
    EXPECT_EQ(g.grad()[0], 0.0);
    EXPECT_EQ(g.grad()[1], 0.0);
}

TEST(AdamStep, ZeroGradLeavesParameterAndDecaysMoments) {
    Grid1 fresh(1, 1, false, 0);
    fresh.latents()[0] = 1.0;
    AdamParams q;
    fresh.adam_step(q);
    EXPECT_EQ(fresh.latents()[0], 1.0);
    EXPECT_EQ(fresh.adam_m()[0], 0.0);
    EXPECT_EQ(fresh.adam_v()[0], 0.0);

    // After a nonzero step the moments decay geometrically under zero grad.
    Grid1 g(1, 1, false, 0);
    AdamParams p;
    g.grad()[0] = 2.0;
    g.adam_step(p);
    const double m1 = g.adam_m()[0], v1 = g.adam_v()[0];
    g.adam_step(p);
    EXPECT_NEAR(g.adam_m()[0], 0.9 * m1, 1e-15);
    EXPECT_NEAR(g.adam_v()[0], 0.999 * v1, 1e-15);
}

TEST(AdamStep, TwoStepsMatchHandEvaluation) {
    Grid1 g(1, 1, false, 0);
    g.latents()[0] = 0.2;
    AdamParams p;  // lr 0.005, betas 0.9 / 0.999, eps 1e-15
    g.grad()[0] = 0.3;
    g.adam_step(p);
    g.grad()[0] = -0.1;
    g.adam_step(p);
    // Step 1: m = 0.03, v = 9e-5, m_hat = 0.3, v_hat = 0.09.
    const double x1 = 0.2 - 0.005 * 0.3 / (0.3 + 1e-15);
    // Step 2: m = 0.027 - 0.01 = 0.017, v = 8.991e-5 + 1e-5 = 9.991e-5,
    // m_hat = 0.017 / 0.19, v_hat = 9.991e-5 / 0.001999.
    const double x2 = x1 - 0.005 * (0.017 / 0.19) / (std::sqrt(9.991e-5 / 0.001999) + 1e-15);
    EXPECT_NEAR(g.adam_m()[0], 0.017, 1e-12);
    EXPECT_NEAR(g.adam_v()[0], 9.991e-5, 1e-15);
    EXPECT_NEAR(g.latents()[0], x2, 1e-9);
}

TEST(AdamStep, SparseMatchesDenseOnTouchedCellsOnly) {
    Grid2 dense(8, 2, true, 4), sparse(8, 2, true, 4);
    AdamParams pd, ps;
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0, 0.3), s(-1, 1);
    for (int step = 0; step < 3; ++step) {
        for (int q = 0; q < 5; ++q) {
            const auto c = uv(u(rng), u(rng));
            const std::array<double, 2> up{s(rng), s(rng)};
            dense.accumulate_grad(c, up);
            sparse.accumulate_grad(c, up);
        }
        dense.adam_step(pd);
        sparse.adam_step_sparse(ps);
    }
    // Cells touched in every step follow identical trajectories; cells never
    // touched stay at their initial values in the sparse grid.
    Grid2 init(8, 2, true, 4);
    size_t untouched = 0;
    for (size_t i = 0; i < sparse.scalar_count(); ++i) {
        if (sparse.adam_v()[i] == 0.0) {
            ++untouched;
            EXPECT_EQ(sparse.latents()[i], init.latents()[i]);
            EXPECT_EQ(dense.latents()[i], init.latents()[i]);
        }
    }
    EXPECT_GT(untouched, sparse.scalar_count() / 2);
    EXPECT_EQ(ps.step_count, 3u);
}

TEST(MemoryAccounting, ByteFormulas) {
    EXPECT_EQ(grid_bytes(1, 2, true), 14u);
    EXPECT_EQ(grid_bytes(1, 1, true), 14u);
    EXPECT_EQ(grid_bytes(3, 2, true), 14u * 9);
    EXPECT_EQ(outer_grid_set_bytes(256, false), 262144u);
    EXPECT_EQ(outer_grid_set_bytes(256, false) / 1024, 256u);
    EXPECT_EQ(outer_grid_set_bytes(10, true), 28u * 100);
    EXPECT_EQ(inner_grid_set_bytes(128, false), 4u * 128 * 128 + 2u * 128);
    EXPECT_EQ(to_kib_ceil(inner_grid_set_bytes(128, false)), 65u);
    EXPECT_EQ(inner_grid_set_bytes(7, true), 28u * 49 + 14u * 7);
}

TEST(MemoryAccounting, AllocatedBytesTracksStorage) {
    FeatureGrid2D<float> g(8, 4, true, 0);
    EXPECT_EQ(g.allocated_bytes(), 4u * 8 * 8 * 4 * sizeof(float));
}
