#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fame/error.hpp"
#include "fame/ften.hpp"
#include "fame/region.hpp"
#include "fame/rng.hpp"

#include "fixtures.hpp"

using namespace fame;

TEST_CASE("build_region_indicator basics") {
    RegionMap uniform{2, 2, {0, 0, 0, 0}};
    Tensor r1 = build_region_indicator(uniform);
    for (double v : r1.data()) CHECK(v == 1.0);

    RegionMap distinct{2, 2, {0, 1, 2, 3}};
    CHECK(max_abs_diff(build_region_indicator(distinct), identity(4)) == 0.0);

    RegionMap two{2, 1, {0, 1}};
    Tensor r2 = build_region_indicator(two);
    CHECK(r2.at(0, 0) == 1.0);
    CHECK(r2.at(0, 1) == 0.0);
    CHECK(r2.at(1, 0) == 0.0);
    CHECK(r2.at(1, 1) == 1.0);
}

TEST_CASE("region indicator is a block equivalence on random maps") {
    SeededRng rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t h = 2 + rng.next_u64() % 4;
        const std::size_t w = 2 + rng.next_u64() % 4;
        const int k = 1 + static_cast<int>(rng.next_u64() % 3);
        RegionMap rm{h, w, {}};
        std::vector<int> used;
        for (std::size_t i = 0; i < h * w; ++i) rm.labels.push_back(static_cast<int>(rng.next_u64() % k));
        // Make labels contiguous from zero.
        std::vector<int> sorted = rm.labels;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        for (int& l : rm.labels) {
            l = static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), l) - sorted.begin());
        }
        const Tensor R = build_region_indicator(rm);
        const std::size_t n = h * w;
        for (std::size_t x = 0; x < n; ++x) {
            CHECK(R.at(x, x) == 1.0);
            for (std::size_t y = 0; y < n; ++y) {
                CHECK(R.at(x, y) == R.at(y, x));
                CHECK((R.at(x, y) == 0.0 || R.at(x, y) == 1.0));
                CHECK(R.at(x, y) == (rm.labels[x] == rm.labels[y] ? 1.0 : 0.0));
            }
        }
    }
}

TEST_CASE("temporal_mean_features") {
    // Single frame: mean equals the flattened frame.
    SeededRng rng(4);
    Tensor z1 = seeded_normal(rng, {2, 2, 1, 3});
    Tensor f1 = temporal_mean_features(z1);
    CHECK(f1.rows() == 4);
    CHECK(f1.cols() == 3);
    for (std::size_t q = 0; q < 4; ++q)
        for (std::size_t c = 0; c < 3; ++c) CHECK(f1.at(q, c) == z1[q * 3 + c]);

    // Constant video stays constant.
    Tensor zc({2, 2, 3, 2}, 0.75);
    const Tensor fc = temporal_mean_features(zc);
    for (double v : fc.data()) CHECK(v == 0.75);

    // Two opposite frames cancel.
    Tensor z2({1, 2, 2, 2});
    for (std::size_t q = 0; q < 2; ++q)
        for (std::size_t c = 0; c < 2; ++c) {
            z2[q * 4 + 0 * 2 + c] = 1.5;
            z2[q * 4 + 1 * 2 + c] = -1.5;
        }
    const Tensor f2 = temporal_mean_features(z2);
    for (double v : f2.data()) CHECK(v == 0.0);
}

TEST_CASE("build_similarity_mask") {
    // Unit diagonal on arbitrary features.
    SeededRng rng(9);
    Tensor f = seeded_normal(rng, {6, 3});
    Tensor s = build_similarity_mask(f, 1.0);
    for (std::size_t q = 0; q < 6; ++q) CHECK(s.at(q, q) == 1.0);

    // Hand evaluation: distance 1, tau 1.
    Tensor pair({2, 1}, {0.0, 1.0});
    Tensor sp = build_similarity_mask(pair, 1.0);
    CHECK(sp.at(0, 1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    // Flat-response limit at huge tau.
    Tensor st = build_similarity_mask(f, 1e6);
    for (double v : st.data()) CHECK(v >= 1.0 - 1e-6);

    CHECK_THROWS_AS(build_similarity_mask(f, 0.0), Error);
    CHECK_THROWS_AS(build_similarity_mask(f, -1.0), Error);
}

TEST_CASE("similarity mask properties: symmetry, range, distance monotonicity") {
    SeededRng rng(23);
    Tensor f = seeded_normal(rng, {8, 4});
    Tensor s = build_similarity_mask(f, 1.3);
    std::vector<std::pair<double, double>> dist_sim;
    for (std::size_t a = 0; a < 8; ++a) {
        for (std::size_t b = 0; b < 8; ++b) {
            CHECK(s.at(a, b) == s.at(b, a));
            CHECK(s.at(a, b) > 0.0);
            CHECK(s.at(a, b) <= 1.0);
            double d2 = 0.0;
            for (std::size_t c = 0; c < 4; ++c) {
                const double diff = f.at(a, c) - f.at(b, c);
                d2 += diff * diff;
            }
            dist_sim.emplace_back(d2, s.at(a, b));
        }
    }
    std::sort(dist_sim.begin(), dist_sim.end());
    for (std::size_t i = 1; i < dist_sim.size(); ++i) {
        CHECK(dist_sim[i].second <= dist_sim[i - 1].second + 1e-12);
    }
}

TEST_CASE("standardize_channels gives zero mean unit variance per channel") {
    SeededRng rng(31);
    Tensor f = seeded_normal(rng, {32, 3});
    Tensor s = standardize_channels(f);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0;
        for (std::size_t q = 0; q < 32; ++q) mean += s.at(q, c);
        mean /= 32.0;
        CHECK(std::abs(mean) <= 1e-12);
        double var = 0.0;
        for (std::size_t q = 0; q < 32; ++q) var += (s.at(q, c) - mean) * (s.at(q, c) - mean);
        var /= 32.0;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("export_region_attention") {
    // Single region: all mass lands in column 0.
    RegionMap one{2, 2, {0, 0, 0, 0}};
    Tensor attn = softmax_rows(Tensor({4, 4}));
    Tensor a = export_region_attention(attn, one);
    CHECK(a.cols() == 1);
    for (double v : a.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    // Identity attention with singleton regions.
    RegionMap singles{2, 2, {0, 1, 2, 3}};
    Tensor ai = export_region_attention(identity(4), singles);
    for (std::size_t x = 0; x < 4; ++x)
        for (std::size_t k = 0; k < 4; ++k) CHECK(ai.at(x, k) == (x == k ? 1.0 : 0.0));

    // Uniform attention, two 2-cell regions -> 0.5 everywhere.
    RegionMap halves{2, 2, {0, 0, 1, 1}};
    Tensor uniform({4, 4}, 0.25);
    Tensor ah = export_region_attention(uniform, halves);
    for (double v : ah.data()) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));

    // Non-normalized rows rejected.
    Tensor bad({4, 4}, 0.3);
    CHECK_THROWS_AS(export_region_attention(bad, halves), Error);

    // Row sums stay 1.
    SeededRng rng(12);
    Tensor r = softmax_rows(seeded_normal(rng, {4, 4}));
    Tensor ar = export_region_attention(r, halves);
    for (std::size_t x = 0; x < 4; ++x) {
        CHECK(std::abs(ar.at(x, 0) + ar.at(x, 1) - 1.0) <= 1e-12);
    }
}

TEST_CASE("synth_region_map layouts") {
    const RegionMap h = synth_region_map(4, 4, RegionLayout::halves, 0);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            CHECK(h.labels[r * 4 + c] == (c < 2 ? 0 : 1));

    const RegionMap d = synth_region_map(8, 8, RegionLayout::disk, 0);
    const Tensor golden = read_ften(golden_path("region_disk.ften"));
    CHECK(max_abs_diff(region_map_to_tensor(d), golden) == 0.0);
    CHECK(d.label_count() == 2);

    const RegionMap s1 = synth_region_map(5, 6, RegionLayout::stripes, 7);
    const RegionMap s2 = synth_region_map(5, 6, RegionLayout::stripes, 7);
    CHECK(s1.labels == s2.labels);
    s1.validate();
}

TEST_CASE("region map tensor round trip and validation") {
    const RegionMap rm = synth_region_map(3, 5, RegionLayout::stripes, 2);
    const RegionMap back = region_map_from_tensor(region_map_to_tensor(rm));
    CHECK(back.labels == rm.labels);
    CHECK(back.height == rm.height);
    CHECK(back.width == rm.width);

    Tensor frac({1, 2}, {0.0, 0.5});
    CHECK_THROWS_AS(region_map_from_tensor(frac), Error);

    RegionMap gap{1, 2, {0, 2}};  // label 1 missing
    CHECK_THROWS_AS(gap.validate(), Error);
}
