#pragma once

// Shared fixtures for the unit, golden, and acceptance suites.

#include <string>

#include "fame/diffusion.hpp"
#include "fame/region.hpp"
#include "fame/rng.hpp"
#include "fame/self_attention.hpp"
#include "fame/tensor.hpp"

inline std::string golden_path(const std::string& name) {
    return std::string(FAME_GOLDEN_DIR) + "/" + name;
}

inline fame::Tensor fixture_video(std::uint64_t seed, std::size_t h, std::size_t w,
                                  std::size_t l, std::size_t c) {
    fame::SeededRng rng(seed);
    return fame::seeded_normal(rng, {h, w, l, c});
}

// The standard small editing fixture: 4x4x3x8 latent, halves region map,
// 8-step schedule.
inline fame::EditRequest fixture_request() {
    fame::EditRequest req;
    req.prompt_ref = "a man is playing tennis";
    req.prompt_tar = "a teacher is playing tennis";
    req.prompt_fair = "male";
    req.guidance_w = 1.0;
    req.seed = 13;
    req.steps = 8;
    req.schedule_steps = 50;
    req.rho = 0.5;
    req.regions = fame::synth_region_map(4, 4, fame::RegionLayout::halves, 0);
    return req;
}

inline fame::Tensor fixture_edit_video() { return fixture_video(13, 4, 4, 3, 8); }

// Self-attention golden fixture: seed 3, h=w=4, c=d=8.
struct SelfAttnFixture {
    fame::Tensor q, k, v, region, similarity;
    fame::SelfAttnConfig cfg;
};

inline SelfAttnFixture self_attn_fixture() {
    using namespace fame;
    SeededRng rng(3);
    const std::size_t n = 16, d = 8;
    SelfAttnFixture f{seeded_normal(rng, {n, d}), seeded_normal(rng, {n, d}),
                      seeded_normal(rng, {n, d}), Tensor(), Tensor(), {0.5, 0.2, 1.0}};
    const RegionMap rm = synth_region_map(4, 4, RegionLayout::halves, 0);
    f.region = build_region_indicator(rm);
    const Tensor feats = seeded_normal(rng, {n, d});
    f.similarity = build_similarity_mask(feats, f.cfg.tau);
    return f;
}

// Cross-attention golden fixture: seed 5, H=W=4, L=6, one concept
// governing keys {2,3}.
struct CrossAttnFixture {
    fame::Tensor q, k, v;
    fame::FairTokenGroups groups;
    fame::CrossAttnConfig cfg;
};

inline CrossAttnFixture cross_attn_fixture() {
    using namespace fame;
    SeededRng rng(5);
    const std::size_t n = 16, L = 6, d = 8;
    CrossAttnFixture f{seeded_normal(rng, {n, d}), seeded_normal(rng, {L, d}),
                       seeded_normal(rng, {L, d}), {}, {0.5, true}};
    Tensor concept_vec = seeded_normal(rng, {std::size_t{1}, d});
    f.groups.embeddings = {concept_vec.data()};
    f.groups.key_groups = {{2, 3}};
    return f;
}
