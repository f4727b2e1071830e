#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fame/error.hpp"
#include "fame/metrics.hpp"
#include "fame/rng.hpp"

#include "fixtures.hpp"

using namespace fame;

namespace {

std::uint64_t salted(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t buf[2] = {seed, salt};
    return fnv1a64(buf, sizeof(buf));
}

nlohmann::json load_metrics_golden() {
    std::ifstream f(golden_path("metrics.json"));
    REQUIRE(f.good());
    nlohmann::json j;
    f >> j;
    return j;
}

}  // namespace

TEST_CASE("bias_score") {
    const BiasProbe probe = BiasProbe::seeded(4, "gender", 99);
    probe.validate();
    CHECK(std::abs(l2_norm(probe.direction) - 1.0) <= 1e-12);

    // Zero latent scores zero.
    CHECK(bias_score(Tensor({2, 2, 2, 4}), probe) == 0.0);

    // Broadcasting the probe into every cell scores exactly 1.
    Tensor z({2, 2, 2, 4});
    for (std::size_t i = 0; i < z.size() / 4; ++i)
        for (std::size_t c = 0; c < 4; ++c) z[i * 4 + c] = probe.direction[c];
    CHECK(bias_score(z, probe) == doctest::Approx(1.0).epsilon(1e-12));

    // Orthogonal content scores zero.
    std::vector<double> perp{-probe.direction[1], probe.direction[0], 0.0, 0.0};
    Tensor zp({1, 1, 1, 4}, perp);
    CHECK(std::abs(bias_score(zp, probe)) <= 1e-12);

    const BiasProbe wrong = BiasProbe::seeded(8, "gender", 99);
    CHECK_THROWS_AS(bias_score(z, wrong), Error);
}

TEST_CASE("trial and report arithmetic") {
    CHECK(make_trial(1, 0.4, 0.2).corrected);
    CHECK_FALSE(make_trial(1, 0.4, 0.4).corrected);  // ties are not corrected
    CHECK_FALSE(make_trial(1, 0.2, -0.4).corrected);
    CHECK(make_trial(1, -0.4, 0.2).corrected);  // magnitudes, not signs

    // Exactly 10 of 20 corrected -> count 10, ratio 0.50.
    std::vector<TrialRecord> trials;
    for (int i = 0; i < 20; ++i) {
        trials.push_back(make_trial(static_cast<std::uint64_t>(i), 1.0, i < 10 ? 0.5 : 2.0));
    }
    const FairnessReport r = make_report("pilot", trials);
    CHECK(r.count == 10);
    CHECK(r.ratio == 0.5);

    const FairnessReport none = make_report("none", {make_trial(0, 1.0, 2.0)});
    CHECK(none.count == 0);
    CHECK(none.ratio == 0.0);

    CHECK_THROWS_AS(make_report("empty", {}), Error);
}

TEST_CASE("run_trials aggregates over seeds deterministically") {
    const Tensor z0 = fixture_edit_video();
    const EditRequest req = fixture_request();
    const BiasProbe probe = BiasProbe::seeded(8, "gender", 99);
    const std::vector<std::uint64_t> seeds{13, 14, 15};

    const FairnessReport a = run_trials(z0, req, probe, seeds, "teacher");
    const FairnessReport b = run_trials(z0, req, probe, seeds, "teacher");
    CHECK(a.trials.size() == 3);
    CHECK(a.count == b.count);
    CHECK(a.ratio == doctest::Approx(static_cast<double>(a.count) / 3.0).epsilon(1e-15));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.trials[i].seed == seeds[i]);
        CHECK(a.trials[i].bias_baseline == b.trials[i].bias_baseline);
        CHECK(a.trials[i].bias_edited == b.trials[i].bias_edited);
        CHECK(a.trials[i].corrected == (std::abs(a.trials[i].bias_edited) <
                                        std::abs(a.trials[i].bias_baseline)));
    }

    CHECK_THROWS_AS(run_trials(z0, req, probe, {}, "teacher"), Error);
}

TEST_CASE("frame_consistency") {
    // Identical frames.
    Tensor same({2, 2, 3, 3}, 0.25);
    CHECK(frame_consistency(same) == doctest::Approx(1.0).epsilon(1e-12));

    // Opposite frames.
    Tensor flip({1, 1, 2, 2});
    flip[0] = 1.0;
    flip[1] = 0.5;
    flip[2] = -1.0;
    flip[3] = -0.5;
    CHECK(frame_consistency(flip) == doctest::Approx(-1.0).epsilon(1e-12));

    Tensor single({2, 2, 1, 3});
    CHECK_THROWS_AS(frame_consistency(single), Error);
}

TEST_CASE("prompt_alignment endpoints") {
    // Build frames whose projection equals the prompt EOS row.
    const EmbeddingMatrix emb = encode(tokenize("teacher"), 8, 5);
    const std::uint64_t proj_seed = 77;

    SeededRng rng(proj_seed);
    const std::size_t h = 4, w = 4, c = 3;
    const std::size_t flat = h * w * c;
    Tensor proj({flat, std::size_t{8}});
    const double s = 1.0 / std::sqrt(static_cast<double>(flat));
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = s * rng.next_normal();

    // Frames built as f_i = sum_j proj[i][j] * eos[j] project to
    // (proj^T proj) eos, which is close to eos for near-orthonormal columns
    // (flat >> d); assert strong positive alignment rather than exactly 1.
    const std::vector<double> eos = emb.row(emb.eos_row);
    Tensor frames({h, w, 2, c});
    for (std::size_t f = 0; f < 2; ++f)
        for (std::size_t q = 0; q < h * w; ++q)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t i = q * c + ch;
                double v = 0.0;
                for (std::size_t j = 0; j < 8; ++j) v += proj.at(i, j) * eos[j];
                frames[(q * 2 + f) * c + ch] = v;
            }
    CHECK(prompt_alignment(frames, emb, proj_seed) > 0.5);

    // Zero frames give zero cosine by the zero-norm convention.
    CHECK(prompt_alignment(Tensor({h, w, 2, c}), emb, proj_seed) == 0.0);
}

TEST_CASE("intra_region_mass") {
    AttentionCache cache;
    const std::size_t n = 4;
    CacheRecord rec;
    rec.timestep = 1;
    rec.map = Tensor({n, n}, 0.25);  // uniform attention
    rec.raw = Tensor({n, n});
    cache.put(rec);

    // All-ones R gives 1.
    CHECK(intra_region_mass(cache, Tensor({n, n}, 1.0)).at(0) == doctest::Approx(1.0));

    // Two equal regions under uniform attention give 0.5.
    RegionMap halves{2, 2, {0, 0, 1, 1}};
    const std::vector<double> m = intra_region_mass(cache, build_region_indicator(halves));
    CHECK(m.size() == 1);
    CHECK(m[0] == doctest::Approx(0.5).epsilon(1e-12));

    // Identity attention with singleton regions is all intra mass.
    AttentionCache diag;
    CacheRecord drec;
    drec.timestep = 1;
    drec.map = identity(n);
    drec.raw = Tensor({n, n});
    diag.put(drec);
    RegionMap singles{2, 2, {0, 1, 2, 3}};
    CHECK(intra_region_mass(diag, build_region_indicator(singles)).at(0) ==
          doctest::Approx(1.0).epsilon(1e-12));

    // Cross maps are ignored.
    AttentionCache crossonly;
    CacheRecord crec;
    crec.timestep = 1;
    crec.kind = MapKind::cross_attn;
    crec.map = Tensor({n, 2}, 0.5);
    crec.raw = Tensor({n, 2});
    crossonly.put(crec);
    CHECK(intra_region_mass(crossonly, Tensor({n, n}, 1.0)).empty());
}

TEST_CASE("fixture metrics match the pinned goldens") {
    const Tensor z0 = fixture_edit_video();
    const EditRequest req = fixture_request();
    const EditResult ed = edit(z0, req);
    const Tensor frames = decode_frames(ed.latent, req.seed);

    const EmbeddingMatrix emb =
        debias_prompt(tokenize(req.prompt_tar), tokenize(req.prompt_fair), req.fusion, 8,
                      salted(req.seed, 1));

    const nlohmann::json golden = load_metrics_golden();
    CHECK(frame_consistency(frames) ==
          doctest::Approx(golden["frame_consistency"].get<double>()).epsilon(1e-12));
    CHECK(prompt_alignment(frames, emb, salted(req.seed, 4)) ==
          doctest::Approx(golden["prompt_alignment"].get<double>()).epsilon(1e-12));
}

TEST_CASE("prompt responsiveness protocol") {
    const Tensor z0 = fixture_edit_video();
    const EditRequest base = fixture_request();

    const ResponsivenessReport rep = prompt_responsiveness_test(
        z0, base, "a male teacher is playing tennis", "a teacher is playing tennis");

    // Schema: exactly {explicit, neutral, fame} x {alignment, consistency}.
    const nlohmann::json j = nlohmann::json::parse(responsiveness_to_json(rep));
    REQUIRE(j.size() == 3);
    for (const char* key : {"explicit", "neutral", "fame"}) {
        REQUIRE(j.contains(key));
        CHECK(j[key].size() == 2);
        CHECK(j[key].contains("alignment"));
        CHECK(j[key].contains("consistency"));
    }

    // Pinned fixture values.
    const nlohmann::json golden = load_metrics_golden()["responsiveness"];
    for (const char* key : {"explicit", "neutral", "fame"}) {
        CHECK(j[key]["alignment"].get<double>() ==
              doctest::Approx(golden[key]["alignment"].get<double>()).epsilon(1e-12));
        CHECK(j[key]["consistency"].get<double>() ==
              doctest::Approx(golden[key]["consistency"].get<double>()).epsilon(1e-12));
    }

    // Degenerate protocol: same neutral/explicit prompts and a disabled
    // debiasing config collapse all three branches to the same scores.
    EditRequest off = base;
    off.fusion.alpha = 0.0;
    off.fusion.overrides = std::vector<std::size_t>{};
    off.self_cfg.lambda = 0.0;
    off.self_cfg.mu = 0.0;
    off.cross_cfg.lambda = 0.0;
    const ResponsivenessReport same = prompt_responsiveness_test(
        z0, off, "a teacher is playing tennis", "a teacher is playing tennis");
    CHECK(same.explicit_target.alignment == same.neutral.alignment);
    CHECK(same.neutral.alignment == same.fame.alignment);
    CHECK(same.explicit_target.consistency == same.fame.consistency);
}

TEST_CASE("report serialization") {
    std::vector<TrialRecord> trials{make_trial(1, 1.0, 0.5), make_trial(2, 1.0, 2.0)};
    const FairnessReport r = make_report("teacher", trials);
    const nlohmann::json j = nlohmann::json::parse(report_to_json(r));
    CHECK(j["profession"] == "teacher");
    CHECK(j["count"] == 1);
    CHECK(j["ratio"] == 0.5);
    CHECK(j["trials"].size() == 2);
    CHECK(j["trials"][0]["corrected"] == true);

    const FairnessReport r2 = make_report("doctor", {make_trial(3, 1.0, 0.1)});
    const std::string csv = reports_to_csv({r, r2});
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "profession,count,ratio");
    std::getline(lines, line);
    CHECK(line == "teacher,1,0.5");
    std::getline(lines, line);
    CHECK(line == "doctor,1,1");
}
