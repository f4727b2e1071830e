#include "fame/metrics.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "fame/error.hpp"
#include "fame/rng.hpp"

namespace fame {

namespace {

std::uint64_t salted(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t buf[2] = {seed, salt};
    return fnv1a64(buf, sizeof(buf));
}

std::vector<double> frame_vector(const Tensor& frames, std::size_t f) {
    const std::size_t h = frames.dim(0), w = frames.dim(1);
    const std::size_t l = frames.dim(2), c = frames.dim(3);
    std::vector<double> v;
    v.reserve(h * w * c);
    for (std::size_t q = 0; q < h * w; ++q)
        for (std::size_t ch = 0; ch < c; ++ch) v.push_back(frames[(q * l + f) * c + ch]);
    return v;
}

EditRequest neutralized(const EditRequest& req) {
    EditRequest out = req;
    out.fusion.alpha = 0.0;
    out.fusion.overrides = std::vector<std::size_t>{};  // forces P = empty
    out.self_cfg.lambda = 0.0;
    out.self_cfg.mu = 0.0;
    out.cross_cfg.lambda = 0.0;
    return out;
}

}  // namespace

BiasProbe BiasProbe::seeded(std::size_t channels, const std::string& label,
                            std::uint64_t seed) {
    SeededRng rng(salted(seed, fnv1a64(label)));
    std::vector<double> v(channels);
    for (double& x : v) x = rng.next_normal();
    const double n = l2_norm(v);
    for (double& x : v) x /= n;
    return BiasProbe{std::move(v), label};
}

void BiasProbe::validate() const {
    if (direction.empty()) throw Error(ErrorKind::config, "bias probe: empty direction");
    if (std::abs(l2_norm(direction) - 1.0) > 1e-12) {
        throw Error(ErrorKind::config, "bias probe: direction must be unit norm");
    }
}

double bias_score(const Tensor& latent, const BiasProbe& probe) {
    if (latent.rank() != 4) throw Error(ErrorKind::shape, "bias_score: rank-4 latent required");
    const std::size_t c = latent.dim(3);
    if (probe.direction.size() != c) {
        throw Error(ErrorKind::shape, "bias_score: probe dim does not match channels");
    }
    const std::size_t cells = latent.size() / c;
    double total = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::size_t ch = 0; ch < c; ++ch) total += latent[i * c + ch] * probe.direction[ch];
    }
    return total / static_cast<double>(cells);
}

TrialRecord make_trial(std::uint64_t seed, double bias_baseline, double bias_edited) {
    return TrialRecord{seed, bias_baseline, bias_edited,
                       std::abs(bias_edited) < std::abs(bias_baseline)};
}

FairnessReport make_report(const std::string& profession, std::vector<TrialRecord> trials) {
    if (trials.empty()) throw Error(ErrorKind::config, "fairness report: no trials");
    FairnessReport r;
    r.profession = profession;
    r.trials = std::move(trials);
    for (const auto& t : r.trials)
        if (t.corrected) ++r.count;
    r.ratio = static_cast<double>(r.count) / static_cast<double>(r.trials.size());
    return r;
}

FairnessReport run_trials(const Tensor& z0, const EditRequest& request,
                          const BiasProbe& probe, const std::vector<std::uint64_t>& seeds,
                          const std::string& profession) {
    if (seeds.empty()) throw Error(ErrorKind::config, "run_trials: at least one seed required");
    std::vector<TrialRecord> trials;
    trials.reserve(seeds.size());
    for (std::uint64_t s : seeds) {
        EditRequest baseline = neutralized(request);
        baseline.seed = s;
        EditRequest full = request;
        full.seed = s;
        const double b = bias_score(edit(z0, baseline).latent, probe);
        const double e = bias_score(edit(z0, full).latent, probe);
        trials.push_back(make_trial(s, b, e));
    }
    return make_report(profession, std::move(trials));
}

double frame_consistency(const Tensor& frames) {
    if (frames.rank() != 4) {
        throw Error(ErrorKind::shape, "frame_consistency: rank-4 frames required");
    }
    const std::size_t l = frames.dim(2);
    if (l < 2) throw Error(ErrorKind::config, "frame_consistency: need at least 2 frames");
    double total = 0.0;
    for (std::size_t f = 0; f + 1 < l; ++f) {
        total += cosine(frame_vector(frames, f), frame_vector(frames, f + 1));
    }
    return total / static_cast<double>(l - 1);
}

double prompt_alignment(const Tensor& frames, const EmbeddingMatrix& prompt_emb,
                        std::uint64_t projection_seed) {
    if (frames.rank() != 4) {
        throw Error(ErrorKind::shape, "prompt_alignment: rank-4 frames required");
    }
    const std::size_t l = frames.dim(2);
    const std::size_t flat = frames.dim(0) * frames.dim(1) * frames.dim(3);
    const std::size_t d = prompt_emb.dim();
    SeededRng rng(projection_seed);
    Tensor proj({flat, d});
    const double s = 1.0 / std::sqrt(static_cast<double>(flat));
    for (std::size_t i = 0; i < proj.size(); ++i) proj[i] = s * rng.next_normal();
    const std::vector<double> eos = prompt_emb.row(prompt_emb.eos_row);
    double total = 0.0;
    for (std::size_t f = 0; f < l; ++f) {
        const std::vector<double> fv = frame_vector(frames, f);
        std::vector<double> projected(d, 0.0);
        for (std::size_t i = 0; i < flat; ++i)
            for (std::size_t j = 0; j < d; ++j) projected[j] += fv[i] * proj.at(i, j);
        total += cosine(projected, eos);
    }
    return total / static_cast<double>(l);
}

std::vector<double> intra_region_mass(const AttentionCache& cache,
                                      const Tensor& region_indicator) {
    std::vector<double> out;
    for (const auto& rec : cache.records()) {
        if (rec.kind != MapKind::self_attn) continue;
        if (!rec.map.same_shape(region_indicator)) {
            throw Error(ErrorKind::shape, "intra_region_mass: map/indicator shape mismatch");
        }
        double intra = 0.0, total = 0.0;
        for (std::size_t i = 0; i < rec.map.size(); ++i) {
            total += rec.map[i];
            if (region_indicator[i] > 0.5) intra += rec.map[i];
        }
        out.push_back(intra / total);
    }
    return out;
}

ResponsivenessReport prompt_responsiveness_test(const Tensor& z0, const EditRequest& base,
                                                const std::string& p_tar_explicit,
                                                const std::string& p_tar_neutral) {
    const std::size_t c = z0.dim(3);
    const std::size_t d_text = base.text_dim == 0 ? c : base.text_dim;
    const std::uint64_t enc_seed = salted(base.seed, 1);
    const std::uint64_t proj_seed = salted(base.seed, 4);

    auto score = [&](const EditRequest& req, const EmbeddingMatrix& emb) {
        const Tensor frames = decode_frames(edit(z0, req).latent, req.seed);
        return ResponsivenessScores{prompt_alignment(frames, emb, proj_seed),
                                    frame_consistency(frames)};
    };

    EditRequest neutral = neutralized(base);
    neutral.prompt_tar = p_tar_neutral;
    EditRequest explicit_req = neutralized(base);
    explicit_req.prompt_tar = p_tar_explicit;
    EditRequest fame_req = base;
    fame_req.prompt_tar = p_tar_neutral;

    ResponsivenessReport report;
    report.neutral = score(neutral, encode(tokenize(p_tar_neutral), d_text, enc_seed));
    report.explicit_target = score(explicit_req, encode(tokenize(p_tar_explicit), d_text, enc_seed));
    report.fame = score(fame_req, debias_prompt(tokenize(p_tar_neutral),
                                                tokenize(base.prompt_fair), base.fusion,
                                                d_text, enc_seed));
    return report;
}

std::string report_to_json(const FairnessReport& report) {
    nlohmann::ordered_json j;
    j["profession"] = report.profession;
    j["count"] = report.count;
    j["ratio"] = report.ratio;
    nlohmann::ordered_json trials = nlohmann::ordered_json::array();
    for (const auto& t : report.trials) {
        nlohmann::ordered_json tj;
        tj["seed"] = t.seed;
        tj["bias_baseline"] = t.bias_baseline;
        tj["bias_edited"] = t.bias_edited;
        tj["corrected"] = t.corrected;
        trials.push_back(tj);
    }
    j["trials"] = trials;
    return j.dump(2);
}

std::string responsiveness_to_json(const ResponsivenessReport& report) {
    nlohmann::ordered_json j;
    auto scores = [](const ResponsivenessScores& s) {
        nlohmann::ordered_json sj;
        sj["alignment"] = s.alignment;
        sj["consistency"] = s.consistency;
        return sj;
    };
    j["explicit"] = scores(report.explicit_target);
    j["neutral"] = scores(report.neutral);
    j["fame"] = scores(report.fame);
    return j.dump(2);
}

std::string reports_to_csv(const std::vector<FairnessReport>& reports) {
    std::ostringstream out;
    out << "profession,count,ratio\n";
    for (const auto& r : reports) {
        out << r.profession << "," << r.count << "," << r.ratio << "\n";
    }
    return out.str();
}

}  // namespace fame
