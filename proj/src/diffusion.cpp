#include "fame/diffusion.hpp"

#include <cmath>
#include <filesystem>

#include "fame/error.hpp"
#include "fame/ften.hpp"

namespace fame {

namespace {

std::uint64_t salted(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t buf[2] = {seed, salt};
    return fnv1a64(buf, sizeof(buf));
}

constexpr std::uint64_t kEncoderSalt = 1;
constexpr std::uint64_t kDenoiserSalt = 2;
constexpr std::uint64_t kDecoderSalt = 3;

Tensor seeded_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double s) {
    SeededRng rng(seed);
    Tensor m({rows, cols});
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = s * rng.next_normal();
    return m;
}

Tensor frame_slice(const Tensor& flat, std::size_t frame) {
    const std::size_t n = flat.dim(0), l = flat.dim(1), c = flat.dim(2);
    Tensor out({n, c});
    for (std::size_t q = 0; q < n; ++q)
        for (std::size_t ch = 0; ch < c; ++ch)
            out.at(q, ch) = flat[(q * l + frame) * c + ch];
    return out;
}

}  // namespace

NoiseSchedule NoiseSchedule::linear(std::size_t T, double beta_start, double beta_end) {
    if (T == 0) throw Error(ErrorKind::config, "schedule: T must be >= 1");
    NoiseSchedule s;
    s.total_steps = T;
    s.betas.assign(T + 1, 0.0);
    s.alphas.assign(T + 1, 1.0);
    s.alpha_bar.assign(T + 1, 1.0);
    for (std::size_t t = 1; t <= T; ++t) {
        const double frac = T == 1 ? 0.0 : static_cast<double>(t - 1) / static_cast<double>(T - 1);
        s.betas[t] = beta_start + (beta_end - beta_start) * frac;
        s.alphas[t] = 1.0 - s.betas[t];
        s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alphas[t];
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    if (total_steps == 0 || betas.size() != total_steps + 1) {
        throw Error(ErrorKind::config, "schedule: inconsistent sizes");
    }
    for (std::size_t t = 1; t <= total_steps; ++t) {
        if (betas[t] <= 0.0 || betas[t] >= 1.0) {
            throw Error(ErrorKind::config, "schedule: beta outside (0,1)");
        }
        if (alpha_bar[t] >= alpha_bar[t - 1]) {
            throw Error(ErrorKind::config, "schedule: alpha_bar not strictly decreasing");
        }
    }
}

void AttentionCache::put(CacheRecord rec) {
    const auto key = std::make_tuple(rec.timestep, rec.layer, rec.frame,
                                     static_cast<int>(rec.kind));
    if (index_.count(key)) {
        throw Error(ErrorKind::config, "attention cache: duplicate record");
    }
    index_[key] = records_.size();
    records_.push_back(std::move(rec));
}

const CacheRecord* AttentionCache::find(std::size_t t, std::size_t layer, std::size_t frame,
                                        MapKind kind) const {
    const auto it = index_.find(std::make_tuple(t, layer, frame, static_cast<int>(kind)));
    return it == index_.end() ? nullptr : &records_[it->second];
}

void AttentionCache::save(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& rec : records_) {
        const char* kind = rec.kind == MapKind::self_attn ? "self" : "cross";
        const std::string name = std::string(kind) + "_t" + std::to_string(rec.timestep) +
                                 "_l" + std::to_string(rec.layer) + "_f" +
                                 std::to_string(rec.frame) + ".ften";
        write_ften(dir + "/" + name, rec.map);
    }
}

ToyDenoiser ToyDenoiser::make(std::size_t h, std::size_t w, std::size_t frames,
                              std::size_t channels, std::size_t text_dim,
                              std::size_t total_steps, std::uint64_t seed) {
    ToyDenoiser d;
    d.h = h;
    d.w = w;
    d.frames = frames;
    d.channels = channels;
    d.text_dim = text_dim;
    d.seed = seed;
    d.self_w = ProjectionWeights::make(channels, channels, salted(seed, 10));
    const double sc = 1.0 / std::sqrt(static_cast<double>(channels));
    const double st = 1.0 / std::sqrt(static_cast<double>(text_dim));
    d.wq_cross = seeded_matrix(channels, text_dim, salted(seed, 11), sc);
    d.wk_cross = seeded_matrix(text_dim, text_dim, salted(seed, 12), st);
    d.wv_cross = seeded_matrix(text_dim, text_dim, salted(seed, 13), st);
    d.w_out = seeded_matrix(text_dim, channels, salted(seed, 14), st);
    d.timestep_emb = seeded_matrix(total_steps + 1, channels, salted(seed, 15), 0.1);
    return d;
}

void EditRequest::validate() const {
    if (guidance_w < 0.0 || guidance_w > 1.0) {
        throw Error(ErrorKind::config, "edit request: guidance weight outside [0,1]");
    }
    if (rho < 0.0 || rho > 1.0) {
        throw Error(ErrorKind::config, "edit request: rho outside [0,1]");
    }
    if (steps > schedule_steps) {
        throw Error(ErrorKind::config, "edit request: steps exceed schedule length");
    }
    if (fusion.alpha < 0.0 || fusion.alpha > 1.0) {
        throw Error(ErrorKind::config, "edit request: alpha outside [0,1]");
    }
    self_cfg.validate();
    cross_cfg.validate();
}

Tensor forward_diffuse(const Tensor& z0, std::size_t t, const NoiseSchedule& schedule,
                       SeededRng& rng) {
    if (t < 1 || t > schedule.total_steps) {
        throw Error(ErrorKind::config, "forward_diffuse: timestep out of range");
    }
    Tensor z = z0;
    for (std::size_t k = 1; k <= t; ++k) {
        const double keep = std::sqrt(1.0 - schedule.betas[k]);
        const double noise = std::sqrt(schedule.betas[k]);
        for (std::size_t i = 0; i < z.size(); ++i) {
            z[i] = keep * z[i] + noise * rng.next_normal();
        }
    }
    z.check_finite("forward_diffuse");
    return z;
}

Tensor ddim_step(const Tensor& z_t, const Tensor& eps, std::size_t t,
                 const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.total_steps) {
        throw Error(ErrorKind::config, "ddim_step: timestep out of range");
    }
    if (!z_t.same_shape(eps)) throw Error(ErrorKind::shape, "ddim_step: eps shape mismatch");
    const double ab_t = schedule.alpha_bar[t];
    const double ab_prev = schedule.alpha_bar[t - 1];
    const double signal = std::sqrt(ab_prev / ab_t);
    const double noise = std::sqrt((1.0 - ab_prev) / ab_prev) - std::sqrt((1.0 - ab_t) / ab_t);
    Tensor out = z_t;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal * z_t[i] + noise * eps[i];
    out.check_finite("ddim_step");
    return out;
}

Tensor ddim_invert_step(const Tensor& z_prev, const Tensor& eps, std::size_t t,
                        const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.total_steps) {
        throw Error(ErrorKind::config, "ddim_invert_step: timestep out of range");
    }
    if (!z_prev.same_shape(eps)) {
        throw Error(ErrorKind::shape, "ddim_invert_step: eps shape mismatch");
    }
    const double ab_t = schedule.alpha_bar[t];
    const double ab_prev = schedule.alpha_bar[t - 1];
    const double inv_signal = std::sqrt(ab_t / ab_prev);
    const double noise = std::sqrt((1.0 - ab_prev) / ab_prev) - std::sqrt((1.0 - ab_t) / ab_t);
    Tensor out = z_prev;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = inv_signal * (z_prev[i] - noise * eps[i]);
    }
    out.check_finite("ddim_invert_step");
    return out;
}

Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double w) {
    if (w < 0.0 || w > 1.0) {
        throw Error(ErrorKind::config, "cfg_combine: w outside [0,1]");
    }
    if (!eps_cond.same_shape(eps_uncond)) {
        throw Error(ErrorKind::shape, "cfg_combine: shape mismatch");
    }
    Tensor out = eps_cond;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = w * eps_cond[i] + (1.0 - w) * eps_uncond[i];
    }
    return out;
}

FairTokenGroups build_fair_groups(const EmbeddingMatrix& e_fair,
                                  const std::set<std::size_t>& positions) {
    FairTokenGroups groups;
    const std::size_t fair_content = e_fair.rows() - 1;
    if (fair_content == 0 || positions.empty()) return groups;
    groups.embeddings.resize(fair_content);
    groups.key_groups.resize(fair_content);
    for (std::size_t j = 0; j < fair_content; ++j) groups.embeddings[j] = e_fair.row(j);
    std::size_t idx = 0;
    for (std::size_t k : positions) {
        groups.key_groups[idx % fair_content].push_back(k);
        ++idx;
    }
    return groups;
}

Tensor denoiser_predict(const ToyDenoiser& den, const Tensor& z, std::size_t t,
                        const EmbeddingMatrix& prompt_emb, const Tensor& region_indicator,
                        const FairTokenGroups& groups, const SelfAttnConfig& self_cfg,
                        const CrossAttnConfig& cross_cfg, double rho,
                        const AttentionCache* blend_from, AttentionCache* record_to) {
    if (z.rank() != 4 || z.dim(0) != den.h || z.dim(1) != den.w ||
        z.dim(2) != den.frames || z.dim(3) != den.channels) {
        throw Error(ErrorKind::shape, "denoiser: latent shape mismatch");
    }
    if (prompt_emb.dim() != den.text_dim) {
        throw Error(ErrorKind::shape, "denoiser: prompt embedding dim mismatch");
    }
    if (t >= den.timestep_emb.rows()) {
        throw Error(ErrorKind::config, "denoiser: timestep outside embedding table");
    }
    const std::size_t n = den.h * den.w, l = den.frames, c = den.channels;
    const std::size_t L = prompt_emb.rows();

    const Tensor flat = temporal_flatten(z);
    const Tensor similarity =
        build_similarity_mask(standardize_channels(temporal_mean_features(z)), self_cfg.tau);

    const Tensor k_cross = matmul(prompt_emb.values, den.wk_cross);
    const Tensor v_cross = matmul(prompt_emb.values, den.wv_cross);

    Tensor eps({n, l, c});
    for (std::size_t f = 0; f < l; ++f) {
        Tensor x = frame_slice(flat, f);
        for (std::size_t q = 0; q < n; ++q)
            for (std::size_t ch = 0; ch < c; ++ch)
                x.at(q, ch) += den.timestep_emb.at(t, ch);

        // Self-attention with optional cached-logit blending.
        const Tensor qs = matmul(x, den.self_w.w_q);
        const Tensor ks = matmul(x, den.self_w.w_k);
        const Tensor vs = matmul(x, den.self_w.w_v);
        Tensor raw_self = matmul(qs, transpose(ks));
        if (blend_from) {
            const CacheRecord* rec = blend_from->find(t, 0, f, MapKind::self_attn);
            if (!rec) throw Error(ErrorKind::config, "denoiser: cache/timestep mismatch");
            if (rec->raw.same_shape(raw_self)) {
                for (std::size_t i = 0; i < raw_self.size(); ++i) {
                    raw_self[i] = rho * rec->raw[i] + (1.0 - rho) * raw_self[i];
                }
            }
        }
        const Tensor attn_self =
            softmax_rows(fair_logits_from_raw(raw_self, region_indicator, similarity, self_cfg, c));
        const Tensor h1 = add(x, matmul(attn_self, vs));
        if (record_to) {
            record_to->put({t, 0, f, MapKind::self_attn, attn_self, raw_self});
        }

        // Cross-attention against the prompt embedding.
        const Tensor qc = matmul(h1, den.wq_cross);
        Tensor raw_cross = matmul(qc, transpose(k_cross));
        if (blend_from) {
            const CacheRecord* rec = blend_from->find(t, 0, f, MapKind::cross_attn);
            if (!rec) throw Error(ErrorKind::config, "denoiser: cache/timestep mismatch");
            // Prompts of different length cannot be blended; keep current logits.
            if (rec->raw.same_shape(raw_cross)) {
                for (std::size_t i = 0; i < raw_cross.size(); ++i) {
                    raw_cross[i] = rho * rec->raw[i] + (1.0 - rho) * raw_cross[i];
                }
            }
        }
        const Tensor mask = cosine_region_mask(qc, groups, L, cross_cfg.clamp_negative);
        const Tensor attn_cross =
            softmax_rows(fair_cross_logits_from_raw(raw_cross, mask, cross_cfg, den.text_dim));
        const Tensor out_cross = matmul(attn_cross, v_cross);
        if (record_to) {
            record_to->put({t, 0, f, MapKind::cross_attn, attn_cross, raw_cross});
        }

        const Tensor eps_frame = matmul(out_cross, den.w_out);
        for (std::size_t q = 0; q < n; ++q)
            for (std::size_t ch = 0; ch < c; ++ch)
                eps[(q * l + f) * c + ch] = eps_frame.at(q, ch);
    }
    Tensor out = temporal_unflatten(eps, den.h, den.w);
    out.check_finite("denoiser_predict");
    return out;
}

InvertResult invert(const Tensor& z0, const EditRequest& req) {
    req.validate();
    if (z0.rank() != 4) throw Error(ErrorKind::shape, "invert: rank-4 latent required");
    const std::size_t h = z0.dim(0), w = z0.dim(1), l = z0.dim(2), c = z0.dim(3);
    if (req.regions.height != h || req.regions.width != w) {
        throw Error(ErrorKind::shape, "invert: region map does not match latent dims");
    }
    const std::size_t d_text = req.text_dim == 0 ? c : req.text_dim;
    const NoiseSchedule schedule =
        NoiseSchedule::linear(req.schedule_steps, req.beta_start, req.beta_end);
    const ToyDenoiser den = ToyDenoiser::make(h, w, l, c, d_text, req.schedule_steps,
                                              salted(req.seed, kDenoiserSalt));
    const EmbeddingMatrix e_ref =
        encode(tokenize(req.prompt_ref), d_text, salted(req.seed, kEncoderSalt));
    const Tensor region = build_region_indicator(req.regions);

    // Inversion runs unmodulated; its maps seed the editing stage.
    SelfAttnConfig vanilla_self{0.0, 0.0, req.self_cfg.tau};
    CrossAttnConfig vanilla_cross{0.0, req.cross_cfg.clamp_negative};
    FairTokenGroups no_groups;

    InvertResult result;
    result.trajectory.push_back(z0);
    Tensor z = z0;
    for (std::size_t t = 1; t <= req.steps; ++t) {
        const Tensor eps = denoiser_predict(den, z, t, e_ref, region, no_groups, vanilla_self,
                                            vanilla_cross, 0.0, nullptr, &result.cache);
        z = ddim_invert_step(z, eps, t, schedule);
        result.trajectory.push_back(z);
    }
    return result;
}

EditResult edit(const Tensor& z0, const EditRequest& req) {
    InvertResult inv = invert(z0, req);
    const std::size_t h = z0.dim(0), w = z0.dim(1), l = z0.dim(2), c = z0.dim(3);
    const std::size_t d_text = req.text_dim == 0 ? c : req.text_dim;
    const std::uint64_t enc_seed = salted(req.seed, kEncoderSalt);
    const NoiseSchedule schedule =
        NoiseSchedule::linear(req.schedule_steps, req.beta_start, req.beta_end);
    const ToyDenoiser den =
        ToyDenoiser::make(h, w, l, c, d_text, req.schedule_steps, salted(req.seed, kDenoiserSalt));

    const PromptTokens p_tar = tokenize(req.prompt_tar);
    const PromptTokens p_fair = tokenize(req.prompt_fair);
    const EmbeddingMatrix debiased = debias_prompt(p_tar, p_fair, req.fusion, d_text, enc_seed);
    const EmbeddingMatrix e_tar = encode(p_tar, d_text, enc_seed);
    const EmbeddingMatrix e_fair = p_fair.content_tokens() == 0
                                       ? null_embedding(d_text, enc_seed)
                                       : encode(p_fair, d_text, enc_seed);
    const std::set<std::size_t> positions =
        select_fair_positions(e_tar, e_fair, req.fusion.theta_p, req.fusion.overrides);
    const FairTokenGroups groups = build_fair_groups(e_fair, positions);
    const EmbeddingMatrix uncond = null_embedding(d_text, enc_seed);
    const FairTokenGroups no_groups;
    const Tensor region = build_region_indicator(req.regions);

    EditResult result;
    Tensor z = inv.trajectory.back();
    for (std::size_t t = req.steps; t >= 1; --t) {
        const Tensor eps_cond =
            denoiser_predict(den, z, t, debiased, region, groups, req.self_cfg, req.cross_cfg,
                             req.rho, &inv.cache, &result.cache);
        const Tensor eps_uncond =
            denoiser_predict(den, z, t, uncond, region, no_groups, req.self_cfg, req.cross_cfg,
                             req.rho, &inv.cache, nullptr);
        const Tensor eps = cfg_combine(eps_cond, eps_uncond, req.guidance_w);
        z = ddim_step(z, eps, t, schedule);
    }
    result.latent = z;
    return result;
}

Tensor decode_frames(const Tensor& z, std::uint64_t seed) {
    if (z.rank() != 4) throw Error(ErrorKind::shape, "decode_frames: rank-4 latent required");
    const std::size_t c = z.dim(3);
    if (c < 3) throw Error(ErrorKind::shape, "decode_frames: need >= 3 channels");
    const Tensor mix = seeded_matrix(c, 3, salted(seed, kDecoderSalt),
                                     1.0 / std::sqrt(static_cast<double>(c)));
    Tensor out({z.dim(0), z.dim(1), z.dim(2), std::size_t{3}});
    const std::size_t cells = z.size() / c;
    for (std::size_t i = 0; i < cells; ++i) {
        for (std::size_t o = 0; o < 3; ++o) {
            double v = 0.5;
            for (std::size_t ch = 0; ch < c; ++ch) v += z[i * c + ch] * mix.at(ch, o);
            out[i * 3 + o] = std::min(1.0, std::max(0.0, v));
        }
    }
    return out;
}

}  // namespace fame
