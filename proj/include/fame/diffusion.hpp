#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "fame/cross_attention.hpp"
#include "fame/prompt.hpp"
#include "fame/region.hpp"
#include "fame/rng.hpp"
#include "fame/self_attention.hpp"
#include "fame/tensor.hpp"

namespace fame {

// Linear-beta schedule; alpha_bar[0] == 1 and alpha_bar is strictly
// decreasing. The DDIM update consumes the cumulative products.
struct NoiseSchedule {
    std::size_t total_steps = 0;
    std::vector<double> betas;      // 1-based, betas[1..T]
    std::vector<double> alphas;     // alphas[t] = 1 - betas[t]
    std::vector<double> alpha_bar;  // alpha_bar[0] = 1

    static NoiseSchedule linear(std::size_t T, double beta_start = 1e-4,
                                double beta_end = 2e-2);
    void validate() const;
};

enum class MapKind { self_attn, cross_attn };

struct CacheRecord {
    std::size_t timestep = 0;
    std::size_t layer = 0;
    std::size_t frame = 0;
    MapKind kind = MapKind::self_attn;
    Tensor map;  // row-stochastic attention
    Tensor raw;  // pre-modulation logits, used for rho-blending
};

// Append-only store of per-(timestep, layer, frame, kind) attention maps.
class AttentionCache {
public:
    void put(CacheRecord rec);
    const CacheRecord* find(std::size_t t, std::size_t layer, std::size_t frame,
                            MapKind kind) const;
    const std::vector<CacheRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    void save(const std::string& dir) const;

private:
    std::vector<CacheRecord> records_;
    std::map<std::tuple<std::size_t, std::size_t, std::size_t, int>, std::size_t> index_;
};

// Single self-attention + single cross-attention layer with seeded, fixed
// weights; a stand-in noise predictor sized to the latent dims.
struct ToyDenoiser {
    std::size_t h = 0, w = 0, frames = 0, channels = 0, text_dim = 0;
    ProjectionWeights self_w;       // c x c
    Tensor wq_cross;                // c x d_text
    Tensor wk_cross;                // d_text x d_text
    Tensor wv_cross;                // d_text x d_text
    Tensor w_out;                   // d_text x c
    Tensor timestep_emb;            // (T+1) x c
    std::uint64_t seed = 0;

    static ToyDenoiser make(std::size_t h, std::size_t w, std::size_t frames,
                            std::size_t channels, std::size_t text_dim,
                            std::size_t total_steps, std::uint64_t seed);
};

struct EditRequest {
    std::string prompt_ref;
    std::string prompt_tar;
    std::string prompt_fair;
    double guidance_w = 1.0;  // convex interpolation weight, in [0,1]
    FusionSpec fusion;
    SelfAttnConfig self_cfg;
    CrossAttnConfig cross_cfg;
    double rho = 0.5;  // cache blend weight
    RegionMap regions;
    std::uint64_t seed = 13;
    std::size_t steps = 50;
    std::size_t schedule_steps = 50;
    double beta_start = 1e-4;
    double beta_end = 2e-2;
    std::size_t text_dim = 0;  // 0 -> latent channel count

    void validate() const;
};

Tensor forward_diffuse(const Tensor& z0, std::size_t t, const NoiseSchedule& schedule,
                       SeededRng& rng);
Tensor ddim_step(const Tensor& z_t, const Tensor& eps, std::size_t t,
                 const NoiseSchedule& schedule);
Tensor ddim_invert_step(const Tensor& z_prev, const Tensor& eps, std::size_t t,
                        const NoiseSchedule& schedule);
Tensor cfg_combine(const Tensor& eps_cond, const Tensor& eps_uncond, double w);

// One denoiser evaluation. When `blend_from` is given, cached raw logits are
// mixed into the current ones with weight rho before modulation; when
// `record_to` is given, the blended logits and attention maps are recorded.
Tensor denoiser_predict(const ToyDenoiser& den, const Tensor& z, std::size_t t,
                        const EmbeddingMatrix& prompt_emb, const Tensor& region_indicator,
                        const FairTokenGroups& groups, const SelfAttnConfig& self_cfg,
                        const CrossAttnConfig& cross_cfg, double rho,
                        const AttentionCache* blend_from, AttentionCache* record_to);

struct InvertResult {
    std::vector<Tensor> trajectory;  // z_0 .. z_steps
    AttentionCache cache;
};

InvertResult invert(const Tensor& z0, const EditRequest& req);

struct EditResult {
    Tensor latent;  // edited z_0-level latent
    AttentionCache cache;
};

EditResult edit(const Tensor& z0, const EditRequest& req);

Tensor decode_frames(const Tensor& z, std::uint64_t seed);

// Concepts are the non-EOS fairness token embeddings; sorted fused
// positions pair with them in order, cycling, mirroring soft_fuse.
FairTokenGroups build_fair_groups(const EmbeddingMatrix& e_fair,
                                  const std::set<std::size_t>& positions);

}  // namespace fame
