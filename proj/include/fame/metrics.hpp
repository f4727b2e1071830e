#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fame/diffusion.hpp"
#include "fame/prompt.hpp"
#include "fame/tensor.hpp"

namespace fame {

// Unit direction in latent channel space used as a desk-scale stand-in
// for an attribute classifier.
struct BiasProbe {
    std::vector<double> direction;  // unit c-vector
    std::string label;

    static BiasProbe seeded(std::size_t channels, const std::string& label,
                            std::uint64_t seed);
    void validate() const;
};

struct TrialRecord {
    std::uint64_t seed = 0;
    double bias_baseline = 0.0;
    double bias_edited = 0.0;
    bool corrected = false;  // strict: |edited| < |baseline|
};

struct FairnessReport {
    std::string profession;
    std::vector<TrialRecord> trials;
    std::size_t count = 0;  // corrected trials
    double ratio = 0.0;     // count / trials
};

double bias_score(const Tensor& latent, const BiasProbe& probe);

TrialRecord make_trial(std::uint64_t seed, double bias_baseline, double bias_edited);
FairnessReport make_report(const std::string& profession, std::vector<TrialRecord> trials);

// One trial per seed: a modulation-free baseline edit against the full
// fairness-configured edit, scored with the probe.
FairnessReport run_trials(const Tensor& z0, const EditRequest& request,
                          const BiasProbe& probe, const std::vector<std::uint64_t>& seeds,
                          const std::string& profession);

double frame_consistency(const Tensor& frames);
double prompt_alignment(const Tensor& frames, const EmbeddingMatrix& prompt_emb,
                        std::uint64_t projection_seed);

std::vector<double> intra_region_mass(const AttentionCache& cache, const Tensor& region_indicator);

struct ResponsivenessScores {
    double alignment = 0.0;
    double consistency = 0.0;
};

struct ResponsivenessReport {
    ResponsivenessScores explicit_target;  // gendered hint injected directly
    ResponsivenessScores neutral;          // neutral target, no debiasing
    ResponsivenessScores fame;             // neutral target + soft debiasing
};

ResponsivenessReport prompt_responsiveness_test(const Tensor& z0, const EditRequest& base,
                                                const std::string& p_tar_explicit,
                                                const std::string& p_tar_neutral);

std::string report_to_json(const FairnessReport& report);
std::string responsiveness_to_json(const ResponsivenessReport& report);
std::string reports_to_csv(const std::vector<FairnessReport>& reports);

}  // namespace fame
