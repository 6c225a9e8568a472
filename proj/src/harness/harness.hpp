#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "degrade/degrade.hpp"
#include "facegen/facegen.hpp"
#include "harness/config.hpp"
#include "metrics/metrics.hpp"

namespace dasfft {

// Synthetic (HQ, LQ) pair corpus. Every sample owns independent seed
// substreams, so corpora are reproducible and order-independent.
struct Corpus {
    std::vector<FaceSample> faces;
    std::vector<Tensor> lq;
    std::vector<DegradationParams> degparams;

    static Corpus synth(std::uint64_t seed, const std::string& stream, int count, int resolution,
                        int m_min, int m_max);
    int size() const { return static_cast<int>(faces.size()); }
};

struct AlignReport {
    double initial_mse = 0.0;  // held-out embedding MSE before training
    double final_mse = 0.0;
};

struct TrainResult {
    double initial_rec = 0.0;  // train-set reconstruction loss before/after
    double final_rec = 0.0;
};

struct EvalResult {
    MetricReport restored;
    MetricReport lq_baseline;
    double aligned_dist_mean = 0.0;
    double unaligned_dist_mean = 0.0;
    double aligned_better_frac = 0.0;
};

// The three-stage training pipeline plus restoration and evaluation, all
// deterministic under the config seed.
class Pipeline {
  public:
    explicit Pipeline(RunConfig cfg);

    const RunConfig& config() const { return cfg_; }
    ParamStore& state() { return store_; }
    void load_state(const std::string& path) { store_ = ParamStore::load(path); }
    void save_state(const std::string& path) const { store_.save(path); }

    const Corpus& train_corpus();
    const Corpus& test_corpus();

    // Stage 1: HQ-encoder autoencoder pretraining (pixel MSE), then frozen.
    void pretrain_encoder();
    // Stage 2: LQ-encoder alignment to the frozen HQ embedding space.
    AlignReport align_dafe();
    // Stage 3: alternating hinge-GAN training of the SFFT generator.
    TrainResult train_gan(std::ostream* log_csv = nullptr);

    Tensor restore(const Tensor& lq, const std::vector<int>& parsing, CallTrace* trace = nullptr);
    EvalResult evaluate();

    // Mean reconstruction loss over the first `limit` train samples.
    double train_recon_loss(int limit);

  private:
    RunConfig cfg_;
    GeneratorConfig gcfg_;
    ParamStore store_;
    std::optional<Corpus> train_;
    std::optional<Corpus> test_;

    void apply_grads(const std::map<std::string, Tensor>& grads,
                     const std::vector<std::string>& prefixes, double lr);
    double heldout_alignment_mse(const std::string& lq_prefix);
};

// Comparison report for the two ablation configurations; flags a metric
// inversion instead of hiding it.
void write_ablation_report(const std::string& path, double rec_sfft_only, double rec_sfft_dafe);

// Full finite-difference verification suite; returns the failure count.
int run_gradcheck(std::ostream& os);

}  // namespace dasfft
