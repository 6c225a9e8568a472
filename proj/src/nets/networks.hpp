#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "core/ops.hpp"
#include "core/optim.hpp"
#include "core/rng.hpp"
#include "core/tape.hpp"

namespace dasfft {

struct Param {
    Tensor value;
    AdamState opt;
    bool trainable = true;
};

// Named parameter container. Ordered map so that iteration, serialization and
// update order are deterministic.
class ParamStore {
  public:
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    Tensor& value(const std::string& name) { return at(name).value; }

    // He-style seeded init; fan_in 0 means zero init.
    Tensor& create(const std::string& name, std::vector<int> shape, std::uint64_t seed, int fan_in,
                   bool trainable = true);

    std::vector<std::string> names_with_prefix(const std::string& prefix) const;
    const std::map<std::string, Param>& all() const { return params_; }
    std::map<std::string, Param>& all_mutable() { return params_; }
    void erase_prefix(const std::string& prefix);

    // DASFFT-MODEL v1: text manifest (name, shape, byte offset) + one TENS blob.
    void save(const std::string& path) const;
    static ParamStore load(const std::string& path);

    bool operator==(const ParamStore& o) const;

  private:
    std::map<std::string, Param> params_;
};

struct GeneratorConfig {
    int scales = 5;
    int resolution = 64;                               // must equal 4*2^(scales-1)
    std::vector<int> channels = {64, 64, 32, 16, 8};   // per scale
    int embedding_width = 64;
    int fc_hidden = 64;
    std::uint64_t init_seed = 1;

    int scale_resolution(int i) const { return 4 << (i - 1); }  // i in 1..scales
    int in_channels(int i) const { return i == 1 ? channels[0] : channels[static_cast<std::size_t>(i) - 2]; }
    int out_channels(int i) const { return channels[static_cast<std::size_t>(i) - 1]; }
    void validate() const;
};

// Counts encoder invocations; the train/infer path contract (HQ encoder in
// training, LQ encoder at test time) is asserted through this.
struct CallTrace {
    int ehq_calls = 0;
    int elq_calls = 0;
};

// Per-forward-pass context: one tape, parameters materialized as leaves on
// first use so their gradients can be read back after backward().
struct FwdCtx {
    Tape& tape;
    ParamStore& store;
    std::map<std::string, Var> used;

    FwdCtx(Tape& t, ParamStore& s) : tape(t), store(s) {}
    Var param(const std::string& name);
    // Accumulate tape gradients of all used parameters into `acc` (scaled).
    void collect_grads(std::map<std::string, Tensor>& acc, double scl = 1.0);
};

enum class GenMode { Train, Infer };

// ---- initializers (idempotent: skip already-present parameters) ----
void init_generator(ParamStore& store, const GeneratorConfig& cfg);
void init_discriminators(ParamStore& store, const GeneratorConfig& cfg);
void init_encoder(ParamStore& store, const GeneratorConfig& cfg, const std::string& prefix,
                  std::uint64_t seed_salt);
void init_decoder(ParamStore& store, const GeneratorConfig& cfg);
void init_fc_heads(ParamStore& store, const GeneratorConfig& cfg);

// ---- forward passes ----

// Multiscale SFFT generator. `embedding` must be valid in sfft_dafe mode
// (train: E_HQ(H), infer: E_LQ(I)); pass -1 for the sfft_only ablation.
Var generator_forward(FwdCtx& ctx, const GeneratorConfig& cfg, const Tensor& lq_image,
                      const std::vector<int>& parsing, Var embedding);

struct DiscOut {
    Var score;
    std::vector<Var> feats;  // one activation per block, k=1..4
};
// scale_idx 0,1,2 for s in {1, 1/2, 1/4}; x already downsampled to scale s.
DiscOut discriminator_forward(FwdCtx& ctx, Var x, int scale_idx);

// 4 stride-2 conv blocks, global average pool, linear head to E dims.
// `feats`, when non-null, receives each block's activation (style-loss taps).
Var encoder_forward(FwdCtx& ctx, Var image, const std::string& prefix, CallTrace* trace,
                    std::vector<Var>* feats = nullptr);

// FC(FC(v)) head for one scale: two linear layers with relu between,
// output split into (w_s, w_b) of the scale's channel width.
std::pair<Var, Var> fc_head(FwdCtx& ctx, const GeneratorConfig& cfg, Var embedding, int scale);

// Pretraining decoder (autoencoder counterpart of the HQ encoder).
Var decoder_forward(FwdCtx& ctx, const GeneratorConfig& cfg, Var embedding);

}  // namespace dasfft
