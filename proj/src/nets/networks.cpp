#include "nets/networks.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sfft/sfft.hpp"

namespace dasfft {

// ---- ParamStore ----

Param& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    require(it != params_.end(), "unknown parameter '" + name + "'");
    return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    require(it != params_.end(), "unknown parameter '" + name + "'");
    return it->second;
}

Tensor& ParamStore::create(const std::string& name, std::vector<int> shape, std::uint64_t seed,
                           int fan_in, bool trainable) {
    auto it = params_.find(name);
    if (it != params_.end()) return it->second.value;
    Param p;
    p.value = Tensor(shape);
    p.trainable = trainable;
    if (fan_in > 0) {
        Rng rng = Rng(seed).sub(name);
        double std = std::sqrt(2.0 / fan_in);
        for (double& v : p.value.data) v = rng.normal(0.0, std);
    }
    auto res = params_.emplace(name, std::move(p));
    return res.first->second.value;
}

std::vector<std::string> ParamStore::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, p] : params_)
        if (name.rfind(prefix, 0) == 0) out.push_back(name);
    return out;
}

void ParamStore::erase_prefix(const std::string& prefix) {
    for (auto it = params_.begin(); it != params_.end();) {
        if (it->first.rfind(prefix, 0) == 0)
            it = params_.erase(it);
        else
            ++it;
    }
}

bool ParamStore::operator==(const ParamStore& o) const {
    if (params_.size() != o.params_.size()) return false;
    auto a = params_.begin();
    auto b = o.params_.begin();
    for (; a != params_.end(); ++a, ++b) {
        if (a->first != b->first) return false;
        const Param& pa = a->second;
        const Param& pb = b->second;
        if (pa.trainable != pb.trainable || pa.opt.step != pb.opt.step) return false;
        if (pa.value.shape != pb.value.shape || pa.value.data != pb.value.data) return false;
        if (pa.opt.m.data != pb.opt.m.data || pa.opt.v.data != pb.opt.v.data) return false;
    }
    return true;
}

namespace {

struct ManifestEntry {
    std::string name;
    std::vector<int> shape;
    std::int64_t offset;  // byte offset into the blob payload
};

}  // namespace

void ParamStore::save(const std::string& path) const {
    std::vector<ManifestEntry> entries;
    std::vector<double> blob;
    auto append = [&](const std::string& name, const Tensor& t) {
        entries.push_back({name, t.shape, static_cast<std::int64_t>(blob.size() * sizeof(double))});
        blob.insert(blob.end(), t.data.begin(), t.data.end());
    };
    for (const auto& [name, p] : params_) {
        append(name, p.value);
        if (p.opt.step > 0) {
            append(name + "@m", p.opt.m);
            append(name + "@v", p.opt.v);
        }
        Tensor meta({2});
        meta.data[0] = static_cast<double>(p.opt.step);
        meta.data[1] = p.trainable ? 1.0 : 0.0;
        append(name + "@meta", meta);
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << "DASFFT-MODEL v1\n" << entries.size() << "\n";
    for (const ManifestEntry& e : entries) {
        os << e.name << " " << e.shape.size();
        for (int d : e.shape) os << " " << d;
        os << " " << e.offset << "\n";
    }
    Tensor blob_t = Tensor::from_vector(std::move(blob));
    if (blob_t.size() == 0) blob_t = Tensor::scalar(0.0);  // TENS needs >=1 element
    write_tensor(blob_t, os);
}

ParamStore ParamStore::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for read: " + path);
    std::string header;
    std::getline(is, header);
    if (header != "DASFFT-MODEL v1") throw std::runtime_error("bad model header: '" + header + "'");
    std::size_t count = 0;
    is >> count;
    std::vector<ManifestEntry> entries(count);
    for (ManifestEntry& e : entries) {
        std::size_t nd = 0;
        is >> e.name >> nd;
        e.shape.resize(nd);
        for (int& d : e.shape) is >> d;
        is >> e.offset;
    }
    is.ignore();  // trailing newline before the blob
    Tensor blob = read_tensor(is);

    ParamStore store;
    auto fetch = [&](const ManifestEntry& e) {
        Tensor t(e.shape);
        std::size_t start = static_cast<std::size_t>(e.offset) / sizeof(double);
        require(start + t.data.size() <= blob.data.size(), "model blob truncated at " + e.name);
        std::copy(blob.data.begin() + static_cast<std::ptrdiff_t>(start),
                  blob.data.begin() + static_cast<std::ptrdiff_t>(start + t.data.size()),
                  t.data.begin());
        return t;
    };
    for (const ManifestEntry& e : entries) {
        if (e.name.find('@') != std::string::npos) continue;
        Param p;
        p.value = fetch(e);
        store.params_.emplace(e.name, std::move(p));
    }
    for (const ManifestEntry& e : entries) {
        auto at_pos = e.name.find('@');
        if (at_pos == std::string::npos) continue;
        std::string base = e.name.substr(0, at_pos);
        std::string kind = e.name.substr(at_pos + 1);
        Param& p = store.at(base);
        if (kind == "m")
            p.opt.m = fetch(e);
        else if (kind == "v")
            p.opt.v = fetch(e);
        else if (kind == "meta") {
            Tensor meta = fetch(e);
            p.opt.step = static_cast<std::int64_t>(meta.data[0]);
            p.trainable = meta.data[1] != 0.0;
        }
    }
    return store;
}

// ---- FwdCtx ----

Var FwdCtx::param(const std::string& name) {
    auto it = used.find(name);
    if (it != used.end()) return it->second;
    Var v = tape.leaf(store.value(name));
    used.emplace(name, v);
    return v;
}

void FwdCtx::collect_grads(std::map<std::string, Tensor>& acc, double scl) {
    for (const auto& [name, var] : used) {
        if (!tape.has_grad(var)) continue;
        const Tensor& g = tape.grad(var);
        auto it = acc.find(name);
        if (it == acc.end()) it = acc.emplace(name, Tensor::zeros(g.shape)).first;
        for (std::size_t i = 0; i < g.data.size(); ++i) it->second.data[i] += scl * g.data[i];
    }
}

// ---- configuration ----

void GeneratorConfig::validate() const {
    require(scales >= 1 && (4 << (scales - 1)) == resolution,
            "generator config: resolution must equal 4*2^(scales-1)");
    require(static_cast<int>(channels.size()) == scales,
            "generator config: channel schedule length must equal scale count");
}

// ---- initializers ----

namespace {

constexpr int kDiscChannels[4] = {16, 32, 64, 64};
constexpr int kEncChannels[4] = {16, 32, 64, 64};

void init_conv_chain(ParamStore& store, const std::string& prefix, const int* widths, int blocks,
                     int c_in, std::uint64_t seed) {
    int cin = c_in;
    for (int i = 0; i < blocks; ++i) {
        std::string base = prefix + "/block" + std::to_string(i);
        store.create(base + ".w", {widths[i], cin, 3, 3}, seed, cin * 9);
        store.create(base + ".b", {widths[i]}, seed, 0);
        cin = widths[i];
    }
}

}  // namespace

void init_generator(ParamStore& store, const GeneratorConfig& cfg) {
    cfg.validate();
    std::uint64_t seed = cfg.init_seed;
    // fixed seeded start tensor, excluded from training
    store.create("gen/start", {cfg.channels[0], 4, 4}, seed, 16, /*trainable=*/false);
    for (int i = 1; i <= cfg.scales; ++i) {
        std::string s = "gen/s" + std::to_string(i);
        int cin = cfg.in_channels(i);
        int cout = cfg.out_channels(i);
        for (int j = 0; j < kNumComponents; ++j)
            init_sff_stack(store, s + "/comp" + std::to_string(j) + "/psff", 4, cin, seed);
        init_attention_stack(store, s + "/att", kNumComponents * cin, kNumComponents, seed);
        init_sff_stack(store, s + "/fuse/psff", cin, cout, seed);
        store.create(s + "/enh/conv.w", {cout, cin, 3, 3}, seed, cin * 9);
        store.create(s + "/enh/conv.b", {cout}, seed, 0);
    }
    store.create("gen/torgb.w", {3, cfg.channels.back(), 3, 3}, seed, cfg.channels.back() * 9);
    store.create("gen/torgb.b", {3}, seed, 0);
}

void init_discriminators(ParamStore& store, const GeneratorConfig& cfg) {
    for (int s = 0; s < 3; ++s) {
        std::string prefix = "disc/s" + std::to_string(s);
        init_conv_chain(store, prefix, kDiscChannels, 4, 3, cfg.init_seed);
        store.create(prefix + "/head.w", {1, kDiscChannels[3]}, cfg.init_seed, kDiscChannels[3]);
        store.create(prefix + "/head.b", {1}, cfg.init_seed, 0);
    }
}

void init_encoder(ParamStore& store, const GeneratorConfig& cfg, const std::string& prefix,
                  std::uint64_t seed_salt) {
    std::uint64_t seed = cfg.init_seed ^ (seed_salt * 0x9e3779b97f4a7c15ull);
    init_conv_chain(store, prefix, kEncChannels, 4, 3, seed);
    store.create(prefix + "/head.w", {cfg.embedding_width, kEncChannels[3]}, seed, kEncChannels[3]);
    store.create(prefix + "/head.b", {cfg.embedding_width}, seed, 0);
}

void init_decoder(ParamStore& store, const GeneratorConfig& cfg) {
    std::uint64_t seed = cfg.init_seed;
    int c0 = 64;
    store.create("dec/fc.w", {c0 * 16, cfg.embedding_width}, seed, cfg.embedding_width);
    store.create("dec/fc.b", {c0 * 16}, seed, 0);
    static const int widths[4] = {32, 16, 8, 8};
    int cin = c0;
    int blocks = cfg.scales - 1;  // 4x->R
    for (int i = 0; i < blocks; ++i) {
        int cout = widths[std::min(i, 3)];
        std::string base = "dec/up" + std::to_string(i);
        store.create(base + ".w", {cout, cin, 3, 3}, seed, cin * 9);
        store.create(base + ".b", {cout}, seed, 0);
        cin = cout;
    }
    store.create("dec/torgb.w", {3, cin, 3, 3}, seed, cin * 9);
    store.create("dec/torgb.b", {3}, seed, 0);
}

void init_fc_heads(ParamStore& store, const GeneratorConfig& cfg) {
    for (int i = 1; i <= cfg.scales; ++i) {
        std::string base = "fc/s" + std::to_string(i);
        store.create(base + "/l0.w", {cfg.fc_hidden, cfg.embedding_width}, cfg.init_seed,
                     cfg.embedding_width);
        store.create(base + "/l0.b", {cfg.fc_hidden}, cfg.init_seed, 0);
        store.create(base + "/l1.w", {2 * cfg.out_channels(i), cfg.fc_hidden}, cfg.init_seed,
                     cfg.fc_hidden);
        store.create(base + "/l1.b", {2 * cfg.out_channels(i)}, cfg.init_seed, 0);
    }
}

// ---- forward passes ----

Var generator_forward(FwdCtx& ctx, const GeneratorConfig& cfg, const Tensor& lq_image,
                      const std::vector<int>& parsing, Var embedding) {
    cfg.validate();
    require(lq_image.ndim() == 3 && lq_image.dim(0) == 3 && lq_image.dim(1) == cfg.resolution &&
                lq_image.dim(2) == cfg.resolution,
            "generator_forward: LQ image must be [3,R,R] with R=" + std::to_string(cfg.resolution));
    require(static_cast<int>(parsing.size()) == cfg.resolution * cfg.resolution,
            "generator_forward: parsing size mismatch");
    require(ctx.store.has("gen/start"), "generator_forward: uninitialized generator state");

    const std::vector<ComponentBox> boxes = component_boxes();
    Var f_prev = ctx.param("gen/start");
    for (int i = 1; i <= cfg.scales; ++i) {
        std::string s = "gen/s" + std::to_string(i);
        int r = cfg.scale_resolution(i);
        int cin = cfg.in_channels(i);
        int cout = cfg.out_channels(i);
        int factor = i == 1 ? 1 : 2;

        Tensor img_i = r == cfg.resolution ? lq_image : resize_bilinear_fwd(lq_image, r, r);
        std::vector<int> parse_i = downsample_parsing(parsing, cfg.resolution, r);
        std::vector<ComponentCrop> crops = extract_components(img_i, parse_i, boxes);

        Var phi = upsample(ctx.tape, f_prev, factor, Resample::Bilinear);

        // per-component SFFs and SFT maps over the shared upsampled frame
        std::vector<Var> comp_maps;
        for (int j = 0; j < kNumComponents; ++j) {
            auto [yjs, yjb] =
                sff_extract(ctx, crops[static_cast<std::size_t>(j)], s + "/comp" + std::to_string(j) + "/psff", cin);
            comp_maps.push_back(sft_apply(ctx.tape, phi, yjs, yjb));
        }
        std::vector<Var> att = facial_attention(ctx, comp_maps, s + "/att");
        std::pair<Var, Var> y = fuse_sff(ctx, comp_maps, att, s + "/fuse/psff", cout);

        std::pair<Var, Var> w{-1, -1};
        if (embedding >= 0) w = fc_head(ctx, cfg, embedding, i);

        // enhancement: conv on the same upsampled frame, then fused SFT
        Var g = conv2d(ctx.tape, phi, ctx.param(s + "/enh/conv.w"), ctx.param(s + "/enh/conv.b"),
                       Padding::Same);
        Var sv = y.first, bv = y.second;
        if (w.first >= 0) {
            sv = add(ctx.tape, sv, w.first);
            bv = add(ctx.tape, bv, w.second);
        }
        f_prev = sft_apply(ctx.tape, g, sv, bv);
    }
    Var rgb = conv2d(ctx.tape, f_prev, ctx.param("gen/torgb.w"), ctx.param("gen/torgb.b"),
                     Padding::Same);
    return pointwise(ctx.tape, rgb, Pointwise::Sigmoid);
}

DiscOut discriminator_forward(FwdCtx& ctx, Var x, int scale_idx) {
    require(scale_idx >= 0 && scale_idx < 3, "discriminator_forward: scale index must be 0..2");
    std::string prefix = "disc/s" + std::to_string(scale_idx);
    DiscOut out;
    Var h = x;
    for (int i = 0; i < 4; ++i) {
        std::string base = prefix + "/block" + std::to_string(i);
        h = conv2d(ctx.tape, h, ctx.param(base + ".w"), ctx.param(base + ".b"), Padding::Same, 2);
        h = pointwise(ctx.tape, h, Pointwise::Relu);
        out.feats.push_back(h);
    }
    Var pooled = global_avg_pool(ctx.tape, h);
    out.score = linear(ctx.tape, pooled, ctx.param(prefix + "/head.w"), ctx.param(prefix + "/head.b"));
    return out;
}

Var encoder_forward(FwdCtx& ctx, Var image, const std::string& prefix, CallTrace* trace,
                    std::vector<Var>* feats) {
    if (trace) {
        if (prefix == "ehq") ++trace->ehq_calls;
        if (prefix == "elq") ++trace->elq_calls;
    }
    Var h = image;
    for (int i = 0; i < 4; ++i) {
        std::string base = prefix + "/block" + std::to_string(i);
        h = conv2d(ctx.tape, h, ctx.param(base + ".w"), ctx.param(base + ".b"), Padding::Same, 2);
        h = pointwise(ctx.tape, h, Pointwise::Relu);
        if (feats) feats->push_back(h);
    }
    Var pooled = global_avg_pool(ctx.tape, h);
    return linear(ctx.tape, pooled, ctx.param(prefix + "/head.w"), ctx.param(prefix + "/head.b"));
}

std::pair<Var, Var> fc_head(FwdCtx& ctx, const GeneratorConfig& cfg, Var embedding, int scale) {
    std::string base = "fc/s" + std::to_string(scale);
    Var h = linear(ctx.tape, embedding, ctx.param(base + "/l0.w"), ctx.param(base + "/l0.b"));
    h = pointwise(ctx.tape, h, Pointwise::Relu);
    Var o = linear(ctx.tape, h, ctx.param(base + "/l1.w"), ctx.param(base + "/l1.b"));
    int c = cfg.out_channels(scale);
    return {slice0(ctx.tape, o, 0, c), slice0(ctx.tape, o, c, 2 * c)};
}

Var decoder_forward(FwdCtx& ctx, const GeneratorConfig& cfg, Var embedding) {
    Var h = linear(ctx.tape, embedding, ctx.param("dec/fc.w"), ctx.param("dec/fc.b"));
    h = pointwise(ctx.tape, h, Pointwise::Relu);
    h = reshape(ctx.tape, h, {64, 4, 4});
    int blocks = cfg.scales - 1;
    for (int i = 0; i < blocks; ++i) {
        std::string base = "dec/up" + std::to_string(i);
        h = upsample(ctx.tape, h, 2, Resample::Nearest);
        h = conv2d(ctx.tape, h, ctx.param(base + ".w"), ctx.param(base + ".b"), Padding::Same);
        h = pointwise(ctx.tape, h, Pointwise::Relu);
    }
    h = conv2d(ctx.tape, h, ctx.param("dec/torgb.w"), ctx.param("dec/torgb.b"), Padding::Same);
    return pointwise(ctx.tape, h, Pointwise::Sigmoid);
}

}  // namespace dasfft
