#include "cdftn/nets.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace cdftn::nets {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

uint64_t fnv1a(const void* data, size_t n, uint64_t h = 14695981039346656037ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

uint64_t name_hash(const std::string& s) { return fnv1a(s.data(), s.size()); }

int ilog2(int64_t v) {
    int r = 0;
    while (v > 1) {
        v >>= 1;
        ++r;
    }
    return r;
}

}  // namespace

void ShapeSpec::validate() const {
    if (H < 1 || W < 1) throw std::invalid_argument("ShapeSpec: H and W must be positive");
    if (k < 2 || (k & (k - 1)) != 0)
        throw std::invalid_argument("ShapeSpec: k must be a power of two >= 2, got " +
                                    std::to_string(k));
    if (H % k != 0 || W % k != 0)
        throw std::invalid_argument("ShapeSpec: H=" + std::to_string(H) + ", W=" +
                                    std::to_string(W) + " not divisible by k=" + std::to_string(k));
    if (c_L < 1 || c_C < 1) throw std::invalid_argument("ShapeSpec: c_L and c_C must be >= 1");
    if (image_channels != 3) throw std::invalid_argument("ShapeSpec: image_channels must be 3");
}

void check_image_batch(const Tensor& x, const ShapeSpec& spec, const std::string& who) {
    const auto& s = x.shape();
    if (s.size() != 4 || s[0] < 1 || s[1] != spec.image_channels || s[2] != spec.H ||
        s[3] != spec.W)
        throw std::invalid_argument(who + ": expected image batch [B," +
                                    std::to_string(spec.image_channels) + "," +
                                    std::to_string(spec.H) + "," + std::to_string(spec.W) +
                                    "], got " + x.shape_str());
}

void check_latent(const Tensor& z, const ShapeSpec& spec, int64_t channels,
                  const std::string& who) {
    const auto& s = z.shape();
    if (s.size() != 4 || s[0] < 1 || s[1] != channels || s[2] != spec.latent_h() ||
        s[3] != spec.latent_w())
        throw std::invalid_argument(who + ": expected latent [B," + std::to_string(channels) +
                                    "," + std::to_string(spec.latent_h()) + "," +
                                    std::to_string(spec.latent_w()) + "], got " + z.shape_str());
}

// ---------------------------------------------------------------- Encoder

Encoder::Encoder(const std::string& name, const ShapeSpec& spec, int64_t out_ch, int64_t width,
                 Rng& rng)
    : spec_(spec), out_ch_(out_ch) {
    const int m = ilog2(spec.k);
    int64_t in = spec.image_channels;
    for (int j = 0; j < m - 1; ++j) {
        const int64_t out = width << j;
        blocks_.push_back(std::make_unique<ConvINLReLU>(name + ".b" + std::to_string(j), in, out,
                                                        4, 2, 1, rng));
        in = out;
    }
    // plain conv projection: instance norm here would erase the per-sample
    // channel statistics the latent heads (C, D^L) depend on
    proj_ = std::make_unique<Conv2d>(name + ".proj", in, out_ch, 4, 2, 1, rng);
}

Var Encoder::encode(Graph& g, const Var& x) const {
    check_image_batch(x->value, spec_, "encode");
    Var h = x;
    for (const auto& b : blocks_) h = b->forward(g, h);
    return proj_->forward(g, h);
}

void Encoder::collect(std::vector<Parameter*>& out) {
    for (auto& b : blocks_) b->collect(out);
    proj_->collect(out);
}

// -------------------------------------------------------------- Generator

Generator::Generator(const std::string& name, const ShapeSpec& spec, int64_t width,
                     int64_t res_blocks, Rng& rng)
    : spec_(spec) {
    head_ = std::make_unique<ConvINLReLU>(name + ".head", spec.c_L + spec.c_C, width, 3, 1, 1,
                                          rng);
    for (int64_t i = 0; i < res_blocks; ++i)
        res_.push_back(std::make_unique<ResidualBlock>(name + ".res" + std::to_string(i), width,
                                                       rng));
    const int m = ilog2(spec.k);
    int64_t in = width;
    for (int j = 0; j < m; ++j) {
        const int64_t out = std::max<int64_t>(width >> (j + 1), 8);
        ups_.push_back(std::make_unique<ConvINLReLU>(name + ".up" + std::to_string(j), in, out, 3,
                                                     1, 1, rng));
        in = out;
    }
    out_conv_ = std::make_unique<Conv2d>(name + ".out", in, spec.image_channels, 3, 1, 1, rng);
}

Var Generator::generate(Graph& g, const Var& z_L, const Var& z_C) const {
    check_latent(z_L->value, spec_, spec_.c_L, "generate(z_L)");
    check_latent(z_C->value, spec_, spec_.c_C, "generate(z_C)");
    if (z_L->value.dim(0) != z_C->value.dim(0))
        throw std::invalid_argument("generate: batch mismatch " + z_L->value.shape_str() + " vs " +
                                    z_C->value.shape_str());
    Var h = head_->forward(g, concat_channels(z_L, z_C));
    for (const auto& r : res_) h = r->forward(g, h);
    for (const auto& u : ups_) h = u->forward(g, upsample_nearest2(h));
    // tanh keeps the internal range in [-1,1]; the data boundary is [0,1]
    Var y = tanh_(out_conv_->forward(g, h));
    return mul_scalar(add_scalar(y, 1.0), 0.5);
}

void Generator::collect(std::vector<Parameter*>& out) {
    head_->collect(out);
    for (auto& r : res_) r->collect(out);
    for (auto& u : ups_) u->collect(out);
    out_conv_->collect(out);
}

// ---------------------------------------------------- ImageDiscriminator

ImageDiscriminator::ImageDiscriminator(const std::string& name, const ShapeSpec& spec,
                                       int64_t width, Rng& rng)
    : spec_(spec) {
    // downsample only while the plane stays large enough for instance norm
    // to see more than one pixel
    int64_t size = spec.H;
    auto block_geom = [&size]() {
        if (size > 4) {
            size /= 2;
            return std::pair<int64_t, int>(4, 2);  // kernel, stride
        }
        return std::pair<int64_t, int>(3, 1);
    };
    auto [k1, s1] = block_geom();
    c1_ = std::make_unique<Conv2d>(name + ".c1", spec.image_channels, width, k1, s1, 1, rng);
    auto [k2, s2] = block_geom();
    c2_ = std::make_unique<ConvINLReLU>(name + ".c2", width, width * 2, k2, s2, 1, rng);
    auto [k3, s3] = block_geom();
    c3_ = std::make_unique<ConvINLReLU>(name + ".c3", width * 2, width * 4, k3, s3, 1, rng);
    c4_ = std::make_unique<Conv2d>(name + ".c4", width * 4, 1, 3, 1, 1, rng);
}

Var ImageDiscriminator::probability(Graph& g, const Var& x) const {
    check_image_batch(x->value, spec_, "discriminate_image");
    Var h = leaky_relu(c1_->forward(g, x), 0.2);
    h = c2_->forward(g, h);
    h = c3_->forward(g, h);
    h = c4_->forward(g, h);  // patch logits
    return sigmoid_(mean_per_sample(h));
}

void ImageDiscriminator::collect(std::vector<Parameter*>& out) {
    c1_->collect(out);
    c2_->collect(out);
    c3_->collect(out);
    c4_->collect(out);
}

// --------------------------------------------------- LatentDiscriminator

LatentDiscriminator::LatentDiscriminator(const std::string& name, const ShapeSpec& spec,
                                         int64_t width, Rng& rng)
    : spec_(spec) {
    c1_ = std::make_unique<Conv2d>(name + ".c1", spec.c_L, width, 3, 2, 1, rng);
    c2_ = std::make_unique<Conv2d>(name + ".c2", width, width, 3, 1, 1, rng);
    c3_ = std::make_unique<Conv2d>(name + ".c3", width, width, 3, 1, 1, rng);
    c4_ = std::make_unique<Conv2d>(name + ".c4", width, 1, 3, 1, 1, rng);
}

Var LatentDiscriminator::probability(Graph& g, const Var& z) const {
    check_latent(z->value, spec_, spec_.c_L, "discriminate_liveness");
    Var h = leaky_relu(c1_->forward(g, z), 0.2);
    h = leaky_relu(c2_->forward(g, h), 0.2);
    h = leaky_relu(c3_->forward(g, h), 0.2);
    h = c4_->forward(g, h);
    return sigmoid_(mean_per_sample(h));
}

void LatentDiscriminator::collect(std::vector<Parameter*>& out) {
    c1_->collect(out);
    c2_->collect(out);
    c3_->collect(out);
    c4_->collect(out);
}

// ------------------------------------------------------ LatentClassifier

LatentClassifier::LatentClassifier(const std::string& name, const ShapeSpec& spec, Rng& rng)
    : spec_(spec) {
    head_ = std::make_unique<Linear>(name + ".head", spec.c_L, 2, rng);
}

ClassifierOutput LatentClassifier::classify(Graph& g, const Var& z_L) const {
    check_latent(z_L->value, spec_, spec_.c_L, "classify(C)");
    ClassifierOutput out;
    out.logits = head_->forward(g, global_avg_pool(z_L));
    return out;
}

void LatentClassifier::collect(std::vector<Parameter*>& out) { head_->collect(out); }

// ------------------------------------------------------- ImageClassifier

ImageClassifier::ImageClassifier(const std::string& name, const ShapeSpec& spec,
                                 const NetSizes& sizes, ClassifierVariant variant, Rng& rng)
    : spec_(spec), variant_(variant) {
    const int64_t w = sizes.cls_width;
    const int64_t widths[4] = {w, 2 * w, 4 * w, 8 * w};
    stem_ = std::make_unique<Conv2d>(name + ".stem", spec.image_channels, widths[0], 3, 2, 1, rng);
    for (int i = 0; i < 4; ++i) {
        blocks_.push_back(std::make_unique<ResidualBlock>(name + ".s" + std::to_string(i),
                                                          widths[i], rng, /*use_norm=*/false));
        if (i < 3)
            transitions_.push_back(std::make_unique<Conv2d>(name + ".t" + std::to_string(i),
                                                            widths[i], widths[i + 1], 3, 2, 1,
                                                            rng));
    }
    head_ = std::make_unique<Linear>(name + ".head", widths[3], 2, rng);
    if (variant == ClassifierVariant::L) {
        cue_ups_.push_back(std::make_unique<ConvINLReLU>(name + ".cue0", widths[0], 8, 3, 1, 1,
                                                         rng));
        cue_out_ = std::make_unique<Conv2d>(name + ".cue_out", 8, 1, 3, 1, 1, rng);
        embed_ = std::make_unique<Linear>(name + ".embed", widths[3], sizes.embed_dim, rng);
    }
}

ClassifierOutput ImageClassifier::classify(Graph& g, const Var& x) const {
    check_image_batch(x->value, spec_, "classify(M)");
    // [0,1] data mapped to [-1,1] at the stem
    Var h = mul_scalar(add_scalar(x, -0.5), 2.0);
    h = leaky_relu(stem_->forward(g, h), 0.2);
    Var f_half;  // H/2 feature, feeds the cue decoder
    for (int i = 0; i < 4; ++i) {
        h = blocks_[i]->forward(g, h);
        if (i == 0) f_half = h;
        if (i < 3) h = leaky_relu(transitions_[i]->forward(g, h), 0.2);
    }
    Var feat = global_avg_pool(h);
    ClassifierOutput out;
    out.logits = head_->forward(g, feat);
    if (variant_ == ClassifierVariant::L) {
        Var c = cue_ups_[0]->forward(g, upsample_nearest2(f_half));
        out.cue_map = cue_out_->forward(g, c);
        out.embedding = embed_->forward(g, feat);
    }
    return out;
}

void ImageClassifier::collect(std::vector<Parameter*>& out) {
    stem_->collect(out);
    for (int i = 0; i < 4; ++i) {
        blocks_[i]->collect(out);
        if (i < 3) transitions_[i]->collect(out);
    }
    head_->collect(out);
    if (variant_ == ClassifierVariant::L) {
        cue_ups_[0]->collect(out);
        cue_out_->collect(out);
        embed_->collect(out);
    }
}

// ----------------------------------------------------------- ModelBundle

ModelBundle::ModelBundle(ShapeSpec spec, NetSizes sizes, int n_targets, ClassifierVariant variant,
                         uint64_t seed)
    : spec_(spec), sizes_(sizes), n_targets_(n_targets), variant_(variant), seed_(seed) {
    spec_.validate();
    if (n_targets < 1) throw std::invalid_argument("ModelBundle: need at least one target");
    auto comp_rng = [&](const std::string& n) { return Rng(mix_seed(seed, name_hash(n))); };
    for (int d = 0; d <= n_targets; ++d) {
        const std::string tag = d == 0 ? "s" : "t" + std::to_string(d);
        DomainNets nets;
        Rng r1 = comp_rng("enc_L_" + tag);
        nets.enc_L = std::make_unique<Encoder>("enc_L_" + tag, spec_, spec_.c_L, sizes.enc_width,
                                               r1);
        Rng r2 = comp_rng("enc_C_" + tag);
        nets.enc_C = std::make_unique<Encoder>("enc_C_" + tag, spec_, spec_.c_C, sizes.enc_width,
                                               r2);
        Rng r3 = comp_rng("gen_" + tag);
        nets.gen = std::make_unique<Generator>("gen_" + tag, spec_, sizes.gen_width,
                                               sizes.gen_res_blocks, r3);
        Rng r4 = comp_rng("disc_" + tag);
        nets.disc = std::make_unique<ImageDiscriminator>("disc_" + tag, spec_, sizes.disc_width,
                                                         r4);
        domains_.push_back(std::move(nets));
    }
    for (int i = 1; i <= n_targets; ++i) {
        Rng r = comp_rng("disc_L_t" + std::to_string(i));
        latent_discs_.push_back(std::make_unique<LatentDiscriminator>(
            "disc_L_t" + std::to_string(i), spec_, sizes.disc_width, r));
    }
    Rng rc = comp_rng("cls_C");
    cls_c_ = std::make_unique<LatentClassifier>("cls_C", spec_, rc);
    Rng rm = comp_rng("cls_M");
    cls_m_ = std::make_unique<ImageClassifier>("cls_M", spec_, sizes, variant, rm);
}

std::vector<ModelBundle::NamedComponent> ModelBundle::components() const {
    std::vector<NamedComponent> out;
    for (int d = 0; d <= n_targets_; ++d) {
        const std::string tag = d == 0 ? "s" : "t" + std::to_string(d);
        out.push_back({"enc_L_" + tag, "liveness_encoder", domains_[d].enc_L.get()});
        out.push_back({"enc_C_" + tag, "content_encoder", domains_[d].enc_C.get()});
        out.push_back({"gen_" + tag, "generator", domains_[d].gen.get()});
        out.push_back({"disc_" + tag, "image_discriminator", domains_[d].disc.get()});
    }
    for (int i = 1; i <= n_targets_; ++i)
        out.push_back({"disc_L_t" + std::to_string(i), "liveness_discriminator",
                       latent_discs_[i - 1].get()});
    out.push_back({"cls_C", "latent_classifier", cls_c_.get()});
    out.push_back({"cls_M", "image_classifier", cls_m_.get()});
    return out;
}

std::vector<Parameter*> ModelBundle::stage1_parameters() {
    std::vector<Parameter*> out;
    for (const auto& c : components())
        if (c.name != "cls_M") c.module->collect(out);
    return out;
}

std::vector<Parameter*> ModelBundle::all_parameters() {
    std::vector<Parameter*> out;
    for (const auto& c : components()) c.module->collect(out);
    return out;
}

uint64_t ModelBundle::translation_checksum() const {
    uint64_t h = 14695981039346656037ULL;
    for (const auto& c : components()) {
        if (c.name == "cls_M") continue;
        std::vector<Parameter*> ps;
        c.module->collect(ps);
        for (auto* p : ps)
            h = fnv1a(p->value.data(), sizeof(double) * static_cast<size_t>(p->value.numel()), h);
    }
    return h;
}

void ModelBundle::save(const std::string& dir) const {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "cdftn-checkpoint-v1";
    manifest["byte_order"] = "little-endian";
    manifest["shape_spec"] = {{"H", spec_.H},   {"W", spec_.W}, {"image_channels", spec_.image_channels},
                              {"c_L", spec_.c_L}, {"c_C", spec_.c_C}, {"k", spec_.k}};
    manifest["sizes"] = {{"enc_width", sizes_.enc_width},   {"gen_width", sizes_.gen_width},
                         {"disc_width", sizes_.disc_width}, {"cls_width", sizes_.cls_width},
                         {"embed_dim", sizes_.embed_dim},   {"gen_res_blocks", sizes_.gen_res_blocks}};
    manifest["n_targets"] = n_targets_;
    manifest["variant"] = variant_ == ClassifierVariant::R ? "R" : "L";
    manifest["seed"] = seed_;
    json comps = json::array();
    for (const auto& c : components()) {
        json jc;
        jc["name"] = c.name;
        jc["kind"] = c.kind;
        jc["file"] = c.name + ".bin";
        json params = json::array();
        std::vector<Parameter*> ps;
        c.module->collect(ps);
        std::vector<float> payload;
        for (auto* p : ps) {
            params.push_back({{"name", p->name},
                              {"shape", p->value.shape()},
                              {"dtype", "float32"}});
            for (int64_t i = 0; i < p->value.numel(); ++i)
                payload.push_back(static_cast<float>(p->value[i]));
        }
        jc["params"] = params;
        FILE* f = std::fopen((fs::path(dir) / (c.name + ".bin")).c_str(), "wb");
        if (!f) throw std::runtime_error("checkpoint save: cannot open " + c.name + ".bin");
        if (!payload.empty()) std::fwrite(payload.data(), sizeof(float), payload.size(), f);
        std::fclose(f);
        comps.push_back(jc);
    }
    manifest["components"] = comps;
    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

ModelBundle ModelBundle::load(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("checkpoint load: missing manifest.json in " + dir);
    json manifest;
    mf >> manifest;
    ShapeSpec spec;
    const auto& js = manifest.at("shape_spec");
    spec.H = js.at("H");
    spec.W = js.at("W");
    spec.image_channels = js.at("image_channels");
    spec.c_L = js.at("c_L");
    spec.c_C = js.at("c_C");
    spec.k = js.at("k");
    NetSizes sizes;
    const auto& jz = manifest.at("sizes");
    sizes.enc_width = jz.at("enc_width");
    sizes.gen_width = jz.at("gen_width");
    sizes.disc_width = jz.at("disc_width");
    sizes.cls_width = jz.at("cls_width");
    sizes.embed_dim = jz.at("embed_dim");
    sizes.gen_res_blocks = jz.at("gen_res_blocks");
    const int n_targets = manifest.at("n_targets");
    const ClassifierVariant variant =
        manifest.at("variant") == "L" ? ClassifierVariant::L : ClassifierVariant::R;
    ModelBundle bundle(spec, sizes, n_targets, variant, manifest.at("seed").get<uint64_t>());
    bundle.load_params(dir);
    return bundle;
}

void ModelBundle::load_params(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("checkpoint load: missing manifest.json in " + dir);
    json manifest;
    mf >> manifest;
    auto comps = components();
    for (const auto& jc : manifest.at("components")) {
        const std::string name = jc.at("name");
        const NamedComponent* found = nullptr;
        for (const auto& c : comps)
            if (c.name == name) found = &c;
        if (!found)
            throw std::runtime_error("checkpoint load: unknown component '" + name + "'");
        std::vector<Parameter*> ps;
        found->module->collect(ps);
        const auto& jp = jc.at("params");
        if (jp.size() != ps.size())
            throw std::runtime_error("checkpoint load: component '" + name +
                                     "' parameter count mismatch");
        FILE* f = std::fopen((fs::path(dir) / jc.at("file").get<std::string>()).c_str(), "rb");
        if (!f)
            throw std::runtime_error("checkpoint load: component '" + name +
                                     "' payload missing");
        for (size_t i = 0; i < ps.size(); ++i) {
            const auto shape = jp[i].at("shape").get<std::vector<int64_t>>();
            if (shape != ps[i]->value.shape()) {
                std::fclose(f);
                throw std::runtime_error("checkpoint load: component '" + name +
                                         "' shape mismatch for " + ps[i]->name);
            }
            std::vector<float> buf(static_cast<size_t>(ps[i]->value.numel()));
            if (std::fread(buf.data(), sizeof(float), buf.size(), f) != buf.size()) {
                std::fclose(f);
                throw std::runtime_error("checkpoint load: component '" + name +
                                         "' payload truncated");
            }
            for (size_t j = 0; j < buf.size(); ++j)
                ps[i]->value[static_cast<int64_t>(j)] = static_cast<double>(buf[j]);
        }
        std::fclose(f);
    }
}

void save_image_classifier(const std::string& dir, ImageClassifier& m, const ShapeSpec& spec,
                           const NetSizes& sizes) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "cdftn-classifier-v1";
    manifest["byte_order"] = "little-endian";
    manifest["shape_spec"] = {{"H", spec.H},   {"W", spec.W}, {"image_channels", spec.image_channels},
                              {"c_L", spec.c_L}, {"c_C", spec.c_C}, {"k", spec.k}};
    manifest["sizes"] = {{"enc_width", sizes.enc_width},   {"gen_width", sizes.gen_width},
                         {"disc_width", sizes.disc_width}, {"cls_width", sizes.cls_width},
                         {"embed_dim", sizes.embed_dim},   {"gen_res_blocks", sizes.gen_res_blocks}};
    manifest["variant"] = m.variant() == ClassifierVariant::R ? "R" : "L";
    json params = json::array();
    std::vector<Parameter*> ps;
    m.collect(ps);
    std::vector<float> payload;
    for (auto* p : ps) {
        params.push_back({{"name", p->name}, {"shape", p->value.shape()}, {"dtype", "float32"}});
        for (int64_t i = 0; i < p->value.numel(); ++i)
            payload.push_back(static_cast<float>(p->value[i]));
    }
    manifest["params"] = params;
    manifest["file"] = "classifier.bin";
    FILE* f = std::fopen((fs::path(dir) / "classifier.bin").c_str(), "wb");
    if (!f) throw std::runtime_error("classifier save: cannot open payload in " + dir);
    if (!payload.empty()) std::fwrite(payload.data(), sizeof(float), payload.size(), f);
    std::fclose(f);
    std::ofstream mf(fs::path(dir) / "manifest.json");
    mf << manifest.dump(2) << "\n";
}

std::unique_ptr<ImageClassifier> load_image_classifier(const std::string& dir) {
    std::ifstream mf(fs::path(dir) / "manifest.json");
    if (!mf) throw std::runtime_error("classifier load: missing manifest.json in " + dir);
    json manifest;
    mf >> manifest;
    ShapeSpec spec;
    const auto& js = manifest.at("shape_spec");
    spec.H = js.at("H");
    spec.W = js.at("W");
    spec.image_channels = js.at("image_channels");
    spec.c_L = js.at("c_L");
    spec.c_C = js.at("c_C");
    spec.k = js.at("k");
    NetSizes sizes;
    const auto& jz = manifest.at("sizes");
    sizes.enc_width = jz.at("enc_width");
    sizes.gen_width = jz.at("gen_width");
    sizes.disc_width = jz.at("disc_width");
    sizes.cls_width = jz.at("cls_width");
    sizes.embed_dim = jz.at("embed_dim");
    sizes.gen_res_blocks = jz.at("gen_res_blocks");
    const ClassifierVariant variant =
        manifest.at("variant") == "L" ? ClassifierVariant::L : ClassifierVariant::R;
    Rng rng(0);
    auto m = std::make_unique<ImageClassifier>("cls_M0", spec, sizes, variant, rng);
    std::vector<Parameter*> ps;
    m->collect(ps);
    const auto& jp = manifest.at("params");
    if (jp.size() != ps.size())
        throw std::runtime_error("classifier load: parameter count mismatch in " + dir);
    FILE* f = std::fopen((fs::path(dir) / "classifier.bin").c_str(), "rb");
    if (!f) throw std::runtime_error("classifier load: payload missing in " + dir);
    for (size_t i = 0; i < ps.size(); ++i) {
        std::vector<float> buf(static_cast<size_t>(ps[i]->value.numel()));
        if (std::fread(buf.data(), sizeof(float), buf.size(), f) != buf.size()) {
            std::fclose(f);
            throw std::runtime_error("classifier load: payload truncated in " + dir);
        }
        for (size_t j = 0; j < buf.size(); ++j)
            ps[i]->value[static_cast<int64_t>(j)] = static_cast<double>(buf[j]);
    }
    std::fclose(f);
    return m;
}

}  // namespace cdftn::nets
