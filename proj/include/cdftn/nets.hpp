#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cdftn/nn.hpp"

namespace cdftn::nets {

// Tensor shape contract shared by every component of one bundle.
struct ShapeSpec {
    int64_t H = 64;
    int64_t W = 64;
    int64_t image_channels = 3;
    int64_t c_L = 64;  // liveness feature channels
    int64_t c_C = 64;  // content feature channels
    int64_t k = 8;     // latent spatial downsample factor

    void validate() const;
    int64_t latent_h() const { return H / k; }
    int64_t latent_w() const { return W / k; }
};

// Widths are config-driven; defaults follow the desk-scale layer plan.
struct NetSizes {
    int64_t enc_width = 16;
    int64_t gen_width = 32;
    int64_t disc_width = 16;
    int64_t cls_width = 32;  // first-stage width of classifier M (doubles per stage)
    int64_t embed_dim = 32;  // embedding head of the L variant
    int64_t gen_res_blocks = 2;
};

enum class ClassifierVariant { R, L };

struct LatentPair {
    Var z_L;
    Var z_C;
};

struct ClassifierOutput {
    Var logits;                     // [B,2]
    std::optional<Var> cue_map;     // [B,1,H,W], L variant only
    std::optional<Var> embedding;   // [B,e], L variant only
};

// Shared downsampling trunk used by both liveness and content encoders:
// log2(k) stride-2 conv blocks with instance norm.
class Encoder : public Module {
public:
    Encoder(const std::string& name, const ShapeSpec& spec, int64_t out_ch, int64_t width,
            Rng& rng);
    // [B,3,H,W] -> [B,out_ch,H/k,W/k]
    Var encode(Graph& g, const Var& x) const;
    void collect(std::vector<Parameter*>& out) override;
    int64_t out_channels() const { return out_ch_; }

private:
    ShapeSpec spec_;
    int64_t out_ch_;
    std::vector<std::unique_ptr<ConvINLReLU>> blocks_;
    std::unique_ptr<Conv2d> proj_;
};

// Mirror of the encoder: residual blocks at latent scale, then
// nearest-upsample + conv stages back to image resolution, tanh output.
class Generator : public Module {
public:
    Generator(const std::string& name, const ShapeSpec& spec, int64_t width, int64_t res_blocks,
              Rng& rng);
    // Consumes channel-concatenated (z_L, z_C); returns images in [0,1].
    Var generate(Graph& g, const Var& z_L, const Var& z_C) const;
    void collect(std::vector<Parameter*>& out) override;

private:
    ShapeSpec spec_;
    std::unique_ptr<ConvINLReLU> head_;
    std::vector<std::unique_ptr<ResidualBlock>> res_;
    std::vector<std::unique_ptr<ConvINLReLU>> ups_;
    std::unique_ptr<Conv2d> out_conv_;
};

// Patch-style conv stack on images, reduced to one probability per sample.
class ImageDiscriminator : public Module {
public:
    ImageDiscriminator(const std::string& name, const ShapeSpec& spec, int64_t width, Rng& rng);
    // [B,3,H,W] -> [B] probabilities in (0,1): P(sample is real)
    Var probability(Graph& g, const Var& x) const;
    void collect(std::vector<Parameter*>& out) override;

private:
    ShapeSpec spec_;
    std::unique_ptr<Conv2d> c1_, c4_;
    std::unique_ptr<ConvINLReLU> c2_, c3_;
};

// Conv stack on liveness latents; P(latent came from the source domain).
class LatentDiscriminator : public Module {
public:
    LatentDiscriminator(const std::string& name, const ShapeSpec& spec, int64_t width, Rng& rng);
    Var probability(Graph& g, const Var& z) const;
    void collect(std::vector<Parameter*>& out) override;

private:
    ShapeSpec spec_;
    std::unique_ptr<Conv2d> c1_, c2_, c3_, c4_;
};

// Classifier C: global average pool over z_L plus a linear head.
class LatentClassifier : public Module {
public:
    LatentClassifier(const std::string& name, const ShapeSpec& spec, Rng& rng);
    ClassifierOutput classify(Graph& g, const Var& z_L) const;
    void collect(std::vector<Parameter*>& out) override;

private:
    ShapeSpec spec_;
    std::unique_ptr<Linear> head_;
};

// Classifier M: small residual CNN on images. The R variant emits logits
// only; the L variant adds a spoof-cue map decoder and an embedding head.
class ImageClassifier : public Module {
public:
    ImageClassifier(const std::string& name, const ShapeSpec& spec, const NetSizes& sizes,
                    ClassifierVariant variant, Rng& rng);
    ClassifierOutput classify(Graph& g, const Var& x) const;
    void collect(std::vector<Parameter*>& out) override;
    ClassifierVariant variant() const { return variant_; }

private:
    ShapeSpec spec_;
    ClassifierVariant variant_;
    std::unique_ptr<Conv2d> stem_;
    std::vector<std::unique_ptr<ResidualBlock>> blocks_;      // one per stage, no norm
    std::vector<std::unique_ptr<Conv2d>> transitions_;        // stride-2 between stages
    std::unique_ptr<Linear> head_;
    // L variant heads
    std::vector<std::unique_ptr<ConvINLReLU>> cue_ups_;
    std::unique_ptr<Conv2d> cue_out_;
    std::unique_ptr<Linear> embed_;
};

// The per-domain component set {E^L, E^C, G, D} for the source and each
// target, the N liveness discriminators, classifier C and classifier M.
// Domain slot 0 is the source; slots 1..N are the targets in ring order.
class ModelBundle {
public:
    ModelBundle(ShapeSpec spec, NetSizes sizes, int n_targets, ClassifierVariant variant,
                uint64_t seed);

    int n_targets() const { return n_targets_; }
    const ShapeSpec& shape() const { return spec_; }
    const NetSizes& sizes() const { return sizes_; }
    ClassifierVariant variant() const { return variant_; }
    uint64_t seed() const { return seed_; }

    const Encoder& enc_liveness(int slot) const { return *domains_.at(slot).enc_L; }
    const Encoder& enc_content(int slot) const { return *domains_.at(slot).enc_C; }
    const Generator& generator(int slot) const { return *domains_.at(slot).gen; }
    const ImageDiscriminator& image_disc(int slot) const { return *domains_.at(slot).disc; }
    const LatentDiscriminator& latent_disc(int i) const { return *latent_discs_.at(i); }
    const LatentClassifier& classifier_c() const { return *cls_c_; }
    ImageClassifier& classifier_m() { return *cls_m_; }
    const ImageClassifier& classifier_m() const { return *cls_m_; }

    // Parameter groups used by the trainer's update phases.
    std::vector<Parameter*> params_enc_liveness(int slot) { return domains_[slot].enc_L->parameters(); }
    std::vector<Parameter*> params_enc_content(int slot) { return domains_[slot].enc_C->parameters(); }
    std::vector<Parameter*> params_generator(int slot) { return domains_[slot].gen->parameters(); }
    std::vector<Parameter*> params_image_disc(int slot) { return domains_[slot].disc->parameters(); }
    std::vector<Parameter*> params_latent_disc(int i) { return latent_discs_[i]->parameters(); }
    std::vector<Parameter*> params_classifier_c() { return cls_c_->parameters(); }
    std::vector<Parameter*> params_classifier_m() { return cls_m_->parameters(); }
    // every stage-1 parameter (everything except classifier M)
    std::vector<Parameter*> stage1_parameters();
    std::vector<Parameter*> all_parameters();

    // FNV-1a checksum over the stage-1 parameters (classifier M excluded:
    // it is the one component stage 2 is allowed to mutate).
    uint64_t translation_checksum() const;

    void save(const std::string& dir) const;
    static ModelBundle load(const std::string& dir);
    // read a checkpoint's payloads into this bundle (shapes must match)
    void load_params(const std::string& dir);

private:
    struct DomainNets {
        std::unique_ptr<Encoder> enc_L, enc_C;
        std::unique_ptr<Generator> gen;
        std::unique_ptr<ImageDiscriminator> disc;
    };
    struct NamedComponent {
        std::string name;
        std::string kind;
        Module* module;
    };
    std::vector<NamedComponent> components() const;

    ShapeSpec spec_;
    NetSizes sizes_;
    int n_targets_;
    ClassifierVariant variant_;
    uint64_t seed_;
    std::vector<DomainNets> domains_;  // index 0 = source
    std::vector<std::unique_ptr<LatentDiscriminator>> latent_discs_;
    std::unique_ptr<LatentClassifier> cls_c_;
    std::unique_ptr<ImageClassifier> cls_m_;
};

// Contract helpers shared by the forward ops.
void check_image_batch(const Tensor& x, const ShapeSpec& spec, const std::string& who);
void check_latent(const Tensor& z, const ShapeSpec& spec, int64_t channels,
                  const std::string& who);

// Standalone checkpointing for a lone classifier (the source-only baseline),
// same manifest + float32 payload format as the bundle.
void save_image_classifier(const std::string& dir, ImageClassifier& m, const ShapeSpec& spec,
                           const NetSizes& sizes);
std::unique_ptr<ImageClassifier> load_image_classifier(const std::string& dir);

}  // namespace cdftn::nets
