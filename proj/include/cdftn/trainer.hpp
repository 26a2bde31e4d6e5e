#pragma once

#include <string>
#include <vector>

#include "cdftn/losses.hpp"
#include "cdftn/nets.hpp"
#include "cdftn/synthdomain.hpp"

namespace cdftn::trainer {

enum class Mode { SS2ST, SS2BT, SS2MT };
std::string mode_name(Mode m);
Mode mode_from_name(const std::string& s);

// Source plus ordered targets. The liveness ring is [source, t_1, ..., t_N].
struct Topology {
    Mode mode = Mode::SS2ST;
    int source = 0;
    std::vector<int> targets;

    void validate() const;
    // number of target slots the bundle carries (SS2BT pools into one)
    int ring_size() const { return mode == Mode::SS2MT ? static_cast<int>(targets.size()) : 1; }
};

struct StageOneConfig {
    int epochs = 30;
    int batch_size = 2;
    double learning_rate = 1e-3;
    double beta1 = 0.5;
    double beta2 = 0.999;
    losses::LossWeights weights;
    uint64_t seed = 0;
    bool saturating_generator_loss = false;

    void validate() const;
};

struct StageTwoConfig {
    int epochs = 5;
    int batch_size = 32;
    nets::ClassifierVariant variant = nets::ClassifierVariant::R;
    losses::LossWeights weights;
    uint64_t seed = 0;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double triplet_margin = 0.3;

    void validate() const;
};

// Label-free view over a dataset: the only face of target-domain data the
// training stages ever see.
class UnlabeledView {
public:
    UnlabeledView() = default;
    explicit UnlabeledView(const synthdomain::DatasetHandle& d) { append(d); }
    void append(const synthdomain::DatasetHandle& d);
    int64_t size() const { return static_cast<int64_t>(images_.size()); }
    const Tensor& image(int64_t i) const { return images_.at(static_cast<size_t>(i)); }
    Tensor batch(const std::vector<int64_t>& idx) const;

private:
    std::vector<Tensor> images_;
};

// Synthesized target-style images carrying their donor source labels.
struct PseudoLabeledSet {
    synthdomain::DatasetHandle data;
    // (source sample index, target domain id) per image; -2 marks a pooled
    // SS2BT target
    std::vector<std::pair<int64_t, int>> provenance;
};

// Instrumented log of encode/generate/discriminate calls, used to check the
// ring structure. arg semantics per op:
//   enc_L/enc_C: actor = encoder slot, arg1 = image source (slot d for real
//     x_d, 100+d for translated x_hat_d)
//   gen: actor = generator slot, arg1/arg2 = provenance codes of z_L / z_C
//   disc: actor = domain slot, arg1 = 0 real / 1 fake
//   disc_L: actor = target index 1..N, arg1 = 0 source latent / 1 target latent
//   cls: classifier C on source latents
struct CallTrace {
    struct Event {
        std::string op;
        int actor = -1;
        int arg1 = -1;
        int arg2 = -1;
        bool operator==(const Event&) const = default;
    };
    std::vector<Event> events;
    void add(std::string op, int actor, int arg1 = -1, int arg2 = -1) {
        events.push_back({std::move(op), actor, arg1, arg2});
    }
    std::string to_string() const;
};

inline constexpr int kHatCode = 100;  // trace code offset for translated images

// Executes the stage-1 alternating minimax updates. One instance owns the
// Adam state for the whole stage.
class Stage1Trainer {
public:
    Stage1Trainer(nets::ModelBundle& bundle, StageOneConfig cfg, Topology topo);

    // One batch per domain in ring order; the source batch carries labels.
    losses::LossBreakdown step(const Tensor& x_s, const Tensor& y_s_onehot,
                               const std::vector<Tensor>& x_t);

    // Full loop: epochs x ceil(max_n/batch) steps with seeded shuffling, a
    // checkpoint per epoch and a per-step loss-history CSV when run_dir is
    // non-empty. start_epoch > 0 resumes from an existing checkpoint.
    std::vector<losses::LossBreakdown> train(const synthdomain::DatasetHandle& source,
                                             const std::vector<UnlabeledView>& targets,
                                             const std::string& run_dir = "",
                                             int start_epoch = 0);

    void set_trace(CallTrace* t) { trace_ = t; }
    Adam& optimizer() { return opt_; }
    const Topology& topology() const { return topo_; }

    // Exposed pieces of the Eq-1 minimax for the sign-discipline checks.
    double eq1_value(const Tensor& x_s, const std::vector<Tensor>& x_t);
    void eq1_discriminator_step(const Tensor& x_s, const std::vector<Tensor>& x_t);
    void eq1_encoder_step(const Tensor& x_s, const std::vector<Tensor>& x_t);

private:
    losses::LossBreakdown step_single(const Tensor& x_s, const Tensor& y, const Tensor& x_t);
    losses::LossBreakdown step_ring(const Tensor& x_s, const Tensor& y,
                                    const std::vector<Tensor>& x_t);
    double phase_cls(const Tensor& x_s, const Tensor& y);
    Tensor encode_value(int slot, bool liveness, const Tensor& x, int trace_src);
    void check_finite(double v, const char* component) const;

    nets::ModelBundle& bundle_;
    StageOneConfig cfg_;
    Topology topo_;
    Adam opt_;
    CallTrace* trace_ = nullptr;
};

// Pseudo-labeled synthesis on a frozen bundle: every source sample, paired
// with cyclically chosen target content images, for every target slot.
PseudoLabeledSet synthesize_pseudo(const nets::ModelBundle& bundle,
                                   const synthdomain::DatasetHandle& source,
                                   const std::vector<UnlabeledView>& targets,
                                   const std::vector<int>& target_ids, int multiplicity = 1);

// Stage-2 classifier training (variant R or L per cfg).
std::vector<losses::LossBreakdown> train_classifier(nets::ImageClassifier& m,
                                                    const synthdomain::DatasetHandle& data,
                                                    const StageTwoConfig& cfg,
                                                    const std::string& csv_path = "");

std::vector<losses::LossBreakdown> train_stage2(nets::ImageClassifier& m,
                                                const PseudoLabeledSet& pseudo,
                                                const StageTwoConfig& cfg,
                                                const std::string& csv_path = "");

// P(live) for every sample, from softmax channel 1 of classifier M.
std::vector<double> score_images(const nets::ImageClassifier& m,
                                 const synthdomain::DatasetHandle& ds, int batch = 32);

// Liveness latents of a dataset through one encoder, flattened to [n, c*h*w].
Tensor liveness_latents(const nets::ModelBundle& bundle, int slot,
                        const std::vector<Tensor>& images);

}  // namespace cdftn::trainer
