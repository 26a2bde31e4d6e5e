#pragma once

#include <map>
#include <string>
#include <vector>

#include "cdftn/config.hpp"
#include "cdftn/eval.hpp"
#include "cdftn/synthdomain.hpp"
#include "cdftn/trainer.hpp"

namespace cdftn::pipeline {

struct TargetReport {
    int target_id = 0;
    eval::EvalReport model;     // classifier M trained on pseudo-labeled images
    eval::EvalReport baseline;  // source-only classifier M0
};

struct PipelineResult {
    std::vector<TargetReport> targets;
    std::string run_dir;
    double mean_auc_model = 0.0;
    double mean_auc_baseline = 0.0;
};

// Per-domain materialized data, shared by the CLI subcommands.
struct DomainData {
    int domain_id = 0;
    synthdomain::DatasetHandle train;  // unbalanced
    synthdomain::DatasetHandle test;
};

std::vector<DomainData> prepare_domains(const ExperimentConfig& cfg);

// Everything the training stages consume: balanced source, unlabeled target
// views in ring order (pooled for SS2BT), and the per-slot target ids used
// for pseudo-label provenance.
struct PreparedData {
    std::vector<DomainData> domains;  // [source, targets...]
    synthdomain::DatasetHandle source_train;
    std::vector<trainer::UnlabeledView> views;
    std::vector<int> slot_ids;
};
PreparedData prepare(const ExperimentConfig& cfg);

// Finds the newest epoch checkpoint under run_dir/ckpt, loads it into the
// bundle + optimizer, and returns the epoch to resume from (0 = fresh).
int resume_from_checkpoints(const std::string& run_dir, nets::ModelBundle& bundle,
                            Adam& optimizer, int epochs);

// Evaluation CSV + plots from trained models; loss-curve plots are rendered
// from the run's CSV files when present.
PipelineResult write_eval_and_plots(const ExperimentConfig& cfg, nets::ModelBundle& bundle,
                                    nets::ImageClassifier& m0, const PreparedData& data,
                                    const std::string& run_dir);

// stage 1 -> freeze -> synthesize -> stage 2 (+ source-only baseline) ->
// evaluate on held-out target test splits. Writes every run artifact under
// the config's output dir.
PipelineResult run_pipeline(const ExperimentConfig& cfg);

// Ordered artifact list a completed run directory must contain.
std::vector<std::string> run_manifest(const ExperimentConfig& cfg);
std::vector<std::string> missing_artifacts(const ExperimentConfig& cfg, const std::string& dir);

}  // namespace cdftn::pipeline
