#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "cdftn/nets.hpp"
#include "cdftn/trainer.hpp"

namespace cdftn {

// Where one domain's data comes from: a procedural style seed or a folder of
// pre-cropped images.
struct DomainConfig {
    int domain_id = 0;
    bool synthetic = true;
    int64_t style_seed = 0;
    std::string path;  // ingestion root (root/{live,spoof}/*.png|jpg)
};

struct DataConfig {
    int64_t samples_per_domain = 625;
    double live_fraction = 0.5;
    double test_fraction = 0.2;
};

struct ExperimentConfig {
    trainer::Mode mode = trainer::Mode::SS2ST;
    DomainConfig source;
    std::vector<DomainConfig> targets;
    nets::ShapeSpec shape;
    nets::NetSizes sizes;
    DataConfig data;
    trainer::StageOneConfig stage1;
    trainer::StageTwoConfig stage2;
    uint64_t seed = 0;
    int synthesis_multiplicity = 1;
    std::string output_dir = "runs/exp";

    void validate() const;
    trainer::Topology topology() const;
    // output_dir resolved against the CDFTN_OUTPUT_ROOT env var when relative
    std::string resolved_output_dir() const;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;
};

}  // namespace cdftn
