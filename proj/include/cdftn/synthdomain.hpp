#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "cdftn/nets.hpp"
#include "cdftn/tensor.hpp"

namespace cdftn::synthdomain {

// Style parameters of one procedurally generated domain. Equal fields render
// identical pixels for equal sample seeds.
struct DomainSpec {
    int domain_id = 0;
    int64_t style_seed = 0;
    double background_hue = 0.0;        // [0,1]
    double brightness = 0.65;           // [0.3,1.0]
    double blur_sigma = 0.0;            // pixels, >= 0
    std::array<double, 3> channel_gain = {1.0, 1.0, 1.0};  // [0.5,1.5]
};

struct Sample {
    Tensor image;  // [3,H,W], values in [0,1]
    int label = 0;  // 1 = live, 0 = spoof
    int domain_id = 0;
    int64_t sample_seed = 0;
};

enum class Origin { synthetic, ingested };

struct DatasetHandle {
    std::vector<Sample> samples;
    Origin origin = Origin::synthetic;

    int64_t live_count() const;
    int64_t spoof_count() const;
    int64_t size() const { return static_cast<int64_t>(samples.size()); }
    void assign_domain(int domain_id);
};

// Cross-domain spoof artifact constants: an additive sinusoidal stripe grid,
// identical in every domain. This is the ground-truth domain-invariant
// liveness factor.
inline constexpr double kArtifactPeriodPx = 4.0;
inline constexpr double kArtifactAmplitude = 0.15;
inline constexpr double kArtifactOrientationDeg = 30.0;

DomainSpec make_domain_spec(int domain_id, int64_t style_seed);

Sample render_sample(const DomainSpec& spec, int label, int64_t sample_seed,
                     const nets::ShapeSpec& shape);

DatasetHandle generate_dataset(const DomainSpec& spec, int64_t n, double live_fraction,
                               int64_t base_seed, const nets::ShapeSpec& shape);

// Oversamples the minority class with replacement (seeded) until the class
// counts differ by at most one; all original samples are retained.
DatasetHandle resample_balance(const DatasetHandle& d, uint64_t seed);

// Reads root/{live,spoof}/*.{png,jpg}; images resized bilinearly to the
// requested shape and scaled to [0,1]. Ordering: live block then spoof
// block, each sorted by filename.
DatasetHandle ingest_folder(const std::string& root_path, const nets::ShapeSpec& shape);

// Writes the ingestion layout: root/{live,spoof}/d{domain}_s{seed}_{label}.png
void export_dataset(const DatasetHandle& d, const std::string& root_path);

// Seeded stratified split; returns {train, test}.
std::pair<DatasetHandle, DatasetHandle> split_train_test(const DatasetHandle& d,
                                                         double test_fraction, uint64_t seed);

// Batch assembly helpers.
Tensor batch_images(const DatasetHandle& d, const std::vector<int64_t>& idx);
Tensor batch_onehot(const DatasetHandle& d, const std::vector<int64_t>& idx);
std::vector<int> batch_labels(const DatasetHandle& d, const std::vector<int64_t>& idx);

}  // namespace cdftn::synthdomain
