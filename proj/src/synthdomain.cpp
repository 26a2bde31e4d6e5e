#include "cdftn/synthdomain.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "cdftn/rng.hpp"

namespace cdftn::synthdomain {

namespace fs = std::filesystem;

int64_t DatasetHandle::live_count() const {
    int64_t n = 0;
    for (const auto& s : samples) n += (s.label == 1);
    return n;
}

int64_t DatasetHandle::spoof_count() const { return size() - live_count(); }

void DatasetHandle::assign_domain(int domain_id) {
    for (auto& s : samples) s.domain_id = domain_id;
}

namespace {

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    h = h - std::floor(h);
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

void check_render_shape(const nets::ShapeSpec& shape) {
    const int64_t H = shape.H, W = shape.W;
    if (H != W || H < 32 || (H & (H - 1)) != 0)
        throw std::invalid_argument(
            "render_sample: shape must be square, a power of two and >= 32 "
            "(the stripe artifact is unresolvable below that), got " +
            std::to_string(H) + "x" + std::to_string(W));
}

// separable Gaussian blur with mirrored borders, sigma in pixels
void gaussian_blur_inplace(Tensor& img, double sigma) {
    if (sigma <= 0.0) return;
    const int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
    const int64_t r = static_cast<int64_t>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(static_cast<size_t>(2 * r + 1));
    double norm = 0.0;
    for (int64_t i = -r; i <= r; ++i) {
        const double v = std::exp(-0.5 * (static_cast<double>(i) * i) / (sigma * sigma));
        kernel[static_cast<size_t>(i + r)] = v;
        norm += v;
    }
    for (auto& v : kernel) v /= norm;
    auto mirror = [](int64_t i, int64_t n) {
        while (i < 0 || i >= n) {
            if (i < 0) i = -i - 1;
            if (i >= n) i = 2 * n - 1 - i;
        }
        return i;
    };
    std::vector<double> tmp(static_cast<size_t>(H * W));
    for (int64_t c = 0; c < C; ++c) {
        double* plane = img.data() + c * H * W;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int64_t i = -r; i <= r; ++i)
                    acc += kernel[static_cast<size_t>(i + r)] * plane[y * W + mirror(x + i, W)];
                tmp[static_cast<size_t>(y * W + x)] = acc;
            }
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                double acc = 0.0;
                for (int64_t i = -r; i <= r; ++i)
                    acc += kernel[static_cast<size_t>(i + r)] * tmp[static_cast<size_t>(mirror(y + i, H) * W + x)];
                plane[y * W + x] = acc;
            }
    }
}

}  // namespace

DomainSpec make_domain_spec(int domain_id, int64_t style_seed) {
    if (style_seed < 0) throw std::invalid_argument("make_domain_spec: style_seed must be >= 0");
    Rng rng(mix_seed(0xd06a14c0deULL, static_cast<uint64_t>(style_seed),
                     static_cast<uint64_t>(domain_id)));
    DomainSpec spec;
    spec.domain_id = domain_id;
    spec.style_seed = style_seed;
    spec.background_hue = rng.uniform(0.0, 1.0);
    spec.brightness = rng.uniform(0.3, 1.0);
    spec.blur_sigma = rng.uniform(0.0, 2.0);
    for (auto& g : spec.channel_gain) g = rng.uniform(0.5, 1.5);
    return spec;
}

Sample render_sample(const DomainSpec& spec, int label, int64_t sample_seed,
                     const nets::ShapeSpec& shape) {
    check_render_shape(shape);
    if (label != 0 && label != 1)
        throw std::invalid_argument("render_sample: label must be 0 or 1");
    const int64_t H = shape.H, W = shape.W;
    // content randomness never depends on the label, so the live/spoof
    // difference image is exactly the artifact layer
    Rng rng(mix_seed(0xc047e47ULL, static_cast<uint64_t>(spec.style_seed),
                     static_cast<uint64_t>(spec.domain_id), static_cast<uint64_t>(sample_seed)));

    Tensor img({3, H, W});
    const auto bg = hsv_to_rgb(spec.background_hue, 0.45, spec.brightness);
    // smooth background with a diagonal brightness ramp
    const double ramp = rng.uniform(-0.12, 0.12);
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            const double t = ramp * (static_cast<double>(x + y) / static_cast<double>(H + W) - 0.5);
            for (int64_t c = 0; c < 3; ++c)
                img.data()[(c * H + y) * W + x] = bg[static_cast<size_t>(c)] + t;
        }

    // shaded ellipse "face proxy" with seed-dependent position and size
    const double cx = (0.5 + rng.uniform(-0.12, 0.12)) * static_cast<double>(W);
    const double cy = (0.5 + rng.uniform(-0.12, 0.12)) * static_cast<double>(H);
    const double ax = rng.uniform(0.18, 0.30) * static_cast<double>(W);
    const double ay = rng.uniform(0.22, 0.34) * static_cast<double>(H);
    const double phi = rng.uniform(0.0, 3.14159265358979323846);
    const double face_hue = rng.uniform(0.04, 0.12);
    const double face_sat = rng.uniform(0.25, 0.5);
    const auto face = hsv_to_rgb(face_hue, face_sat, std::min(1.0, spec.brightness * 1.1));
    const double cphi = std::cos(phi), sphi = std::sin(phi);
    for (int64_t y = 0; y < H; ++y)
        for (int64_t x = 0; x < W; ++x) {
            const double dx = static_cast<double>(x) - cx;
            const double dy = static_cast<double>(y) - cy;
            const double u = (dx * cphi + dy * sphi) / ax;
            const double v = (-dx * sphi + dy * cphi) / ay;
            const double q = u * u + v * v;
            if (q <= 1.0) {
                const double shade = 0.72 + 0.28 * (u + 1.0) * 0.5 + 0.12 * (1.0 - q);
                for (int64_t c = 0; c < 3; ++c)
                    img.data()[(c * H + y) * W + x] = face[static_cast<size_t>(c)] * shade;
            }
        }

    // per-channel gain, then the domain-specific blur
    for (int64_t c = 0; c < 3; ++c) {
        double* plane = img.data() + c * H * W;
        for (int64_t i = 0; i < H * W; ++i) plane[i] *= spec.channel_gain[static_cast<size_t>(c)];
    }
    gaussian_blur_inplace(img, spec.blur_sigma);

    // liveness layer: spoof samples carry the fixed stripe artifact
    if (label == 0) {
        const double theta = kArtifactOrientationDeg * 3.14159265358979323846 / 180.0;
        const double fx = std::cos(theta) / kArtifactPeriodPx;
        const double fy = std::sin(theta) / kArtifactPeriodPx;
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                const double s = kArtifactAmplitude *
                                 std::sin(2.0 * 3.14159265358979323846 *
                                          (fx * static_cast<double>(x) + fy * static_cast<double>(y)));
                for (int64_t c = 0; c < 3; ++c) img.data()[(c * H + y) * W + x] += s;
            }
    }

    for (auto& v : img.vec()) v = std::min(1.0, std::max(0.0, v));

    Sample s;
    s.image = std::move(img);
    s.label = label;
    s.domain_id = spec.domain_id;
    s.sample_seed = sample_seed;
    return s;
}

DatasetHandle generate_dataset(const DomainSpec& spec, int64_t n, double live_fraction,
                               int64_t base_seed, const nets::ShapeSpec& shape) {
    if (n < 2) throw std::invalid_argument("generate_dataset: n must be >= 2");
    if (!(live_fraction > 0.0 && live_fraction < 1.0))
        throw std::invalid_argument("generate_dataset: live_fraction must be in (0,1)");
    const int64_t n_live = std::llround(static_cast<double>(n) * live_fraction);
    DatasetHandle d;
    d.origin = Origin::synthetic;
    d.samples.reserve(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const int label = i < n_live ? 1 : 0;
        d.samples.push_back(render_sample(spec, label, base_seed + i, shape));
    }
    return d;
}

DatasetHandle resample_balance(const DatasetHandle& d, uint64_t seed) {
    const int64_t live = d.live_count();
    const int64_t spoof = d.spoof_count();
    if (live == 0 || spoof == 0)
        throw std::invalid_argument("resample_balance: need at least one sample of each class (" +
                                    std::to_string(live) + " live, " + std::to_string(spoof) +
                                    " spoof)");
    DatasetHandle out = d;
    if (live == spoof) return out;
    const int minority = live < spoof ? 1 : 0;
    std::vector<int64_t> pool;
    for (int64_t i = 0; i < d.size(); ++i)
        if (d.samples[static_cast<size_t>(i)].label == minority) pool.push_back(i);
    Rng rng(mix_seed(0xba1a4ce5ULL, seed));
    int64_t deficit = std::llabs(live - spoof);
    while (deficit-- > 0) {
        const int64_t pick = pool[static_cast<size_t>(rng.below(pool.size()))];
        out.samples.push_back(d.samples[static_cast<size_t>(pick)]);
    }
    return out;
}

DatasetHandle ingest_folder(const std::string& root_path, const nets::ShapeSpec& shape) {
    DatasetHandle d;
    d.origin = Origin::ingested;
    int64_t index = 0;
    for (const auto& [sub, label] : {std::pair<const char*, int>{"live", 1}, {"spoof", 0}}) {
        const fs::path dir = fs::path(root_path) / sub;
        if (!fs::is_directory(dir))
            throw std::runtime_error("ingest_folder: missing subdirectory '" + std::string(sub) +
                                     "' under " + root_path);
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (!e.is_regular_file()) continue;
            std::string ext = e.path().extension().string();
            std::transform(ext.begin(), ext.end(), ext.begin(),
                           [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
                files.push_back(e.path().string());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            cv::Mat m = cv::imread(f, cv::IMREAD_COLOR);
            if (m.empty()) throw std::runtime_error("ingest_folder: cannot decode " + f);
            cv::Mat resized;
            cv::resize(m, resized, cv::Size(static_cast<int>(shape.W), static_cast<int>(shape.H)),
                       0, 0, cv::INTER_LINEAR);
            Sample s;
            s.image = Tensor({3, shape.H, shape.W});
            for (int64_t y = 0; y < shape.H; ++y)
                for (int64_t x = 0; x < shape.W; ++x) {
                    const auto& px = resized.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x));
                    // OpenCV loads BGR
                    s.image.data()[(0 * shape.H + y) * shape.W + x] = px[2] / 255.0;
                    s.image.data()[(1 * shape.H + y) * shape.W + x] = px[1] / 255.0;
                    s.image.data()[(2 * shape.H + y) * shape.W + x] = px[0] / 255.0;
                }
            s.label = label;
            s.domain_id = -1;
            s.sample_seed = index++;
            d.samples.push_back(std::move(s));
        }
    }
    return d;
}

void export_dataset(const DatasetHandle& d, const std::string& root_path) {
    fs::create_directories(fs::path(root_path) / "live");
    fs::create_directories(fs::path(root_path) / "spoof");
    for (const auto& s : d.samples) {
        const int64_t H = s.image.dim(1), W = s.image.dim(2);
        cv::Mat m(static_cast<int>(H), static_cast<int>(W), CV_8UC3);
        for (int64_t y = 0; y < H; ++y)
            for (int64_t x = 0; x < W; ++x) {
                auto& px = m.at<cv::Vec3b>(static_cast<int>(y), static_cast<int>(x));
                for (int c = 0; c < 3; ++c) {
                    const double v = s.image.data()[(c * H + y) * W + x];
                    px[2 - c] = static_cast<unsigned char>(
                        std::min(255.0, std::max(0.0, std::round(v * 255.0))));
                }
            }
        const std::string name = "d" + std::to_string(s.domain_id) + "_s" +
                                 std::to_string(s.sample_seed) + "_" + std::to_string(s.label) +
                                 ".png";
        const fs::path out = fs::path(root_path) / (s.label == 1 ? "live" : "spoof") / name;
        if (!cv::imwrite(out.string(), m))
            throw std::runtime_error("export_dataset: failed to write " + out.string());
    }
}

std::pair<DatasetHandle, DatasetHandle> split_train_test(const DatasetHandle& d,
                                                         double test_fraction, uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0))
        throw std::invalid_argument("split_train_test: test_fraction must be in [0,1)");
    DatasetHandle train, test;
    train.origin = test.origin = d.origin;
    // stratified by class so both splits keep the class balance
    for (int label : {1, 0}) {
        std::vector<int64_t> idx;
        for (int64_t i = 0; i < d.size(); ++i)
            if (d.samples[static_cast<size_t>(i)].label == label) idx.push_back(i);
        Rng rng(mix_seed(0x5b117ULL, seed, static_cast<uint64_t>(label)));
        rng.shuffle(idx);
        const int64_t n_test = std::llround(static_cast<double>(idx.size()) * test_fraction);
        for (int64_t i = 0; i < static_cast<int64_t>(idx.size()); ++i) {
            auto& dst = i < n_test ? test : train;
            dst.samples.push_back(d.samples[static_cast<size_t>(idx[static_cast<size_t>(i)])]);
        }
    }
    return {std::move(train), std::move(test)};
}

Tensor batch_images(const DatasetHandle& d, const std::vector<int64_t>& idx) {
    if (idx.empty()) throw std::invalid_argument("batch_images: empty index list");
    const auto& first = d.samples.at(static_cast<size_t>(idx[0])).image;
    const int64_t C = first.dim(0), H = first.dim(1), W = first.dim(2);
    Tensor out({static_cast<int64_t>(idx.size()), C, H, W});
    for (size_t b = 0; b < idx.size(); ++b) {
        const auto& img = d.samples.at(static_cast<size_t>(idx[b])).image;
        std::copy_n(img.data(), C * H * W, out.data() + static_cast<int64_t>(b) * C * H * W);
    }
    return out;
}

Tensor batch_onehot(const DatasetHandle& d, const std::vector<int64_t>& idx) {
    Tensor out({static_cast<int64_t>(idx.size()), 2});
    for (size_t b = 0; b < idx.size(); ++b) {
        const int label = d.samples.at(static_cast<size_t>(idx[b])).label;
        out.at2(static_cast<int64_t>(b), label) = 1.0;
    }
    return out;
}

std::vector<int> batch_labels(const DatasetHandle& d, const std::vector<int64_t>& idx) {
    std::vector<int> out;
    out.reserve(idx.size());
    for (int64_t i : idx) out.push_back(d.samples.at(static_cast<size_t>(i)).label);
    return out;
}

}  // namespace cdftn::synthdomain
