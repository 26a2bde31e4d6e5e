#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "cdftn/synthdomain.hpp"

using namespace cdftn;
using namespace cdftn::synthdomain;
namespace fs = std::filesystem;

TEST_SUITE_BEGIN("synthdomain");

namespace {

nets::ShapeSpec shape64() {
    nets::ShapeSpec s;
    s.H = s.W = 64;
    s.c_L = s.c_C = 8;
    s.k = 8;
    return s;
}

bool same_pixels(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (int64_t i = 0; i < a.numel(); ++i)
        if (a[i] != b[i]) return false;
    return true;
}

// naive DFT magnitude of one channel; returns the dominant non-DC frequency
// magnitude in cycles per pixel
double dominant_frequency(const Tensor& img) {
    const int64_t H = img.dim(1), W = img.dim(2);
    double best_mag = -1.0, best_freq = 0.0;
    for (int64_t u = 0; u < H; ++u)
        for (int64_t v = 0; v < W; ++v) {
            if (u == 0 && v == 0) continue;
            double re = 0.0, im = 0.0;
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) {
                    const double ang = -2.0 * M_PI *
                                       (static_cast<double>(u * y) / H +
                                        static_cast<double>(v * x) / W);
                    const double val = img.data()[y * W + x];
                    re += val * std::cos(ang);
                    im += val * std::sin(ang);
                }
            const double mag = re * re + im * im;
            if (mag > best_mag) {
                best_mag = mag;
                // signed frequencies
                const double fu = (u <= H / 2 ? u : u - H) / static_cast<double>(H);
                const double fv = (v <= W / 2 ? v : v - W) / static_cast<double>(W);
                best_freq = std::hypot(fu, fv);
            }
        }
    return best_freq;
}

}  // namespace

TEST_CASE("make_domain_spec: ranges, determinism, distinctness") {
    const auto a1 = make_domain_spec(0, 42);
    const auto a2 = make_domain_spec(0, 42);
    CHECK(a1.background_hue >= 0.0);
    CHECK(a1.background_hue <= 1.0);
    CHECK(a1.brightness >= 0.3);
    CHECK(a1.brightness <= 1.0);
    CHECK(a1.blur_sigma >= 0.0);
    for (double g : a1.channel_gain) {
        CHECK(g >= 0.5);
        CHECK(g <= 1.5);
    }
    CHECK(a1.background_hue == a2.background_hue);
    CHECK(a1.brightness == a2.brightness);
    CHECK(a1.blur_sigma == a2.blur_sigma);
    CHECK(a1.channel_gain == a2.channel_gain);

    const auto b = make_domain_spec(1, 43);
    const bool differs = a1.background_hue != b.background_hue || a1.brightness != b.brightness ||
                         a1.blur_sigma != b.blur_sigma || a1.channel_gain != b.channel_gain;
    CHECK(differs);

    CHECK_THROWS_AS(make_domain_spec(0, -1), std::invalid_argument);
}

TEST_CASE("render_sample: determinism and pixel range") {
    const auto spec = make_domain_spec(0, 7);
    const auto s1 = render_sample(spec, 1, 5, shape64());
    const auto s2 = render_sample(spec, 1, 5, shape64());
    CHECK(same_pixels(s1.image, s2.image));
    for (int64_t i = 0; i < s1.image.numel(); ++i) {
        CHECK(s1.image[i] >= 0.0);
        CHECK(s1.image[i] <= 1.0);
    }
    const auto other_seed = render_sample(spec, 1, 6, shape64());
    CHECK(!same_pixels(s1.image, other_seed.image));
}

TEST_CASE("render_sample: spoof-live difference is a period-4 stripe pattern") {
    // mid brightness, no blur or gain so the difference is pure artifact
    DomainSpec spec;
    spec.domain_id = 0;
    spec.style_seed = 3;
    spec.background_hue = 0.55;
    spec.brightness = 0.55;
    spec.blur_sigma = 0.0;
    spec.channel_gain = {1.0, 1.0, 1.0};
    const auto live = render_sample(spec, 1, 11, shape64());
    const auto spoof = render_sample(spec, 0, 11, shape64());
    Tensor diff({1, 64, 64});
    double energy = 0.0;
    for (int64_t i = 0; i < 64 * 64; ++i) {
        diff.data()[i] = spoof.image[i] - live.image[i];
        energy += diff.data()[i] * diff.data()[i];
    }
    CHECK(energy > 1.0);  // the artifact is present
    const double freq = dominant_frequency(diff);
    CHECK(freq == doctest::Approx(1.0 / kArtifactPeriodPx).epsilon(0.2));
}

TEST_CASE("render_sample: mean brightness is monotone in spec.brightness") {
    DomainSpec spec;
    spec.background_hue = 0.3;
    spec.blur_sigma = 0.4;
    spec.channel_gain = {1.0, 1.0, 1.0};
    double prev = -1.0;
    for (double b : {0.3, 0.6, 0.9}) {
        spec.brightness = b;
        const auto s = render_sample(spec, 1, 9, shape64());
        double mean = 0.0;
        for (int64_t i = 0; i < s.image.numel(); ++i) mean += s.image[i];
        mean /= static_cast<double>(s.image.numel());
        CHECK(mean > prev);
        prev = mean;
    }
}

TEST_CASE("render_sample: rejects unresolvable shapes") {
    const auto spec = make_domain_spec(0, 1);
    nets::ShapeSpec bad = shape64();
    bad.H = bad.W = 16;  // below 32
    CHECK_THROWS_AS(render_sample(spec, 1, 0, bad), std::invalid_argument);
    bad.H = 64;
    bad.W = 32;  // not square
    CHECK_THROWS_AS(render_sample(spec, 1, 0, bad), std::invalid_argument);
    CHECK_THROWS_AS(render_sample(spec, 2, 0, shape64()), std::invalid_argument);
}

TEST_CASE("generate_dataset: counts, rounding rule, determinism") {
    const auto spec = make_domain_spec(0, 5);
    const auto d = generate_dataset(spec, 100, 0.5, 0, shape64());
    CHECK(d.live_count() == 50);
    CHECK(d.spoof_count() == 50);
    const auto d2 = generate_dataset(spec, 10, 0.3, 0, shape64());
    CHECK(d2.live_count() == 3);
    CHECK(d2.spoof_count() == 7);
    const auto d3 = generate_dataset(spec, 10, 0.3, 0, shape64());
    for (int64_t i = 0; i < d2.size(); ++i) {
        CHECK(same_pixels(d2.samples[static_cast<size_t>(i)].image, d3.samples[static_cast<size_t>(i)].image));
        CHECK(d2.samples[static_cast<size_t>(i)].sample_seed == i);
    }
    CHECK_THROWS_AS(generate_dataset(spec, 1, 0.5, 0, shape64()), std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset(spec, 10, 0.0, 0, shape64()), std::invalid_argument);
}

TEST_CASE("resample_balance") {
    const auto spec = make_domain_spec(2, 9);
    const auto balanced = generate_dataset(spec, 20, 0.5, 0, shape64());
    const auto same = resample_balance(balanced, 1);
    CHECK(same.size() == balanced.size());

    const auto skewed = generate_dataset(spec, 100, 0.3, 100, shape64());  // 30 live / 70 spoof
    const auto fixed = resample_balance(skewed, 7);
    CHECK(fixed.live_count() == 70);
    CHECK(fixed.spoof_count() == 70);
    CHECK(fixed.size() == 140);
    // originals all retained, in order
    for (int64_t i = 0; i < skewed.size(); ++i)
        CHECK(same_pixels(fixed.samples[static_cast<size_t>(i)].image,
                          skewed.samples[static_cast<size_t>(i)].image));
    // appended samples are duplicates of existing live samples
    std::set<int64_t> live_seeds;
    for (const auto& s : skewed.samples)
        if (s.label == 1) live_seeds.insert(s.sample_seed);
    for (int64_t i = skewed.size(); i < fixed.size(); ++i) {
        const auto& s = fixed.samples[static_cast<size_t>(i)];
        CHECK(s.label == 1);
        CHECK(live_seeds.count(s.sample_seed) == 1);
    }

    DatasetHandle single;
    for (int i = 0; i < 10; ++i)
        single.samples.push_back(render_sample(spec, 0, i, shape64()));
    CHECK_THROWS_AS(resample_balance(single, 0), std::invalid_argument);
}

TEST_CASE("export + ingest round trip preserves layout and order") {
    const auto dir = fs::temp_directory_path() / "cdftn_test_ingest";
    fs::remove_all(dir);
    const auto spec = make_domain_spec(4, 12);
    DatasetHandle d;
    for (int i = 0; i < 3; ++i) d.samples.push_back(render_sample(spec, 1, i, shape64()));
    for (int i = 3; i < 5; ++i) d.samples.push_back(render_sample(spec, 0, i, shape64()));
    export_dataset(d, dir.string());
    CHECK(fs::exists(dir / "live" / "d4_s0_1.png"));
    CHECK(fs::exists(dir / "spoof" / "d4_s3_0.png"));

    const auto in = ingest_folder(dir.string(), shape64());
    CHECK(in.size() == 5);
    CHECK(in.origin == Origin::ingested);
    const std::vector<int> want_labels{1, 1, 1, 0, 0};
    for (size_t i = 0; i < 5; ++i) CHECK(in.samples[i].label == want_labels[i]);
    for (const auto& s : in.samples)
        for (int64_t i = 0; i < s.image.numel(); ++i) {
            CHECK(s.image[i] >= 0.0);
            CHECK(s.image[i] <= 1.0);
        }
    // 8-bit quantization is the only loss in the round trip
    for (int64_t i = 0; i < d.samples[0].image.numel(); ++i)
        CHECK(std::fabs(in.samples[0].image[i] - d.samples[0].image[i]) <= 0.5 / 255.0 + 1e-9);
    fs::remove_all(dir);
}

TEST_CASE("ingest resizes to the requested shape") {
    const auto dir = fs::temp_directory_path() / "cdftn_test_resize";
    fs::remove_all(dir);
    nets::ShapeSpec big = shape64();
    big.H = big.W = 128;
    const auto spec = make_domain_spec(0, 3);
    DatasetHandle d;
    d.samples.push_back(render_sample(spec, 1, 0, big));
    d.samples.push_back(render_sample(spec, 0, 1, big));
    export_dataset(d, dir.string());
    const auto in = ingest_folder(dir.string(), shape64());
    CHECK(in.samples[0].image.dim(1) == 64);
    CHECK(in.samples[0].image.dim(2) == 64);
    fs::remove_all(dir);
}

TEST_CASE("ingest error paths name the offender") {
    const auto dir = fs::temp_directory_path() / "cdftn_test_errors";
    fs::remove_all(dir);
    fs::create_directories(dir / "live");
    // missing spoof/
    try {
        ingest_folder(dir.string(), shape64());
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("spoof") != std::string::npos);
    }
    fs::create_directories(dir / "spoof");
    {
        std::ofstream bad(dir / "spoof" / "broken.png");
        bad << "not a png";
    }
    try {
        ingest_folder(dir.string(), shape64());
        CHECK(false);
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("broken.png") != std::string::npos);
    }
    // empty live/ is allowed; balance rejects it later
    fs::remove(dir / "spoof" / "broken.png");
    const auto spec = make_domain_spec(0, 3);
    DatasetHandle d;
    d.samples.push_back(render_sample(spec, 0, 0, shape64()));
    export_dataset(d, dir.string());
    const auto in = ingest_folder(dir.string(), shape64());
    CHECK(in.live_count() == 0);
    CHECK(in.spoof_count() == 1);
    CHECK_THROWS_AS(resample_balance(in, 0), std::invalid_argument);
    fs::remove_all(dir);
}

TEST_CASE("split_train_test is stratified and seeded") {
    const auto spec = make_domain_spec(1, 8);
    const auto d = generate_dataset(spec, 50, 0.5, 0, shape64());
    auto [train, test] = split_train_test(d, 0.2, 3);
    CHECK(train.size() == 40);
    CHECK(test.size() == 10);
    CHECK(test.live_count() == 5);
    auto [train2, test2] = split_train_test(d, 0.2, 3);
    for (int64_t i = 0; i < test.size(); ++i)
        CHECK(test.samples[static_cast<size_t>(i)].sample_seed ==
              test2.samples[static_cast<size_t>(i)].sample_seed);
}

TEST_SUITE_END();
