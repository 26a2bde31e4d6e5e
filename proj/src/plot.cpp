#include "cdftn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace cdftn::plot {

namespace {

const cv::Scalar kPalette[] = {
    {180, 119, 31},  // blue (BGR)
    {14, 127, 255},  // orange
    {44, 160, 44},   // green
    {40, 39, 214},   // red
    {189, 103, 148}, // purple
    {75, 86, 140},   // brown
};

cv::Scalar palette(int i) { return kPalette[i % 6]; }

void ensure_parent(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
}

void save(const std::string& path, const cv::Mat& canvas) {
    ensure_parent(path);
    if (!cv::imwrite(path, canvas)) throw std::runtime_error("plot: failed to write " + path);
}

}  // namespace

void line_chart(const std::string& path, const std::string& title,
                const std::vector<std::string>& series_names,
                const std::vector<std::vector<double>>& series) {
    if (series.empty() || series_names.size() != series.size())
        throw std::invalid_argument("line_chart: need matching names and series");
    const int W = 900, H = 540, ml = 70, mr = 170, mt = 40, mb = 50;
    cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    double lo = 1e300, hi = -1e300;
    size_t n = 0;
    for (const auto& s : series) {
        n = std::max(n, s.size());
        for (double v : s) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (n < 2 || lo > hi) {
        lo = 0;
        hi = 1;
        n = std::max<size_t>(n, 2);
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    auto px = [&](size_t i, double v) {
        const int x = ml + static_cast<int>((W - ml - mr) * static_cast<double>(i) /
                                            static_cast<double>(n - 1));
        const int y = H - mb - static_cast<int>((H - mt - mb) * (v - lo) / (hi - lo));
        return cv::Point(x, y);
    };
    cv::rectangle(canvas, {ml, mt}, {W - mr, H - mb}, {60, 60, 60}, 1);
    for (int g = 0; g <= 4; ++g) {
        const double v = lo + (hi - lo) * g / 4.0;
        const int y = H - mb - (H - mt - mb) * g / 4;
        cv::line(canvas, {ml, y}, {W - mr, y}, {225, 225, 225}, 1);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", v);
        cv::putText(canvas, buf, {6, y + 4}, cv::FONT_HERSHEY_SIMPLEX, 0.42, {60, 60, 60}, 1);
    }
    for (size_t s = 0; s < series.size(); ++s) {
        const auto& ys = series[s];
        for (size_t i = 1; i < ys.size(); ++i)
            if (std::isfinite(ys[i - 1]) && std::isfinite(ys[i]))
                cv::line(canvas, px(i - 1, ys[i - 1]), px(i, ys[i]), palette(static_cast<int>(s)),
                         1, cv::LINE_AA);
        cv::putText(canvas, series_names[s], {W - mr + 12, mt + 18 + 20 * static_cast<int>(s)},
                    cv::FONT_HERSHEY_SIMPLEX, 0.48, palette(static_cast<int>(s)), 1);
    }
    cv::putText(canvas, title, {ml, 24}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {20, 20, 20}, 1);
    cv::putText(canvas, "step", {(W - mr + ml) / 2, H - 14}, cv::FONT_HERSHEY_SIMPLEX, 0.48,
                {60, 60, 60}, 1);
    save(path, canvas);
}

void scatter_2d(const std::string& path, const std::string& title,
                const std::vector<std::array<double, 2>>& points,
                const std::vector<int>& color_group, const std::vector<int>& marker_group) {
    if (points.size() != color_group.size() || points.size() != marker_group.size())
        throw std::invalid_argument("scatter_2d: group sizes must match points");
    const int W = 640, H = 640, m = 50;
    cv::Mat canvas(H, W, CV_8UC3, cv::Scalar(255, 255, 255));
    double lx = 1e300, hx = -1e300, ly = 1e300, hy = -1e300;
    for (const auto& p : points) {
        lx = std::min(lx, p[0]);
        hx = std::max(hx, p[0]);
        ly = std::min(ly, p[1]);
        hy = std::max(hy, p[1]);
    }
    if (points.empty() || lx > hx) {
        lx = ly = 0;
        hx = hy = 1;
    }
    if (hx - lx < 1e-12) hx = lx + 1;
    if (hy - ly < 1e-12) hy = ly + 1;
    auto px = [&](const std::array<double, 2>& p) {
        return cv::Point(m + static_cast<int>((W - 2 * m) * (p[0] - lx) / (hx - lx)),
                         H - m - static_cast<int>((H - 2 * m) * (p[1] - ly) / (hy - ly)));
    };
    cv::rectangle(canvas, {m, m}, {W - m, H - m}, {60, 60, 60}, 1);
    for (size_t i = 0; i < points.size(); ++i) {
        const cv::Point c = px(points[i]);
        const cv::Scalar col = palette(color_group[i]);
        if (marker_group[i] == 0) {
            cv::circle(canvas, c, 3, col, -1, cv::LINE_AA);
        } else {
            cv::line(canvas, c + cv::Point(-3, -3), c + cv::Point(3, 3), col, 1, cv::LINE_AA);
            cv::line(canvas, c + cv::Point(-3, 3), c + cv::Point(3, -3), col, 1, cv::LINE_AA);
        }
    }
    cv::putText(canvas, title, {m, 30}, cv::FONT_HERSHEY_SIMPLEX, 0.6, {20, 20, 20}, 1);
    save(path, canvas);
}

void image_grid(const std::string& path, const std::vector<Tensor>& images, int cols) {
    if (images.empty()) throw std::invalid_argument("image_grid: no images");
    cols = std::max(1, std::min<int>(cols, static_cast<int>(images.size())));
    const int rows = (static_cast<int>(images.size()) + cols - 1) / cols;
    const int h = static_cast<int>(images[0].dim(1));
    const int w = static_cast<int>(images[0].dim(2));
    const int pad = 2;
    cv::Mat canvas(rows * (h + pad) + pad, cols * (w + pad) + pad, CV_8UC3,
                   cv::Scalar(32, 32, 32));
    for (size_t i = 0; i < images.size(); ++i) {
        const int r = static_cast<int>(i) / cols, c = static_cast<int>(i) % cols;
        const auto& img = images[i];
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                auto& px = canvas.at<cv::Vec3b>(pad + r * (h + pad) + y, pad + c * (w + pad) + x);
                for (int ch = 0; ch < 3; ++ch) {
                    const double v = img.data()[(ch * h + y) * w + x];
                    px[2 - ch] = static_cast<unsigned char>(
                        std::min(255.0, std::max(0.0, std::round(v * 255.0))));
                }
            }
    }
    save(path, canvas);
}

}  // namespace cdftn::plot
