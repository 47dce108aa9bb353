#include "svlf/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace svlf {

namespace {

void check_shape(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height || a.channels != b.channels)
        throw std::invalid_argument("image shape mismatch");
}

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> gaussian_kernel() {
    std::vector<double> k(kWin);
    const int half = kWin / 2;
    double sum = 0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Separable Gaussian, valid region only: output is (w-10) x (h-10).
void blur_valid(const std::vector<double>& src, uint32_t w, uint32_t h,
                const std::vector<double>& k, std::vector<double>& tmp, std::vector<double>& dst) {
    const uint32_t vw = w - kWin + 1;
    tmp.assign(size_t(vw) * h, 0.0);
    for (uint32_t y = 0; y < h; ++y)
        for (uint32_t x = 0; x < vw; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * src[size_t(y) * w + x + i];
            tmp[size_t(y) * vw + x] = acc;
        }
    const uint32_t vh = h - kWin + 1;
    dst.assign(size_t(vw) * vh, 0.0);
    for (uint32_t y = 0; y < vh; ++y)
        for (uint32_t x = 0; x < vw; ++x) {
            double acc = 0;
            for (int i = 0; i < kWin; ++i) acc += k[i] * tmp[size_t(y + i) * vw + x];
            dst[size_t(y) * vw + x] = acc;
        }
}

}  // namespace

double psnr(const Image& pred, const Image& gt) {
    check_shape(pred, gt);
    if (pred.px.empty()) throw std::invalid_argument("empty image");
    double se = 0;
    for (size_t i = 0; i < pred.px.size(); ++i) {
        const double d = double(pred.px[i]) - double(gt.px[i]);
        se += d * d;
    }
    const double mse = se / pred.px.size();
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const Image& pred, const Image& gt) {
    check_shape(pred, gt);
    if (pred.width < kWin || pred.height < kWin)
        throw std::invalid_argument("image smaller than the SSIM window");

    const double c1 = kK1 * kK1;  // dynamic range 1
    const double c2 = kK2 * kK2;
    const auto kernel = gaussian_kernel();
    const uint32_t w = pred.width, h = pred.height;
    const size_t plane = size_t(w) * h;

    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    std::vector<double> mx, my, mxx, myy, mxy, tmp;

    double total = 0;
    for (uint32_t ch = 0; ch < pred.channels; ++ch) {
        for (uint32_t py = 0; py < h; ++py)
            for (uint32_t px = 0; px < w; ++px) {
                const size_t i = size_t(py) * w + px;
                x[i] = pred.at(px, py, ch);
                y[i] = gt.at(px, py, ch);
                xx[i] = x[i] * x[i];
                yy[i] = y[i] * y[i];
                xy[i] = x[i] * y[i];
            }
        blur_valid(x, w, h, kernel, tmp, mx);
        blur_valid(y, w, h, kernel, tmp, my);
        blur_valid(xx, w, h, kernel, tmp, mxx);
        blur_valid(yy, w, h, kernel, tmp, myy);
        blur_valid(xy, w, h, kernel, tmp, mxy);

        double acc = 0;
        for (size_t i = 0; i < mx.size(); ++i) {
            const double mu_x = mx[i], mu_y = my[i];
            const double var_x = mxx[i] - mu_x * mu_x;
            const double var_y = myy[i] - mu_y * mu_y;
            const double cov = mxy[i] - mu_x * mu_y;
            acc += ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) /
                   ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2));
        }
        total += acc / mx.size();
    }
    return total / pred.channels;
}

void depth_errors(const Image& pred_depth, const Image& gt_depth, const Image& gt_mask,
                  double& rmse, double& mae, bool* empty_mask) {
    check_shape(pred_depth, gt_depth);
    check_shape(pred_depth, gt_mask);
    double se = 0, ae = 0;
    size_t n = 0;
    for (size_t i = 0; i < pred_depth.px.size(); ++i) {
        if (gt_mask.px[i] < 0.5f) continue;
        const double d = double(pred_depth.px[i]) - double(gt_depth.px[i]);
        se += d * d;
        ae += std::abs(d);
        ++n;
    }
    if (empty_mask) *empty_mask = (n == 0);
    if (n == 0) {
        rmse = 0;
        mae = 0;
        return;
    }
    rmse = std::sqrt(se / n);
    mae = ae / n;
}

}  // namespace svlf
