#pragma once

#include <cstdint>

#include "svlf/image.hpp"

namespace svlf {

struct MetricReport {
    double psnr = 0;        // dB
    double ssim = 0;
    double depth_rmse = 0;  // scene units; reports show x1000
    double depth_mae = 0;
    size_t color_pixels = 0;
    size_t depth_pixels = 0;
    bool empty_mask = false;
};

constexpr double kPsnrCap = 99.0;  // returned when MSE is exactly zero

// 10*log10(1/MSE) over all channels; inputs in [0,1], same shape.
double psnr(const Image& pred, const Image& gt);

// Per-channel windowed SSIM: 11x11 Gaussian (sigma 1.5), K1=0.01, K2=0.03,
// dynamic range 1, valid-region convolution, averaged over channels/pixels.
// Throws when the image is smaller than the window.
double ssim(const Image& pred, const Image& gt);

// RMSE/MAE over pixels where gt_mask == 1; empty mask reports (0,0) and sets
// the flag.
void depth_errors(const Image& pred_depth, const Image& gt_depth, const Image& gt_mask,
                  double& rmse, double& mae, bool* empty_mask = nullptr);

}  // namespace svlf
