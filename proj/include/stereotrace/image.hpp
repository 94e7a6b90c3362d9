#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stereotrace/common.hpp"

namespace stereotrace {

// Grayscale image, intensities normalized to [0, 1].
struct ImageGrid {
    int width = 0;
    int height = 0;
    std::vector<double> values;

    ImageGrid() = default;
    ImageGrid(int w, int h, double fill = 0.0)
        : width(w), height(h), values(size_t(w) * h, fill) {
        require(w > 0 && h > 0, "image dimensions must be positive");
    }

    double& at(int u, int v) { return values[size_t(v) * width + u]; }
    double at(int u, int v) const { return values[size_t(v) * width + u]; }
    bool in_bounds(int u, int v) const {
        return u >= 0 && u < width && v >= 0 && v < height;
    }
    size_t pixel_count() const { return values.size(); }

    // Bilinear sample; out-of-bounds reads return `fill`.
    double sample(double x, double y, double fill) const;
    double median_intensity() const;
    void validate() const;
};

// Per-pixel probability of curviline membership.
struct DetectionMap {
    int width = 0;
    int height = 0;
    std::vector<double> probs;

    DetectionMap() = default;
    DetectionMap(int w, int h, double fill = 0.0)
        : width(w), height(h), probs(size_t(w) * h, fill) {}

    double& at(int u, int v) { return probs[size_t(v) * width + u]; }
    double at(int u, int v) const { return probs[size_t(v) * width + u]; }
    void validate() const;
};

// Real-valued disparities with a per-pixel validity mask.
struct DisparityMap {
    int width = 0;
    int height = 0;
    std::vector<double> disp;
    std::vector<uint8_t> mask;

    DisparityMap() = default;
    DisparityMap(int w, int h)
        : width(w), height(h), disp(size_t(w) * h, 0.0), mask(size_t(w) * h, 0) {}

    double& d(int u, int v) { return disp[size_t(v) * width + u]; }
    double d(int u, int v) const { return disp[size_t(v) * width + u]; }
    uint8_t& valid(int u, int v) { return mask[size_t(v) * width + u]; }
    uint8_t valid(int u, int v) const { return mask[size_t(v) * width + u]; }
    size_t valid_count() const;
    void validate() const;
};

// Acquisition geometry of a tilt pair: inter-view angle phi, tilt-axis
// deviation theta from vertical, translational shift between the views.
struct TiltGeometry {
    double phi_deg = 8.0;
    double theta_deg = 0.0;
    double t_x = 0.0;
    double t_y = 0.0;

    void validate() const {
        require(phi_deg > 0.0 && phi_deg < 90.0, "phi must be in (0, 90) degrees");
        require(std::abs(theta_deg) <= 10.0, "|theta| must be <= 10 degrees");
    }
};

// --- file I/O -------------------------------------------------------------

void write_pgm(const ImageGrid& img, const std::string& path);
ImageGrid read_pgm(const std::string& path);

void write_png(const ImageGrid& img, const std::string& path);
ImageGrid read_png(const std::string& path);

// Writes by extension (.pgm or .png); reads likewise.
void write_image(const ImageGrid& img, const std::string& path);
ImageGrid read_image(const std::string& path);

// Columns: u, v, d, valid — one row per pixel.
void write_disparity_csv(const DisparityMap& dm, const std::string& path);
DisparityMap read_disparity_csv(const std::string& path);

inline ImageGrid to_image(const DetectionMap& dm) {
    ImageGrid img(dm.width, dm.height);
    img.values = dm.probs;
    return img;
}

inline DetectionMap to_detection(const ImageGrid& img) {
    DetectionMap dm(img.width, img.height);
    dm.probs = img.values;
    return dm;
}

}  // namespace stereotrace
