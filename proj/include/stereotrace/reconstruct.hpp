#pragma once

#include <array>
#include <string>
#include <vector>

#include "stereotrace/image.hpp"

namespace stereotrace {

struct Point3D {
    double x = 0.0;  // center-view frame, px
    double y = 0.0;
    double z = 0.0;  // depth toward the image plane, px
};

struct PixelRef {
    int u = 0;  // source left-view pixel
    int v = 0;
    double d = 0.0;  // disparity used for this point
};

struct Reconstruction {
    int width = 0;
    int height = 0;
    TiltGeometry geo;
    std::vector<Point3D> points;
    std::vector<PixelRef> provenance;  // same length/order as points

    void validate() const;
};

// Snap each masked pixel's warped position u + d to the nearest right-frame
// detection in the same row (binary at 0.5) within `radius` px, with a 3-point
// quadratic sub-pixel fit on the detection response. No candidate: mask cleared.
DisparityMap refine_disparity(const DisparityMap& disp, const DetectionMap& det_left,
                              const DetectionMap& det_right, int radius = 3);

// depth = d / (2 sin(phi/2)); phi in degrees, 0 < phi < 180.
double depth_from_disparity(double d, double phi_deg);

// Center-view convention: x = u + d/2, y = v, z = depth_from_disparity(d, phi).
// Empty mask gives an empty reconstruction.
Reconstruction triangulate(const DisparityMap& disp, const TiltGeometry& geo);

// Orthographic projection after rotating by alpha about the vertical axis
// through the image center: u = (x-cx) cos a + z sin a + cx, v = y.
std::vector<std::array<double, 2>> reproject(const Reconstruction& rec, double alpha_deg);

// ASCII PLY with vertex (x,y,z) elements and edges linking consecutive points
// of each traced curve component.
void export_ply(const Reconstruction& rec, const std::string& path);

}  // namespace stereotrace
