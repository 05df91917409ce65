#pragma once

#include "cosy/geometry.h"
#include "cosy/symmetry.h"

namespace cosy {

// Output of a render-and-compare refiner step: image-space translation,
// relative depth and a 6D rotation.
struct UpdateParams {
  double v_x = 0.0;  // pixels of the cropped camera
  double v_y = 0.0;
  double v_z = 1.0;
  Vec3 e1 = Vec3::UnitX();
  Vec3 e2 = Vec3::UnitY();
};

struct CropBox {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
};

// Pinhole intrinsics of the fictive camera seeing the resized crop.
struct CropCamera {
  double fx_c = 1.0;
  double fy_c = 1.0;
  double cx_c = 0.0;
  double cy_c = 0.0;
  CropBox box;  // source image pixels
  int width = 320;
  int height = 240;

  CameraIntrinsics Intrinsics() const;
  // Source pixel to crop pixel.
  Vec2 ToCrop(const Vec2& uv) const;
};

inline constexpr double kCropPadding = 1.4;
inline constexpr int kCropWidth = 320;
inline constexpr int kCropHeight = 240;

// Padded bounding box of the projected points, widened to the output aspect
// ratio and resized to kCropWidth x kCropHeight. Throws BehindCamera.
CropCamera CropFromPose(const Pose& t, const PointSet& points,
                        const CameraIntrinsics& k,
                        double padding = kCropPadding, int width = kCropWidth,
                        int height = kCropHeight);

// z' = v_z z, x' = (v_x / fx_c + x / z) z', y' likewise, R' = R(e1, e2) R.
Pose ApplyUpdate(const Pose& t_k, const UpdateParams& p, const CropCamera& crop);

// Parameters with ApplyUpdate(t_k, TargetUpdate(t_k, t_gt, crop), crop) = t_gt.
UpdateParams TargetUpdate(const Pose& t_k, const Pose& t_gt,
                          const CropCamera& crop);

struct DisentangledLoss {
  double xy = 0.0;
  double depth = 0.0;
  double rotation = 0.0;
  double total() const { return xy + depth + rotation; }
};

// Each term swaps one block of the predicted parameters into the target
// parameters and measures the resulting pose against t_gt with the L1
// symmetric distance.
DisentangledLoss ComputeDisentangledLoss(const Pose& t_k, const UpdateParams& p,
                                         const Pose& t_gt,
                                         const PointSet& points,
                                         const SymmetryGroup& group,
                                         const CropCamera& crop);

// Identity rotation, 1 m deep, on the ray through the box center.
Pose CanonicalInit(const CropBox& bbox, const CameraIntrinsics& k);

}  // namespace cosy
