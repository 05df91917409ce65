#include <doctest.h>

#include <numbers>

#include "cosy/errors.h"
#include "cosy/singleview.h"
#include "testing.h"

using namespace cosy;

namespace {

const CameraIntrinsics kCam{600, 580, 320, 240, 640, 480};

Pose RandomCameraPose(Rng& rng) {
  return {RandomRotation(rng),
          {rng.Uniform(-0.2, 0.2), rng.Uniform(-0.15, 0.15), rng.Uniform(0.5, 1.5)}};
}

double Gap(const Pose& a, const Pose& b) {
  return (a.rotation - b.rotation).norm() + (a.translation - b.translation).norm();
}

}  // namespace

TEST_CASE("update and target round trip") {
  Rng rng(31);
  const ModelDb db = BuiltinModels();
  const PointSet& pts = db.at("drill").points;
  for (int i = 0; i < 200; ++i) {
    const Pose tk = RandomCameraPose(rng), tgt = RandomCameraPose(rng);
    const CropCamera crop = CropFromPose(tk, pts, kCam);
    CHECK(Gap(ApplyUpdate(tk, TargetUpdate(tk, tgt, crop), crop), tgt) < 1e-9);
  }
}

TEST_CASE("update fixed point and depth scaling") {
  Rng rng(32);
  const Pose tk = RandomCameraPose(rng);
  const CropCamera crop = CropFromPose(tk, BuiltinModels().at("box").points, kCam);
  CHECK(Gap(ApplyUpdate(tk, UpdateParams{}, crop), tk) < 1e-15);

  UpdateParams twice;
  twice.v_z = 2.0;
  const Pose t2 = ApplyUpdate(tk, twice, crop);
  CHECK((t2.translation - 2.0 * tk.translation).norm() < 1e-15);

  const UpdateParams zero = TargetUpdate(tk, tk, crop);
  CHECK(zero.v_x == 0.0);
  CHECK(zero.v_y == 0.0);
  CHECK(zero.v_z == 1.0);
  CHECK((RotationFrom6d(zero.e1, zero.e2) - Mat3::Identity()).norm() < 1e-12);

  Pose deeper = tk;
  deeper.translation *= 2.0;
  const UpdateParams depth = TargetUpdate(tk, deeper, crop);
  CHECK(depth.v_z == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(depth.v_x) < 1e-9);
  CHECK(std::abs(depth.v_y) < 1e-9);
}

TEST_CASE("update matches the equations written out") {
  Rng rng(33);
  for (int i = 0; i < 50; ++i) {
    const Pose tk = RandomCameraPose(rng);
    CropCamera crop;
    crop.fx_c = rng.Uniform(300, 900);
    crop.fy_c = rng.Uniform(300, 900);
    UpdateParams p;
    p.v_x = rng.Uniform(-20, 20);
    p.v_y = rng.Uniform(-20, 20);
    p.v_z = rng.Uniform(0.8, 1.2);
    p.e1 = Vec3(1, 0.1, -0.05) + 0.1 * Vec3(rng.Normal(), rng.Normal(), rng.Normal());
    p.e2 = Vec3(0.02, 1, 0.1);
    const Pose out = ApplyUpdate(tk, p, crop);
    const double x = tk.translation.x(), y = tk.translation.y(), z = tk.translation.z();
    const double z1 = p.v_z * z;
    CHECK(out.translation.z() == doctest::Approx(z1).epsilon(1e-14));
    CHECK(out.translation.x() == doctest::Approx((p.v_x / crop.fx_c + x / z) * z1).epsilon(1e-14));
    CHECK(out.translation.y() == doctest::Approx((p.v_y / crop.fy_c + y / z) * z1).epsilon(1e-14));
    // Gram-Schmidt by hand.
    const Vec3 a = p.e1.normalized();
    const Vec3 c = a.cross(p.e2).normalized();
    const Vec3 b = c.cross(a);
    Mat3 r;
    r << a, b, c;
    CHECK((out.rotation - r * tk.rotation).norm() < 1e-12);
  }
}

TEST_CASE("crop geometry") {
  const ModelDb db = BuiltinModels();
  const PointSet& pts = db.at("can").points;
  const Pose centered{Mat3::Identity(), {0, 0, 1.0}};
  const CameraIntrinsics k{600, 600, 320, 240, 640, 480};
  const CropCamera c = CropFromPose(centered, pts, k);
  CHECK(0.5 * (c.box.x0 + c.box.x1) == doctest::Approx(320));
  CHECK(0.5 * (c.box.y0 + c.box.y1) == doctest::Approx(240));
  CHECK((c.box.x1 - c.box.x0) / (c.box.y1 - c.box.y0) == doctest::Approx(4.0 / 3.0));

  Pose half = centered;
  half.translation.z() = 0.5;
  // A fronto-parallel square doubles its image width at half the depth.
  PointSet square(3, 4);
  square << -0.05, 0.05, 0.05, -0.05, -0.05, -0.05, 0.05, 0.05, 0, 0, 0, 0;
  const PixelSet uv1 = Project(k, TransformPoints(centered, square));
  const PixelSet uv2 = Project(k, TransformPoints(half, square));
  const double w1 = uv1.row(0).maxCoeff() - uv1.row(0).minCoeff();
  const double w2 = uv2.row(0).maxCoeff() - uv2.row(0).minCoeff();
  CHECK(w2 == doctest::Approx(2 * w1).epsilon(1e-6));

  Rng rng(34);
  for (int i = 0; i < 20; ++i) {
    const Pose t = RandomCameraPose(rng);
    const CropCamera crop = CropFromPose(t, pts, kCam);
    const PointSet cam_pts = TransformPoints(t, pts);
    const PixelSet src = Project(kCam, cam_pts);
    const PixelSet dst = Project(crop.Intrinsics(), cam_pts);
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      CHECK((crop.ToCrop(src.col(j)) - dst.col(j)).norm() < 1e-9);
    }
  }
  Pose behind = centered;
  behind.translation.z() = -1.0;
  CHECK_THROWS_AS(CropFromPose(behind, pts, k), BehindCamera);
}

TEST_CASE("disentangled loss") {
  Rng rng(35);
  const ModelDb db = BuiltinModels();
  for (const std::string label : {"drill", "prism"}) {
    const PointSet& pts = db.at(label).points;
    const SymmetryGroup g = Discretize(db.at(label).symmetries);
    const Pose tk = RandomCameraPose(rng);
    Pose tgt = tk;
    tgt.translation += Vec3(0.01, -0.02, 0.05);
    tgt.rotation = RotX(0.2) * tk.rotation;
    const CropCamera crop = CropFromPose(tk, pts, kCam);
    const UpdateParams target = TargetUpdate(tk, tgt, crop);
    const DisentangledLoss zero = ComputeDisentangledLoss(tk, target, tgt, pts, g, crop);
    CHECK(zero.total() < 1e-9);

    UpdateParams wrong_z = target;
    wrong_z.v_z *= 1.1;
    const DisentangledLoss lz = ComputeDisentangledLoss(tk, wrong_z, tgt, pts, g, crop);
    CHECK(lz.xy < 1e-9);
    CHECK(lz.rotation < 1e-9);
    CHECK(lz.depth > 1e-3);

    UpdateParams wrong_xy = target;
    wrong_xy.v_x += 5.0;
    const DisentangledLoss lxy = ComputeDisentangledLoss(tk, wrong_xy, tgt, pts, g, crop);
    CHECK(lxy.xy > 1e-4);
    CHECK(lxy.depth < 1e-9);
    CHECK(lxy.rotation < 1e-9);

    UpdateParams wrong_r = target;
    const Mat3 r = RotY(0.3) * RotationFrom6d(target.e1, target.e2);
    wrong_r.e1 = r.col(0);
    wrong_r.e2 = r.col(1);
    const DisentangledLoss lr = ComputeDisentangledLoss(tk, wrong_r, tgt, pts, g, crop);
    CHECK(lr.rotation > 1e-4);
    CHECK(lr.xy < 1e-9);
    CHECK(lr.depth < 1e-9);
  }
  // Rotation off by an exact object symmetry costs nothing.
  const PointSet& pts = db.at("prism").points;
  const SymmetryGroup g = Discretize(db.at("prism").symmetries);
  const Pose tk = RandomCameraPose(rng);
  const Pose tgt{RotZ(0.1) * tk.rotation, tk.translation};
  const CropCamera crop = CropFromPose(tk, pts, kCam);
  UpdateParams p = TargetUpdate(tk, tgt, crop);
  const Mat3 sym_r = tgt.rotation * g.elements[3].rotation * tk.rotation.transpose();
  p.e1 = sym_r.col(0);
  p.e2 = sym_r.col(1);
  CHECK(ComputeDisentangledLoss(tk, p, tgt, pts, g, crop).rotation < 1e-9);
}

TEST_CASE("canonical initialization") {
  const Pose p = CanonicalInit({300, 200, 340, 280}, kCam);
  CHECK(p.rotation == Mat3::Identity());
  CHECK(p.translation.z() == 1.0);
  const Pose c = CanonicalInit({310, 230, 330, 250}, kCam);
  CHECK(c.translation.norm() == doctest::Approx(1.0));
  CHECK(std::abs(c.translation.x()) < 1e-15);
  const CameraIntrinsics k{600, 600, 320, 240, 640, 480};
  const Pose x = CanonicalInit({360, 230, 400, 250}, k);
  CHECK((x.translation - Vec3(0.1, 0, 1)).norm() < 1e-15);
  Rng rng(36);
  for (int i = 0; i < 20; ++i) {
    const CropBox box{rng.Uniform(0, 300), rng.Uniform(0, 200), rng.Uniform(320, 640),
                      rng.Uniform(240, 480)};
    Vec2 uv;
    REQUIRE(ProjectPoint(kCam, CanonicalInit(box, kCam).translation, &uv));
    CHECK((uv - Vec2(0.5 * (box.x0 + box.x1), 0.5 * (box.y0 + box.y1))).norm() < 1e-9);
  }
}
