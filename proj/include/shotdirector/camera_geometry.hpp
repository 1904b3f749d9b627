#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace shotdirector {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

/// Pinhole intrinsics in pixels. Validated on construction.
class CameraIntrinsics {
public:
  CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height);

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }

  Mat3 matrix() const;

  bool operator==(const CameraIntrinsics&) const = default;

private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
};

/// Camera-to-world rigid transform. `translation` is the camera center in
/// world coordinates. The rotation must be orthonormal with det +1 to
/// within kRotationTolerance.
class CameraExtrinsics {
public:
  static constexpr double kRotationTolerance = 1e-6;

  CameraExtrinsics() : rotation_(Mat3::Identity()), translation_(Vec3::Zero()) {}
  CameraExtrinsics(const Mat3& rotation, const Vec3& translation);

  /// Skips the rotation check. For values derived from already validated
  /// poses, where rounding can drift past the tolerance.
  static CameraExtrinsics unchecked(const Mat3& rotation, const Vec3& translation);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }

  /// [R | t] flattened row-major: r00 r01 r02 t0 r10 ... t2.
  std::array<double, 12> flatten() const;

  bool operator==(const CameraExtrinsics& o) const {
    return rotation_ == o.rotation_ && translation_ == o.translation_;
  }

private:
  Mat3 rotation_;
  Vec3 translation_;
};

/// Returns an empty string when `r` is a proper rotation within `tol`,
/// otherwise a description of the failed check.
std::string rotation_defect(const Mat3& r, double tol = CameraExtrinsics::kRotationTolerance);

struct CameraPose {
  CameraIntrinsics intrinsics;
  CameraExtrinsics extrinsics;
  std::size_t frame_index = 0;

  bool operator==(const CameraPose&) const = default;
};

using Trajectory = std::vector<CameraPose>;

/// Throws DomainError if two poses share a frame_index.
void check_unique_frames(std::span<const CameraPose> trajectory);

using PluckerCell = std::array<double, 6>;

/// h x w grid of Plücker ray coordinates (o x d, d), row-major.
struct PluckerMap {
  std::size_t h = 0;
  std::size_t w = 0;
  std::vector<PluckerCell> cells;

  const PluckerCell& at(std::size_t i, std::size_t j) const { return cells[i * w + j]; }
  PluckerCell& at(std::size_t i, std::size_t j) { return cells[i * w + j]; }

  bool operator==(const PluckerMap&) const = default;
};

enum class PixelSampling {
  TopLeft,  ///< cell (i, j) samples pixel (j*width/w, i*height/h)
  Center,   ///< cell (i, j) samples pixel ((j+0.5)*width/w, (i+0.5)*height/h)
};

/// Unit world-space direction of the ray through pixel (u, v):
/// normalize(R K^-1 [u, v, 1]^T). Throws DomainError outside the image.
Vec3 ray_direction(const CameraPose& pose, double u, double v);

/// Pixel coordinate sampled by grid cell (i, j).
std::array<double, 2> sample_pixel(const CameraIntrinsics& k, std::size_t h, std::size_t w,
                                   std::size_t i, std::size_t j, PixelSampling sampling);

/// Plücker ray map, rows computed in parallel.
PluckerMap plucker_map(const CameraPose& pose, std::size_t h, std::size_t w,
                       PixelSampling sampling = PixelSampling::TopLeft);

/// Serial reference for plucker_map; kept for equivalence tests and benchmarks.
PluckerMap plucker_map_serial(const CameraPose& pose, std::size_t h, std::size_t w,
                              PixelSampling sampling = PixelSampling::TopLeft);

/// Pose of `target` in the frame of `reference`.
CameraExtrinsics relative_pose(const CameraExtrinsics& reference, const CameraExtrinsics& target);

/// Mean geodesic rotation angle in radians, in [0, pi].
double rot_err(std::span<const CameraExtrinsics> estimated, std::span<const CameraExtrinsics> ground_truth);

/// Mean L2 distance between translations after scaling each trajectory by
/// its maximum translation norm. All-zero trajectories are left unscaled.
double trans_err(std::span<const CameraExtrinsics> estimated, std::span<const CameraExtrinsics> ground_truth);

}  // namespace shotdirector
