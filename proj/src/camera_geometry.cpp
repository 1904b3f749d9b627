#include "shotdirector/camera_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/Dense>

#include "shotdirector/errors.hpp"

namespace shotdirector {

CameraIntrinsics::CameraIntrinsics(double fx, double fy, double cx, double cy, int width, int height)
    : fx_(fx), fy_(fy), cx_(cx), cy_(cy), width_(width), height_(height) {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw DomainError("intrinsics: focal lengths must be finite and positive");
  }
  if (!std::isfinite(cx) || !std::isfinite(cy)) throw DomainError("intrinsics: principal point must be finite");
  if (width < 1 || height < 1) throw DomainError("intrinsics: image size must be at least 1x1");
}

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k;
  k << fx_, 0.0, cx_, 0.0, fy_, cy_, 0.0, 0.0, 1.0;
  return k;
}

std::string rotation_defect(const Mat3& r, double tol) {
  if (!r.allFinite()) return "rotation has non-finite entries";
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho > tol) {
    std::ostringstream ss;
    ss << "rotation is not orthonormal (max |R^T R - I| = " << ortho << ")";
    return ss.str();
  }
  const double det = r.determinant();
  if (std::abs(det - 1.0) > tol) {
    std::ostringstream ss;
    ss << "rotation determinant is " << det << ", expected +1";
    return ss.str();
  }
  return {};
}

CameraExtrinsics::CameraExtrinsics(const Mat3& rotation, const Vec3& translation)
    : rotation_(rotation), translation_(translation) {
  if (auto defect = rotation_defect(rotation); !defect.empty()) throw DomainError("extrinsics: " + defect);
  if (!translation.allFinite()) throw DomainError("extrinsics: translation has non-finite entries");
}

CameraExtrinsics CameraExtrinsics::unchecked(const Mat3& rotation, const Vec3& translation) {
  CameraExtrinsics e;
  e.rotation_ = rotation;
  e.translation_ = translation;
  return e;
}

std::array<double, 12> CameraExtrinsics::flatten() const {
  std::array<double, 12> out{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out[r * 4 + c] = rotation_(r, c);
    out[r * 4 + 3] = translation_(r);
  }
  return out;
}

void check_unique_frames(std::span<const CameraPose> trajectory) {
  std::set<std::size_t> seen;
  for (const auto& p : trajectory) {
    if (!seen.insert(p.frame_index).second) {
      throw DomainError("trajectory: duplicate frame_index " + std::to_string(p.frame_index));
    }
  }
}

namespace {

// K^-1 [u, v, 1]^T without forming the inverse.
Vec3 camera_ray(const CameraIntrinsics& k, double u, double v) {
  return Vec3((u - k.cx()) / k.fx(), (v - k.cy()) / k.fy(), 1.0);
}

PluckerCell plucker_cell(const CameraPose& pose, double u, double v) {
  const Vec3 d = (pose.extrinsics.rotation() * camera_ray(pose.intrinsics, u, v)).normalized();
  const Vec3& o = pose.extrinsics.translation();
  const Vec3 m = o.cross(d);
  return {m.x(), m.y(), m.z(), d.x(), d.y(), d.z()};
}

void check_grid(std::size_t h, std::size_t w) {
  if (h < 1 || w < 1) throw DomainError("plucker_map: grid must be at least 1x1");
}

}  // namespace

Vec3 ray_direction(const CameraPose& pose, double u, double v) {
  const auto& k = pose.intrinsics;
  if (!(u >= 0.0 && u < k.width() && v >= 0.0 && v < k.height())) {
    std::ostringstream ss;
    ss << "ray_direction: pixel (" << u << ", " << v << ") outside " << k.width() << "x" << k.height() << " image";
    throw DomainError(ss.str());
  }
  return (pose.extrinsics.rotation() * camera_ray(k, u, v)).normalized();
}

std::array<double, 2> sample_pixel(const CameraIntrinsics& k, std::size_t h, std::size_t w, std::size_t i,
                                   std::size_t j, PixelSampling sampling) {
  const double off = sampling == PixelSampling::Center ? 0.5 : 0.0;
  const double u = (static_cast<double>(j) + off) * k.width() / static_cast<double>(w);
  const double v = (static_cast<double>(i) + off) * k.height() / static_cast<double>(h);
  return {u, v};
}

PluckerMap plucker_map_serial(const CameraPose& pose, std::size_t h, std::size_t w, PixelSampling sampling) {
  check_grid(h, w);
  PluckerMap map{h, w, std::vector<PluckerCell>(h * w)};
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const auto [u, v] = sample_pixel(pose.intrinsics, h, w, i, j, sampling);
      map.at(i, j) = plucker_cell(pose, u, v);
    }
  }
  return map;
}

PluckerMap plucker_map(const CameraPose& pose, std::size_t h, std::size_t w, PixelSampling sampling) {
  check_grid(h, w);
  PluckerMap map{h, w, std::vector<PluckerCell>(h * w)};
  const auto rows = static_cast<std::ptrdiff_t>(h);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    for (std::size_t j = 0; j < w; ++j) {
      const auto [u, v] = sample_pixel(pose.intrinsics, h, w, i, j, sampling);
      map.at(i, j) = plucker_cell(pose, u, v);
    }
  }
  return map;
}

CameraExtrinsics relative_pose(const CameraExtrinsics& reference, const CameraExtrinsics& target) {
  const Mat3 rt = reference.rotation().transpose();
  return CameraExtrinsics::unchecked(rt * target.rotation(),
                                     rt * (target.translation() - reference.translation()));
}

namespace {

void check_pair(std::span<const CameraExtrinsics> a, std::span<const CameraExtrinsics> b, const char* who) {
  if (a.empty() || b.empty()) throw DomainError(std::string(who) + ": empty trajectory");
  if (a.size() != b.size()) {
    throw DomainError(std::string(who) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                      std::to_string(b.size()) + ")");
  }
}

// Geodesic angle of gt^T * est. atan2 of the skew and symmetric parts stays
// exact at 0 for identical inputs and well conditioned near 0 and pi.
double geodesic_angle(const Mat3& gt, const Mat3& est) {
  Mat3 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += gt(k, r) * est(k, c);
      m(r, c) = s;
    }
  }
  const double cos_part = (m(0, 0) + m(1, 1) + m(2, 2) - 1.0) / 2.0;
  const Vec3 skew(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  return std::atan2(skew.norm() / 2.0, cos_part);
}

std::vector<Vec3> scale_normalized(std::span<const CameraExtrinsics> traj) {
  double max_norm = 0.0;
  for (const auto& e : traj) max_norm = std::max(max_norm, e.translation().norm());
  std::vector<Vec3> out;
  out.reserve(traj.size());
  for (const auto& e : traj) out.push_back(max_norm > 0.0 ? Vec3(e.translation() / max_norm) : e.translation());
  return out;
}

}  // namespace

double rot_err(std::span<const CameraExtrinsics> estimated, std::span<const CameraExtrinsics> ground_truth) {
  check_pair(estimated, ground_truth, "rot_err");
  double sum = 0.0;
  for (std::size_t i = 0; i < estimated.size(); ++i) {
    sum += geodesic_angle(ground_truth[i].rotation(), estimated[i].rotation());
  }
  return sum / static_cast<double>(estimated.size());
}

double trans_err(std::span<const CameraExtrinsics> estimated, std::span<const CameraExtrinsics> ground_truth) {
  check_pair(estimated, ground_truth, "trans_err");
  const auto est = scale_normalized(estimated);
  const auto gt = scale_normalized(ground_truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) sum += (est[i] - gt[i]).norm();
  return sum / static_cast<double>(est.size());
}

}  // namespace shotdirector
