#pragma once

#include <Eigen/Dense>

#include "fabloop/errors.hpp"

namespace fabloop {

/// Wraps an angle to (-pi, pi].
double normalize_angle(double radians);

/// Link lengths of the arm, millimeters. All strictly positive.
struct ArmGeometry {
    double d1_mm;  // base to shoulder
    double a2_mm;  // upper arm
    double a3_mm;  // forearm
    double d6_mm;  // wrist to end-effector

    void validate() const;
};

/// Joint angles theta1..theta5, radians, each normalized to (-pi, pi]
/// on construction.
class JointAngles {
public:
    JointAngles() : t_{0, 0, 0, 0, 0} {}
    JointAngles(double t1, double t2, double t3, double t4, double t5);

    double theta1() const { return t_[0]; }
    double theta2() const { return t_[1]; }
    double theta3() const { return t_[2]; }
    double theta4() const { return t_[3]; }
    double theta5() const { return t_[4]; }

    /// Cumulative shoulder+elbow angle theta2 + theta3.
    double theta23() const { return t_[1] + t_[2]; }
    /// Cumulative pitch theta2 + theta3 + theta4.
    double theta234() const { return t_[1] + t_[2] + t_[3]; }

    Eigen::Matrix<double, 5, 1> vector() const {
        return Eigen::Matrix<double, 5, 1>(t_[0], t_[1], t_[2], t_[3], t_[4]);
    }

private:
    double t_[5];
};

/// End-effector pose: orthonormal rotation (det +1) and position in mm.
struct Pose {
    Eigen::Matrix3d rotation;
    Eigen::Vector3d position_mm;

    /// True when R^T R = I and det R = 1, both within tol.
    bool rotation_is_orthonormal(double tol = 1e-9) const;
};

enum class ElbowBranch { Up, Down };

/// Free parameters of the closed-form inversion: target position, the
/// cumulative pitch theta234 the solution must realize (0 = nozzle-down),
/// and the elbow branch.
struct IkRequest {
    Eigen::Vector3d target_mm;
    double pitch_rad = 0.0;
    ElbowBranch elbow = ElbowBranch::Up;
};

/// Forward kinematics. Position:
///   px = cos(t1) * (a2 cos t2 + a3 cos t23 + d6 sin t234)
///   py = sin(t1) * (a2 cos t2 + a3 cos t23 + d6 sin t234)
///   pz = d1 + a2 sin t2 + a3 sin t23 - d6 cos t234
/// Rotation: yaw(t1) * pitch(t234) * roll(t5), third column
/// (cos t1 sin t234, sin t1 sin t234, cos t234).
Pose forward_kinematics(const JointAngles& joints, const ArmGeometry& geom);

/// Closed-form inverse kinematics: theta1 = atan2(py, px), planar 2R
/// law-of-cosines solution for theta2/theta3 on the wrist center
/// (target minus the d6 offset along the pitch direction),
/// theta4 = pitch - theta2 - theta3, theta5 = 0.
///
/// Throws OutOfReachError when the wrist center lies outside the annulus
/// [|a2-a3|, a2+a3], SingularTargetError when the target sits exactly on
/// the base axis (px = py = 0, theta1 ambiguous).
JointAngles inverse_kinematics(const IkRequest& req, const ArmGeometry& geom);

}  // namespace fabloop
