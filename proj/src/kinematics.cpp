#include "fabloop/kinematics.hpp"

#include <cmath>

namespace fabloop {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

bool all_finite(const Eigen::Vector3d& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}
}  // namespace

double normalize_angle(double radians) {
    if (!std::isfinite(radians)) throw ValidationError("angle must be finite");
    double a = std::remainder(radians, kTwoPi);  // [-pi, pi]
    if (a <= -kPi) a += kTwoPi;
    return a;
}

void ArmGeometry::validate() const {
    const double lengths[] = {d1_mm, a2_mm, a3_mm, d6_mm};
    const char* names[] = {"d1_mm", "a2_mm", "a3_mm", "d6_mm"};
    for (int i = 0; i < 4; ++i) {
        if (!std::isfinite(lengths[i]) || lengths[i] <= 0.0)
            throw ValidationError(std::string("ArmGeometry: ") + names[i] +
                                  " must be finite and > 0");
    }
}

JointAngles::JointAngles(double t1, double t2, double t3, double t4, double t5) {
    const double raw[5] = {t1, t2, t3, t4, t5};
    for (int i = 0; i < 5; ++i) t_[i] = normalize_angle(raw[i]);
}

bool Pose::rotation_is_orthonormal(double tol) const {
    const Eigen::Matrix3d err = rotation.transpose() * rotation - Eigen::Matrix3d::Identity();
    if (err.cwiseAbs().maxCoeff() > tol) return false;
    return std::abs(rotation.determinant() - 1.0) <= tol;
}

Pose forward_kinematics(const JointAngles& joints, const ArmGeometry& geom) {
    geom.validate();

    const double t1 = joints.theta1();
    const double t2 = joints.theta2();
    const double t23 = joints.theta23();
    const double t234 = joints.theta234();
    const double t5 = joints.theta5();

    const double c1 = std::cos(t1), s1 = std::sin(t1);
    const double c2 = std::cos(t2), s2 = std::sin(t2);
    const double c23 = std::cos(t23), s23 = std::sin(t23);
    const double c234 = std::cos(t234), s234 = std::sin(t234);
    const double c5 = std::cos(t5), s5 = std::sin(t5);

    Pose pose;

    // Planar reach along the arm plane plus the tool offset.
    const double reach = geom.a2_mm * c2 + geom.a3_mm * c23 + geom.d6_mm * s234;
    pose.position_mm = Eigen::Vector3d(
        c1 * reach,
        s1 * reach,
        geom.d1_mm + geom.a2_mm * s2 + geom.a3_mm * s23 - geom.d6_mm * c234);

    // yaw(t1) * pitch(t234) * roll(t5); the third column is the tool
    // direction (c1 s234, s1 s234, c234). Orthonormal with det +1 for
    // every joint configuration.
    pose.rotation << c1 * c234 * c5 - s1 * s5, -c1 * c234 * s5 - s1 * c5, c1 * s234,
                     s1 * c234 * c5 + c1 * s5, -s1 * c234 * s5 + c1 * c5, s1 * s234,
                     -s234 * c5,                s234 * s5,                c234;

    return pose;
}

JointAngles inverse_kinematics(const IkRequest& req, const ArmGeometry& geom) {
    geom.validate();
    if (!all_finite(req.target_mm) || !std::isfinite(req.pitch_rad))
        throw ValidationError("inverse_kinematics: target and pitch must be finite");

    const double px = req.target_mm.x();
    const double py = req.target_mm.y();
    const double pz = req.target_mm.z();

    if (px == 0.0 && py == 0.0)
        throw SingularTargetError("inverse_kinematics: target on the base axis, theta1 ambiguous");

    const double t1 = std::atan2(py, px);
    const double t234 = req.pitch_rad;

    // Wrist center: subtract the d6 offset along the pitch direction.
    // In the arm plane (r outward along theta1, s up from the shoulder):
    const double r = std::hypot(px, py) - geom.d6_mm * std::sin(t234);
    const double s = pz - geom.d1_mm + geom.d6_mm * std::cos(t234);

    const double a2 = geom.a2_mm, a3 = geom.a3_mm;
    const double dist2 = r * r + s * s;
    const double max_reach = a2 + a3;
    const double min_reach = std::abs(a2 - a3);

    double cos_t3 = (dist2 - a2 * a2 - a3 * a3) / (2.0 * a2 * a3);
    // Tolerate floating-point spill just past the workspace boundary.
    constexpr double kBoundaryTol = 1e-12;
    if (cos_t3 > 1.0) {
        if (cos_t3 > 1.0 + kBoundaryTol)
            throw OutOfReachError("inverse_kinematics: wrist center beyond a2 + a3");
        cos_t3 = 1.0;
    } else if (cos_t3 < -1.0) {
        if (cos_t3 < -1.0 - kBoundaryTol)
            throw OutOfReachError("inverse_kinematics: wrist center inside |a2 - a3|");
        cos_t3 = -1.0;
    }
    if (dist2 > max_reach * max_reach * (1.0 + kBoundaryTol))
        throw OutOfReachError("inverse_kinematics: wrist center beyond a2 + a3");
    if (dist2 < min_reach * min_reach * (1.0 - kBoundaryTol))
        throw OutOfReachError("inverse_kinematics: wrist center inside |a2 - a3|");

    const double mag_t3 = std::acos(cos_t3);
    const double t3 = (req.elbow == ElbowBranch::Up) ? -mag_t3 : mag_t3;

    const double t2 = std::atan2(s, r) - std::atan2(a3 * std::sin(t3), a2 + a3 * std::cos(t3));
    const double t4 = t234 - t2 - t3;

    return JointAngles(t1, t2, t3, t4, 0.0);
}

}  // namespace fabloop
