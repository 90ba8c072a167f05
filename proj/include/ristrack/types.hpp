// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

namespace ristrack
{
    using cd = std::complex<double>;
    using Vec3 = Eigen::Vector3d;
    using Mat3 = Eigen::Matrix3d;
    using CVec = Eigen::VectorXcd;
    using CMat = Eigen::MatrixXcd;
    using RVec = Eigen::VectorXd;
    using RMat = Eigen::MatrixXd;

    inline constexpr double kPi = 3.14159265358979323846;
    inline constexpr double kSpeedOfLight = 299792458.0;

    // Two positions coincide, or an angle is requested along a zero-length displacement.
    class DegenerateGeometry : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    // Array or matrix sizes that cannot describe a physical configuration.
    class InvalidSize : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // A caller broke a documented precondition (unit modulus, PSD input, ...).
    class ContractViolation : public std::invalid_argument
    {
    public:
        using std::invalid_argument::invalid_argument;
    };

    // The equivalent FIM is singular; `direction` spans (part of) its null space.
    class Unidentifiable : public std::runtime_error
    {
    public:
        Unidentifiable(const std::string &what, RVec direction)
            : std::runtime_error(what), direction_(std::move(direction)) {}
        const RVec &direction() const { return direction_; }

    private:
        RVec direction_;
    };
}
