// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/types.hpp"


namespace ristrack
{
    // Variance used for "no information" directions, m^2.
    inline constexpr double kLargeVariance = 1e8;

    // Moment form N(mean, cov) over a 3-D position.
    struct GaussianMsg
    {
        Vec3 mean = Vec3::Zero();
        Mat3 cov = Mat3::Identity() * kLargeVariance;

        static GaussianMsg uninformative(const Vec3 &at = Vec3::Zero())
        {
            return GaussianMsg{at, Mat3::Identity() * kLargeVariance};
        }
        bool is_uninformative() const { return cov.diagonal().minCoeff() >= 0.5 * kLargeVariance; }
    };

    // Information form: precision * x = shift at the mode.
    struct InfoMsg
    {
        Mat3 precision = Mat3::Zero();
        Vec3 shift = Vec3::Zero();

        InfoMsg &operator+=(const InfoMsg &o)
        {
            precision += o.precision;
            shift += o.shift;
            return *this;
        }
        friend InfoMsg operator+(InfoMsg a, const InfoMsg &b) { return a += b; }
        friend InfoMsg operator*(double s, InfoMsg a)
        {
            a.precision *= s;
            a.shift *= s;
            return a;
        }
    };

    InfoMsg to_info(const GaussianMsg &g);

    // A zero-precision InfoMsg maps to the uninformative message centred at `fallback_mean`.
    GaussianMsg to_moment(const InfoMsg &m, const Vec3 &fallback_mean = Vec3::Zero());

    // Information form of the convolution with N(0, add_cov); exact for singular precision.
    InfoMsg convolve(const InfoMsg &m, const Mat3 &add_cov);

    // Symmetrize and clip eigenvalues below zero.
    Mat3 clip_psd(const Mat3 &m);

    double min_eigenvalue(const Mat3 &m);

    // Minimum-norm solution of a x = b for symmetric PSD a, scaled to unit diagonal first so that
    // parameter blocks of very different magnitude survive the rank threshold.
    RMat solve_psd_scaled(const RMat &a, const RMat &b);
}
