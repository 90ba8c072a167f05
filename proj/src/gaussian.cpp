// SPDX-License-Identifier: Apache-2.0
#include "ristrack/gaussian.hpp"

#include <algorithm>

namespace ristrack
{
    Mat3 clip_psd(const Mat3 &m)
    {
        const Mat3 s = 0.5 * (m + m.transpose());
        Eigen::SelfAdjointEigenSolver<Mat3> es(s);
        const Vec3 ev = es.eigenvalues().cwiseMax(0.0);
        return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
    }

    double min_eigenvalue(const Mat3 &m)
    {
        Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    InfoMsg to_info(const GaussianMsg &g)
    {
        InfoMsg out;
        Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (g.cov + g.cov.transpose()));
        Vec3 inv = Vec3::Zero();
        for (int i = 0; i < 3; ++i)
        {
            const double ev = es.eigenvalues()[i];
            inv[i] = ev > 0 ? 1.0 / ev : 0.0;
        }
        out.precision = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
        out.shift = out.precision * g.mean;
        return out;
    }

    GaussianMsg to_moment(const InfoMsg &m, const Vec3 &fallback_mean)
    {
        const Mat3 p = 0.5 * (m.precision + m.precision.transpose());
        if (p.norm() == 0.0)
            return GaussianMsg::uninformative(fallback_mean);
        Eigen::SelfAdjointEigenSolver<Mat3> es(p);
        // Directions without information get the large-variance floor.
        const double floor = 1.0 / kLargeVariance;
        Vec3 inv;
        for (int i = 0; i < 3; ++i)
            inv[i] = 1.0 / std::max(es.eigenvalues()[i], floor);
        const Mat3 cov = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
        GaussianMsg g;
        // Project the fallback into the unconstrained directions so the mean stays finite.
        Vec3 mean = Vec3::Zero();
        const Vec3 rhs = es.eigenvectors().transpose() * m.shift;
        const Vec3 fb = es.eigenvectors().transpose() * fallback_mean;
        for (int i = 0; i < 3; ++i)
            mean[i] = es.eigenvalues()[i] > floor ? rhs[i] / es.eigenvalues()[i] : fb[i];
        g.mean = es.eigenvectors() * mean;
        g.cov = 0.5 * (cov + cov.transpose());
        return g;
    }

    InfoMsg convolve(const InfoMsg &m, const Mat3 &add_cov)
    {
        // (Sigma + C)^{-1} = (I + Lambda C)^{-1} Lambda, shift' = (I + Lambda C)^{-1} shift.
        const Mat3 k = Mat3::Identity() + m.precision * add_cov;
        const Eigen::PartialPivLU<Mat3> lu(k);
        InfoMsg out;
        const Mat3 p = lu.solve(m.precision);
        out.precision = 0.5 * (p + p.transpose());
        out.shift = lu.solve(m.shift);
        return out;
    }

    RMat solve_psd_scaled(const RMat &a, const RMat &b)
    {
        RVec d(a.rows());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            d[i] = a(i, i) > 0 ? 1.0 / std::sqrt(a(i, i)) : 0.0;
        const RMat scaled = d.asDiagonal() * a * d.asDiagonal();
        return d.asDiagonal() * scaled.completeOrthogonalDecomposition().solve(d.asDiagonal() * b);
    }
}
