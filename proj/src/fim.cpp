// SPDX-License-Identifier: Apache-2.0
#include "ristrack/fim.hpp"

#include <cmath>
#include <limits>

namespace ristrack
{
    CMat SignalJacobian::stacked() const
    {
        const Eigen::Index n = d_psi.cols();
        CMat d(d_psi.rows(), 3 * n);
        d << d_psi, d_mag, d_arg;
        return d;
    }

    SignalJacobian signal_jacobian_paths(const std::vector<double> &psi, const std::vector<cd> &gains, int n_antennas)
    {
        if (psi.size() != gains.size())
            throw InvalidSize("signal_jacobian: one gain per path");
        const auto paths = static_cast<Eigen::Index>(psi.size());
        SignalJacobian j;
        j.psi = psi;
        j.gains = gains;
        j.d_psi.resize(n_antennas, paths);
        j.d_mag.resize(n_antennas, paths);
        j.d_arg.resize(n_antennas, paths);
        for (Eigen::Index n = 0; n < paths; ++n)
        {
            const cd g = gains[static_cast<std::size_t>(n)];
            const double arg = std::arg(g);
            for (int k = 0; k < n_antennas; ++k)
            {
                const cd e = std::polar(1.0, kPi * k * psi[static_cast<std::size_t>(n)]);
                j.d_psi(k, n) = cd(0, kPi * k) * g * e;
                j.d_mag(k, n) = std::polar(1.0, arg) * e;
                j.d_arg(k, n) = cd(0, 1) * g * e;
            }
        }
        return j;
    }

    SignalJacobian signal_jacobian(const SystemGeometry &geom, const ChannelParams &params, std::span<const CVec> phases,
                                   const CVec &bs_bf, const Vec3 &user_pos)
    {
        if (phases.size() != geom.num_ris())
            throw InvalidSize("one phase vector per RIS is required");
        std::vector<double> psi(geom.num_ris());
        std::vector<cd> gains(geom.num_ris());
        for (std::size_t n = 0; n < geom.num_ris(); ++n)
        {
            psi[n] = psi_user(geom, n, user_pos);
            gains[n] = equivalent_gain(geom, params, n, user_pos, phases[n], bs_bf);
        }
        return signal_jacobian_paths(psi, gains, geom.user_antennas);
    }

    RMat fim_eta(const SignalJacobian &jac)
    {
        const CMat d = jac.stacked();
        const RMat j = 2.0 * (d.adjoint() * d).real();
        return 0.5 * (j + j.transpose());
    }

    RMat psi_block_schur(const RMat &j_eta, int num_paths)
    {
        const Eigen::Index n = num_paths;
        if (j_eta.rows() != 3 * n || j_eta.cols() != 3 * n)
            throw InvalidSize("psi_block_schur: expected a 3N x 3N matrix");
        const RMat a = j_eta.topLeftCorner(n, n);
        const RMat b = j_eta.topRightCorner(n, 2 * n);
        const RMat c = j_eta.bottomRightCorner(2 * n, 2 * n);
        const RMat s = a - b * solve_psd_scaled(c, b.transpose());
        return 0.5 * (s + s.transpose());
    }

    RMat transform_to_position(const SystemGeometry &geom, const std::vector<std::size_t> &ris_indices, const Vec3 &user_pos)
    {
        RMat t(static_cast<Eigen::Index>(ris_indices.size()), 3);
        for (std::size_t i = 0; i < ris_indices.size(); ++i)
            t.row(static_cast<Eigen::Index>(i)) = psi_user_grad(geom, ris_indices[i], user_pos).transpose();
        return t;
    }

    PriorFim prior_fim(const std::vector<GaussianMsg> &priors)
    {
        const auto users = static_cast<Eigen::Index>(priors.size());
        PriorFim out;
        out.j = RMat::Zero(3 * users, 3 * users);
        for (Eigen::Index u = 0; u < users; ++u)
        {
            const Mat3 cov = 0.5 * (priors[static_cast<std::size_t>(u)].cov + priors[static_cast<std::size_t>(u)].cov.transpose());
            Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
            const double tol = 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
            Vec3 inv;
            for (int i = 0; i < 3; ++i)
            {
                const double ev = es.eigenvalues()[i];
                if (ev > tol)
                    inv[i] = 1.0 / ev;
                else
                {
                    inv[i] = 0.0;
                    out.singular = true;
                }
            }
            out.j.block<3, 3>(3 * u, 3 * u) = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
        }
        return out;
    }

    RMat FimBundle::reassemble() const
    {
        const RMat j = snr * transform.transpose() * j_psi * transform + j_prior;
        return 0.5 * (j + j.transpose());
    }

    FimBundle make_bundle(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos, const GaussianMsg &prior)
    {
        FimBundle b;
        const SignalJacobian jac = signal_jacobian(sc.geom, sc.params, phases, sc.bs_bf, user_pos);
        b.j_eta = fim_eta(jac);
        b.j_psi = psi_block_schur(b.j_eta, static_cast<int>(sc.geom.num_ris()));
        std::vector<std::size_t> idx(sc.geom.num_ris());
        for (std::size_t n = 0; n < idx.size(); ++n)
            idx[n] = n;
        b.transform = transform_to_position(sc.geom, idx, user_pos);
        b.j_prior = prior_fim({prior}).j;
        b.snr = sc.params.tx_power / sc.params.noise_power;
        b.j_equiv = b.reassemble();
        return b;
    }

    double bcrb_of(const RMat &j_equiv)
    {
        Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (j_equiv + j_equiv.transpose()));
        const RVec ev = es.eigenvalues();
        const double top = std::max(ev.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
        if (!(ev[0] > 1e-14 * top))
            throw Unidentifiable("equivalent FIM is singular", es.eigenvectors().col(0));
        return ev.cwiseInverse().sum();
    }

    double bcrb(const FimBundle &bundle) { return bcrb_of(bundle.j_equiv); }

    double bcrb_total(const std::vector<FimBundle> &bundles)
    {
        double s = 0;
        for (const auto &b : bundles)
            s += bcrb(b);
        return s;
    }

    double psi_crb_single_path(int n_antennas, cd gain, double noise_power)
    {
        const RMat j = fim_eta(signal_jacobian_paths({0.0}, {gain}, n_antennas)) / noise_power;
        const RMat s = psi_block_schur(j, 1);
        if (!(s(0, 0) > 0))
            return std::numeric_limits<double>::infinity();
        return 1.0 / s(0, 0);
    }
}
