// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/channel.hpp"
#include "ristrack/gaussian.hpp"

#include <span>
#include <vector>

namespace ristrack
{
    // Derivatives of the noiseless (power-normalized) observation
    //   mu_k = sum_n |rho_n| exp(j (pi k psi_n + arg rho_n))
    // with respect to each path parameter. Column n of each matrix belongs to path n.
    struct SignalJacobian
    {
        CMat d_psi; // N_U x N
        CMat d_mag; // N_U x N
        CMat d_arg; // N_U x N
        std::vector<double> psi;
        std::vector<cd> gains;

        // Stacked as [psi_0..psi_{N-1}, |rho|_0.., arg_0..].
        CMat stacked() const;
    };

    SignalJacobian signal_jacobian_paths(const std::vector<double> &psi, const std::vector<cd> &gains, int n_antennas);

    // Geometry-driven version: psi and rho_bar (without sqrt(P)) follow from the channel model.
    SignalJacobian signal_jacobian(const SystemGeometry &geom, const ChannelParams &params, std::span<const CVec> phases,
                                   const CVec &bs_bf, const Vec3 &user_pos);

    // Complex-observation FIM per unit SNR: J_eta = 2 Re{D^H D}. The full FIM is (P / sigma^2) J_eta.
    RMat fim_eta(const SignalJacobian &jac);

    // Schur complement of J_eta onto its psi block (gains marginalized). Pseudo-inverse when the
    // gain block is singular (zero gains).
    RMat psi_block_schur(const RMat &j_eta, int num_paths);

    // Rows: d psi_user(ris) / d user_pos for every RIS index listed.
    RMat transform_to_position(const SystemGeometry &geom, const std::vector<std::size_t> &ris_indices, const Vec3 &user_pos);

    struct PriorFim
    {
        RMat j;               // block-diagonal, 3 per user
        bool singular = false; // at least one covariance needed a pseudo-inverse
    };

    PriorFim prior_fim(const std::vector<GaussianMsg> &priors);

    struct FimBundle
    {
        RMat j_eta;     // 3N x 3N per unit SNR
        RMat j_psi;     // N x N, Schur complement of j_eta
        RMat transform; // N x 3
        RMat j_prior;   // 3 x 3
        RMat j_equiv;   // 3 x 3
        double snr = 0; // P / sigma^2

        // snr * T^T j_psi T + j_prior from the stored parts.
        RMat reassemble() const;
    };

    FimBundle make_bundle(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos, const GaussianMsg &prior);

    // tr(J_e^{-1}); throws Unidentifiable naming a null-space direction when J_e is singular.
    double bcrb(const FimBundle &bundle);
    double bcrb_of(const RMat &j_equiv);

    // Sum of per-user bounds.
    double bcrb_total(const std::vector<FimBundle> &bundles);

    // CRB of psi for one path with gain rho in N antennas at noise power sigma^2.
    double psi_crb_single_path(int n_antennas, cd gain, double noise_power);
}
