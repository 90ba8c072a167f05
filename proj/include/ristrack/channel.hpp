// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/geometry.hpp"

#include "ristrack/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ristrack
{
    struct ChannelParams
    {
        double carrier_freq = 28e9;            // Hz
        double wavelength = kSpeedOfLight / 28e9; // m
        double noise_power = 1e-15;            // W (-120 dBm)
        std::vector<cd> reflection;            // per RIS; empty means 1 for every surface
        double tx_power = 1.0;                 // W

        static ChannelParams make(double carrier_freq, double noise_dbm, double tx_power);
        cd reflection_for(std::size_t ris_index) const;
        void validate(const SystemGeometry &geom) const;
    };

    double dbm_to_watt(double dbm);

    enum class BeamformerMode
    {
        Multibeam, // normalized sum of matched beams toward every RIS
        Matched,   // matched beam toward one configured RIS
        Uniform,   // 1/sqrt(N_B) on every antenna
    };

    // Unit-norm BS beamformer w.
    CVec bs_beamformer(const SystemGeometry &geom, BeamformerMode mode, std::size_t target_ris = 0);

    // Everything the forward model needs besides phases and positions.
    struct Scenario
    {
        SystemGeometry geom;
        ChannelParams params;
        CVec bs_bf; // unit norm; tx power lives in params.tx_power
    };

    // lambda * exp(-j 2 pi d / lambda) / (4 pi d)
    cd pathloss_gain(double distance, double wavelength);

    struct CascadedChannel
    {
        CMat g_bs_ris;   // M_R x N_B
        CMat g_ris_user; // N_U x M_R
        cd gain_bs_ris;
        cd gain_ris_user;
    };

    CMat synth_bs_ris(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index);
    CMat synth_ris_user(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index, const Vec3 &user_pos);
    CascadedChannel cascaded_channel(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index, const Vec3 &user_pos);

    // c = a_R(psi_rx, psi_ry) .* conj(a_R(phi_rx, phi_ry)); the RIS inner factor is c^H lambda.
    CVec ris_coupling(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos);

    // rho_n * xi_n * varsigma_{n,u} * a_R^H(psi) diag(phase) a_R(phi) * a_B^H(phi_B) w.
    // Does not include sqrt(tx_power).
    cd equivalent_gain(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index,
                       const Vec3 &user_pos, const CVec &phase, const CVec &bs_bf);

    struct ReceivedSignal
    {
        CVec y;
        CVec noiseless;
    };

    // y = sqrt(P) sum_n rho_bar_n a_U(psi_n) + n,  n ~ CN(0, sigma^2 I).
    ReceivedSignal received_signal(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos, std::uint64_t seed);

    // Noiseless component only.
    CVec noiseless_signal(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos);

    // Same signal assembled from the full cascade of matrices (no equivalent-gain shortcut).
    CVec noiseless_signal_cascade(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos);

    CVec random_phases(int n, Rng &rng);
    std::vector<CVec> random_phase_set(const SystemGeometry &geom, std::uint64_t seed);

    // Transmit power such that the per-antenna received SNR, without RIS or BS array
    // gain, averaged over the surfaces at `reference_point` equals snr_db.
    double tx_power_for_snr(const SystemGeometry &geom, const ChannelParams &params, double snr_db, const Vec3 &reference_point);

    // Throws ContractViolation unless every element has unit modulus within tol.
    void check_unit_modulus(const CVec &phase, double tol = 1e-9);
}
