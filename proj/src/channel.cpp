// SPDX-License-Identifier: Apache-2.0
#include "ristrack/channel.hpp"

#include <cmath>
#include <string>

namespace ristrack
{
    double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

    ChannelParams ChannelParams::make(double carrier_freq, double noise_dbm, double tx_power)
    {
        ChannelParams p;
        p.carrier_freq = carrier_freq;
        p.wavelength = kSpeedOfLight / carrier_freq;
        p.noise_power = dbm_to_watt(noise_dbm);
        p.tx_power = tx_power;
        return p;
    }

    cd ChannelParams::reflection_for(std::size_t ris_index) const
    {
        if (reflection.empty())
            return {1.0, 0.0};
        return reflection.at(ris_index);
    }

    void ChannelParams::validate(const SystemGeometry &geom) const
    {
        if (!(carrier_freq > 0))
            throw std::invalid_argument("carrier_freq must be positive");
        if (std::abs(wavelength - kSpeedOfLight / carrier_freq) > 1e-9 * wavelength)
            throw std::invalid_argument("wavelength inconsistent with carrier_freq");
        if (!(noise_power > 0))
            throw std::invalid_argument("noise_power must be positive");
        if (!(tx_power >= 0))
            throw std::invalid_argument("tx_power must be nonnegative");
        if (!reflection.empty() && reflection.size() != geom.num_ris())
            throw std::invalid_argument("one reflection coefficient per RIS is required");
        for (const cd &r : reflection)
            if (std::abs(r) > 1.0)
                throw std::invalid_argument("|reflection_coeff| must be <= 1");
    }

    CVec bs_beamformer(const SystemGeometry &geom, BeamformerMode mode, std::size_t target_ris)
    {
        const int nb = geom.bs_antennas;
        CVec w = CVec::Zero(nb);
        switch (mode)
        {
        case BeamformerMode::Uniform:
            w.setConstant(cd(1.0, 0.0));
            break;
        case BeamformerMode::Matched:
            w = ula_steering(direction_cosine(geom.bs_pos, geom.ris.at(target_ris).pos, geom.bs_axis), nb);
            break;
        case BeamformerMode::Multibeam:
            for (const auto &r : geom.ris)
                w += ula_steering(direction_cosine(geom.bs_pos, r.pos, geom.bs_axis), nb);
            if (w.norm() == 0.0)
                w.setConstant(cd(1.0, 0.0));
            break;
        }
        return w / w.norm();
    }

    cd pathloss_gain(double distance, double wavelength)
    {
        if (!(distance > 0))
            throw std::invalid_argument("pathloss distance must be positive");
        return wavelength * std::polar(1.0, -2.0 * kPi * distance / wavelength) / (4.0 * kPi * distance);
    }

    CMat synth_bs_ris(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index)
    {
        const RisPanel &r = geom.ris.at(ris_index);
        const double phi_bs = direction_cosine(geom.bs_pos, r.pos, geom.bs_axis);
        const double phi_rx = direction_cosine(r.pos, geom.bs_pos, r.horizontal);
        const double phi_ry = direction_cosine(r.pos, geom.bs_pos, r.vertical);
        const cd xi = pathloss_gain((r.pos - geom.bs_pos).norm(), params.wavelength);
        return xi * upa_steering(phi_rx, phi_ry, geom.ris_nx, geom.ris_ny) * ula_steering(phi_bs, geom.bs_antennas).adjoint();
    }

    CMat synth_ris_user(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index, const Vec3 &user_pos)
    {
        const RisPanel &r = geom.ris.at(ris_index);
        const AngleSet a = angles_for(geom, ris_index, user_pos);
        const cd vs = pathloss_gain((user_pos - r.pos).norm(), params.wavelength);
        return vs * ula_steering(a.psi_user, geom.user_antennas) *
               upa_steering(a.psi_rx, a.psi_ry, geom.ris_nx, geom.ris_ny).adjoint();
    }

    CascadedChannel cascaded_channel(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index, const Vec3 &user_pos)
    {
        const RisPanel &r = geom.ris.at(ris_index);
        CascadedChannel c;
        c.g_bs_ris = synth_bs_ris(geom, params, ris_index);
        c.g_ris_user = synth_ris_user(geom, params, ris_index, user_pos);
        c.gain_bs_ris = pathloss_gain((r.pos - geom.bs_pos).norm(), params.wavelength);
        c.gain_ris_user = pathloss_gain((user_pos - r.pos).norm(), params.wavelength);
        return c;
    }

    CVec ris_coupling(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos)
    {
        const AngleSet a = angles_for(geom, ris_index, user_pos);
        const CVec depart = upa_steering(a.psi_rx, a.psi_ry, geom.ris_nx, geom.ris_ny);
        const CVec arrive = upa_steering(a.phi_rx, a.phi_ry, geom.ris_nx, geom.ris_ny);
        return depart.cwiseProduct(arrive.conjugate());
    }

    void check_unit_modulus(const CVec &phase, double tol)
    {
        for (Eigen::Index i = 0; i < phase.size(); ++i)
            if (std::abs(std::abs(phase[i]) - 1.0) > tol)
                throw ContractViolation("RIS phase element " + std::to_string(i) + " is not unit modulus");
    }

    cd equivalent_gain(const SystemGeometry &geom, const ChannelParams &params, std::size_t ris_index,
                       const Vec3 &user_pos, const CVec &phase, const CVec &bs_bf)
    {
        if (phase.size() != geom.ris_elements())
            throw InvalidSize("phase vector length must equal M_R");
        if (bs_bf.size() != geom.bs_antennas)
            throw InvalidSize("beamformer length must equal N_B");
        check_unit_modulus(phase);
        const RisPanel &r = geom.ris.at(ris_index);
        const AngleSet a = angles_for(geom, ris_index, user_pos);
        const cd xi = pathloss_gain((r.pos - geom.bs_pos).norm(), params.wavelength);
        const cd vs = pathloss_gain((user_pos - r.pos).norm(), params.wavelength);
        const CVec c = ris_coupling(geom, ris_index, user_pos);
        const cd ris_factor = c.dot(phase); // c^H lambda
        const cd bs_factor = ula_steering(a.phi_bs, geom.bs_antennas).dot(bs_bf);
        return params.reflection_for(ris_index) * xi * vs * ris_factor * bs_factor;
    }

    CVec noiseless_signal(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos)
    {
        const auto &g = sc.geom;
        if (phases.size() != g.num_ris())
            throw InvalidSize("one phase vector per RIS is required");
        CVec mu = CVec::Zero(g.user_antennas);
        const double amp = std::sqrt(sc.params.tx_power);
        for (std::size_t n = 0; n < g.num_ris(); ++n)
        {
            const cd rho = equivalent_gain(g, sc.params, n, user_pos, phases[n], sc.bs_bf);
            mu += amp * rho * ula_steering(psi_user(g, n, user_pos), g.user_antennas);
        }
        return mu;
    }

    CVec noiseless_signal_cascade(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos)
    {
        const auto &g = sc.geom;
        if (phases.size() != g.num_ris())
            throw InvalidSize("one phase vector per RIS is required");
        CVec mu = CVec::Zero(g.user_antennas);
        const CVec wx = std::sqrt(sc.params.tx_power) * sc.bs_bf; // pilot x = 1
        for (std::size_t n = 0; n < g.num_ris(); ++n)
        {
            check_unit_modulus(phases[n]);
            const CMat gn = synth_bs_ris(g, sc.params, n);
            const CMat gnu = synth_ris_user(g, sc.params, n, user_pos);
            mu += sc.params.reflection_for(n) * (gnu * (phases[n].asDiagonal() * (gn * wx)));
        }
        return mu;
    }

    ReceivedSignal received_signal(const Scenario &sc, std::span<const CVec> phases, const Vec3 &user_pos, std::uint64_t seed)
    {
        ReceivedSignal out;
        out.noiseless = noiseless_signal(sc, phases, user_pos);
        Rng rng(seed);
        std::normal_distribution<double> nd(0.0, std::sqrt(sc.params.noise_power / 2.0));
        out.y = out.noiseless;
        for (Eigen::Index k = 0; k < out.y.size(); ++k)
        {
            const double re = nd(rng);
            const double im = nd(rng);
            out.y[k] += cd(re, im);
        }
        return out;
    }

    CVec random_phases(int n, Rng &rng)
    {
        std::uniform_real_distribution<double> ud(-kPi, kPi);
        CVec p(n);
        for (int i = 0; i < n; ++i)
            p[i] = std::polar(1.0, ud(rng));
        return p;
    }

    std::vector<CVec> random_phase_set(const SystemGeometry &geom, std::uint64_t seed)
    {
        Rng rng(seed);
        std::vector<CVec> out;
        for (std::size_t n = 0; n < geom.num_ris(); ++n)
            out.push_back(random_phases(geom.ris_elements(), rng));
        return out;
    }

    double tx_power_for_snr(const SystemGeometry &geom, const ChannelParams &params, double snr_db, const Vec3 &reference_point)
    {
        double g = 0;
        for (std::size_t n = 0; n < geom.num_ris(); ++n)
        {
            const auto &r = geom.ris[n];
            const double xi = std::abs(pathloss_gain((r.pos - geom.bs_pos).norm(), params.wavelength));
            const double vs = std::abs(pathloss_gain((reference_point - r.pos).norm(), params.wavelength));
            g += std::norm(xi * vs);
        }
        g /= static_cast<double>(geom.num_ris());
        return params.noise_power * std::pow(10.0, snr_db / 10.0) / g;
    }
}
