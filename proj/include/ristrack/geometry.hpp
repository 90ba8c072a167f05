// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/types.hpp"

#include <cstddef>
#include <vector>

namespace ristrack
{
    // One reflecting surface: position plus the two in-plane element axes.
    struct RisPanel
    {
        Vec3 pos = Vec3::Zero();
        Vec3 horizontal = Vec3::UnitX(); // element index x runs along this axis
        Vec3 vertical = Vec3::UnitZ();   // element index y runs along this axis
    };

    struct SystemGeometry
    {
        Vec3 bs_pos = Vec3::Zero();
        Vec3 bs_axis = Vec3::UnitY();
        std::vector<RisPanel> ris;
        int bs_antennas = 8;
        int user_antennas = 8;
        int ris_nx = 4;
        int ris_ny = 2;
        Vec3 user_axis = Vec3::UnitY();

        int ris_elements() const { return ris_nx * ris_ny; }
        std::size_t num_ris() const { return ris.size(); }

        // Throws InvalidSize / std::invalid_argument when an invariant is broken.
        void validate() const;

        // BS at (40,0,0); the first `num_ris` of the six surface positions used in the
        // reference layout (at most 6).
        static SystemGeometry reference_layout(std::size_t num_ris, int bs_antennas, int user_antennas, int ris_nx, int ris_ny);
    };

    // All direction cosines of the cascaded link BS -> RIS n -> user.
    struct AngleSet
    {
        double phi_bs = 0;  // BS departure toward the RIS
        double phi_rx = 0;  // RIS arrival from the BS, horizontal axis
        double phi_ry = 0;  // RIS arrival from the BS, vertical axis
        double psi_rx = 0;  // RIS departure toward the user, horizontal axis
        double psi_ry = 0;  // RIS departure toward the user, vertical axis
        double psi_user = 0; // user arrival (user axis toward the RIS)
    };

    // (to - from)^T axis / |to - from|.
    double direction_cosine(const Vec3 &from, const Vec3 &to, const Vec3 &axis);

    // Gradient of direction_cosine(from, to, axis) with respect to `from`.
    Vec3 direction_cosine_grad_from(const Vec3 &from, const Vec3 &to, const Vec3 &axis);

    // Half-wavelength ULA: element k = exp(j*pi*k*theta), k = 0..n-1.
    CVec ula_steering(double theta, int n);

    // UPA steering as kron(a_y, a_x): the x index runs fastest.
    CVec upa_steering(double theta_x, double theta_y, int nx, int ny);

    AngleSet angles_for(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos);

    // User-side cosine and its gradient with respect to the user position.
    double psi_user(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos);
    Vec3 psi_user_grad(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos);
}
