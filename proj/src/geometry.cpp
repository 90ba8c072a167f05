// SPDX-License-Identifier: Apache-2.0
#include "ristrack/geometry.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace ristrack
{
    namespace
    {
        constexpr double kAxisTol = 1e-12;

        void check_unit(const Vec3 &v, const std::string &name)
        {
            if (std::abs(v.norm() - 1.0) > kAxisTol)
                throw std::invalid_argument(name + " must have unit norm");
        }
    }

    void SystemGeometry::validate() const
    {
        if (bs_antennas < 1 || user_antennas < 1 || ris_nx < 1 || ris_ny < 1)
            throw InvalidSize("array sizes must be >= 1");
        if (ris.empty())
            throw InvalidSize("at least one RIS is required");
        check_unit(bs_axis, "bs_axis");
        check_unit(user_axis, "user_axis");
        for (std::size_t n = 0; n < ris.size(); ++n)
        {
            const auto tag = "ris[" + std::to_string(n) + "]";
            check_unit(ris[n].horizontal, tag + ".horizontal");
            check_unit(ris[n].vertical, tag + ".vertical");
            if (std::abs(ris[n].horizontal.dot(ris[n].vertical)) > kAxisTol)
                throw std::invalid_argument(tag + " axes must be orthogonal");
            if ((ris[n].pos - bs_pos).norm() == 0.0)
                throw DegenerateGeometry(tag + " coincides with the BS");
        }
    }

    SystemGeometry SystemGeometry::reference_layout(std::size_t num_ris, int bs_antennas, int user_antennas, int ris_nx, int ris_ny)
    {
        static const std::array<Vec3, 6> positions = {
            Vec3(20, -20, 0), Vec3(20, 20, 0), Vec3(15, 20, 0),
            Vec3(15, -20, 0), Vec3(25, 20, 0), Vec3(25, -20, 0)};
        if (num_ris < 1 || num_ris > positions.size())
            throw InvalidSize("reference layout supports 1..6 surfaces");
        SystemGeometry g;
        g.bs_pos = Vec3(40, 0, 0);
        g.bs_antennas = bs_antennas;
        g.user_antennas = user_antennas;
        g.ris_nx = ris_nx;
        g.ris_ny = ris_ny;
        for (std::size_t n = 0; n < num_ris; ++n)
            g.ris.push_back(RisPanel{positions[n], Vec3::UnitX(), Vec3::UnitZ()});
        return g;
    }

    double direction_cosine(const Vec3 &from, const Vec3 &to, const Vec3 &axis)
    {
        const Vec3 d = to - from;
        const double len = d.norm();
        if (len == 0.0)
            throw DegenerateGeometry("direction cosine between coincident positions");
        return std::clamp(d.dot(axis) / len, -1.0, 1.0);
    }

    Vec3 direction_cosine_grad_from(const Vec3 &from, const Vec3 &to, const Vec3 &axis)
    {
        const Vec3 d = to - from;
        const double len = d.norm();
        if (len == 0.0)
            throw DegenerateGeometry("direction cosine between coincident positions");
        const Vec3 u = d / len;
        // d/d(from) of u.axis = -(axis - (u.axis) u) / len
        return -(axis - u.dot(axis) * u) / len;
    }

    CVec ula_steering(double theta, int n)
    {
        if (n < 1)
            throw InvalidSize("steering vector length must be >= 1");
        CVec a(n);
        for (int k = 0; k < n; ++k)
            a[k] = std::polar(1.0, kPi * k * theta);
        return a;
    }

    CVec upa_steering(double theta_x, double theta_y, int nx, int ny)
    {
        const CVec ax = ula_steering(theta_x, nx);
        const CVec ay = ula_steering(theta_y, ny);
        CVec a(nx * ny);
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                a[iy * nx + ix] = ay[iy] * ax[ix];
        return a;
    }

    AngleSet angles_for(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos)
    {
        const RisPanel &r = geom.ris.at(ris_index);
        AngleSet s;
        s.phi_bs = direction_cosine(geom.bs_pos, r.pos, geom.bs_axis);
        s.phi_rx = direction_cosine(r.pos, geom.bs_pos, r.horizontal);
        s.phi_ry = direction_cosine(r.pos, geom.bs_pos, r.vertical);
        s.psi_rx = direction_cosine(r.pos, user_pos, r.horizontal);
        s.psi_ry = direction_cosine(r.pos, user_pos, r.vertical);
        s.psi_user = direction_cosine(user_pos, r.pos, geom.user_axis);
        return s;
    }

    double psi_user(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos)
    {
        return direction_cosine(user_pos, geom.ris.at(ris_index).pos, geom.user_axis);
    }

    Vec3 psi_user_grad(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &user_pos)
    {
        return direction_cosine_grad_from(user_pos, geom.ris.at(ris_index).pos, geom.user_axis);
    }
}
