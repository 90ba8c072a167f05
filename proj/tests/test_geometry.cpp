// SPDX-License-Identifier: Apache-2.0
#include "ristrack/geometry.hpp"
#include "ristrack/rng.hpp"

#include <doctest.h>

#include <random>

using namespace ristrack;

TEST_CASE("direction cosine")
{
    CHECK(direction_cosine(Vec3(20, -20, 0), Vec3(0, 0, 0), Vec3::UnitY()) == doctest::Approx(0.70711).epsilon(1e-5));
    CHECK(direction_cosine(Vec3(1, 2, 3), Vec3(1, 7, 3), Vec3::UnitY()) == doctest::Approx(1.0));
    CHECK(direction_cosine(Vec3(1, 2, 3), Vec3(4, 2, 3), Vec3::UnitY()) == doctest::Approx(0.0));
    CHECK_THROWS_AS(direction_cosine(Vec3(1, 1, 1), Vec3(1, 1, 1), Vec3::UnitX()), DegenerateGeometry);

    // invariant to scaling the displacement
    Rng rng(3);
    std::uniform_real_distribution<double> ud(-10, 10);
    for (int i = 0; i < 50; ++i)
    {
        const Vec3 a(ud(rng), ud(rng), ud(rng)), b(ud(rng), ud(rng), ud(rng));
        const Vec3 axis = Vec3(ud(rng), ud(rng), ud(rng)).normalized();
        CHECK(direction_cosine(a, a + 3.7 * (b - a), axis) == doctest::Approx(direction_cosine(a, b, axis)).epsilon(1e-12));
    }
}

TEST_CASE("direction cosine gradient matches central differences")
{
    Rng rng(7);
    std::uniform_real_distribution<double> ud(-10, 10);
    for (int i = 0; i < 100; ++i)
    {
        const Vec3 from(ud(rng), ud(rng), ud(rng)), to(ud(rng), ud(rng), ud(rng));
        const Vec3 axis = Vec3(ud(rng), ud(rng), ud(rng)).normalized();
        const Vec3 g = direction_cosine_grad_from(from, to, axis);
        for (int k = 0; k < 3; ++k)
        {
            const double h = 1e-6;
            Vec3 p = from, m = from;
            p[k] += h;
            m[k] -= h;
            const double fd = (direction_cosine(p, to, axis) - direction_cosine(m, to, axis)) / (2 * h);
            CHECK(std::abs(fd - g[k]) <= 1e-6 * std::max(1.0, std::abs(g[k])));
        }
    }
}

TEST_CASE("ULA steering")
{
    CVec a = ula_steering(0.0, 4);
    for (int k = 0; k < 4; ++k)
        CHECK(std::abs(a[k] - cd(1, 0)) < 1e-15);
    a = ula_steering(1.0, 4);
    for (int k = 0; k < 4; ++k)
        CHECK(std::abs(a[k] - cd(k % 2 ? -1.0 : 1.0, 0)) < 1e-12);
    a = ula_steering(0.5, 2);
    CHECK(std::abs(a[0] - cd(1, 0)) < 1e-15);
    CHECK(std::abs(a[1] - cd(0, 1)) < 1e-12);
    CHECK_THROWS_AS(ula_steering(0.1, 0), InvalidSize);
    for (double th : {-0.9, -0.3, 0.2, 0.77})
        CHECK(ula_steering(th, 9).squaredNorm() == doctest::Approx(9.0));
}

TEST_CASE("UPA steering")
{
    CVec a = upa_steering(0, 0, 3, 2);
    CHECK(a.size() == 6);
    CHECK((a - CVec::Ones(6)).norm() < 1e-14);
    CHECK((upa_steering(0.3, -0.6, 1, 5) - ula_steering(-0.6, 5)).norm() < 1e-14);
    a = upa_steering(1, 0, 2, 2);
    const cd expect[] = {1, -1, 1, -1};
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(a[i] - expect[i]) < 1e-12);
    CHECK_THROWS_AS(upa_steering(0, 0, 0, 2), InvalidSize);

    Rng rng(11);
    std::uniform_real_distribution<double> ud(-1, 1);
    for (int i = 0; i < 20; ++i)
    {
        const double tx = ud(rng), ty = ud(rng);
        const CVec ax = ula_steering(tx, 4), ay = ula_steering(ty, 3);
        const CVec u = upa_steering(tx, ty, 4, 3);
        CHECK(u.squaredNorm() == doctest::Approx(12.0));
        for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 4; ++x)
                CHECK(std::abs(u[y * 4 + x] - ay[y] * ax[x]) < 1e-12);
    }
}

TEST_CASE("angles for the reference layout")
{
    const SystemGeometry g = SystemGeometry::reference_layout(2, 8, 8, 4, 2);
    CHECK_NOTHROW(g.validate());
    const AngleSet a = angles_for(g, 0, Vec3(0, 0, 0));
    CHECK(a.psi_user == doctest::Approx(-0.70711).epsilon(1e-5));
    for (double v : {a.phi_bs, a.phi_rx, a.phi_ry, a.psi_rx, a.psi_ry, a.psi_user})
        CHECK(std::abs(v) <= 1.0);

    // broadside: user straight along the panel normal (y axis for x/z panel axes)
    const AngleSet b = angles_for(g, 0, Vec3(20, -5, 0));
    CHECK(std::abs(b.psi_rx) < 1e-15);
    CHECK(std::abs(b.psi_ry) < 1e-15);

    SystemGeometry s = g;
    std::swap(s.ris[0].horizontal, s.ris[0].vertical);
    const Vec3 user(3, 4, 2);
    const AngleSet p = angles_for(g, 0, user), q = angles_for(s, 0, user);
    CHECK(p.psi_rx == doctest::Approx(q.psi_ry));
    CHECK(p.psi_ry == doctest::Approx(q.psi_rx));

    CHECK_THROWS_AS(angles_for(g, 0, g.ris[0].pos), DegenerateGeometry);
}

TEST_CASE("angles are smooth away from the surface")
{
    const SystemGeometry g = SystemGeometry::reference_layout(2, 8, 8, 4, 2);
    const Vec3 u(1, 2, 0.5);
    const Vec3 d = Vec3(1e-7, -2e-7, 1e-7);
    const AngleSet a = angles_for(g, 1, u), b = angles_for(g, 1, u + d);
    CHECK(std::abs(a.psi_user - b.psi_user) < 1e-7);
    CHECK(std::abs(a.psi_rx - b.psi_rx) < 1e-7);
    CHECK(std::abs(a.psi_ry - b.psi_ry) < 1e-7);
}

TEST_CASE("user-angle gradient")
{
    const SystemGeometry g = SystemGeometry::reference_layout(2, 8, 8, 4, 2);
    Rng rng(5);
    std::uniform_real_distribution<double> ud(-8, 8);
    for (int i = 0; i < 100; ++i)
    {
        const Vec3 u(ud(rng), ud(rng), ud(rng) * 0.2);
        for (std::size_t n = 0; n < 2; ++n)
        {
            const Vec3 gr = psi_user_grad(g, n, u);
            for (int k = 0; k < 3; ++k)
            {
                Vec3 p = u, m = u;
                p[k] += 1e-6;
                m[k] -= 1e-6;
                const double fd = (psi_user(g, n, p) - psi_user(g, n, m)) / 2e-6;
                CHECK(std::abs(fd - gr[k]) <= 1e-5 * std::max(1e-3, gr.norm()));
            }
        }
    }
}

TEST_CASE("geometry validation")
{
    SystemGeometry g = SystemGeometry::reference_layout(1, 4, 4, 2, 2);
    g.user_axis = Vec3(0, 2, 0);
    CHECK_THROWS(g.validate());
    g = SystemGeometry::reference_layout(1, 4, 4, 2, 2);
    g.ris[0].vertical = Vec3(1, 0, 0);
    CHECK_THROWS(g.validate());
    g = SystemGeometry::reference_layout(1, 4, 4, 2, 2);
    g.ris_nx = 0;
    CHECK_THROWS_AS(g.validate(), InvalidSize);
}
