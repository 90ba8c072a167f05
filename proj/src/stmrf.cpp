// SPDX-License-Identifier: Apache-2.0
#include "ristrack/stmrf.hpp"
#include "ristrack/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace ristrack
{
    StMrfModel StMrfModel::chain(int num_users, int horizon, const Vec3 &temporal_var, double spatial_var, PotentialFamily family)
    {
        StMrfModel m;
        m.num_users = num_users;
        m.horizon = horizon;
        m.temporal_var = temporal_var;
        m.family = family;
        for (int u = 0; u + 1 < num_users; ++u)
            m.edges.push_back(Edge{u, u + 1, spatial_var});
        return m;
    }

    std::vector<std::vector<int>> StMrfModel::neighbours() const
    {
        std::vector<std::vector<int>> nb(static_cast<std::size_t>(num_users));
        for (std::size_t e = 0; e < edges.size(); ++e)
        {
            nb[static_cast<std::size_t>(edges[e].a)].push_back(static_cast<int>(e));
            nb[static_cast<std::size_t>(edges[e].b)].push_back(static_cast<int>(e));
        }
        return nb;
    }

    void StMrfModel::validate() const
    {
        if (num_users < 1 || horizon < 1)
            throw InvalidSize("num_users and horizon must be >= 1");
        if ((temporal_var.array() <= 0).any())
            throw std::invalid_argument("temporal covariance entries must be positive");
        for (const auto &e : edges)
        {
            if (e.a < 0 || e.b < 0 || e.a >= num_users || e.b >= num_users || e.a == e.b)
                throw std::invalid_argument("edge references an invalid user pair");
            if (!(e.spatial_var > 0))
                throw std::invalid_argument("spatial variance must be positive");
        }
        if (initial_box)
        {
            if (initial_box->lo.size() != static_cast<std::size_t>(num_users) ||
                initial_box->hi.size() != static_cast<std::size_t>(num_users))
                throw InvalidSize("initial box needs one entry per user");
            for (int u = 0; u < num_users; ++u)
                if ((initial_box->hi[u] - initial_box->lo[u]).minCoeff() <= 0)
                    throw std::invalid_argument("initial box must have positive extent");
        }
    }

    InitialBox box_around(const std::vector<Vec3> &centers, double half_width)
    {
        InitialBox b;
        for (const auto &c : centers)
        {
            b.lo.push_back(c.array() - half_width);
            b.hi.push_back(c.array() + half_width);
        }
        return b;
    }

    double transition_logpdf(const Vec3 &u_t, const Vec3 &u_prev, const StMrfModel &model)
    {
        const Vec3 d = u_t - u_prev;
        double s = 0;
        for (int i = 0; i < 3; ++i)
            s += -0.5 * std::log(2.0 * kPi * model.temporal_var[i]) - 0.5 * d[i] * d[i] / model.temporal_var[i];
        return s;
    }

    double pair_log_potential(const Vec3 &u, const Vec3 &j, PotentialFamily family, double spatial_var)
    {
        const double d = (u - j).norm();
        return family == PotentialFamily::L2 ? -d * d / (2.0 * spatial_var) : -d / (2.0 * spatial_var);
    }

    double pair_potential(const Vec3 &u, const Vec3 &j, PotentialFamily family, double spatial_var)
    {
        return std::exp(pair_log_potential(u, j, family, spatial_var));
    }

    double pair_potential(const Vec3 &u, const Vec3 &j, const StMrfModel &model, std::size_t edge_index)
    {
        return pair_potential(u, j, model.family, model.edges.at(edge_index).spatial_var);
    }

    double initial_log_potential(const Vec3 &u, int user, const StMrfModel &model)
    {
        if (!model.initial_box)
            return 0.0;
        const Vec3 &lo = model.initial_box->lo.at(static_cast<std::size_t>(user));
        const Vec3 &hi = model.initial_box->hi.at(static_cast<std::size_t>(user));
        if ((u.array() < lo.array()).any() || (u.array() > hi.array()).any())
            return -std::numeric_limits<double>::infinity();
        return -std::log((hi - lo).prod());
    }

    double joint_log_prior(const Trajectory &traj, const StMrfModel &model)
    {
        if (traj.users() != model.num_users || traj.slots() != model.horizon)
            throw InvalidSize("trajectory dimensions do not match the model");
        double s = 0;
        for (int u = 0; u < model.num_users; ++u)
            s += initial_log_potential(traj.at(u, 0), u, model);
        for (int t = 0; t < model.horizon; ++t)
        {
            if (t > 0)
                for (int u = 0; u < model.num_users; ++u)
                    s += transition_logpdf(traj.at(u, t), traj.at(u, t - 1), model);
            for (const auto &e : model.edges)
                s += pair_log_potential(traj.at(e.a, t), traj.at(e.b, t), model.family, e.spatial_var);
        }
        return s;
    }

    Trajectory sample_trajectories(const StMrfModel &model, const std::vector<Vec3> &initial_positions,
                                   std::uint64_t seed, std::optional<SpeedClamp> clamp)
    {
        if (initial_positions.size() != static_cast<std::size_t>(model.num_users))
            throw InvalidSize("one initial position per user is required");
        Trajectory traj(model.num_users, model.horizon);
        Rng rng(seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        const Vec3 sd = model.temporal_var.cwiseSqrt();
        for (int u = 0; u < model.num_users; ++u)
        {
            traj.at(u, 0) = initial_positions[static_cast<std::size_t>(u)];
            for (int t = 1; t < model.horizon; ++t)
            {
                Vec3 step;
                for (int i = 0; i < 3; ++i)
                    step[i] = sd[i] * nd(rng);
                if (clamp && step.norm() > 0)
                    step *= clamp->speed * clamp->dt / step.norm();
                traj.at(u, t) = traj.at(u, t - 1) + step;
            }
        }
        return traj;
    }

    Trajectory sample_group_trajectories(const StMrfModel &model, const Vec3 &anchor, std::uint64_t seed,
                                         const std::vector<int> &frozen_axes)
    {
        model.validate();
        if (model.family != PotentialFamily::L2)
            throw std::invalid_argument("group sampling requires the L2 potential family");
        const int U = model.num_users;
        Trajectory traj(U, model.horizon);
        Rng rng(seed);
        std::normal_distribution<double> nd(0.0, 1.0);
        auto frozen = [&](int axis)
        { return std::find(frozen_axes.begin(), frozen_axes.end(), axis) != frozen_axes.end(); };

        // Slot 1: walk outward from user 0 along the edges, one Gaussian offset per edge.
        std::vector<bool> placed(static_cast<std::size_t>(U), false);
        traj.at(0, 0) = anchor;
        placed[0] = true;
        for (bool progress = true; progress;)
        {
            progress = false;
            for (const auto &e : model.edges)
            {
                if (placed[e.a] == placed[e.b])
                    continue;
                const int from = placed[e.a] ? e.a : e.b;
                const int to = placed[e.a] ? e.b : e.a;
                Vec3 p = traj.at(from, 0);
                for (int i = 0; i < 3; ++i)
                    if (!frozen(i))
                        p[i] += std::sqrt(e.spatial_var) * nd(rng);
                traj.at(to, 0) = p;
                placed[to] = true;
                progress = true;
            }
        }
        for (int u = 0; u < U; ++u)
            if (!placed[u])
                traj.at(u, 0) = anchor;

        // Later slots: per axis the conditional is Gaussian with precision C_ii^-1 I + L / sigma^2.
        RMat lap = RMat::Zero(U, U);
        for (const auto &e : model.edges)
        {
            const double w = 1.0 / e.spatial_var;
            lap(e.a, e.a) += w;
            lap(e.b, e.b) += w;
            lap(e.a, e.b) -= w;
            lap(e.b, e.a) -= w;
        }
        for (int t = 1; t < model.horizon; ++t)
        {
            for (int i = 0; i < 3; ++i)
            {
                if (frozen(i))
                {
                    for (int u = 0; u < U; ++u)
                        traj.at(u, t)[i] = traj.at(u, t - 1)[i];
                    continue;
                }
                const double ci = 1.0 / model.temporal_var[i];
                const RMat prec = ci * RMat::Identity(U, U) + lap;
                Eigen::LLT<RMat> llt(prec);
                RVec prev(U);
                for (int u = 0; u < U; ++u)
                    prev[u] = traj.at(u, t - 1)[i];
                const RVec mean = llt.solve(ci * prev);
                RVec z(U);
                for (int u = 0; u < U; ++u)
                    z[u] = nd(rng);
                // x = mean + L^-T z has covariance prec^-1.
                const RVec x = mean + llt.matrixU().solve(z);
                for (int u = 0; u < U; ++u)
                    traj.at(u, t)[i] = x[u];
            }
        }
        return traj;
    }
}
