// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/types.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace ristrack
{
    enum class PotentialFamily
    {
        L2, // exp(-d^2 / (2 sigma^2))
        L1, // exp(-d / (2 sigma^2))
    };

    struct Edge
    {
        int a = 0;
        int b = 1;
        double spatial_var = 0.2; // sigma_{ab}^2, m^2
    };

    // Axis-aligned uniform box per user for the first slot.
    struct InitialBox
    {
        std::vector<Vec3> lo;
        std::vector<Vec3> hi;
    };

    struct StMrfModel
    {
        int num_users = 1;
        int horizon = 1;
        std::vector<Edge> edges;
        Vec3 temporal_var = Vec3::Constant(0.1); // diagonal of C
        PotentialFamily family = PotentialFamily::L2;
        std::optional<InitialBox> initial_box; // nullopt: improper constant initial potential

        // Users 0..U-1 linked as a chain (u, u+1).
        static StMrfModel chain(int num_users, int horizon, const Vec3 &temporal_var, double spatial_var,
                                PotentialFamily family = PotentialFamily::L2);

        Mat3 temporal_cov() const { return temporal_var.asDiagonal(); }
        std::vector<std::vector<int>> neighbours() const; // edge indices per user
        void validate() const;
    };

    // Box of half-width `half_width` around each center.
    InitialBox box_around(const std::vector<Vec3> &centers, double half_width);

    class Trajectory
    {
    public:
        Trajectory() = default;
        Trajectory(int users, int slots) : users_(users), slots_(slots), pos_(static_cast<std::size_t>(users * slots), Vec3::Zero()) {}

        int users() const { return users_; }
        int slots() const { return slots_; }
        Vec3 &at(int user, int slot) { return pos_.at(index(user, slot)); }
        const Vec3 &at(int user, int slot) const { return pos_.at(index(user, slot)); }

    private:
        std::size_t index(int user, int slot) const { return static_cast<std::size_t>(user * slots_ + slot); }
        int users_ = 0;
        int slots_ = 0;
        std::vector<Vec3> pos_;
    };

    // log N(u_t; u_prev, C), normalized.
    double transition_logpdf(const Vec3 &u_t, const Vec3 &u_prev, const StMrfModel &model);

    // Unnormalized pairwise potential for a spatial variance sigma^2.
    double pair_potential(const Vec3 &u, const Vec3 &j, PotentialFamily family, double spatial_var);
    double pair_log_potential(const Vec3 &u, const Vec3 &j, PotentialFamily family, double spatial_var);
    double pair_potential(const Vec3 &u, const Vec3 &j, const StMrfModel &model, std::size_t edge_index = 0);

    // Log of the initial local potential of one user (0 for the improper prior, -inf outside the box).
    double initial_log_potential(const Vec3 &u, int user, const StMrfModel &model);

    // Unnormalized log of the full spatiotemporal prior.
    double joint_log_prior(const Trajectory &traj, const StMrfModel &model);

    struct SpeedClamp
    {
        double speed = 1.5; // m/s
        double dt = 1.0;    // s per slot
    };

    // Independent Gaussian random walks, one per user; spatial potentials are not applied.
    Trajectory sample_trajectories(const StMrfModel &model, const std::vector<Vec3> &initial_positions,
                                   std::uint64_t seed, std::optional<SpeedClamp> clamp = std::nullopt);

    // Group motion: slot-1 positions drawn along the edges from `anchor`, then each slot drawn from
    // p(U^t | U^{t-1}) ∝ prod_u N(U_u^t; U_u^{t-1}, C) prod_E exp(-d^2 / (2 sigma^2)). L2 family only.
    // Axes listed in `frozen_axes` (e.g. z) keep the anchor coordinate.
    Trajectory sample_group_trajectories(const StMrfModel &model, const Vec3 &anchor, std::uint64_t seed,
                                         const std::vector<int> &frozen_axes = {});
}
