// SPDX-License-Identifier: Apache-2.0
#include "ristrack/inference.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ristrack
{
    AoaMeasurementModel::AoaMeasurementModel(const SystemGeometry &geom, double noise_power, SignalSource &source,
                                             const TrackerOptions &opt)
        : geom_(geom), noise_power_(noise_power), source_(source), opt_(opt)
    {
    }

    void AoaMeasurementModel::set_num_users(int users)
    {
        users_ = users;
        y_.assign(static_cast<std::size_t>(users), CVec());
        paths_.assign(static_cast<std::size_t>(users), {});
    }

    void AoaMeasurementModel::begin_slot(int slot, std::span<const CVec> phases)
    {
        for (int u = 0; u < users_; ++u)
        {
            y_[static_cast<std::size_t>(u)] = source_.signal(u, slot, phases);
            paths_[static_cast<std::size_t>(u)].clear();
        }
    }

    std::vector<PathEstimate> AoaMeasurementModel::last_paths(int user) const
    {
        return paths_.at(static_cast<std::size_t>(user));
    }

    InfoMsg AoaMeasurementModel::measure(int user, int /*slot*/, const GaussianMsg &belief)
    {
        const std::size_t n_ris = geom_.num_ris();
        const CVec &y = y_.at(static_cast<std::size_t>(user));

        std::vector<VonMisesMsg> priors(n_ris);
        std::vector<double> predicted(n_ris);
        for (std::size_t n = 0; n < n_ris; ++n)
        {
            predicted[n] = psi_user(geom_, n, belief.mean);
            const Vec3 g = psi_user_grad(geom_, n, belief.mean);
            const double var = belief.is_uninformative() ? opt_.aoa.psi_var_cap : g.dot(belief.cov * g);
            priors[n] = vm_from_psi(predicted[n], var, opt_.aoa);
        }

        std::vector<PathEstimate> est =
            estimate_paths(y, static_cast<int>(n_ris), opt_.aoa_priors ? &priors : nullptr, noise_power_, opt_.aoa);

        std::vector<PathEstimate> by_ris(n_ris);
        if (opt_.aoa_priors)
            by_ris = est;
        else
        {
            RMat cost(static_cast<Eigen::Index>(n_ris), static_cast<Eigen::Index>(n_ris));
            for (std::size_t l = 0; l < n_ris; ++l)
                for (std::size_t n = 0; n < n_ris; ++n)
                    cost(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(n)) = std::abs(est[l].psi_hat - predicted[n]);
            const std::vector<int> assign = min_cost_assignment(cost);
            for (std::size_t l = 0; l < n_ris; ++l)
                by_ris[static_cast<std::size_t>(assign[l])] = est[l];
        }

        // Extrinsic information only: the prior already lives in the belief.
        InfoMsg info;
        for (std::size_t n = 0; n < n_ris; ++n)
        {
            const PathEstimate &e = by_ris[n];
            if (!(e.meas_info > 0))
                continue;
            const VonMisesMsg vm = vm_from_psi(e.psi_ml, 1.0 / e.meas_info, opt_.aoa);
            info += angle_info(vm, n, geom_, belief.mean);
        }
        paths_.at(static_cast<std::size_t>(user)) = std::move(by_ris);
        return info;
    }

    std::vector<InfoMsg> spatial_sweep(const StMrfModel &model, const std::vector<InfoMsg> &local, bool enable)
    {
        const auto users = static_cast<std::size_t>(model.num_users);
        std::vector<InfoMsg> belief = local;
        if (!enable || model.edges.empty())
            return belief;

        // msg[e][0]: a -> b, msg[e][1]: b -> a.
        std::vector<std::array<InfoMsg, 2>> msg(model.edges.size());
        const auto nbrs = model.neighbours();

        auto send = [&](std::size_t from, std::size_t e_idx) {
            const Edge &e = model.edges[e_idx];
            const int dir = static_cast<std::size_t>(e.a) == from ? 0 : 1;
            InfoMsg out = local[from];
            for (int other : nbrs[from])
            {
                const auto o = static_cast<std::size_t>(other);
                if (o == e_idx)
                    continue;
                const Edge &oe = model.edges[o];
                // Incoming on edge o toward `from`.
                out += msg[o][static_cast<std::size_t>(oe.a) == from ? 1 : 0];
            }
            const double s = spatial_kernel_variance(model.family, e.spatial_var);
            msg[e_idx][static_cast<std::size_t>(dir)] = convolve(out, s * Mat3::Identity());
        };

        for (std::size_t u = 0; u < users; ++u)
            for (int e_idx : nbrs[u])
            {
                const Edge &e = model.edges[static_cast<std::size_t>(e_idx)];
                const auto other = static_cast<std::size_t>(static_cast<std::size_t>(e.a) == u ? e.b : e.a);
                if (other > u)
                    send(u, static_cast<std::size_t>(e_idx));
            }
        for (std::size_t u = users; u-- > 0;)
            for (int e_idx : nbrs[u])
            {
                const Edge &e = model.edges[static_cast<std::size_t>(e_idx)];
                const auto other = static_cast<std::size_t>(static_cast<std::size_t>(e.a) == u ? e.b : e.a);
                if (other < u)
                    send(u, static_cast<std::size_t>(e_idx));
            }

        for (std::size_t u = 0; u < users; ++u)
            for (int e_idx : nbrs[u])
            {
                const Edge &e = model.edges[static_cast<std::size_t>(e_idx)];
                belief[u] += msg[static_cast<std::size_t>(e_idx)][static_cast<std::size_t>(e.a) == u ? 1 : 0];
            }
        return belief;
    }

    TrackResult mudlt_track(const StMrfModel &model, MeasurementModel &meas, const TrackerOptions &opt,
                            const PhaseScheduler &phases)
    {
        model.validate();
        const auto users = static_cast<std::size_t>(model.num_users);
        TrackResult result;
        result.slots.reserve(static_cast<std::size_t>(model.horizon));

        std::vector<InfoMsg> prev_belief(users);
        std::vector<Vec3> prev_mean(users, opt.area_center);

        for (int t = 0; t < model.horizon; ++t)
        {
            std::vector<InfoMsg> prior(users);
            if (t == 0)
            {
                if (opt.initial_prior && model.initial_box)
                    for (std::size_t u = 0; u < users; ++u)
                        prior[u] = to_info(box_moments(model.initial_box->lo.at(u), model.initial_box->hi.at(u)));
            }
            else if (opt.temporal)
            {
                for (std::size_t u = 0; u < users; ++u)
                    prior[u] = convolve(prev_belief[u], model.temporal_cov());
            }

            std::vector<GaussianMsg> predicted;
            if (t > 0)
                for (std::size_t u = 0; u < users; ++u)
                    predicted.push_back(to_moment(convolve(prev_belief[u], model.temporal_cov()), prev_mean[u]));

            SlotResult slot;
            slot.phases = phases(t, predicted);
            meas.begin_slot(t, slot.phases);

            std::vector<GaussianMsg> belief(users);
            for (std::size_t u = 0; u < users; ++u)
            {
                const Vec3 fallback = opt.temporal && t > 0 ? prev_mean[u] : opt.area_center;
                belief[u] = to_moment(prior[u], fallback);
            }
            slot.priors = belief;

            std::vector<InfoMsg> g(users);
            std::vector<InfoMsg> info_belief;
            for (int iter = 1; iter <= opt.max_iters; ++iter)
            {
                std::vector<InfoMsg> local(users);
                for (std::size_t u = 0; u < users; ++u)
                {
                    const InfoMsg fresh = meas.measure(static_cast<int>(u), t, belief[u]);
                    g[u] = iter == 1 ? fresh : opt.damping * fresh + (1.0 - opt.damping) * g[u];
                    local[u] = prior[u] + g[u];
                }
                info_belief = spatial_sweep(model, local, opt.spatial);

                double change = 0.0;
                for (std::size_t u = 0; u < users; ++u)
                {
                    GaussianMsg nb = to_moment(info_belief[u], belief[u].mean);
                    change = std::max(change, (nb.mean - belief[u].mean).norm());
                    belief[u] = nb;
                }
                slot.iterations = iter;
                if (change < opt.tol)
                {
                    slot.converged = true;
                    break;
                }
            }

            slot.beliefs = belief;
            for (std::size_t u = 0; u < users; ++u)
            {
                slot.paths.push_back(meas.last_paths(static_cast<int>(u)));
                prev_mean[u] = belief[u].mean;
            }
            prev_belief = info_belief;
            result.slots.push_back(std::move(slot));
        }
        return result;
    }
}
