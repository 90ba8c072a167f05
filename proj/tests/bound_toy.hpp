// SPDX-License-Identifier: Apache-2.0
#pragma once

// Single-user, two-RIS, single-slot study shared by the unit tests and the acceptance run:
// the position is drawn from the Gaussian prior the tracker carries, so the Bayesian bound
// (E[J_D] + J_p)^{-1} applies to the tracker's posterior mean. The RIS phases are random but
// known to the receiver, so the bound is taken conditionally on the phases of each trial (with
// the expectation over the position done by Monte Carlo) and then averaged over trials; the
// unconditional (E[J_D] + J_p)^{-1} is reported as well. Users move in a plane of known
// height: the prior box is thin along z. With all surfaces at the user height, an unknown
// height enters the angles only quadratically, which biases any estimator linearized at z = 0.

#include "ristrack/config.hpp"
#include "ristrack/fim.hpp"
#include "ristrack/harness.hpp"
#include "ristrack/rng.hpp"

#include <random>

namespace ristrack::toy
{
    struct BoundStudy
    {
        double mse_h = 0;  // horizontal, m^2
        double bcrb_h = 0; // horizontal, m^2
        double mse = 0;    // 3-D
        double bcrb = 0;   // 3-D
        double bcrb_h_unconditional = 0;
        double diff_se_h = 0; // standard error of mean(err_h^2 - bound_h) over trials
        int trials = 0;
    };

    inline BoundStudy bound_study(double snr_db, int trials, std::uint64_t seed, double half_width = 0.5,
                                  double z_half_width = 1e-3, int position_draws = 32)
    {
        ExperimentConfig cfg;
        cfg.num_users = 1;
        cfg.horizon = 1;
        const Scenario sc = cfg.scenario(snr_db);
        const Vec3 center = cfg.area_center;
        StMrfModel model = cfg.mrf_model();
        model.initial_box = InitialBox{{center - Vec3(half_width, half_width, z_half_width)},
                                       {center + Vec3(half_width, half_width, z_half_width)}};
        const GaussianMsg prior = box_moments(model.initial_box->lo[0], model.initial_box->hi[0]);
        const Eigen::LLT<Mat3> chol(prior.cov);
        const TrackerOptions opt = baseline_variant(Variant::B2, cfg).tracker;

        BoundStudy out;
        out.trials = trials;
        Mat3 j_data = Mat3::Zero();
        double d1 = 0, d2 = 0;
        for (int i = 0; i < trials; ++i)
        {
            const std::uint64_t s = derive_seed(seed, {stream::kTrial, static_cast<std::uint64_t>(i)});
            Rng rng(derive_seed(s, {stream::kTrajectory}));
            std::normal_distribution<double> nd;
            Trajectory truth(1, 1);
            truth.at(0, 0) = center + chol.matrixL() * Vec3(nd(rng), nd(rng), nd(rng));

            SimulatedSource src(sc, truth, s, false);
            AoaMeasurementModel meas(sc.geom, sc.params.noise_power, src, opt);
            meas.set_num_users(1);
            const TrackResult r = mudlt_track(model, meas, opt, make_scheduler(sc, s, false, PbfOptions{}));
            const Vec3 e = r.belief(0, 0).mean - truth.at(0, 0);
            out.mse += e.squaredNorm();
            out.mse_h += e.head<2>().squaredNorm();

            Rng xr(derive_seed(s, {stream::kTrajectory, 1}));
            Mat3 j_phase = Mat3::Zero();
            for (int k = 0; k < position_draws; ++k)
            {
                const Vec3 x = center + chol.matrixL() * Vec3(nd(xr), nd(xr), nd(xr));
                const FimBundle b = make_bundle(sc, r.slots[0].phases, x, prior);
                j_phase += b.j_equiv - b.j_prior;
            }
            j_phase /= position_draws;
            j_data += j_phase;
            const Mat3 inv = (j_phase + prior.cov.inverse()).inverse();
            out.bcrb += inv.trace();
            out.bcrb_h += inv(0, 0) + inv(1, 1);
            const double d = e.head<2>().squaredNorm() - (inv(0, 0) + inv(1, 1));
            d1 += d;
            d2 += d * d;
        }
        const double md = d1 / trials;
        out.diff_se_h = std::sqrt(std::max(d2 / trials - md * md, 0.0) / (trials - 1));
        out.mse /= trials;
        out.mse_h /= trials;
        out.bcrb /= trials;
        out.bcrb_h /= trials;
        const Mat3 inv = (j_data / trials + prior.cov.inverse()).inverse();
        out.bcrb_h_unconditional = inv(0, 0) + inv(1, 1);
        return out;
    }
}
