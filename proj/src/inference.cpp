// SPDX-License-Identifier: Apache-2.0
#include "ristrack/inference.hpp"

#include <algorithm>
#include <cmath>

namespace ristrack
{
    namespace
    {
        struct ThetaLin
        {
            double theta = 0;
            Vec3 grad = Vec3::Zero();
        };

        ThetaLin theta_at(const SystemGeometry &geom, std::size_t ris_index, const Vec3 &pos)
        {
            const double psi = psi_user(geom, ris_index, pos);
            const Vec3 g = psi_user_grad(geom, ris_index, pos);
            const double s = std::sqrt(std::max(1.0 - psi * psi, 1e-18));
            return ThetaLin{std::acos(std::clamp(psi, -1.0, 1.0)), -g / s};
        }
    }

    InfoMsg angle_info(const VonMisesMsg &vm, std::size_t ris_index, const SystemGeometry &geom, const Vec3 &lin)
    {
        InfoMsg out;
        if (!(vm.concentration > 0))
            return out;
        const ThetaLin t = theta_at(geom, ris_index, lin);
        // theta(U) ~ theta0 + g^T (U - lin) observed as mu with variance 1/kappa.
        const double k = vm.concentration;
        out.precision = k * t.grad * t.grad.transpose();
        out.shift = k * t.grad * (vm.mean_dir - t.theta + t.grad.dot(lin));
        return out;
    }

    GaussianMsg msg_angle_to_position(const VonMisesMsg &vm, std::size_t ris_index, const SystemGeometry &geom,
                                      const GaussianMsg &current_belief, const AngleMsgOptions &opt)
    {
        const Vec3 &lin = current_belief.mean;
        if (!(vm.concentration > 0))
        {
            // Still check the geometry so a degenerate linearization point is reported.
            (void)psi_user(geom, ris_index, lin);
            return GaussianMsg::uninformative(lin);
        }
        InfoMsg m = angle_info(vm, ris_index, geom, lin);
        Eigen::SelfAdjointEigenSolver<Mat3> es(m.precision);
        Vec3 ev = es.eigenvalues().cwiseMax(opt.precision_floor).cwiseMin(1.0 / opt.variance_floor);
        const Mat3 v = es.eigenvectors();
        GaussianMsg g;
        g.cov = v * ev.cwiseInverse().asDiagonal() * v.transpose();
        g.cov = 0.5 * (g.cov + g.cov.transpose());
        // Mean: the point on the constraint plane closest to the linearization point.
        g.mean = lin;
        if (m.precision.trace() > 0)
        {
            const Vec3 dir = es.eigenvectors().col(2);
            g.mean += ((m.shift - m.precision * lin).dot(dir) / es.eigenvalues()[2]) * dir;
        }
        return g;
    }

    GaussianMsg fuse_angle_messages(std::span<const GaussianMsg> msgs)
    {
        if (msgs.empty())
            throw InvalidSize("fuse_angle_messages: at least one message is required");
        InfoMsg acc;
        bool any = false;
        for (const auto &m : msgs)
        {
            if (m.is_uninformative())
                continue;
            acc += to_info(m);
            any = true;
        }
        if (!any)
            return GaussianMsg::uninformative(msgs.front().mean);
        return to_moment(acc, msgs.front().mean);
    }

    double spatial_kernel_variance(PotentialFamily family, double spatial_var)
    {
        if (family == PotentialFamily::L2)
            return spatial_var;
        // Radial density r^2 exp(-r / b) with b = 2 sigma^2: E r^2 = 12 b^2, per axis 4 b^2.
        const double b = 2.0 * spatial_var;
        return 4.0 * b * b;
    }

    GaussianMsg msg_spatial(const GaussianMsg &incoming, const StMrfModel &model, std::size_t edge_index)
    {
        const double s = spatial_kernel_variance(model.family, model.edges.at(edge_index).spatial_var);
        GaussianMsg out = incoming;
        out.cov += s * Mat3::Identity();
        return out;
    }

    GaussianMsg msg_position_to_spatial(const GaussianMsg &spatial_in, const GaussianMsg &measurement, const GaussianMsg &temporal)
    {
        const GaussianMsg parts[] = {spatial_in, measurement, temporal};
        return fuse_angle_messages(parts);
    }

    GaussianMsg msg_temporal(const GaussianMsg &prev, const StMrfModel &model)
    {
        GaussianMsg out = prev;
        out.cov += model.temporal_cov();
        return out;
    }

    GaussianMsg box_moments(const Vec3 &lo, const Vec3 &hi)
    {
        GaussianMsg g;
        g.mean = 0.5 * (lo + hi);
        g.cov = ((hi - lo).array().square() / 12.0).matrix().asDiagonal();
        return g;
    }

    GaussianMsg moment_match_angles(const GaussianMsg &prior, std::span<const AngleObservation> obs,
                                    const SystemGeometry &geom, int max_iters)
    {
        const InfoMsg p = to_info(prior);
        auto log_target = [&](const Vec3 &x) {
            const Vec3 d = x - prior.mean;
            double v = -0.5 * d.dot(p.precision * d);
            for (const auto &o : obs)
                v += o.vm.concentration * std::cos(theta_at(geom, o.ris_index, x).theta - o.vm.mean_dir);
            return v;
        };
        auto hessian = [&](const Vec3 &x, Vec3 *grad) {
            Mat3 h = p.precision;
            Vec3 g = -p.precision * (x - prior.mean);
            for (const auto &o : obs)
            {
                const ThetaLin t = theta_at(geom, o.ris_index, x);
                const double r = t.theta - o.vm.mean_dir;
                g -= o.vm.concentration * std::sin(r) * t.grad;
                h += o.vm.concentration * std::max(std::cos(r), 0.0) * t.grad * t.grad.transpose();
            }
            if (grad)
                *grad = g;
            return h;
        };

        Vec3 x = prior.mean;
        double cur = log_target(x);
        for (int it = 0; it < max_iters; ++it)
        {
            Vec3 g;
            const Mat3 h = hessian(x, &g);
            Vec3 step = h.ldlt().solve(g);
            if (!step.allFinite())
                break;
            double val = log_target(x + step);
            int halvings = 0;
            while (!(val >= cur) && halvings < 50)
            {
                step *= 0.5;
                val = log_target(x + step);
                ++halvings;
            }
            if (!(val >= cur))
                break;
            x += step;
            cur = val;
            if (step.norm() < 1e-13)
                break;
        }
        InfoMsg post;
        post.precision = hessian(x, nullptr);
        post.shift = post.precision * x;
        return to_moment(post, x);
    }
}
