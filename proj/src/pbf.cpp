// SPDX-License-Identifier: Apache-2.0
#include "ristrack/pbf.hpp"

#include "ristrack/fim.hpp"
#include "ristrack/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ristrack
{
    namespace
    {
        cd cascade_gain_without_ris(const SystemGeometry &geom, const ChannelParams &params, const CVec &bs_bf,
                                    std::size_t n, const Vec3 &user_pos)
        {
            const RisPanel &r = geom.ris.at(n);
            const cd xi = pathloss_gain((r.pos - geom.bs_pos).norm(), params.wavelength);
            const cd vs = pathloss_gain((user_pos - r.pos).norm(), params.wavelength);
            const double phi_bs = direction_cosine(geom.bs_pos, r.pos, geom.bs_axis);
            const cd bs_factor = ula_steering(phi_bs, geom.bs_antennas).dot(bs_bf);
            return params.reflection_for(n) * xi * vs * bs_factor;
        }

        CMat hermitian(const CMat &m) { return 0.5 * (m + m.adjoint()); }

        // Per-user equivalent FIM for the given q values (one per term).
        std::vector<Mat3> equivalent(const PbfProblem &prob, const std::vector<double> &q)
        {
            std::vector<Mat3> j = prob.j_prior;
            for (std::size_t i = 0; i < prob.terms.size(); ++i)
            {
                const auto &t = prob.terms[i];
                j[static_cast<std::size_t>(t.user)] += t.beta * q[i] * t.t * t.t.transpose();
            }
            return j;
        }

        double trace_inverse(const std::vector<Mat3> &j)
        {
            double s = 0;
            for (const Mat3 &m : j)
            {
                Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
                if (!(es.eigenvalues()[0] > 0))
                    return std::numeric_limits<double>::infinity();
                s += es.eigenvalues().cwiseInverse().sum();
            }
            return s;
        }

        std::vector<double> q_values(const PbfProblem &prob, const std::vector<CMat> &pi)
        {
            std::vector<double> q(prob.terms.size());
            for (std::size_t i = 0; i < prob.terms.size(); ++i)
            {
                const auto &t = prob.terms[i];
                q[i] = std::real(t.c.dot(pi[static_cast<std::size_t>(t.ris)] * t.c));
            }
            return q;
        }

        double inner(const std::vector<CMat> &a, const std::vector<CMat> &b)
        {
            double s = 0;
            for (std::size_t n = 0; n < a.size(); ++n)
                s += std::real((a[n].adjoint() * b[n]).trace());
            return s;
        }

        CMat clip_psd_c(const CMat &m)
        {
            Eigen::SelfAdjointEigenSolver<CMat> es(hermitian(m));
            const RVec ev = es.eigenvalues().cwiseMax(0.0);
            return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
        }

        CVec unit_modulus(const CVec &v)
        {
            CVec out(v.size());
            for (Eigen::Index i = 0; i < v.size(); ++i)
                out[i] = std::abs(v[i]) > 0 ? v[i] / std::abs(v[i]) : cd(1, 0);
            return out;
        }
    }

    double alpha_factor(int n_antennas, AlphaConvention conv)
    {
        const double kbar = conv == AlphaConvention::Marginal ? 0.5 * (n_antennas - 1) : 0.0;
        double s = 0;
        for (int k = 0; k < n_antennas; ++k)
            s += (k - kbar) * (k - kbar);
        return 2.0 * kPi * kPi * s;
    }

    double lifted_fim(const CMat &pi, const SystemGeometry &geom, const ChannelParams &params, const CVec &bs_bf,
                      std::size_t ris_index, const Vec3 &user_pos, AlphaConvention conv)
    {
        const CVec c = ris_coupling(geom, ris_index, user_pos);
        const cd k = cascade_gain_without_ris(geom, params, bs_bf, ris_index, user_pos);
        return alpha_factor(geom.user_antennas, conv) * std::norm(k) * std::real(c.dot(pi * c));
    }

    PbfProblem build_pbf_problem(const Scenario &sc, const std::vector<GaussianMsg> &predicted, AlphaConvention conv)
    {
        const auto &g = sc.geom;
        PbfProblem prob;
        prob.num_ris = static_cast<int>(g.num_ris());
        prob.m_r = g.ris_elements();
        const double snr = sc.params.tx_power / sc.params.noise_power;
        const double alpha = alpha_factor(g.user_antennas, conv);
        for (std::size_t u = 0; u < predicted.size(); ++u)
        {
            const PriorFim jp = prior_fim({predicted[u]});
            prob.j_prior.push_back(jp.j.block<3, 3>(0, 0));
            const Vec3 &pos = predicted[u].mean;
            for (std::size_t n = 0; n < g.num_ris(); ++n)
            {
                PbfProblem::Term t;
                t.user = static_cast<int>(u);
                t.ris = static_cast<int>(n);
                t.beta = snr * alpha * std::norm(cascade_gain_without_ris(g, sc.params, sc.bs_bf, n, pos));
                t.t = psi_user_grad(g, n, pos);
                t.c = ris_coupling(g, n, pos);
                prob.terms.push_back(std::move(t));
            }
        }
        return prob;
    }

    double pbf_objective(const PbfProblem &prob, const std::vector<CMat> &pi)
    {
        return trace_inverse(equivalent(prob, q_values(prob, pi)));
    }

    double pbf_objective_phases(const PbfProblem &prob, const std::vector<CVec> &phases)
    {
        std::vector<double> q(prob.terms.size());
        for (std::size_t i = 0; i < prob.terms.size(); ++i)
        {
            const auto &t = prob.terms[i];
            q[i] = std::norm(t.c.dot(phases[static_cast<std::size_t>(t.ris)]));
        }
        return trace_inverse(equivalent(prob, q));
    }

    std::vector<CMat> pbf_gradient(const PbfProblem &prob, const std::vector<CMat> &pi)
    {
        const std::vector<Mat3> j = equivalent(prob, q_values(prob, pi));
        std::vector<Mat3> jinv2(j.size());
        for (std::size_t u = 0; u < j.size(); ++u)
        {
            const Mat3 inv = j[u].inverse();
            jinv2[u] = inv * inv;
        }
        std::vector<CMat> grad(pi.size());
        for (std::size_t n = 0; n < pi.size(); ++n)
            grad[n] = CMat::Zero(pi[n].rows(), pi[n].cols());
        for (const auto &t : prob.terms)
        {
            const double w = -t.beta * t.t.dot(jinv2[static_cast<std::size_t>(t.user)] * t.t);
            grad[static_cast<std::size_t>(t.ris)] += w * t.c * t.c.adjoint();
        }
        return grad;
    }

    CMat project_elliptope(const CMat &m, int max_iters, double tol)
    {
        const Eigen::Index n = m.rows();
        CMat x = hermitian(m);
        x.diagonal().setOnes();
        CMat p = CMat::Zero(n, n);
        for (int it = 0; it < max_iters; ++it)
        {
            const CMat z = clip_psd_c(x + p);
            p = x + p - z;
            CMat next = z;
            next.diagonal().setOnes();
            const double moved = (next - x).norm();
            x = std::move(next);
            if (moved <= tol * (1.0 + x.norm()))
                break;
        }
        // Exact feasibility: clip, then rescale by the diagonal.
        CMat y = clip_psd_c(x);
        RVec d(n);
        for (Eigen::Index i = 0; i < n; ++i)
        {
            const double di = std::real(y(i, i));
            d[i] = di > 1e-300 ? 1.0 / std::sqrt(di) : 0.0;
        }
        y = d.asDiagonal() * y * d.asDiagonal();
        for (Eigen::Index i = 0; i < n; ++i)
            if (d[i] == 0.0)
            {
                y.row(i).setZero();
                y.col(i).setZero();
                y(i, i) = 1.0;
            }
        return hermitian(y);
    }

    std::vector<CMat> lift(const std::vector<CVec> &phases)
    {
        std::vector<CMat> out;
        out.reserve(phases.size());
        for (const CVec &l : phases)
            out.push_back(l * l.adjoint());
        return out;
    }

    PbfResult optimize_pbf(const PbfProblem &prob, const std::vector<CMat> &start, const PbfOptions &opt)
    {
        PbfResult res;
        if (static_cast<int>(start.size()) != prob.num_ris)
            throw InvalidSize("optimize_pbf: one start matrix per RIS");
        res.pi.resize(start.size());
        for (std::size_t n = 0; n < start.size(); ++n)
        {
            bool feasible = start[n].rows() == prob.m_r && start[n].allFinite();
            if (feasible)
            {
                const CMat h = hermitian(start[n]);
                Eigen::SelfAdjointEigenSolver<CMat> es(h, Eigen::EigenvaluesOnly);
                feasible = es.eigenvalues().minCoeff() > -1e-9 && (h.diagonal().real().array() - 1.0).abs().maxCoeff() < 1e-8;
                res.pi[n] = h;
            }
            if (!feasible)
                res.pi[n] = CMat::Identity(prob.m_r, prob.m_r);
        }
        double f = pbf_objective(prob, res.pi);
        res.trace.push_back(f);
        res.objective = f;
        if (opt.max_iters <= 0 || !std::isfinite(f))
            return res;

        std::vector<CMat> grad = pbf_gradient(prob, res.pi);
        const double gnorm = std::sqrt(inner(grad, grad));
        if (!(gnorm > 0))
        {
            res.converged = true;
            return res;
        }
        double step = static_cast<double>(prob.m_r) / gnorm;
        constexpr double kArmijo = 1e-4;
        int small = 0; // consecutive iterations below rel_tol

        for (int it = 0; it < opt.max_iters; ++it)
        {
            bool accepted = false;
            std::vector<CMat> cand(res.pi.size());
            double fc = f;
            for (int tries = 0; tries < 60; ++tries)
            {
                for (std::size_t n = 0; n < res.pi.size(); ++n)
                    cand[n] = project_elliptope(res.pi[n] - step * grad[n], opt.projection_iters, opt.projection_tol);
                fc = pbf_objective(prob, cand);
                double dist2 = 0;
                for (std::size_t n = 0; n < cand.size(); ++n)
                    dist2 += (cand[n] - res.pi[n]).squaredNorm();
                if (fc <= f - kArmijo * dist2 / step && fc <= f)
                {
                    accepted = dist2 > 0;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted)
            {
                res.converged = true;
                break;
            }
            const double rel = (f - fc) / std::max(std::abs(f), std::numeric_limits<double>::min());
            res.pi = std::move(cand);
            f = fc;
            res.trace.push_back(f);
            res.iterations = it + 1;
            step *= 2.0;
            small = rel < opt.rel_tol ? small + 1 : 0;
            if (small >= 2)
            {
                res.converged = true;
                break;
            }
            grad = pbf_gradient(prob, res.pi);
        }
        res.objective = f;
        return res;
    }

    Extraction extract_phases(const PbfProblem &prob, const std::vector<CMat> &pi, std::uint64_t seed,
                              const std::vector<CVec> *fallback, const PbfOptions &opt)
    {
        const std::size_t n_ris = pi.size();
        Extraction ex;
        ex.rank1_gap.resize(n_ris);

        std::vector<CMat> factor(n_ris);
        std::vector<CVec> top(n_ris);
        for (std::size_t n = 0; n < n_ris; ++n)
        {
            Eigen::SelfAdjointEigenSolver<CMat> es(hermitian(pi[n]));
            const RVec ev = es.eigenvalues().cwiseMax(0.0);
            factor[n] = es.eigenvectors() * ev.cwiseSqrt().asDiagonal();
            top[n] = unit_modulus(es.eigenvectors().col(es.eigenvectors().cols() - 1));
            const double tr = std::real(pi[n].trace());
            ex.rank1_gap[n] = tr > 0 ? 1.0 - ev.maxCoeff() / tr : 0.0;
        }

        double best = std::numeric_limits<double>::infinity();
        auto consider = [&](const std::vector<CVec> &cand) {
            ++ex.candidates;
            const double v = pbf_objective_phases(prob, cand);
            if (v < best || ex.phases.empty())
            {
                best = v;
                ex.phases = cand;
                ex.objective = v;
            }
        };

        if (fallback)
            consider(*fallback);
        consider(top);

        Rng rng(seed);
        std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
        std::vector<CVec> cand(n_ris);
        for (int s = 0; s < opt.randomizations; ++s)
        {
            for (std::size_t n = 0; n < n_ris; ++n)
            {
                CVec z(factor[n].cols());
                for (Eigen::Index i = 0; i < z.size(); ++i)
                    z[i] = cd(nd(rng), nd(rng));
                cand[n] = unit_modulus(factor[n] * z);
            }
            consider(cand);
        }
        // Keep the fallback when nothing beats it by more than the tie tolerance.
        if (fallback)
        {
            const double fv = pbf_objective_phases(prob, *fallback);
            if (fv <= ex.objective * (1.0 + 1e-12))
            {
                ex.phases = *fallback;
                ex.objective = fv;
            }
        }
        return ex;
    }

    PbfDesign design_phases(const Scenario &sc, const std::vector<GaussianMsg> &predicted,
                            const std::vector<CVec> &start, std::uint64_t seed, const PbfOptions &opt)
    {
        PbfDesign d;
        const PbfProblem prob = build_pbf_problem(sc, predicted);
        d.relaxed = optimize_pbf(prob, lift(start), opt);
        if (d.relaxed.iterations == 0 && d.relaxed.pi.size() == start.size())
        {
            // The relaxation never left lift(start), so start is its exact rank-1 factor.
            d.extracted.phases = start;
            d.extracted.objective = pbf_objective_phases(prob, start);
            d.extracted.rank1_gap.assign(start.size(), 0.0);
            d.extracted.candidates = 1;
            return d;
        }
        d.extracted = extract_phases(prob, d.relaxed.pi, seed, &start, opt);
        return d;
    }
}
