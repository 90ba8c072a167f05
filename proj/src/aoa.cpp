// SPDX-License-Identifier: Apache-2.0
#include "ristrack/aoa.hpp"

#include "ristrack/gaussian.hpp"
#include "ristrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ristrack
{
    namespace
    {
        struct PriorView
        {
            bool active = false;
            double mean = 0.0;
            double var = 0.0;
        };

        // |a(psi)^H r|^2 / (N sigma^2) and its first two derivatives in psi.
        struct Spectrum
        {
            double f = 0, d1 = 0, d2 = 0;
        };

        Spectrum spectrum(const CVec &r, double psi, double scale)
        {
            cd s{0, 0}, s1{0, 0}, s2{0, 0};
            for (Eigen::Index k = 0; k < r.size(); ++k)
            {
                const double w = kPi * static_cast<double>(k);
                const cd e = std::polar(1.0, -w * psi) * r[k];
                s += e;
                s1 += cd(0, -w) * e;
                s2 += -w * w * e;
            }
            Spectrum out;
            out.f = std::norm(s) * scale;
            out.d1 = 2.0 * std::real(std::conj(s) * s1) * scale;
            out.d2 = 2.0 * (std::norm(s1) + std::real(std::conj(s) * s2)) * scale;
            return out;
        }

        double objective(const CVec &r, double psi, double scale, const PriorView &p)
        {
            double v = spectrum(r, psi, scale).f;
            if (p.active)
                v -= 0.5 * (psi - p.mean) * (psi - p.mean) / p.var;
            return v;
        }

        double wrap_psi(double psi)
        {
            return psi - 2.0 * std::floor((psi + 1.0) / 2.0);
        }

        double place(double psi, const PriorView &p)
        {
            return p.active ? std::clamp(psi, -1.0, 1.0) : wrap_psi(psi);
        }

        // Damped Newton ascent on the (prior-weighted) concentrated likelihood.
        double newton(const CVec &r, double psi, double scale, const PriorView &p, int iters, double max_step)
        {
            double cur = objective(r, psi, scale, p);
            for (int it = 0; it < iters; ++it)
            {
                const Spectrum sp = spectrum(r, psi, scale);
                double g = sp.d1;
                double h = sp.d2;
                if (p.active)
                {
                    g -= (psi - p.mean) / p.var;
                    h -= 1.0 / p.var;
                }
                double step = h < 0 ? -g / h : (g >= 0 ? 0.25 : -0.25) * max_step;
                step = std::clamp(step, -max_step, max_step);
                double cand = place(psi + step, p);
                double val = objective(r, cand, scale, p);
                int halvings = 0;
                while (!(val >= cur) && halvings < 40)
                {
                    step *= 0.5;
                    cand = place(psi + step, p);
                    val = objective(r, cand, scale, p);
                    ++halvings;
                }
                if (!(val >= cur))
                    break;
                const double moved = std::abs(step);
                psi = cand;
                cur = val;
                if (moved < 1e-15)
                    break;
            }
            return psi;
        }

        CMat dictionary(const std::vector<double> &psi, int n)
        {
            CMat a(n, static_cast<Eigen::Index>(psi.size()));
            for (std::size_t l = 0; l < psi.size(); ++l)
                a.col(static_cast<Eigen::Index>(l)) = ula_steering(psi[l], n);
            return a;
        }

        std::vector<cd> ls_gains(const CVec &y, const std::vector<double> &psi)
        {
            const CMat a = dictionary(psi, static_cast<int>(y.size()));
            const CVec g = a.completeOrthogonalDecomposition().solve(y);
            return std::vector<cd>(g.data(), g.data() + g.size());
        }

        CVec residual_except(const CVec &y, const std::vector<double> &psi, const std::vector<cd> &gains, std::size_t skip)
        {
            CVec r = y;
            for (std::size_t m = 0; m < psi.size(); ++m)
                if (m != skip)
                    r -= gains[m] * ula_steering(psi[m], static_cast<int>(y.size()));
            return r;
        }

        // Full FIM over (psi_l, |g_l|, arg g_l) for every path, scaled by 2/sigma^2.
        RMat full_fim(const std::vector<double> &psi, const std::vector<cd> &gains, int n, double noise_power)
        {
            const auto L = static_cast<Eigen::Index>(psi.size());
            CMat d(n, 3 * L);
            for (Eigen::Index l = 0; l < L; ++l)
            {
                const cd g = gains[static_cast<std::size_t>(l)];
                const double mag = std::abs(g);
                const cd unit = mag > 0 ? g / mag : cd(1, 0);
                for (int k = 0; k < n; ++k)
                {
                    const cd e = std::polar(1.0, kPi * k * psi[static_cast<std::size_t>(l)]);
                    d(k, 3 * l) = cd(0, kPi * k) * g * e;
                    d(k, 3 * l + 1) = unit * e;
                    d(k, 3 * l + 2) = cd(0, 1) * g * e;
                }
            }
            RMat j = 2.0 * (d.adjoint() * d).real() / noise_power;
            return 0.5 * (j + j.transpose());
        }

        double circular_gap(double a, double b)
        {
            const double d = std::abs(wrap_psi(a - b));
            return std::min(d, 2.0 - d);
        }
    }

    RVec path_psi_information(const std::vector<double> &psi, const std::vector<cd> &gains, int n_antennas,
                              double noise_power)
    {
        const auto L = static_cast<Eigen::Index>(psi.size());
        const RMat j = full_fim(psi, gains, n_antennas, noise_power);
        RVec info(L);
        for (Eigen::Index l = 0; l < L; ++l)
        {
            std::vector<Eigen::Index> rest;
            for (Eigen::Index i = 0; i < 3 * L; ++i)
                if (i != 3 * l)
                    rest.push_back(i);
            RMat jnn(rest.size(), rest.size());
            RVec jpn(rest.size());
            for (std::size_t a = 0; a < rest.size(); ++a)
            {
                jpn[static_cast<Eigen::Index>(a)] = j(3 * l, rest[a]);
                for (std::size_t b = 0; b < rest.size(); ++b)
                    jnn(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = j(rest[a], rest[b]);
            }
            const RVec x = solve_psd_scaled(jnn, jpn);
            info[l] = std::max(0.0, j(3 * l, 3 * l) - jpn.dot(x));
        }
        return info;
    }

    std::vector<PathEstimate> estimate_paths(const CVec &y, int num_paths, const std::vector<VonMisesMsg> *priors,
                                             double noise_power, const AoaOptions &opt)
    {
        const int n = static_cast<int>(y.size());
        if (n < 2 || num_paths < 1 || num_paths > n - 1)
            throw InvalidSize("estimate_paths: need 1 <= num_paths <= N_U - 1");
        if (!(noise_power > 0))
            throw ContractViolation("estimate_paths: noise_power must be positive");
        if (priors && static_cast<int>(priors->size()) != num_paths)
            throw InvalidSize("estimate_paths: one prior per path");

        const auto L = static_cast<std::size_t>(num_paths);
        const double scale = 1.0 / (n * noise_power);
        const double max_step = 1.0 / n;

        std::vector<PriorView> pv(L);
        if (priors)
            for (std::size_t l = 0; l < L; ++l)
            {
                const auto &vm = (*priors)[l];
                if (vm.concentration > 0)
                {
                    const PsiGaussian g = psi_from_vm(vm, opt);
                    if (g.var < opt.psi_var_cap && g.var > 0)
                        pv[l] = PriorView{true, g.mean, g.var};
                }
            }

        const int grid = opt.oversample * n;
        std::vector<double> psi(L, 0.0);
        std::vector<cd> gains(L, cd(0, 0));

        // Greedy initialization: best candidate on the current residual, then refit.
        CVec r = y;
        for (std::size_t l = 0; l < L; ++l)
        {
            double lo = -1.0, hi = 1.0;
            if (pv[l].active)
            {
                const double sd = std::sqrt(pv[l].var);
                lo = std::max(-1.0, pv[l].mean - opt.prior_width * sd);
                hi = std::min(1.0, pv[l].mean + opt.prior_width * sd);
            }
            double best = std::numeric_limits<double>::quiet_NaN();
            double best_val = -std::numeric_limits<double>::infinity();
            auto consider = [&](double c) {
                const double v = objective(r, c, scale, pv[l]);
                if (v > best_val)
                {
                    best_val = v;
                    best = c;
                }
            };
            for (int g = 0; g < grid; ++g)
            {
                const double c = -1.0 + 2.0 * g / grid;
                if (c >= lo && c <= hi)
                    consider(c);
            }
            if (pv[l].active)
            {
                constexpr int kLocal = 33;
                for (int i = 0; i < kLocal; ++i)
                    consider(lo + (hi - lo) * i / (kLocal - 1));
            }
            psi[l] = newton(r, best, scale, pv[l], opt.newton_iters, max_step);
            std::vector<double> head(psi.begin(), psi.begin() + static_cast<std::ptrdiff_t>(l + 1));
            const auto g = ls_gains(y, head);
            std::copy(g.begin(), g.end(), gains.begin());
            r = y;
            for (std::size_t m = 0; m <= l; ++m)
                r -= gains[m] * ula_steering(psi[m], n);
        }

        // Cyclic refinement.
        for (int sweep = 0; sweep < opt.max_sweeps; ++sweep)
        {
            double change = 0.0;
            for (std::size_t l = 0; l < L; ++l)
            {
                const CVec rl = residual_except(y, psi, gains, l);
                const double upd = newton(rl, psi[l], scale, pv[l], opt.newton_iters, max_step);
                change = std::max(change, std::abs(upd - psi[l]) / std::max(1.0, std::abs(psi[l])));
                psi[l] = upd;
            }
            gains = ls_gains(y, psi);
            if (change < opt.rel_tol)
                break;
        }

        const RVec info = path_psi_information(psi, gains, n, noise_power);
        const RMat jfull = full_fim(psi, gains, n, noise_power);
        const RMat jinv = solve_psd_scaled(jfull, RMat::Identity(jfull.rows(), jfull.cols()));

        std::vector<PathEstimate> out(L);
        for (std::size_t l = 0; l < L; ++l)
        {
            PathEstimate &e = out[l];
            e.psi_hat = psi[l];
            e.gain_hat = gains[l];
            e.meas_info = info[static_cast<Eigen::Index>(l)];
            const double prior_info = pv[l].active ? 1.0 / pv[l].var : 0.0;
            const double tot = e.meas_info + prior_info;
            e.psi_var = tot > 1.0 / opt.psi_var_cap ? 1.0 / tot : opt.psi_var_cap;

            const CVec rl = residual_except(y, psi, gains, l);
            e.psi_ml = pv[l].active ? newton(rl, psi[l], scale, PriorView{}, opt.newton_iters, max_step) : psi[l];

            const auto b = static_cast<Eigen::Index>(3 * l + 1);
            e.gain_cov = jinv.block(b, b, 2, 2);
            if (std::abs(gains[l]) * std::abs(gains[l]) < 1e-12 * noise_power)
            {
                e.gain_cov.setZero();
                e.gain_cov(0, 0) = noise_power / (2.0 * n);
                e.gain_cov(1, 1) = kPi * kPi / 3.0;
            }
        }

        for (std::size_t a = 0; a < L; ++a)
            for (std::size_t b = a + 1; b < L; ++b)
            {
                if (circular_gap(psi[a], psi[b]) >= 2.0 / n)
                    continue;
                const double snr = std::min(std::norm(gains[a]), std::norm(gains[b])) / noise_power;
                if (snr < opt.low_snr)
                    out[a].low_confidence = out[b].low_confidence = true;
            }
        return out;
    }

    VonMisesMsg vm_from_psi(double psi, double psi_var, const AoaOptions &opt)
    {
        psi = std::clamp(psi, -1.0, 1.0);
        VonMisesMsg vm;
        vm.mean_dir = std::acos(psi);
        if (!(psi_var < opt.psi_var_cap))
            return vm;
        if (psi_var <= 0)
        {
            vm.concentration = opt.kappa_max;
            return vm;
        }
        // Delta method through arccos; near endfire fall back to the second-order spread.
        const double s2 = std::max(1.0 - psi * psi, 0.5 * std::sqrt(psi_var));
        vm.concentration = std::min(s2 / psi_var, opt.kappa_max);
        return vm;
    }

    VonMisesMsg vm_from_estimate(const PathEstimate &est, const AoaOptions &opt)
    {
        return vm_from_psi(est.psi_hat, est.psi_var, opt);
    }

    PsiGaussian psi_from_vm(const VonMisesMsg &vm, const AoaOptions &opt)
    {
        PsiGaussian g;
        g.mean = std::cos(vm.mean_dir);
        if (vm.concentration <= 0)
        {
            g.var = opt.psi_var_cap;
            return g;
        }
        const double s = std::sin(vm.mean_dir);
        g.var = std::min(s * s / vm.concentration, opt.psi_var_cap);
        return g;
    }

    AngleGaussian vm_to_gaussian(const VonMisesMsg &vm)
    {
        AngleGaussian g;
        g.mean = vm.mean_dir;
        g.var = vm.concentration > 0 ? 1.0 / vm.concentration : std::numeric_limits<double>::infinity();
        return g;
    }

    VonMisesMsg gaussian_to_vm(const AngleGaussian &g, double kappa_max)
    {
        VonMisesMsg vm;
        vm.mean_dir = std::remainder(g.mean, 2.0 * kPi);
        if (vm.mean_dir <= -kPi)
            vm.mean_dir += 2.0 * kPi;
        if (!std::isfinite(g.var))
            return vm;
        vm.concentration = g.var > 0 ? std::min(1.0 / g.var, kappa_max) : kappa_max;
        return vm;
    }

    double vm_angle_variance(double kappa)
    {
        if (kappa <= 0)
            return kPi * kPi / 3.0;
        const double half = std::min(kPi, 40.0 / std::sqrt(kappa));
        constexpr int kPanels = 4000; // even, composite Simpson
        const double h = 2.0 * half / kPanels;
        double num = 0, den = 0;
        for (int i = 0; i <= kPanels; ++i)
        {
            const double t = -half + i * h;
            const double w = (i == 0 || i == kPanels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            const double p = std::exp(kappa * (std::cos(t) - 1.0));
            num += w * t * t * p;
            den += w * p;
        }
        return num / den;
    }

    std::vector<int> min_cost_assignment(const RMat &cost)
    {
        const int n = static_cast<int>(cost.rows());
        const int m = static_cast<int>(cost.cols());
        if (n > m)
            throw InvalidSize("min_cost_assignment: more rows than columns");
        // Hungarian algorithm with potentials, 1-based internal indexing.
        const double inf = std::numeric_limits<double>::infinity();
        std::vector<double> u(n + 1, 0), v(m + 1, 0);
        std::vector<int> p(m + 1, 0), way(m + 1, 0);
        for (int i = 1; i <= n; ++i)
        {
            p[0] = i;
            int j0 = 0;
            std::vector<double> minv(m + 1, inf);
            std::vector<char> used(m + 1, 0);
            do
            {
                used[j0] = 1;
                const int i0 = p[j0];
                double delta = inf;
                int j1 = 0;
                for (int j = 1; j <= m; ++j)
                {
                    if (used[j])
                        continue;
                    const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if (cur < minv[j])
                    {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta)
                    {
                        delta = minv[j];
                        j1 = j;
                    }
                }
                for (int j = 0; j <= m; ++j)
                {
                    if (used[j])
                    {
                        u[p[j]] += delta;
                        v[j] -= delta;
                    }
                    else
                        minv[j] -= delta;
                }
                j0 = j1;
            } while (p[j0] != 0);
            do
            {
                const int j1 = way[j0];
                p[j0] = p[j1];
                j0 = j1;
            } while (j0 != 0);
        }
        std::vector<int> result(n, -1);
        for (int j = 1; j <= m; ++j)
            if (p[j] != 0)
                result[p[j] - 1] = j - 1;
        return result;
    }
}
