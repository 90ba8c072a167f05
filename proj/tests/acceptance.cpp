// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero only when a check
// could not be carried out at all.
#include "ristrack/aoa.hpp"
#include "ristrack/config.hpp"
#include "ristrack/fim.hpp"
#include "ristrack/harness.hpp"
#include "ristrack/inference.hpp"
#include "ristrack/pbf.hpp"
#include "ristrack/rng.hpp"
#include "ristrack/stmrf.hpp"

#include "bound_toy.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

using namespace ristrack;
using namespace ristrack::oracle;
namespace fs = std::filesystem;

namespace
{
    struct Verdict
    {
        bool pass = false;
        std::string detail;
    };

    int failures = 0;
    std::ofstream report_file;

    void report(int id, const std::string &name, const Verdict &v)
    {
        std::ostringstream line;
        line << (v.pass ? "PASS" : "FAIL") << "  " << id << "  " << name << ": " << v.detail;
        std::cout << line.str() << std::endl;
        report_file << line.str() << std::endl;
        if (!v.pass)
            ++failures;
    }

    std::string num(double v, int prec = 4)
    {
        std::ostringstream s;
        s.precision(prec);
        s << v;
        return s.str();
    }

    double seconds_since(std::chrono::steady_clock::time_point t0)
    {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }

    // ---------------------------------------------------------------- 1 and 2

    std::size_t variant_index(const ExperimentConfig &cfg, Variant v)
    {
        for (std::size_t i = 0; i < cfg.variants.size(); ++i)
            if (cfg.variants[i] == v)
                return i;
        throw std::runtime_error("variant missing from the desk configuration");
    }

    Verdict baseline_ordering(const RunResult &r, double wall)
    {
        const auto &cfg = r.cfg;
        const std::size_t b1 = variant_index(cfg, Variant::B1), b2 = variant_index(cfg, Variant::B2),
                          b3 = variant_index(cfg, Variant::B3), pr = variant_index(cfg, Variant::Proposed);
        int ordered = 0;
        bool beats_b1 = true;
        std::string table;
        for (std::size_t s = 0; s < cfg.snr_db.size(); ++s)
        {
            const double v1 = r.rmse_avg(s, b1), v2 = r.rmse_avg(s, b2), v3 = r.rmse_avg(s, b3), vp = r.rmse_avg(s, pr);
            if (vp <= v3 && v3 <= v2 && v2 <= v1)
                ++ordered;
            beats_b1 = beats_b1 && vp < v1;
            table += " [" + num(cfg.snr_db[s]) + " dB: " + num(vp) + "/" + num(v3) + "/" + num(v2) + "/" + num(v1) + "]";
        }
        const int points = static_cast<int>(cfg.snr_db.size());
        Verdict v;
        v.pass = 5 * ordered >= 4 * points && beats_b1 && wall < 600;
        v.detail = "chain holds at " + std::to_string(ordered) + "/" + std::to_string(points) + " SNR points, proposed < B1 " +
                   (beats_b1 ? "everywhere" : "NOT everywhere") + ", " + num(wall) + " s for " + std::to_string(cfg.trials) +
                   " trials; averaged RMSE m proposed/B3/B2/B1" + table;
        return v;
    }

    double ls_slope(const std::vector<double> &y)
    {
        const double n = static_cast<double>(y.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < y.size(); ++i)
        {
            const double x = static_cast<double>(i + 1);
            sx += x;
            sy += y[i];
            sxx += x * x;
            sxy += x * y[i];
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    }

    Verdict temporal_gain(const RunResult &r)
    {
        const auto &cfg = r.cfg;
        const std::size_t b1 = variant_index(cfg, Variant::B1), pr = variant_index(cfg, Variant::Proposed);
        Verdict v;
        std::string info;
        for (std::size_t s = 0; s < cfg.snr_db.size(); ++s)
        {
            std::vector<double> y1;
            for (int t = 0; t < cfg.horizon; ++t)
                y1.push_back(r.rmse_slot(s, b1, t));
            double mean = 0;
            for (double x : y1)
                mean += x;
            mean /= static_cast<double>(y1.size());
            const double rel_slope = ls_slope(y1) / mean;
            const double first = r.rmse_slot(s, pr, 0), last = r.rmse_slot(s, pr, cfg.horizon - 1);
            const double drop = 1.0 - last / first;
            const bool ok = std::abs(rel_slope) <= 0.1 && drop >= 0.2;
            const std::string line = num(cfg.snr_db[s]) + " dB: B1 slope/mean " + num(rel_slope, 3) + " per slot, proposed slot " +
                                     std::to_string(cfg.horizon) + " vs 1 lower by " + num(100 * drop, 3) + "%";
            if (cfg.snr_db[s] == 10.0)
            {
                v.pass = ok;
                v.detail = line;
            }
            else
                info += "; " + line + (ok ? "" : " (outside)");
        }
        if (v.detail.empty())
            throw std::runtime_error("the desk configuration has no 10 dB point");
        v.detail += " | other SNRs" + info;
        return v;
    }

    // ---------------------------------------------------------------- 3

    CVec mean_signal(const std::vector<double> &psi, const std::vector<double> &mag, const std::vector<double> &arg, int n)
    {
        CVec mu = CVec::Zero(n);
        for (std::size_t l = 0; l < psi.size(); ++l)
            for (int k = 0; k < n; ++k)
                mu[k] += mag[l] * std::polar(1.0, kPi * k * psi[l] + arg[l]);
        return mu;
    }

    Verdict fim_correctness()
    {
        Rng rng(derive_seed(1, {3}));
        std::uniform_real_distribution<double> ud(-1, 1);
        double worst_d = 0, worst_t = 0, worst_re = 0;

        // signal derivatives
        for (int c = 0; c < 100; ++c)
        {
            const int n = 4 + c % 13;
            const int paths = 1 + c % 4;
            std::vector<double> psi, mag, arg;
            std::vector<cd> gains;
            for (int l = 0; l < paths; ++l)
            {
                psi.push_back(0.95 * ud(rng));
                mag.push_back(0.05 + 3 * std::abs(ud(rng)));
                arg.push_back(kPi * ud(rng));
                gains.push_back(std::polar(mag.back(), arg.back()));
            }
            const SignalJacobian j = signal_jacobian_paths(psi, gains, n);
            const double h = 1e-6;
            for (int l = 0; l < paths; ++l)
                for (int w = 0; w < 3; ++w)
                {
                    auto p = psi, m = mag, a = arg;
                    auto &v = w == 0 ? p : (w == 1 ? m : a);
                    const auto lu = static_cast<std::size_t>(l);
                    v[lu] += h;
                    const CVec up = mean_signal(p, m, a, n);
                    v[lu] -= 2 * h;
                    const CVec dn = mean_signal(p, m, a, n);
                    const CVec fd = (up - dn) / (2 * h);
                    const CVec an = w == 0 ? CVec(j.d_psi.col(l)) : (w == 1 ? CVec(j.d_mag.col(l)) : CVec(j.d_arg.col(l)));
                    worst_d = std::max(worst_d, (fd - an).norm() / an.norm());
                }
        }

        // position transform and reassembly on the desk layout
        ExperimentConfig cfg;
        std::uniform_real_distribution<double> up(-8, 8);
        for (int c = 0; c < 100; ++c)
        {
            const Scenario sc = cfg.scenario(-5 + 0.3 * c);
            const Vec3 u(up(rng), up(rng), 0.3 * up(rng));
            const RMat tr = transform_to_position(sc.geom, {0, 1}, u);
            const double h = 1e-6;
            for (int row = 0; row < 2; ++row)
            {
                RVec fd(3);
                for (int i = 0; i < 3; ++i)
                {
                    Vec3 p = u, m = u;
                    p[i] += h;
                    m[i] -= h;
                    const auto n = static_cast<std::size_t>(row);
                    fd[i] = (psi_user(sc.geom, n, p) - psi_user(sc.geom, n, m)) / (2 * h);
                }
                worst_t = std::max(worst_t, (fd.transpose() - tr.row(row)).norm() / tr.row(row).norm());
            }

            const std::vector<CVec> phases = random_phase_set(sc.geom, derive_seed(9, {static_cast<std::uint64_t>(c)}));
            const GaussianMsg prior{u, Vec3(0.1, 0.2, 0.05).asDiagonal()};
            const FimBundle b = make_bundle(sc, phases, u, prior);

            // Independent route: FIM over (position, |rho|, arg rho) by the chain rule, then the
            // Schur complement over the gains with the gain columns normalized.
            const SignalJacobian sj = signal_jacobian(sc.geom, sc.params, phases, sc.bs_bf, u);
            const Eigen::Index np = sj.d_psi.cols();
            CMat d(sj.d_psi.rows(), 3 + 2 * np);
            d.leftCols(3) = sj.d_psi * tr.cast<cd>();
            d.middleCols(3, np) = sj.d_mag;
            d.rightCols(np) = sj.d_arg;
            for (Eigen::Index k = 3; k < d.cols(); ++k)
                d.col(k) /= d.col(k).norm();
            const RMat full = b.snr * 2.0 * (d.adjoint() * d).real();
            const RMat a = full.topLeftCorner(3, 3);
            const RMat bb = full.topRightCorner(3, 2 * np);
            const RMat cc = full.bottomRightCorner(2 * np, 2 * np);
            const RMat je = a - bb * cc.ldlt().solve(bb.transpose()) + prior_fim({prior}).j;
            worst_re = std::max(worst_re, (je - b.j_equiv).norm() / b.j_equiv.norm());
            worst_re = std::max(worst_re, (b.reassemble() - b.j_equiv).norm() / b.j_equiv.norm());
        }
        Verdict v;
        v.pass = worst_d < 1e-5 && worst_t < 1e-5 && worst_re < 1e-10;
        v.detail = "worst relative error: signal derivatives " + num(worst_d, 3) + ", transform " + num(worst_t, 3) +
                   ", J_e reassembly " + num(worst_re, 3) + " over 100 configurations";
        return v;
    }

    // ---------------------------------------------------------------- 4

    Verdict bound_validity(std::uint64_t seed)
    {
        const toy::BoundStudy s = toy::bound_study(30, 500, seed);
        const double ratio_db = 10 * std::log10(s.mse_h / s.bcrb_h);
        const bool above = s.mse_h >= s.bcrb_h - 2 * s.diff_se_h;
        const bool close = ratio_db <= 3.0;
        Verdict v;
        v.pass = above && close;
        v.detail = "horizontal MSE " + num(s.mse_h, 4) + " m^2 vs BCRB " + num(s.bcrb_h, 4) + " m^2 (" + num(ratio_db, 3) +
                   " dB, z = " + num((s.mse_h - s.bcrb_h) / s.diff_se_h, 3) + " standard errors) over " +
                   std::to_string(s.trials) + " trials";
        return v;
    }

    // ---------------------------------------------------------------- 5

    Scenario scenario_with(std::size_t num_ris, int nx, int ny, double snr_db)
    {
        ExperimentConfig cfg;
        cfg.geom = SystemGeometry::reference_layout(num_ris, 8, 8, nx, ny);
        return cfg.scenario(snr_db);
    }

    Verdict sdr_optimality()
    {
        double worst_relax = -1, worst_extract = -1;
        for (double snr : {0.0, 10.0, 20.0})
            for (const Vec3 &pos : {Vec3(0, 0, 0), Vec3(-3, 2, 0), Vec3(4, -1, 0), Vec3(1, 5, 0)})
            {
                const Scenario sc = scenario_with(1, 2, 1, snr);
                const std::vector<GaussianMsg> pred = {GaussianMsg{pos, Mat3::Identity() * 0.1}};
                const PbfProblem prob = build_pbf_problem(sc, pred);
                double grid = std::numeric_limits<double>::infinity();
                for (int k = 0; k < 360; ++k)
                {
                    CVec l(2);
                    l << 1.0, std::polar(1.0, 2 * kPi * k / 360.0);
                    grid = std::min(grid, pbf_objective_phases(prob, {l}));
                }
                Rng rng(derive_seed(5, {static_cast<std::uint64_t>(snr), static_cast<std::uint64_t>(pos.x() + 10)}));
                const std::vector<CVec> start = {random_phases(2, rng)};
                const PbfDesign d = design_phases(sc, pred, start, 17);
                worst_relax = std::max(worst_relax, d.relaxed.objective / grid - 1);
                worst_extract = std::max(worst_extract, d.extracted.objective / grid - 1);
            }

        const Scenario sc = scenario_with(2, 4, 2, 10);
        Rng rng(derive_seed(5, {8}));
        std::uniform_real_distribution<double> ud(-3, 3);
        int wins = 0;
        const int trials = 100;
        for (int t = 0; t < trials; ++t)
        {
            std::vector<GaussianMsg> pred;
            for (int u = 0; u < 3; ++u)
                pred.push_back(GaussianMsg{Vec3(ud(rng), ud(rng), 0), Mat3::Identity() * 0.05});
            const std::vector<CVec> random = random_phase_set(sc.geom, rng());
            const std::vector<CVec> start = random_phase_set(sc.geom, rng());
            const PbfDesign d = design_phases(sc, pred, start, rng());
            if (d.extracted.objective < pbf_objective_phases(build_pbf_problem(sc, pred), random))
                ++wins;
        }
        Verdict v;
        v.pass = worst_relax <= 1e-9 && worst_extract <= 0.10 && wins == trials;
        v.detail = "M_R = 2: relaxation minus grid optimum at most " + num(100 * worst_relax, 3) + "%, extraction within " +
                   num(100 * worst_extract, 3) + "% of the grid; M_R = 8: beats random phases in " + std::to_string(wins) + "/" +
                   std::to_string(trials) + " trials";
        return v;
    }

    // ---------------------------------------------------------------- 6

    SystemGeometry toy_geometry()
    {
        SystemGeometry g;
        g.ris = {RisPanel{Vec3::Zero(), Vec3::UnitX(), Vec3::UnitZ()}, RisPanel{Vec3(12, 9, 0), Vec3::UnitX(), Vec3::UnitZ()}};
        g.user_axis = Vec3::UnitY();
        return g;
    }

    Verdict message_oracles()
    {
        const SystemGeometry g = toy_geometry();
        double worst_angle = 0, worst_match = 0, worst_conv = 0, worst_fuse = 0, worst_chain = 0;

        // angle message, relinearized as in the tracker, against the exact 2-D posterior
        const Vec3 lin(10, 0, 0);
        for (double offset : {0.0, 0.03, -0.06})
        {
            const VonMisesMsg vm{std::acos(psi_user(g, 0, lin + Vec3(0, offset, 0))), 1e4};
            const GaussianMsg belief{lin, Mat3::Identity() * 0.05 * 0.05};
            const InfoMsg pb = to_info(belief);
            GaussianMsg post = to_moment(angle_info(vm, 0, g, lin) + pb);
            for (int it = 0; it < 20; ++it)
                post = to_moment(angle_info(vm, 0, g, post.mean) + pb);
            auto logf = [&](const Eigen::Vector2d &x) {
                const Vec3 p(x.x(), x.y(), 0);
                const Vec3 dd = p - belief.mean;
                return -0.5 * dd.dot(pb.precision * dd) + vm.concentration * std::cos(std::acos(psi_user(g, 0, p)) - vm.mean_dir);
            };
            const Moments2 q = grid_moments(logf, lin.head<2>(), 0.5, 800);
            const Eigen::Matrix2d c = block2(post.cov);
            worst_angle = std::max(worst_angle, (q.mean - post.mean.head<2>()).norm() / std::sqrt(c.trace()));
            worst_angle = std::max(worst_angle, (q.cov - c).norm() / c.norm());
        }

        // moment matching of several angle observations with a Gaussian prior
        const Vec3 truth(6, 3, 0);
        for (double kappa : {2e4, 1e5})
        {
            std::vector<AngleObservation> obs;
            for (std::size_t n = 0; n < 2; ++n)
                obs.push_back(AngleObservation{VonMisesMsg{std::acos(psi_user(g, n, truth)) + 0.003 * (n ? 1 : -1), kappa}, n});
            const GaussianMsg prior{Vec3(6.3, 2.8, 0), Vec3(0.25, 0.25, 0.01).asDiagonal()};
            const GaussianMsg mm = moment_match_angles(prior, obs, g);
            const InfoMsg pp = to_info(prior);
            auto logf = [&](const Eigen::Vector2d &x) {
                const Vec3 p(x.x(), x.y(), 0);
                const Vec3 dd = p - prior.mean;
                double v = -0.5 * dd.dot(pp.precision * dd);
                for (const auto &o : obs)
                    v += o.vm.concentration * std::cos(std::acos(psi_user(g, o.ris_index, p)) - o.vm.mean_dir);
                return v;
            };
            const Eigen::Matrix2d c = block2(mm.cov);
            const Moments2 q = grid_moments(logf, mm.mean.head<2>(), 12 * std::sqrt(c.trace()), 600);
            worst_match = std::max(worst_match, (q.mean - mm.mean.head<2>()).norm() / std::sqrt(c.trace()));
            worst_match = std::max(worst_match, (q.cov - c).norm() / c.norm());
        }

        // spatial and temporal convolutions against 3-D quadrature
        Rng rng(derive_seed(6, {1}));
        std::normal_distribution<double> nd;
        {
            const StMrfModel model = StMrfModel::chain(2, 1, Vec3::Constant(0.1), 0.2);
            const GaussianMsg in{Vec3(1, -1, 0.3), random_spd(rng, 0.1)};
            const GaussianMsg out = msg_spatial(in, model, 0);
            auto kernel = [](const Vec3 &dd) { return pair_potential(dd, Vec3::Zero(), PotentialFamily::L2, 0.2); };
            const double norm = std::pow(2 * kPi * 0.2, 1.5);
            for (int i = 0; i < 8; ++i)
            {
                const Vec3 u = out.mean + 0.6 * Vec3(nd(rng), nd(rng), nd(rng));
                const double ref = gauss_pdf(u, out.mean, out.cov);
                worst_conv = std::max(worst_conv, std::abs(convolve_at(u, in, kernel, 40) / norm - ref) / ref);
            }
        }
        {
            const StMrfModel model = StMrfModel::chain(1, 2, Vec3(0.1, 0.1, 0.1), 0.2);
            const GaussianMsg prev{Vec3(-2, 0.5, 0), random_spd(rng, 0.1)};
            const GaussianMsg out = msg_temporal(prev, model);
            auto kernel = [&](const Vec3 &dd) { return std::exp(transition_logpdf(dd, Vec3::Zero(), model)); };
            for (int i = 0; i < 8; ++i)
            {
                const Vec3 u = out.mean + 0.5 * Vec3(nd(rng), nd(rng), nd(rng));
                const double ref = gauss_pdf(u, out.mean, out.cov);
                worst_conv = std::max(worst_conv, std::abs(convolve_at(u, prev, kernel, 40) - ref) / ref);
            }
        }

        // Gaussian product against the symbolic information-form sum
        for (int t = 0; t < 20; ++t)
        {
            GaussianMsg m[3];
            for (auto &x : m)
                x = GaussianMsg{Vec3(nd(rng), nd(rng), nd(rng)), random_spd(rng, 0.3)};
            const GaussianMsg f = fuse_angle_messages(m);
            Mat3 lam = Mat3::Zero();
            Vec3 eta = Vec3::Zero();
            for (const auto &x : m)
            {
                lam += x.cov.inverse();
                eta += x.cov.inverse() * x.mean;
            }
            const Mat3 cov = lam.inverse();
            worst_fuse = std::max(worst_fuse, (f.cov - cov).norm() / cov.norm());
            worst_fuse = std::max(worst_fuse, (f.mean - cov * eta).norm() / std::max(1.0, (cov * eta).norm()));
        }

        // two-user chain: one forward-backward sweep against the dense joint posterior
        for (int t = 0; t < 20; ++t)
        {
            const StMrfModel model = StMrfModel::chain(2, 1, Vec3::Constant(0.1), 0.1 + 0.05 * t);
            std::vector<InfoMsg> local;
            for (int u = 0; u < 2; ++u)
            {
                InfoMsg m = random_linear_info(rng, Vec3(u, 0, 0), 2);
                if (u == 0)
                    m.precision += Mat3::Identity();
                local.push_back(m);
            }
            const auto once = spatial_sweep(model, local, true);
            const auto exact = exact_marginals(model, local);
            for (std::size_t u = 0; u < 2; ++u)
            {
                const GaussianMsg b = to_moment(once[u]);
                worst_chain = std::max(worst_chain, (b.mean - exact[u].mean).norm());
                worst_chain = std::max(worst_chain, (b.cov - exact[u].cov).norm());
            }
        }
        Verdict v;
        v.pass = worst_angle < 1e-2 && worst_match < 1e-2 && worst_conv < 1e-2 && worst_fuse < 1e-10 && worst_chain < 1e-8;
        v.detail = "angle message " + num(worst_angle, 3) + ", moment matching " + num(worst_match, 3) + ", spatial/temporal " +
                   num(worst_conv, 3) + " (relative, quadrature), fusion " + num(worst_fuse, 3) + ", chain sweep " +
                   num(worst_chain, 3) + " (absolute)";
        return v;
    }

    // ---------------------------------------------------------------- 7

    Verdict aoa_estimator()
    {
        const int n = 8;
        double worst = 0;
        for (double psi : {0.3, -0.71, 0.05, 0.93, -0.4})
        {
            const CVec y = std::polar(0.7, 1.1) * ula_steering(psi, n);
            const auto est = estimate_paths(y, 1, nullptr, 1e-6);
            worst = std::max(worst, std::abs(est.at(0).psi_hat - psi));
        }
        const cd gain(1, 0);
        const double sigma2 = 1e-2; // 20 dB per antenna
        const double crb = psi_crb_single_path(n, gain, sigma2);
        double worst_db = 0;
        std::string per;
        for (double psi : {0.2, -0.6})
        {
            double mse = 0;
            const int trials = 500;
            for (int t = 0; t < trials; ++t)
            {
                Rng rng(derive_seed(7, {static_cast<std::uint64_t>(t)}));
                std::normal_distribution<double> nd(0.0, std::sqrt(sigma2 / 2));
                CVec y = gain * ula_steering(psi, n);
                for (int k = 0; k < n; ++k)
                    y[k] += cd(nd(rng), nd(rng));
                const double e = estimate_paths(y, 1, nullptr, sigma2).at(0).psi_hat - psi;
                mse += e * e;
            }
            mse /= trials;
            const double db = 10 * std::log10(mse / crb);
            worst_db = std::max(worst_db, std::abs(db));
            per += " " + num(db, 3);
        }
        Verdict v;
        v.pass = worst < 1e-6 && worst_db < 2.0;
        v.detail = "noiseless error " + num(worst, 3) + ", MSE/CRB at 20 dB over 500 trials (dB):" + per;
        return v;
    }

    // ---------------------------------------------------------------- 8

    Verdict stmrf_statistics()
    {
        const int steps = 10000;
        const StMrfModel m = StMrfModel::chain(1, steps + 1, Vec3(0.1, 0.1, 0.1), 0.2);
        const Trajectory tr = sample_trajectories(m, {Vec3::Zero()}, derive_seed(8, {1}));
        Vec3 mean = Vec3::Zero();
        Mat3 sq = Mat3::Zero();
        for (int t = 1; t <= steps; ++t)
        {
            const Vec3 d = tr.at(0, t) - tr.at(0, t - 1);
            mean += d;
            sq += d * d.transpose();
        }
        mean /= steps;
        const Mat3 cov = sq / steps - mean * mean.transpose();
        double worst_cov = 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                worst_cov = std::max(worst_cov, std::abs(cov(i, j) - (i == j ? 0.1 : 0.0)) / 0.1);

        StMrfModel mm = StMrfModel::chain(4, 5, Vec3(0.1, 0.1, 0.1), 0.2);
        mm.edges.push_back(Edge{0, 3, 0.5});
        Rng rng(derive_seed(8, {2}));
        std::normal_distribution<double> nd;
        Trajectory x(4, 5);
        for (int u = 0; u < 4; ++u)
            for (int t = 0; t < 5; ++t)
                x.at(u, t) = Vec3(nd(rng), nd(rng), nd(rng));
        const auto nb = mm.neighbours();
        double worst_blanket = 0;
        for (int u = 0; u < 4; ++u)
            for (int t = 0; t < 5; ++t)
            {
                Trajectory mod = x;
                mod.at(u, t) += Vec3(nd(rng), nd(rng), nd(rng));
                auto local = [&](const Trajectory &z) {
                    double s = 0;
                    if (t > 0)
                        s += transition_logpdf(z.at(u, t), z.at(u, t - 1), mm);
                    if (t + 1 < 5)
                        s += transition_logpdf(z.at(u, t + 1), z.at(u, t), mm);
                    for (int e : nb[static_cast<std::size_t>(u)])
                    {
                        const Edge &ed = mm.edges[static_cast<std::size_t>(e)];
                        s += pair_log_potential(z.at(ed.a, t), z.at(ed.b, t), mm.family, ed.spatial_var);
                    }
                    return s;
                };
                const double diff = joint_log_prior(mod, mm) - joint_log_prior(x, mm);
                worst_blanket = std::max(worst_blanket, std::abs(diff - (local(mod) - local(x))));
            }
        Verdict v;
        v.pass = worst_cov <= 0.05 && worst_blanket < 1e-10;
        v.detail = "step covariance off by at most " + num(100 * worst_cov, 3) + "% of 0.1 over 10^4 steps, Markov blanket error " +
                   num(worst_blanket, 3);
        return v;
    }

    // ---------------------------------------------------------------- 9

    std::string slurp(const fs::path &p)
    {
        std::ifstream f(p, std::ios::binary);
        if (!f)
            throw std::runtime_error("missing output " + p.string());
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }

    Verdict determinism(const std::string &cli, const fs::path &work)
    {
        const fs::path dir = work / "determinism";
        fs::remove_all(dir);
        fs::create_directories(dir);
        {
            std::ofstream f(dir / "config.json");
            f << R"({"channel": {"snr_db": [0, 10]}, "run": {"num_users": 2, "horizon": 4, "trials": 3, "seed": 11}})";
        }
        const std::string conf = (dir / "config.json").string();
        struct Run
        {
            std::string args;
            std::vector<std::string> files;
        };
        const std::vector<Run> runs = {
            {"sweep --fresh", {"rmse_vs_snr.csv", "rmse_vs_slot.csv", "rmse_detail.csv"}},
            {"trajectory", {"trajectory.csv", "rmse_vs_slot.csv"}},
            {"track --variant B3", {"track.csv", "rmse_vs_slot.csv"}},
        };
        int compared = 0, identical = 0;
        for (std::size_t r = 0; r < runs.size(); ++r)
        {
            for (const char *rep : {"a", "b"})
            {
                const fs::path out = dir / ("run" + std::to_string(r) + rep);
                const std::string cmd = "\"" + cli + "\" " + runs[r].args + " --quiet --config \"" + conf + "\" --out \"" +
                                        out.string() + "\" > \"" + (dir / "cli.log").string() + "\" 2>&1";
                if (std::system(cmd.c_str()) != 0)
                    throw std::runtime_error("CLI failed: " + cmd);
            }
            for (const auto &file : runs[r].files)
            {
                ++compared;
                const fs::path a = dir / ("run" + std::to_string(r) + "a") / file;
                const fs::path b = dir / ("run" + std::to_string(r) + "b") / file;
                if (slurp(a) == slurp(b))
                    ++identical;
            }
        }
        Verdict v;
        v.pass = compared > 0 && identical == compared;
        v.detail = std::to_string(identical) + "/" + std::to_string(compared) + " CSV files byte-identical across repeated sweep, trajectory and track runs";
        return v;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Acceptance checks"};
    std::string cli, work = "acceptance_work", config;
    app.add_option("--cli", cli, "path to the ristrack_cli executable")->required();
    app.add_option("--work", work, "scratch directory");
    app.add_option("--config", config, "desk configuration (defaults to the built-in desk settings)");
    CLI11_PARSE(app, argc, argv);

    try
    {
        fs::create_directories(work);
        report_file.open(fs::path(work) / "report.txt", std::ios::trunc);
        ExperimentConfig desk = config.empty() ? ExperimentConfig{} : load_config(config);

        const auto t0 = std::chrono::steady_clock::now();
        const RunResult run = run_experiment(desk);
        const double wall = seconds_since(t0);
        report(1, "baseline ordering", baseline_ordering(run, wall));
        report(2, "temporal gain at 10 dB", temporal_gain(run));
        report(3, "FIM correctness", fim_correctness());
        report(4, "bound validity", bound_validity(desk.seed));
        report(5, "SDR solver optimality", sdr_optimality());
        report(6, "message-passing oracles", message_oracles());
        report(7, "AoA estimator", aoa_estimator());
        report(8, "ST-MRF statistics", stmrf_statistics());
        report(9, "determinism", determinism(cli, work));
    }
    catch (const std::exception &e)
    {
        std::cout << "ERROR  " << e.what() << std::endl;
        report_file << "ERROR  " << e.what() << std::endl;
        return 2;
    }
    const std::string summary = failures == 0 ? "all criteria pass" : std::to_string(failures) + " criteria fail";
    std::cout << summary << std::endl;
    report_file << summary << std::endl;
    return 0;
}
