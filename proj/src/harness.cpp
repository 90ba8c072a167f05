// SPDX-License-Identifier: Apache-2.0
#include "ristrack/harness.hpp"

#include "ristrack/fim.hpp"
#include "ristrack/pbf.hpp"
#include "ristrack/rng.hpp"

#include <json.hpp>

#include <Eigen/Core>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

namespace ristrack
{
    using json = nlohmann::json;

    VariantSetup baseline_variant(Variant v, const ExperimentConfig &cfg)
    {
        VariantSetup s;
        TrackerOptions &t = s.tracker;
        t.tol = cfg.tol;
        t.max_iters = cfg.max_iters;
        t.damping = cfg.damping;
        t.area_center = cfg.area_center;
        t.aoa.oversample = cfg.aoa_oversample;
        t.aoa.kappa_max = cfg.kappa_max;
        switch (v)
        {
        case Variant::B1:
            t.temporal = t.spatial = t.initial_prior = t.aoa_priors = false;
            break;
        case Variant::B2:
            t.spatial = false;
            break;
        case Variant::B3:
            break;
        case Variant::Proposed:
            s.adaptive_pbf = cfg.pbf_mode == PbfMode::Adaptive;
            break;
        }
        return s;
    }

    ZPath z_trajectory(const Vec3 &start, const Vec3 &end, double speed, int slots)
    {
        if ((end - start).head<2>().norm() == 0.0)
            throw DegenerateGeometry("z_trajectory: start and end coincide in the plane");
        if (!(speed > 0) || slots < 1)
            throw std::invalid_argument("z_trajectory: speed and slots must be positive");
        ZPath z;
        z.corners = {start, Vec3(end.x(), start.y(), start.z()), Vec3(start.x(), end.y(), end.z()), end};
        std::vector<double> seg(3);
        for (int i = 0; i < 3; ++i)
        {
            seg[static_cast<std::size_t>(i)] = (z.corners[static_cast<std::size_t>(i + 1)] - z.corners[static_cast<std::size_t>(i)]).norm();
            z.length += seg[static_cast<std::size_t>(i)];
        }
        z.truncated = speed * slots < z.length;
        for (int t = 1; t <= slots; ++t)
        {
            double s = std::min(speed * t, z.length);
            Vec3 p = end;
            for (std::size_t i = 0; i < 3; ++i)
            {
                if (s <= seg[i] && seg[i] > 0)
                {
                    p = z.corners[i] + (s / seg[i]) * (z.corners[i + 1] - z.corners[i]);
                    break;
                }
                s -= seg[i];
            }
            z.points.push_back(p);
        }
        return z;
    }

    std::vector<Vec3> user_offsets(const ExperimentConfig &cfg)
    {
        std::vector<Vec3> off;
        for (int u = 0; u < cfg.num_users; ++u)
            off.emplace_back((u - 0.5 * (cfg.num_users - 1)) * cfg.user_spacing, 0.0, 0.0);
        return off;
    }

    std::uint64_t trial_seed(const ExperimentConfig &cfg, int trial)
    {
        return derive_seed(cfg.seed, {stream::kTrial, static_cast<std::uint64_t>(trial)});
    }

    Trajectory generate_truth(const ExperimentConfig &cfg, std::uint64_t seed)
    {
        const StMrfModel model = cfg.mrf_model();
        const std::vector<Vec3> off = user_offsets(cfg);
        const std::uint64_t traj_seed = derive_seed(seed, {stream::kTrajectory});
        Trajectory tr(cfg.num_users, cfg.horizon);
        switch (cfg.trajectory)
        {
        case TrajectoryKind::Static:
            for (int u = 0; u < cfg.num_users; ++u)
                for (int t = 0; t < cfg.horizon; ++t)
                    tr.at(u, t) = cfg.start + off[static_cast<std::size_t>(u)];
            break;
        case TrajectoryKind::ZShape:
            for (int u = 0; u < cfg.num_users; ++u)
            {
                const Vec3 &o = off[static_cast<std::size_t>(u)];
                const ZPath z = z_trajectory(cfg.start + o, cfg.end + o, cfg.speed, cfg.horizon);
                for (int t = 0; t < cfg.horizon; ++t)
                    tr.at(u, t) = z.points[static_cast<std::size_t>(t)];
            }
            break;
        case TrajectoryKind::Roam:
        {
            std::vector<Vec3> init;
            for (const Vec3 &o : off)
                init.push_back(cfg.start + o);
            std::optional<SpeedClamp> clamp;
            if (cfg.speed_clamp)
                clamp = SpeedClamp{cfg.speed, 1.0};
            tr = sample_trajectories(model, init, traj_seed, clamp);
            if (cfg.planar)
                for (int u = 0; u < cfg.num_users; ++u)
                    for (int t = 0; t < cfg.horizon; ++t)
                        tr.at(u, t).z() = init[static_cast<std::size_t>(u)].z();
            break;
        }
        case TrajectoryKind::Group:
        {
            std::vector<int> frozen;
            if (cfg.planar)
                frozen.push_back(2);
            tr = sample_group_trajectories(model, cfg.start, traj_seed, frozen);
            break;
        }
        }
        return tr;
    }

    SimulatedSource::SimulatedSource(const Scenario &sc, const Trajectory &truth, std::uint64_t trial_seed, bool noiseless)
        : sc_(sc), truth_(truth), seed_(trial_seed), noiseless_(noiseless)
    {
    }

    CVec SimulatedSource::signal(int user, int slot, std::span<const CVec> phases)
    {
        const Vec3 &pos = truth_.at(user, slot);
        if (noiseless_)
            return noiseless_signal(sc_, phases, pos);
        const std::uint64_t s = derive_seed(seed_, {stream::kNoise, static_cast<std::uint64_t>(slot), static_cast<std::uint64_t>(user)});
        return received_signal(sc_, phases, pos, s).y;
    }

    PhaseScheduler make_scheduler(const Scenario &sc, std::uint64_t seed, bool adaptive, const PbfOptions &opt)
    {
        return [&sc, seed, adaptive, opt](int slot, const std::vector<GaussianMsg> &predicted) {
            const auto t = static_cast<std::uint64_t>(slot);
            std::vector<CVec> start = random_phase_set(sc.geom, derive_seed(seed, {stream::kPhases, t}));
            if (!adaptive || slot == 0 || predicted.empty())
                return start;
            const PbfDesign d = design_phases(sc, predicted, start, derive_seed(seed, {stream::kRandomization, t}), opt);
            return d.extracted.phases;
        };
    }

    double horizontal_bcrb(const Scenario &sc, std::span<const CVec> phases, const Vec3 &truth, const GaussianMsg &prior)
    {
        const FimBundle b = make_bundle(sc, phases, truth, prior);
        const Eigen::FullPivLU<RMat> lu(b.j_equiv);
        if (!lu.isInvertible())
            return std::numeric_limits<double>::infinity();
        const RMat inv = lu.inverse();
        return inv(0, 0) + inv(1, 1);
    }

    TrialResult run_trial(const ExperimentConfig &cfg, std::size_t snr_index, int trial, bool keep_tracks)
    {
        TrialResult out;
        out.trial = trial;
        out.snr_index = snr_index;
        const std::uint64_t seed = trial_seed(cfg, trial);
        const Scenario sc = cfg.scenario(cfg.snr_db.at(snr_index));
        out.truth = generate_truth(cfg, seed);

        StMrfModel model = cfg.mrf_model();
        std::vector<Vec3> first;
        for (int u = 0; u < cfg.num_users; ++u)
            first.push_back(out.truth.at(u, 0));
        model.initial_box = box_around(first, cfg.box_half_width);

        for (Variant v : cfg.variants)
        {
            const VariantSetup setup = baseline_variant(v, cfg);
            SimulatedSource src(sc, out.truth, seed, cfg.noiseless);
            AoaMeasurementModel meas(sc.geom, sc.params.noise_power, src, setup.tracker);
            meas.set_num_users(cfg.num_users);
            const TrackResult res = mudlt_track(model, meas, setup.tracker, make_scheduler(sc, seed, setup.adaptive_pbf, cfg.pbf));

            VariantTrial vt;
            vt.sq_err.assign(static_cast<std::size_t>(cfg.horizon), std::vector<double>(static_cast<std::size_t>(cfg.num_users)));
            vt.bcrb = vt.sq_err;
            for (int t = 0; t < cfg.horizon; ++t)
            {
                const SlotResult &slot = res.slots[static_cast<std::size_t>(t)];
                for (int u = 0; u < cfg.num_users; ++u)
                {
                    const auto ut = static_cast<std::size_t>(u);
                    const Vec3 &truth = out.truth.at(u, t);
                    vt.sq_err[static_cast<std::size_t>(t)][ut] = (slot.beliefs[ut].mean - truth).squaredNorm();
                    vt.bcrb[static_cast<std::size_t>(t)][ut] = horizontal_bcrb(sc, slot.phases, truth, slot.priors[ut]);
                }
            }
            if (keep_tracks)
                vt.track = res;
            out.variants.push_back(std::move(vt));
        }
        return out;
    }

    std::size_t RunResult::index(std::size_t s, std::size_t v, int t, int u) const
    {
        const auto V = cfg.variants.size();
        const auto T = static_cast<std::size_t>(cfg.horizon);
        const auto U = static_cast<std::size_t>(cfg.num_users);
        return ((s * V + v) * T + static_cast<std::size_t>(t)) * U + static_cast<std::size_t>(u);
    }

    double RunResult::rmse(std::size_t s, std::size_t v, int t, int u) const
    {
        return std::sqrt(sum_sq[index(s, v, t, u)] / trials_done);
    }

    double RunResult::rmse_slot(std::size_t s, std::size_t v, int t) const
    {
        double acc = 0;
        for (int u = 0; u < cfg.num_users; ++u)
            acc += sum_sq[index(s, v, t, u)];
        return std::sqrt(acc / (static_cast<double>(trials_done) * cfg.num_users));
    }

    double RunResult::rmse_avg(std::size_t s, std::size_t v) const
    {
        double acc = 0;
        for (int t = 0; t < cfg.horizon; ++t)
            acc += rmse_slot(s, v, t);
        return acc / cfg.horizon;
    }

    double RunResult::bcrb(std::size_t s, std::size_t v, int t, int u) const
    {
        return sum_bcrb[index(s, v, t, u)] / trials_done;
    }

    double RunResult::bcrb_slot(std::size_t s, std::size_t v, int t) const
    {
        double acc = 0;
        for (int u = 0; u < cfg.num_users; ++u)
            acc += bcrb(s, v, t, u);
        return acc / cfg.num_users;
    }

    double RunResult::bcrb_avg(std::size_t s, std::size_t v) const
    {
        double acc = 0;
        for (int t = 0; t < cfg.horizon; ++t)
            acc += bcrb_slot(s, v, t);
        return acc / cfg.horizon;
    }

    std::uint64_t config_fingerprint(const ExperimentConfig &cfg)
    {
        // FNV-1a over the canonical echo, ignoring the thread count.
        ExperimentConfig c = cfg;
        c.threads = 0;
        const std::string s = config_to_json(c, -1);
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (unsigned char ch : s)
        {
            h ^= ch;
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    namespace
    {
        json trial_to_json(std::uint64_t fp, const TrialResult &r)
        {
            json j;
            j["fingerprint"] = fp;
            j["snr_index"] = r.snr_index;
            j["trial"] = r.trial;
            json vars = json::array();
            for (const auto &v : r.variants)
                vars.push_back(json{{"sq", v.sq_err}, {"bcrb", v.bcrb}});
            j["variants"] = vars;
            return j;
        }

        bool trial_from_json(const json &j, std::uint64_t fp, const ExperimentConfig &cfg, TrialResult &r)
        {
            if (!j.contains("fingerprint") || j["fingerprint"].get<std::uint64_t>() != fp)
                return false;
            r.snr_index = j["snr_index"].get<std::size_t>();
            r.trial = j["trial"].get<int>();
            if (r.snr_index >= cfg.snr_db.size() || r.trial < 0 || r.trial >= cfg.trials)
                return false;
            const json &vars = j["variants"];
            if (vars.size() != cfg.variants.size())
                return false;
            r.variants.clear();
            for (const auto &v : vars)
            {
                VariantTrial vt;
                vt.sq_err = v["sq"].get<std::vector<std::vector<double>>>();
                vt.bcrb = v["bcrb"].get<std::vector<std::vector<double>>>();
                if (vt.sq_err.size() != static_cast<std::size_t>(cfg.horizon))
                    return false;
                r.variants.push_back(std::move(vt));
            }
            return true;
        }
    }

    RunResult run_experiment(const ExperimentConfig &cfg, const RunOptions &opt)
    {
        cfg.validate();
        const auto t0 = std::chrono::steady_clock::now();
        const std::size_t S = cfg.snr_db.size();
        const auto trials = static_cast<std::size_t>(cfg.trials);
        const std::size_t total = S * trials;
        const std::uint64_t fp = config_fingerprint(cfg);

        std::vector<std::optional<TrialResult>> cells(total);
        RunResult rr;
        rr.cfg = cfg;

        if (!opt.journal_path.empty())
        {
            std::ifstream in(opt.journal_path);
            std::string line;
            while (std::getline(in, line))
            {
                if (line.empty())
                    continue;
                try
                {
                    TrialResult r;
                    if (trial_from_json(json::parse(line), fp, cfg, r))
                    {
                        const std::size_t k = r.snr_index * trials + static_cast<std::size_t>(r.trial);
                        if (!cells[k])
                        {
                            cells[k] = std::move(r);
                            ++rr.resumed;
                        }
                    }
                }
                catch (const std::exception &)
                {
                    // A torn last line from an interrupted run is skipped and recomputed.
                }
            }
        }

        std::vector<std::size_t> todo;
        for (std::size_t k = 0; k < total; ++k)
            if (!cells[k])
                todo.push_back(k);

        std::ofstream journal;
        if (!opt.journal_path.empty())
        {
            // Start on a fresh line when an interrupted run left a torn record behind.
            bool torn = false;
            {
                std::ifstream in(opt.journal_path, std::ios::binary | std::ios::ate);
                if (in && in.tellg() > 0)
                {
                    in.seekg(-1, std::ios::end);
                    torn = in.get() != '\n';
                }
            }
            journal.open(opt.journal_path, std::ios::app | std::ios::binary);
            if (torn)
                journal << '\n';
        }
        std::mutex mu;
        std::atomic<std::size_t> next{0};
        std::atomic<int> done{static_cast<int>(total - todo.size())};
        std::exception_ptr failure;

        auto worker = [&]() {
            for (;;)
            {
                const std::size_t i = next.fetch_add(1);
                if (i >= todo.size())
                    return;
                const std::size_t k = todo[i];
                try
                {
                    TrialResult r = run_trial(cfg, k / trials, static_cast<int>(k % trials));
                    std::lock_guard<std::mutex> lock(mu);
                    if (journal)
                    {
                        journal << trial_to_json(fp, r).dump() << '\n';
                        journal.flush();
                    }
                    cells[k] = std::move(r);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!failure)
                        failure = std::current_exception();
                    next = todo.size();
                    return;
                }
                const int d = ++done;
                if (opt.progress)
                {
                    std::lock_guard<std::mutex> lock(mu);
                    opt.progress(d, static_cast<int>(total));
                }
            }
        };

        unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::max(1u, std::thread::hardware_concurrency());
        n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(todo.size(), 1)));
        if (n_threads <= 1)
            worker();
        else
        {
            std::vector<std::thread> pool;
            for (unsigned i = 0; i < n_threads; ++i)
                pool.emplace_back(worker);
            for (auto &th : pool)
                th.join();
        }
        if (failure)
            std::rethrow_exception(failure);

        const std::size_t V = cfg.variants.size();
        const std::size_t cells_per_snr = V * static_cast<std::size_t>(cfg.horizon) * static_cast<std::size_t>(cfg.num_users);
        rr.sum_sq.assign(S * cells_per_snr, 0.0);
        rr.sum_bcrb.assign(S * cells_per_snr, 0.0);
        rr.trials_done = cfg.trials;
        for (int k = 0; k < cfg.trials; ++k)
            rr.trial_seeds.push_back(trial_seed(cfg, k));
        // Fixed summation order: snr, trial, variant, slot, user.
        for (std::size_t s = 0; s < S; ++s)
            for (std::size_t k = 0; k < trials; ++k)
            {
                const TrialResult &r = *cells[s * trials + k];
                for (std::size_t v = 0; v < V; ++v)
                    for (int t = 0; t < cfg.horizon; ++t)
                        for (int u = 0; u < cfg.num_users; ++u)
                        {
                            const std::size_t i = rr.index(s, v, t, u);
                            rr.sum_sq[i] += r.variants[v].sq_err[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)];
                            rr.sum_bcrb[i] += r.variants[v].bcrb[static_cast<std::size_t>(t)][static_cast<std::size_t>(u)];
                        }
            }
        rr.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rr;
    }

    RmseSummary rmse(const std::vector<Trajectory> &estimates, const std::vector<Trajectory> &truth)
    {
        if (estimates.size() != truth.size() || estimates.empty())
            throw InvalidSize("rmse: estimate and truth trial counts differ");
        const int users = truth.front().users();
        const int slots = truth.front().slots();
        RmseSummary s;
        s.per_slot.assign(static_cast<std::size_t>(slots), 0.0);
        for (std::size_t k = 0; k < truth.size(); ++k)
        {
            if (estimates[k].users() != users || estimates[k].slots() != slots || truth[k].users() != users || truth[k].slots() != slots)
                throw InvalidSize("rmse: trajectory shapes differ");
            for (int t = 0; t < slots; ++t)
                for (int u = 0; u < users; ++u)
                    s.per_slot[static_cast<std::size_t>(t)] += (estimates[k].at(u, t) - truth[k].at(u, t)).squaredNorm();
        }
        for (double &v : s.per_slot)
        {
            v = std::sqrt(v / (static_cast<double>(truth.size()) * users));
            s.averaged += v;
        }
        s.averaged /= slots;
        return s;
    }

    std::string fmt_num(double v)
    {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g", v);
        return buf;
    }

    namespace
    {
        std::ofstream open_csv(const std::string &path)
        {
            std::ofstream f(path, std::ios::binary);
            if (!f)
                throw std::runtime_error("cannot write " + path);
            f << "snr_db,slot,user,variant,rmse_m,bcrb_m2\n";
            return f;
        }
    }

    void write_rmse_vs_snr(const RunResult &r, const std::string &path)
    {
        std::ofstream f = open_csv(path);
        for (std::size_t s = 0; s < r.cfg.snr_db.size(); ++s)
            for (std::size_t v = 0; v < r.cfg.variants.size(); ++v)
                f << fmt_num(r.cfg.snr_db[s]) << ",all,all," << to_string(r.cfg.variants[v]) << ',' << fmt_num(r.rmse_avg(s, v))
                  << ',' << fmt_num(r.bcrb_avg(s, v)) << '\n';
    }

    void write_rmse_vs_slot(const RunResult &r, const std::string &path)
    {
        std::ofstream f = open_csv(path);
        for (std::size_t s = 0; s < r.cfg.snr_db.size(); ++s)
            for (std::size_t v = 0; v < r.cfg.variants.size(); ++v)
                for (int t = 0; t < r.cfg.horizon; ++t)
                    f << fmt_num(r.cfg.snr_db[s]) << ',' << t + 1 << ",all," << to_string(r.cfg.variants[v]) << ','
                      << fmt_num(r.rmse_slot(s, v, t)) << ',' << fmt_num(r.bcrb_slot(s, v, t)) << '\n';
    }

    void write_rmse_detail(const RunResult &r, const std::string &path)
    {
        std::ofstream f = open_csv(path);
        for (std::size_t s = 0; s < r.cfg.snr_db.size(); ++s)
            for (std::size_t v = 0; v < r.cfg.variants.size(); ++v)
                for (int t = 0; t < r.cfg.horizon; ++t)
                    for (int u = 0; u < r.cfg.num_users; ++u)
                        f << fmt_num(r.cfg.snr_db[s]) << ',' << t + 1 << ',' << u + 1 << ',' << to_string(r.cfg.variants[v]) << ','
                          << fmt_num(r.rmse(s, v, t, u)) << ',' << fmt_num(r.bcrb(s, v, t, u)) << '\n';
    }

    void write_manifest(const std::string &path, const ExperimentConfig &cfg, const std::string &command,
                        double wall_clock_s, const std::vector<std::string> &outputs, int resumed)
    {
        nlohmann::ordered_json j;
        j["schema_version"] = kSchemaVersion;
        j["command"] = command;
        j["seed"] = cfg.seed;
        j["config_fingerprint"] = config_fingerprint(cfg);
        j["config"] = nlohmann::ordered_json::parse(config_to_json(cfg, -1));
        j["versions"] = {{"ristrack", "0.1.0"},
                         {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                       std::to_string(EIGEN_MINOR_VERSION)},
                         {"compiler", __VERSION__}};
        j["seed_derivation"] = "trial seed = derive_seed(seed, {5, trial}); streams: trajectory {1}, noise {2, slot, user}, "
                               "phases {3, slot}, randomization {4, slot}";
        j["wall_clock_s"] = wall_clock_s;
        j["resumed_cells"] = resumed;
        j["outputs"] = outputs;
        std::ofstream f(path, std::ios::binary);
        if (!f)
            throw std::runtime_error("cannot write " + path);
        f << j.dump(2) << '\n';
    }
}
