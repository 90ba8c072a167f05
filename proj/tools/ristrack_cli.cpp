// SPDX-License-Identifier: Apache-2.0
// Command-line front end: simulate, track, optimize-pbf, sweep, trajectory.
#include "ristrack/fim.hpp"
#include "ristrack/harness.hpp"
#include "ristrack/pbf.hpp"
#include "ristrack/rng.hpp"
#include "ristrack/signal_io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace ristrack;

namespace
{
    struct Common
    {
        std::string config;
        std::uint64_t seed = 0;
        bool seed_set = false;
        std::string out = "out";
        std::string variant;
        int trials = 0;
        bool quiet = false;
    };

    ExperimentConfig load(const Common &c)
    {
        ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
        if (c.seed_set)
            cfg.seed = c.seed;
        if (c.trials > 0)
            cfg.trials = c.trials;
        if (!c.variant.empty())
            cfg.variants = {parse_variant(c.variant)};
        cfg.validate();
        fs::create_directories(c.out);
        return cfg;
    }

    std::string out_path(const Common &c, const std::string &name) { return (fs::path(c.out) / name).string(); }

    void add_common(CLI::App *app, Common &c, bool with_variant)
    {
        app->add_option("--config", c.config, "JSON configuration file");
        app->add_option("--seed", c.seed, "master seed (overrides run.seed)")->each([&c](const std::string &) { c.seed_set = true; });
        app->add_option("--out", c.out, "output directory");
        app->add_option("--trials", c.trials, "number of Monte-Carlo trials (overrides run.trials)");
        if (with_variant)
            app->add_option("--variant", c.variant, "B1 | B2 | B3 | proposed");
        app->add_flag("--quiet", c.quiet, "no progress output");
    }

    RunOptions progress_options(const Common &c, const std::string &journal)
    {
        RunOptions o;
        o.journal_path = journal;
        if (!c.quiet)
            o.progress = [](int done, int total) {
                if (done == total || done % 10 == 0)
                    std::cerr << "\r  " << done << "/" << total << " trials" << (done == total ? "\n" : "") << std::flush;
            };
        return o;
    }

    void write_track_csv(const std::string &path, const Trajectory &truth, const TrackResult &res, const std::string &variant,
                         bool header)
    {
        std::ofstream f(path, header ? std::ios::binary : std::ios::binary | std::ios::app);
        if (header)
            f << "variant,slot,user,true_x,true_y,true_z,est_x,est_y,est_z,var_x,var_y,var_z,iterations,converged\n";
        for (int t = 0; t < truth.slots(); ++t)
            for (int u = 0; u < truth.users(); ++u)
            {
                const Vec3 &p = truth.at(u, t);
                const GaussianMsg &b = res.belief(u, t);
                f << variant << ',' << t + 1 << ',' << u + 1;
                for (int i = 0; i < 3; ++i)
                    f << ',' << fmt_num(p[i]);
                for (int i = 0; i < 3; ++i)
                    f << ',' << fmt_num(b.mean[i]);
                for (int i = 0; i < 3; ++i)
                    f << ',' << fmt_num(b.cov(i, i));
                const SlotResult &s = res.slots[static_cast<std::size_t>(t)];
                f << ',' << s.iterations << ',' << (s.converged ? 1 : 0) << '\n';
            }
    }

    void write_sweep_outputs(const Common &c, const RunResult &r, const std::string &command, std::vector<std::string> extra = {})
    {
        write_rmse_vs_snr(r, out_path(c, "rmse_vs_snr.csv"));
        write_rmse_vs_slot(r, out_path(c, "rmse_vs_slot.csv"));
        write_rmse_detail(r, out_path(c, "rmse_detail.csv"));
        std::vector<std::string> outs = {"rmse_vs_snr.csv", "rmse_vs_slot.csv", "rmse_detail.csv"};
        outs.insert(outs.end(), extra.begin(), extra.end());
        write_manifest(out_path(c, "manifest.json"), r.cfg, command, r.wall_clock_s, outs, r.resumed);
    }

    int cmd_simulate(const Common &c)
    {
        const auto t0 = std::chrono::steady_clock::now();
        const ExperimentConfig cfg = load(c);
        std::vector<std::string> outs;
        for (std::size_t s = 0; s < cfg.snr_db.size(); ++s)
            for (int k = 0; k < cfg.trials; ++k)
            {
                const std::string name = "signals_snr" + fmt_num(cfg.snr_db[s]) + "_trial" + std::to_string(k) + ".json";
                write_signals(out_path(c, name), simulate_signals(cfg, s, k));
                outs.push_back(name);
            }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(out_path(c, "manifest.json"), cfg, "simulate", wall, outs);
        if (!c.quiet)
            std::cout << "wrote " << outs.size() << " signal files to " << c.out << "\n";
        return 0;
    }

    int cmd_track(const Common &c, const std::string &signals)
    {
        ExperimentConfig cfg = load(c);
        if (signals.empty())
        {
            const RunResult r = run_experiment(cfg, progress_options(c, ""));
            const TrialResult first = run_trial(cfg, 0, 0, true);
            bool header = true;
            for (std::size_t v = 0; v < cfg.variants.size(); ++v)
            {
                write_track_csv(out_path(c, "track.csv"), first.truth, *first.variants[v].track, to_string(cfg.variants[v]), header);
                header = false;
            }
            write_sweep_outputs(c, r, "track", {"track.csv"});
            for (std::size_t v = 0; v < cfg.variants.size(); ++v)
                std::cout << to_string(cfg.variants[v]) << " averaged RMSE at " << fmt_num(cfg.snr_db[0])
                          << " dB: " << fmt_num(r.rmse_avg(0, v)) << " m\n";
            return 0;
        }

        const auto t0 = std::chrono::steady_clock::now();
        const SignalRecord rec = read_signals(signals);
        if (rec.truth.users() != cfg.num_users || rec.truth.slots() != cfg.horizon)
            throw std::runtime_error("signal file shape does not match run.num_users / run.horizon");
        StMrfModel model = cfg.mrf_model();
        std::vector<Vec3> first;
        for (int u = 0; u < cfg.num_users; ++u)
            first.push_back(rec.truth.at(u, 0));
        model.initial_box = box_around(first, cfg.box_half_width);

        std::ofstream csv(out_path(c, "rmse_vs_slot.csv"), std::ios::binary);
        csv << "snr_db,slot,user,variant,rmse_m,bcrb_m2\n";
        bool header = true;
        for (Variant v : cfg.variants)
        {
            VariantSetup setup = baseline_variant(v, cfg);
            StoredSource src(rec);
            AoaMeasurementModel meas(cfg.geom, rec.noise_power, src, setup.tracker);
            meas.set_num_users(cfg.num_users);
            // Stored data fixes the phases, so adaptive beamforming cannot act here.
            const PhaseScheduler stored = [&rec](int slot, const std::vector<GaussianMsg> &) {
                return rec.phases.at(static_cast<std::size_t>(slot));
            };
            const TrackResult res = mudlt_track(model, meas, setup.tracker, stored);
            write_track_csv(out_path(c, "track.csv"), rec.truth, res, to_string(v), header);
            header = false;
            Scenario sc = cfg.scenario(rec.snr_db);
            for (int t = 0; t < cfg.horizon; ++t)
            {
                double se = 0, bound = 0;
                for (int u = 0; u < cfg.num_users; ++u)
                {
                    se += (res.belief(u, t).mean - rec.truth.at(u, t)).squaredNorm();
                    bound += horizontal_bcrb(sc, rec.phases[static_cast<std::size_t>(t)], rec.truth.at(u, t),
                                             res.slots[static_cast<std::size_t>(t)].priors[static_cast<std::size_t>(u)]);
                }
                csv << fmt_num(rec.snr_db) << ',' << t + 1 << ",all," << to_string(v) << ',' << fmt_num(std::sqrt(se / cfg.num_users))
                    << ',' << fmt_num(bound / cfg.num_users) << '\n';
            }
        }
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(out_path(c, "manifest.json"), cfg, "track", wall, {"track.csv", "rmse_vs_slot.csv"});
        return 0;
    }

    std::vector<GaussianMsg> read_positions(const std::string &path)
    {
        std::ifstream f(path);
        if (!f)
            throw std::runtime_error("cannot open " + path);
        std::stringstream ss;
        ss << f.rdbuf();
        const auto j = nlohmann::json::parse(ss.str());
        std::vector<GaussianMsg> out;
        for (const auto &u : j.at("users"))
        {
            GaussianMsg g;
            const auto m = u.at("mean").get<std::vector<double>>();
            g.mean = Vec3(m.at(0), m.at(1), m.at(2));
            if (u.contains("cov"))
            {
                const auto c = u.at("cov").get<std::vector<std::vector<double>>>();
                for (int r = 0; r < 3; ++r)
                    for (int k = 0; k < 3; ++k)
                        g.cov(r, k) = c.at(static_cast<std::size_t>(r)).at(static_cast<std::size_t>(k));
            }
            else
            {
                const auto v = u.value("var", std::vector<double>{0.1, 0.1, 0.1});
                g.cov = Vec3(v.at(0), v.at(1), v.at(2)).asDiagonal();
            }
            out.push_back(g);
        }
        return out;
    }

    int cmd_optimize(const Common &c, const std::string &positions)
    {
        const auto t0 = std::chrono::steady_clock::now();
        const ExperimentConfig cfg = load(c);
        std::vector<GaussianMsg> predicted;
        if (!positions.empty())
            predicted = read_positions(positions);
        else
        {
            const Trajectory truth = generate_truth(cfg, trial_seed(cfg, 0));
            for (int u = 0; u < cfg.num_users; ++u)
            {
                GaussianMsg g;
                g.mean = truth.at(u, 0);
                g.cov = cfg.temporal_var.asDiagonal();
                predicted.push_back(g);
            }
        }
        nlohmann::ordered_json out;
        out["predicted"] = nlohmann::ordered_json::array();
        for (const auto &g : predicted)
            out["predicted"].push_back({g.mean.x(), g.mean.y(), g.mean.z()});
        out["designs"] = nlohmann::ordered_json::array();
        const std::uint64_t base = derive_seed(cfg.seed, {stream::kTrial, 0});
        for (double snr : cfg.snr_db)
        {
            const Scenario sc = cfg.scenario(snr);
            const std::vector<CVec> start = random_phase_set(sc.geom, derive_seed(base, {stream::kPhases, 0}));
            const PbfDesign d = design_phases(sc, predicted, start, derive_seed(base, {stream::kRandomization, 0}), cfg.pbf);
            const PbfProblem prob = build_pbf_problem(sc, predicted);
            nlohmann::ordered_json e;
            e["snr_db"] = snr;
            e["relaxed_objective_m2"] = d.relaxed.objective;
            e["extracted_objective_m2"] = d.extracted.objective;
            e["start_objective_m2"] = pbf_objective_phases(prob, start);
            e["iterations"] = d.relaxed.iterations;
            e["rank1_gap"] = d.extracted.rank1_gap;
            nlohmann::ordered_json ph = nlohmann::ordered_json::array();
            for (const CVec &p : d.extracted.phases)
            {
                nlohmann::ordered_json a = nlohmann::ordered_json::array();
                for (Eigen::Index i = 0; i < p.size(); ++i)
                    a.push_back(std::arg(p[i]));
                ph.push_back(a);
            }
            e["phases_rad"] = ph;
            out["designs"].push_back(e);
            if (!c.quiet)
                std::cout << "SNR " << fmt_num(snr) << " dB: bound " << fmt_num(d.extracted.objective) << " m^2 (random start "
                          << fmt_num(e["start_objective_m2"].get<double>()) << ", relaxation " << fmt_num(d.relaxed.objective) << ")\n";
        }
        std::ofstream f(out_path(c, "pbf.json"), std::ios::binary);
        f << out.dump(2) << '\n';
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_manifest(out_path(c, "manifest.json"), cfg, "optimize-pbf", wall, {"pbf.json"});
        return 0;
    }

    int cmd_sweep(const Common &c, bool fresh)
    {
        const ExperimentConfig cfg = load(c);
        const std::string journal = out_path(c, "journal.jsonl");
        if (fresh)
            fs::remove(journal);
        const RunResult r = run_experiment(cfg, progress_options(c, journal));
        write_sweep_outputs(c, r, "sweep", {"journal.jsonl"});
        if (!c.quiet)
        {
            std::cout << "averaged RMSE (m)\nsnr_db";
            for (Variant v : cfg.variants)
                std::cout << '\t' << to_string(v);
            std::cout << '\n';
            for (std::size_t s = 0; s < cfg.snr_db.size(); ++s)
            {
                std::cout << fmt_num(cfg.snr_db[s]);
                for (std::size_t v = 0; v < cfg.variants.size(); ++v)
                    std::cout << '\t' << fmt_num(r.rmse_avg(s, v));
                std::cout << '\n';
            }
            std::cout << "wall clock " << fmt_num(r.wall_clock_s) << " s\n";
        }
        return 0;
    }

    int cmd_trajectory(const Common &c)
    {
        ExperimentConfig cfg = load(c);
        cfg.trajectory = TrajectoryKind::ZShape;
        cfg.validate();
        const RunResult r = run_experiment(cfg, progress_options(c, ""));
        const TrialResult first = run_trial(cfg, 0, 0, true);
        bool header = true;
        for (std::size_t v = 0; v < cfg.variants.size(); ++v)
        {
            write_track_csv(out_path(c, "trajectory.csv"), first.truth, *first.variants[v].track, to_string(cfg.variants[v]), header);
            header = false;
        }
        write_sweep_outputs(c, r, "trajectory", {"trajectory.csv"});
        const ZPath z = z_trajectory(cfg.start, cfg.end, cfg.speed, cfg.horizon);
        if (!c.quiet && z.truncated)
            std::cout << "note: " << cfg.horizon << " slots cover " << fmt_num(cfg.speed * cfg.horizon) << " m of the "
                      << fmt_num(z.length) << " m path; the trajectory is truncated\n";
        return 0;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Multi-user multi-RIS localization and tracking"};
    app.require_subcommand(1);

    Common sim, trk, opt, swp, traj;
    std::string signals, positions;
    bool fresh = false;

    auto *s1 = app.add_subcommand("simulate", "generate received signals and ground truth");
    add_common(s1, sim, false);
    auto *s2 = app.add_subcommand("track", "run tracker variants on fresh or stored signals");
    add_common(s2, trk, true);
    s2->add_option("--signals", signals, "signal file written by `simulate`");
    auto *s3 = app.add_subcommand("optimize-pbf", "design RIS phases for predicted positions");
    add_common(s3, opt, false);
    s3->add_option("--positions", positions, "JSON file {\"users\": [{\"mean\": [x,y,z], \"cov\": [[..],[..],[..]]}]}");
    auto *s4 = app.add_subcommand("sweep", "RMSE versus SNR and slot for every variant");
    add_common(s4, swp, true);
    s4->add_flag("--fresh", fresh, "discard the journal instead of resuming");
    auto *s5 = app.add_subcommand("trajectory", "track users along Z-shaped paths");
    add_common(s5, traj, true);

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*s1)
            return cmd_simulate(sim);
        if (*s2)
            return cmd_track(trk, signals);
        if (*s3)
            return cmd_optimize(opt, positions);
        if (*s4)
            return cmd_sweep(swp, fresh);
        if (*s5)
            return cmd_trajectory(traj);
    }
    catch (const ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
