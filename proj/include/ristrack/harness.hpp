// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/config.hpp"
#include "ristrack/inference.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ristrack
{
    struct VariantSetup
    {
        TrackerOptions tracker;
        bool adaptive_pbf = false;
    };

    VariantSetup baseline_variant(Variant v, const ExperimentConfig &cfg);

    struct ZPath
    {
        std::vector<Vec3> points; // position at t = 1, 2, ..., slots seconds
        bool truncated = false;   // the end was not reached within `slots`
        double length = 0;        // m
        std::vector<Vec3> corners;
    };

    // Strokes along x at y = y_start and y = y_end, joined by the diagonal (x_end, y_start) -> (x_start, y_end).
    ZPath z_trajectory(const Vec3 &start, const Vec3 &end, double speed, int slots);

    // Per-user offset from the configured start point.
    std::vector<Vec3> user_offsets(const ExperimentConfig &cfg);

    Trajectory generate_truth(const ExperimentConfig &cfg, std::uint64_t trial_seed);

    std::uint64_t trial_seed(const ExperimentConfig &cfg, int trial);

    // Signals generated on demand from a ground-truth trajectory.
    class SimulatedSource final : public SignalSource
    {
    public:
        SimulatedSource(const Scenario &sc, const Trajectory &truth, std::uint64_t trial_seed, bool noiseless);
        CVec signal(int user, int slot, std::span<const CVec> phases) override;

    private:
        const Scenario &sc_;
        const Trajectory &truth_;
        std::uint64_t seed_;
        bool noiseless_;
    };

    // The phase schedule every variant shares: random phases per slot, optionally replaced by a PBF design.
    PhaseScheduler make_scheduler(const Scenario &sc, std::uint64_t trial_seed, bool adaptive, const PbfOptions &opt);

    struct VariantTrial
    {
        std::vector<std::vector<double>> sq_err; // [slot][user], m^2
        std::vector<std::vector<double>> bcrb;   // [slot][user], m^2 (horizontal bound with the slot prior)
        std::optional<TrackResult> track;
    };

    struct TrialResult
    {
        int trial = 0;
        std::size_t snr_index = 0;
        std::vector<VariantTrial> variants; // order of cfg.variants
        Trajectory truth;
    };

    TrialResult run_trial(const ExperimentConfig &cfg, std::size_t snr_index, int trial, bool keep_tracks = false);

    // Horizontal BCRB of one user: tr over x, y of (snr T^T J_psi T + Sigma_prior^{-1})^{-1}.
    double horizontal_bcrb(const Scenario &sc, std::span<const CVec> phases, const Vec3 &truth, const GaussianMsg &prior);

    struct RunResult
    {
        ExperimentConfig cfg;
        std::vector<std::uint64_t> trial_seeds;
        std::vector<double> sum_sq;   // [snr][variant][slot][user]
        std::vector<double> sum_bcrb; // same layout
        int trials_done = 0;          // per SNR point
        int resumed = 0;              // (snr, trial) cells read back from the journal
        double wall_clock_s = 0;

        std::size_t index(std::size_t s, std::size_t v, int t, int u) const;
        double rmse(std::size_t s, std::size_t v, int t, int u) const;
        double rmse_slot(std::size_t s, std::size_t v, int t) const; // over users
        double rmse_avg(std::size_t s, std::size_t v) const;         // mean of per-slot values
        double bcrb(std::size_t s, std::size_t v, int t, int u) const;
        double bcrb_slot(std::size_t s, std::size_t v, int t) const;
        double bcrb_avg(std::size_t s, std::size_t v) const;
    };

    struct RunOptions
    {
        std::string journal_path;                       // empty: no journal
        std::function<void(int done, int total)> progress;
    };

    // Monte-Carlo sweep over cfg.snr_db x trials x variants.
    RunResult run_experiment(const ExperimentConfig &cfg, const RunOptions &opt = {});

    struct RmseSummary
    {
        std::vector<double> per_slot;
        double averaged = 0;
    };

    // estimates[trial] and truth[trial] are users x slots trajectories.
    RmseSummary rmse(const std::vector<Trajectory> &estimates, const std::vector<Trajectory> &truth);

    // %.10g
    std::string fmt_num(double v);

    // CSV writers; every file has the header snr_db,slot,user,variant,rmse_m,bcrb_m2.
    void write_rmse_vs_snr(const RunResult &r, const std::string &path);
    void write_rmse_vs_slot(const RunResult &r, const std::string &path);
    void write_rmse_detail(const RunResult &r, const std::string &path);

    void write_manifest(const std::string &path, const ExperimentConfig &cfg, const std::string &command,
                        double wall_clock_s, const std::vector<std::string> &outputs, int resumed = 0);

    std::uint64_t config_fingerprint(const ExperimentConfig &cfg);
}
