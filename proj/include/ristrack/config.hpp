// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/channel.hpp"
#include "ristrack/inference.hpp"
#include "ristrack/pbf.hpp"
#include "ristrack/stmrf.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ristrack
{
    // Schema violation; what() starts with the offending field path, e.g. "run.trials: must be >= 1".
    class ConfigError : public std::invalid_argument
    {
    public:
        ConfigError(const std::string &path, const std::string &msg)
            : std::invalid_argument(path + ": " + msg), path_(path) {}
        const std::string &path() const { return path_; }

    private:
        std::string path_;
    };

    enum class Variant
    {
        B1,
        B2,
        B3,
        Proposed,
    };

    enum class TrajectoryKind
    {
        Roam,   // independent random walks
        Group,  // walks conditioned on the spatial potentials
        ZShape,
        Static,
    };

    enum class PbfMode
    {
        Random,
        Adaptive,
    };

    Variant parse_variant(const std::string &name);
    std::string to_string(Variant v);
    TrajectoryKind parse_trajectory(const std::string &name);
    std::string to_string(TrajectoryKind k);

    inline constexpr int kSchemaVersion = 1;

    struct ExperimentConfig
    {
        // geometry
        SystemGeometry geom = SystemGeometry::reference_layout(2, 8, 8, 4, 2);

        // channel
        double carrier_freq = 28e9;
        double noise_dbm = -120.0;
        std::vector<double> snr_db = {0, 5, 10, 15, 20};
        BeamformerMode beamformer = BeamformerMode::Multibeam;
        bool noiseless = false;

        // mrf
        Vec3 temporal_var = Vec3::Constant(0.1);
        double spatial_var = 0.2;
        PotentialFamily family = PotentialFamily::L2;
        double box_half_width = 0.5;

        // tracker
        double tol = 1e-4;
        int max_iters = 20;
        double damping = 0.5;
        int aoa_oversample = 8;
        double kappa_max = 1e12;

        // pbf
        PbfMode pbf_mode = PbfMode::Adaptive; // used by `track` when the variant does not fix it
        PbfOptions pbf;

        // run
        int num_users = 3;
        int horizon = 10;
        int trials = 100;
        std::uint64_t seed = 1;
        TrajectoryKind trajectory = TrajectoryKind::Group;
        double speed = 1.5;
        bool speed_clamp = false;
        bool planar = true;
        Vec3 start = Vec3(0, 0, 0);
        Vec3 end = Vec3(10, 10, 0);
        double user_spacing = 1.0;
        Vec3 area_center = Vec3(0, 0, 0);
        std::vector<Variant> variants = {Variant::B1, Variant::B2, Variant::B3, Variant::Proposed};
        int threads = 0; // 0: hardware concurrency

        void validate() const;

        StMrfModel mrf_model() const;           // without the initial box
        ChannelParams channel_params(double snr) const;
        Scenario scenario(double snr) const;
    };

    // Parse JSON text; unknown keys and out-of-range values raise ConfigError.
    ExperimentConfig parse_config(const std::string &json_text);
    ExperimentConfig load_config(const std::string &path);

    // Canonical JSON echo of every field (stable key order).
    std::string config_to_json(const ExperimentConfig &cfg, int indent = 2);
}
