// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/aoa.hpp"
#include "ristrack/gaussian.hpp"
#include "ristrack/geometry.hpp"
#include "ristrack/stmrf.hpp"

#include <functional>
#include <span>
#include <vector>

namespace ristrack
{
    struct AngleMsgOptions
    {
        double precision_floor = 1.0 / kLargeVariance; // added across unconstrained directions
        double variance_floor = 1e-12;                 // m^2, smallest variance along the gradient
    };

    // Information-form angle message: exp(kappa cos(theta(U) - mu)) with theta = arccos psi_user,
    // linearized at `lin`. Zero precision when kappa == 0.
    InfoMsg angle_info(const VonMisesMsg &vm, std::size_t ris_index, const SystemGeometry &geom, const Vec3 &lin);

    // Moment-form angle message linearized at the belief mean.
    GaussianMsg msg_angle_to_position(const VonMisesMsg &vm, std::size_t ris_index, const SystemGeometry &geom,
                                      const GaussianMsg &current_belief, const AngleMsgOptions &opt = {});

    // Product of Gaussians in information form.
    GaussianMsg fuse_angle_messages(std::span<const GaussianMsg> msgs);

    // Spatial kernel variance per axis added by one edge: sigma^2 (L2) or 16 sigma^4 (L1, exact
    // second moment of the kernel exp(-d / (2 sigma^2)) in 3-D).
    double spatial_kernel_variance(PotentialFamily family, double spatial_var);

    // Message through the pairwise potential of edge `edge_index`.
    GaussianMsg msg_spatial(const GaussianMsg &incoming, const StMrfModel &model, std::size_t edge_index);

    // Product of the spatial message from the other neighbour, the measurement factor and the temporal prior.
    GaussianMsg msg_position_to_spatial(const GaussianMsg &spatial_in, const GaussianMsg &measurement, const GaussianMsg &temporal);

    // Previous-slot outgoing message convolved with the transition kernel.
    GaussianMsg msg_temporal(const GaussianMsg &prev, const StMrfModel &model);

    // Gaussian approximation of prior(U) * prod_n VM(theta_n(U)): mode by damped Newton, covariance
    // from the Gauss-Newton Hessian at the mode.
    struct AngleObservation
    {
        VonMisesMsg vm;
        std::size_t ris_index = 0;
    };
    GaussianMsg moment_match_angles(const GaussianMsg &prior, std::span<const AngleObservation> obs,
                                    const SystemGeometry &geom, int max_iters = 100);

    // Moment-matched Gaussian of a uniform box.
    GaussianMsg box_moments(const Vec3 &lo, const Vec3 &hi);

    // ---------------------------------------------------------------- tracking

    // Supplies the measurement factor of one user in one slot.
    class MeasurementModel
    {
    public:
        virtual ~MeasurementModel() = default;
        virtual void begin_slot(int /*slot*/, std::span<const CVec> /*phases*/) {}
        // Information about U_u^t, possibly linearized at `belief`.
        virtual InfoMsg measure(int user, int slot, const GaussianMsg &belief) = 0;
        virtual std::vector<PathEstimate> last_paths(int /*user*/) const { return {}; }
    };

    // Received vectors on demand; simulated sources react to the phases chosen for the slot.
    class SignalSource
    {
    public:
        virtual ~SignalSource() = default;
        virtual CVec signal(int user, int slot, std::span<const CVec> phases) = 0;
    };

    struct TrackerOptions
    {
        bool temporal = true;
        bool spatial = true;
        bool initial_prior = true; // use the model's initial box at slot 1
        bool aoa_priors = true;    // feed predicted angles to the AoA estimator
        double tol = 1e-4;         // m, max belief-mean change
        int max_iters = 20;
        double damping = 0.5;      // weight of the new measurement information from iteration 2 on
        Vec3 area_center = Vec3::Zero(); // linearization point without any prior
        AoaOptions aoa;
    };

    // AoA front end: estimate paths per user, associate them to surfaces and turn them into angle messages.
    class AoaMeasurementModel final : public MeasurementModel
    {
    public:
        AoaMeasurementModel(const SystemGeometry &geom, double noise_power, SignalSource &source, const TrackerOptions &opt);

        void begin_slot(int slot, std::span<const CVec> phases) override;
        InfoMsg measure(int user, int slot, const GaussianMsg &belief) override;
        std::vector<PathEstimate> last_paths(int user) const override;

        void set_num_users(int users);

    private:
        const SystemGeometry &geom_;
        double noise_power_;
        SignalSource &source_;
        TrackerOptions opt_;
        int users_ = 0;
        std::vector<CVec> y_;
        std::vector<std::vector<PathEstimate>> paths_;
    };

    // Called before each slot with the predicted beliefs (empty for slot 0); returns one phase vector per RIS.
    using PhaseScheduler = std::function<std::vector<CVec>(int slot, const std::vector<GaussianMsg> &predicted)>;

    struct SlotResult
    {
        std::vector<GaussianMsg> beliefs; // per user
        std::vector<GaussianMsg> priors;  // per user: the slot prior before any measurement
        std::vector<std::vector<PathEstimate>> paths;
        std::vector<CVec> phases;
        int iterations = 0;
        bool converged = false;
    };

    struct TrackResult
    {
        std::vector<SlotResult> slots;
        const GaussianMsg &belief(int user, int slot) const { return slots.at(static_cast<std::size_t>(slot)).beliefs.at(static_cast<std::size_t>(user)); }
    };

    TrackResult mudlt_track(const StMrfModel &model, MeasurementModel &meas, const TrackerOptions &opt,
                            const PhaseScheduler &phases);

    // Exact chain/tree Gaussian BP within one slot given local information per user. Used by the
    // tracker and exposed for tests. Returns the beliefs in information form.
    std::vector<InfoMsg> spatial_sweep(const StMrfModel &model, const std::vector<InfoMsg> &local, bool enable);
}
