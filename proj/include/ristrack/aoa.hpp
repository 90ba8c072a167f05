// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/types.hpp"

#include <optional>
#include <vector>

namespace ristrack
{
    // Von Mises message over the angle theta = arccos(psi), theta in [0, pi].
    struct VonMisesMsg
    {
        double mean_dir = 0.0;      // mu, radians
        double concentration = 0.0; // kappa >= 0; 0 means uniform on the circle
    };

    struct PathEstimate
    {
        double psi_hat = 0.0;    // MAP estimate (ML when no prior)
        cd gain_hat{0.0, 0.0};   // rho_bar
        double psi_var = 0.0;    // posterior variance of psi (prior fused with measurement)
        Eigen::Matrix2d gain_cov = Eigen::Matrix2d::Zero(); // (|rho_bar|, arg rho_bar)

        // Likelihood-only view, used when the caller already holds the prior.
        double psi_ml = 0.0;
        double meas_info = 0.0; // Fisher information of psi from this snapshot (nuisance-marginalized)
        bool low_confidence = false;
    };

    struct AoaOptions
    {
        int oversample = 8;          // periodogram grid = oversample * N_U points over [-1, 1)
        int max_sweeps = 10;
        double rel_tol = 1e-8;
        int newton_iters = 40;
        double prior_width = 4.0;    // search mu +- prior_width * sigma when a prior is given
        double psi_var_cap = 1e4;    // "no information" variance for psi
        double kappa_max = 1e12;
        double low_snr = 10.0;       // per-antenna |rho|^2 / sigma^2 below this is "low SNR"
    };

    // Newtonized ML line-spectral estimation of `num_paths` superimposed ULA tones in y.
    // Paths come back in the order of `priors` when priors are given, otherwise in order of extraction.
    std::vector<PathEstimate> estimate_paths(const CVec &y, int num_paths, const std::vector<VonMisesMsg> *priors,
                                             double noise_power, const AoaOptions &opt = {});

    // Single-snapshot Fisher information of psi for every path at (psi, gains),
    // after marginalizing all gain parameters.
    RVec path_psi_information(const std::vector<double> &psi, const std::vector<cd> &gains, int n_antennas,
                              double noise_power);

    VonMisesMsg vm_from_psi(double psi, double psi_var, const AoaOptions &opt = {});
    VonMisesMsg vm_from_estimate(const PathEstimate &est, const AoaOptions &opt = {});

    // Direction-cosine view of a von Mises message: psi = cos(mu), var by the delta method.
    // Returns the cap variance when kappa == 0.
    struct PsiGaussian
    {
        double mean = 0.0;
        double var = 0.0;
    };
    PsiGaussian psi_from_vm(const VonMisesMsg &vm, const AoaOptions &opt = {});

    // Angle-domain correspondence kappa <-> 1/sigma^2.
    struct AngleGaussian
    {
        double mean = 0.0;
        double var = 0.0; // +inf for kappa == 0
    };
    AngleGaussian vm_to_gaussian(const VonMisesMsg &vm);
    VonMisesMsg gaussian_to_vm(const AngleGaussian &g, double kappa_max = 1e12);

    // Circular variance-like second moment E[(theta - mu)^2] of a von Mises density, by quadrature.
    double vm_angle_variance(double kappa);

    // Min-cost assignment of rows to distinct columns (rows <= cols). result[r] = column.
    std::vector<int> min_cost_assignment(const RMat &cost);
}
