// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "ristrack/channel.hpp"
#include "ristrack/gaussian.hpp"

#include <cstdint>
#include <vector>

namespace ristrack
{
    enum class AlphaConvention
    {
        Raw,      // 2 pi^2 sum_k k^2: the psi-psi entry of J_eta
        Marginal, // 2 pi^2 sum_k (k - kbar)^2: psi information after marginalizing the path's own gain
    };

    double alpha_factor(int n_antennas, AlphaConvention conv);

    // Per-unit-SNR psi information of the path via RIS `ris_index`, linear in pi:
    //   alpha |K|^2 c^H pi c  with K the gain of the cascade excluding the RIS factor.
    double lifted_fim(const CMat &pi, const SystemGeometry &geom, const ChannelParams &params, const CVec &bs_bf,
                      std::size_t ris_index, const Vec3 &user_pos, AlphaConvention conv = AlphaConvention::Raw);

    // Everything the relaxed objective needs, precomputed at the predicted positions.
    struct PbfProblem
    {
        struct Term
        {
            int user = 0;
            int ris = 0;
            double beta = 0; // snr * alpha * |K|^2
            Vec3 t = Vec3::Zero();
            CVec c;          // coupling vector; q = c^H pi c
        };
        int num_ris = 0;
        int m_r = 0;
        std::vector<Mat3> j_prior; // per user
        std::vector<Term> terms;
    };

    PbfProblem build_pbf_problem(const Scenario &sc, const std::vector<GaussianMsg> &predicted,
                                 AlphaConvention conv = AlphaConvention::Marginal);

    // sum_u tr(J_u^{-1}(pi)); +inf when some J_u is singular.
    double pbf_objective(const PbfProblem &prob, const std::vector<CMat> &pi);
    std::vector<CMat> pbf_gradient(const PbfProblem &prob, const std::vector<CMat> &pi);
    double pbf_objective_phases(const PbfProblem &prob, const std::vector<CVec> &phases);

    struct PbfOptions
    {
        int max_iters = 500;
        double rel_tol = 1e-6;
        int randomizations = 200;
        int projection_iters = 1000;
        double projection_tol = 1e-13;
    };

    // Nearest (Frobenius) Hermitian PSD matrix with unit diagonal, by Dykstra's alternating projections.
    CMat project_elliptope(const CMat &m, int max_iters = 1000, double tol = 1e-13);

    struct PbfResult
    {
        std::vector<CMat> pi;
        double objective = 0;
        std::vector<double> trace; // objective after every accepted iteration, starting value first
        int iterations = 0;
        bool converged = false;
    };

    // Projected gradient over {pi_n >= 0, diag(pi_n) = 1}.
    PbfResult optimize_pbf(const PbfProblem &prob, const std::vector<CMat> &start, const PbfOptions &opt = {});

    // pi_n = lambda_n lambda_n^H.
    std::vector<CMat> lift(const std::vector<CVec> &phases);

    struct Extraction
    {
        std::vector<CVec> phases;
        double objective = 0;
        std::vector<double> rank1_gap; // per RIS: 1 - lambda_max / tr(pi)
        int candidates = 0;
    };

    // Gaussian randomization plus top-eigenvector (plus `fallback` if given, preferred on ties).
    Extraction extract_phases(const PbfProblem &prob, const std::vector<CMat> &pi, std::uint64_t seed,
                              const std::vector<CVec> *fallback = nullptr, const PbfOptions &opt = {});

    // Solve and extract from the random start phases `start`.
    struct PbfDesign
    {
        PbfResult relaxed;
        Extraction extracted;
    };
    PbfDesign design_phases(const Scenario &sc, const std::vector<GaussianMsg> &predicted,
                            const std::vector<CVec> &start, std::uint64_t seed, const PbfOptions &opt = {});
}
