#pragma once

// Automatic polarization compensation.
//
// The compensator injects known probe polarizations, measures the received
// Stokes vectors, fits the channel rotation in the least-squares sense
// (orthogonal Procrustes on the Bloch sphere), and applies the inverse as
// the path's correction. With noisy probes the loop repeats until the
// averaged classical probe fidelity crosses the threshold.

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "entsim/errors.hpp"
#include "entsim/fiber.hpp"
#include "entsim/polarization.hpp"
#include "entsim/rng.hpp"

namespace entsim {

struct ApcConfig {
    std::vector<PolarizationVector> probe_states{
        PolarizationVector::horizontal(), PolarizationVector::diagonal(),
        PolarizationVector::circular_right()};
    double fidelity_threshold = 0.995;
    int max_iterations = 100;
    double iteration_time_s = 0.150;
    double overhead_s = 0.100;
    double probe_launch_dbm = 0.0;
    double probe_power_floor_dbm = -52.0;
    double probe_noise_base = 0.0;   // Bloch-vector noise at 0 dB path loss
    double probe_gain_db = 0.0;      // extra probe margin (detuned strong probe)
    double probe_detuning_nm = 0.0;  // offset between probe and qubit band

    void validate() const {
        if (probe_states.size() < 2) throw std::invalid_argument("need at least 2 probe states");
        if (!(fidelity_threshold > 0.0 && fidelity_threshold <= 1.0))
            throw std::invalid_argument("fidelity threshold outside (0, 1]");
        if (max_iterations < 1) throw std::invalid_argument("max_iterations must be >= 1");
        if (!(iteration_time_s > 0.0) || !(overhead_s >= 0.0))
            throw std::invalid_argument("invalid timing parameters");
        if (!(probe_noise_base >= 0.0)) throw std::invalid_argument("negative probe noise");
    }
};

struct CompensationResult {
    bool converged = false;
    int iterations = 0;
    double duration_s = 0.0;        // overhead + iterations x iteration time
    double start_fidelity = 0.0;    // averaged classical probe fidelity
    double end_fidelity = 0.0;
    double residual = 0.0;          // least-squares residual of the last fit
};

// Least-squares SU(2) estimate from (sent, received) polarization pairs.
// Solves Wahba's problem on the Bloch vectors via SVD and lifts the rotation
// back to SU(2) in canonical form. Requires >= 2 non-collinear probes.
inline ChannelTransform estimate_channel(
    const std::vector<std::pair<PolarizationVector, PolarizationVector>>& probes,
    double* residual_out = nullptr) {
    if (probes.size() < 2) throw DegenerateDataError("need at least 2 probe pairs");
    Eigen::Matrix3d b = Eigen::Matrix3d::Zero();
    Eigen::Matrix3d gram = Eigen::Matrix3d::Zero();
    for (const auto& [sent, received] : probes) {
        const auto s = sent.bloch();
        const auto r = received.bloch();
        const Eigen::Vector3d sv(s[0], s[1], s[2]), rv(r[0], r[1], r[2]);
        b += rv * sv.transpose();
        gram += sv * sv.transpose();
    }
    // Collinear probe sets leave the rotation about the common axis free.
    Eigen::JacobiSVD<Eigen::Matrix3d> gsvd(gram);
    if (gsvd.singularValues()(1) < 1e-9)
        throw DegenerateDataError("probe polarizations are collinear on the Bloch sphere");
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(b, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() >= 0.0 ? 1.0 : -1.0;
    const Eigen::Matrix3d rot = svd.matrixU() * d * svd.matrixV().transpose();
    if (residual_out) {
        double res = 0.0;
        for (const auto& [sent, received] : probes) {
            const auto s = sent.bloch();
            const auto r = received.bloch();
            const Eigen::Vector3d sv(s[0], s[1], s[2]), rv(r[0], r[1], r[2]);
            res += (rot * sv - rv).squaredNorm();
        }
        *residual_out = res;
    }
    ChannelTransform t;
    t.unitary = su2_from_bloch_rotation(rot);
    return t;
}

// penalty = coeff * detuning^2 * length^2, clamped to [0, 1]. Zero at zero
// detuning exactly; quadratically increasing in both arguments. Applied
// downstream as a visibility multiplier (1 - penalty) on the delivered state.
inline double detuning_penalty(double detuning_nm, double length_km, double coeff = 3.6e-6) {
    if (!(coeff >= 0.0)) throw std::invalid_argument("negative detuning coefficient");
    const double p = coeff * detuning_nm * detuning_nm * length_km * length_km;
    return std::min(1.0, std::max(0.0, p));
}

namespace detail {

struct ProbeMeasurement {
    std::vector<std::pair<PolarizationVector, PolarizationVector>> pairs;
    double avg_fidelity = 0.0;
};

// One probe acquisition through the path's current effective rotation with
// shot-noise-scaled Bloch noise.
inline ProbeMeasurement measure_probes(const NetworkPath& path, const ApcConfig& cfg,
                                       double sigma, RandomStream& rng) {
    const Matrix2c u_eff = project_su2(path.apc_correction * path.birefringence_state.unitary);
    const Eigen::Matrix3d rot = bloch_rotation_of(u_eff);
    ProbeMeasurement m;
    double fsum = 0.0;
    for (const auto& probe : cfg.probe_states) {
        const auto s = probe.bloch();
        Eigen::Vector3d r = rot * Eigen::Vector3d(s[0], s[1], s[2]);
        if (sigma > 0.0)
            r += sigma * Eigen::Vector3d(rng.gaussian(), rng.gaussian(), rng.gaussian());
        const double n = r.norm();
        if (n > 0.0) r /= n;
        const PolarizationVector received = PolarizationVector::from_bloch({r(0), r(1), r(2)});
        m.pairs.emplace_back(probe, received);
        // Classical fidelity of the received probe against the sent one.
        fsum += 0.5 * (1.0 + s[0] * r(0) + s[1] * r(1) + s[2] * r(2));
    }
    m.avg_fidelity = fsum / static_cast<double>(cfg.probe_states.size());
    return m;
}

} // namespace detail

// Runs one compensation routine on the path, mutating path.apc_correction.
// Every invocation performs at least one correct-and-verify cycle, so a
// routine never reports success on stale alignment: even a channel that
// probes clean is re-fit once and confirmed with fresh probes.
// `advance_clock` is called with the elapsed simulated time of each step so
// the caller can keep drift evolving during the routine. Throws
// ApcInoperableError when the received probe power is below the floor.
inline CompensationResult compensate(NetworkPath& path, const ApcConfig& cfg, RandomStream& rng,
                                     const std::function<void(double)>& advance_clock = {},
                                     double time_budget_s = 0.0) {
    cfg.validate();
    const double loss = path_loss_db(path);
    if (cfg.probe_launch_dbm - loss < cfg.probe_power_floor_dbm)
        throw ApcInoperableError("received probe power " +
                                 std::to_string(cfg.probe_launch_dbm - loss) +
                                 " dBm on path '" + path.name + "' is below the floor");
    const double sigma = cfg.probe_noise_base * std::pow(10.0, (loss - cfg.probe_gain_db) / 20.0);
    auto tick = [&](double dt) {
        if (advance_clock) advance_clock(dt);
    };

    CompensationResult res;
    tick(cfg.overhead_s);
    res.duration_s = cfg.overhead_s;

    auto meas = detail::measure_probes(path, cfg, sigma, rng);
    res.start_fidelity = meas.avg_fidelity;
    res.end_fidelity = meas.avg_fidelity;
    int budget_iters = cfg.max_iterations;
    if (time_budget_s > 0.0)
        budget_iters = std::min(budget_iters,
                                static_cast<int>((time_budget_s - cfg.overhead_s) /
                                                 cfg.iteration_time_s));
    for (int k = 1; k <= budget_iters; ++k) {
        const ChannelTransform est = estimate_channel(meas.pairs, &res.residual);
        path.apc_correction = project_su2(est.unitary.adjoint() * path.apc_correction);
        tick(cfg.iteration_time_s);
        res.duration_s += cfg.iteration_time_s;
        res.iterations = k;
        meas = detail::measure_probes(path, cfg, sigma, rng);
        res.end_fidelity = meas.avg_fidelity;
        if (meas.avg_fidelity >= cfg.fidelity_threshold) {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace entsim
