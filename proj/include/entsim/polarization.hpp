#pragma once

// Two-qubit polarization states and single-arm channel transforms.
//
// Conventions used across the library:
//  * Jones basis {H, V}; H = (1,0), V = (0,1).
//  * Two-qubit basis order {HH, HV, VH, VV} with the signal qubit first,
//    i.e. rho = signal (x) idler.
//  * Analyzer angles are linear-polarization basis angles in radians.
//    Waveplate mechanical angles are converted to basis angles in exactly
//    one place: basis_angle_from_waveplate().
//  * Bloch components: s1 = |a|^2-|b|^2, s2 = 2 Re(a* b), s3 = 2 Im(a* b).

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "entsim/rng.hpp"

namespace entsim {

using complexd = std::complex<double>;
using Matrix2c = Eigen::Matrix2cd;
using Matrix4c = Eigen::Matrix4cd;
using Vector2c = Eigen::Vector2cd;

inline constexpr double kPi = 3.14159265358979323846;

// The only waveplate-to-basis conversion in the library: a half waveplate at
// mechanical angle theta analyzes the linear basis at 2*theta.
inline double basis_angle_from_waveplate(double waveplate_deg) {
    return 2.0 * waveplate_deg * kPi / 180.0;
}

// ---------------------------------------------------------------------------
// PolarizationVector: a normalized Jones vector.
// ---------------------------------------------------------------------------
struct PolarizationVector {
    Vector2c jones{1.0, 0.0};

    PolarizationVector() = default;
    PolarizationVector(complexd h, complexd v) : jones(h, v) { normalize(); }
    explicit PolarizationVector(const Vector2c& j) : jones(j) { normalize(); }

    void normalize() {
        const double n = jones.norm();
        if (!(n > 0.0)) throw std::invalid_argument("polarization vector has zero norm");
        jones /= n;
    }

    // Linear polarization at a given basis angle.
    static PolarizationVector linear(double angle_rad) {
        return PolarizationVector(std::cos(angle_rad), std::sin(angle_rad));
    }
    static PolarizationVector horizontal() { return linear(0.0); }
    static PolarizationVector vertical() { return linear(kPi / 2.0); }
    static PolarizationVector diagonal() { return linear(kPi / 4.0); }
    static PolarizationVector circular_right() {
        return PolarizationVector(complexd(1.0, 0.0) / std::sqrt(2.0), complexd(0.0, 1.0) / std::sqrt(2.0));
    }

    std::array<double, 3> bloch() const {
        const complexd a = jones(0), b = jones(1);
        return {std::norm(a) - std::norm(b),
                2.0 * std::real(std::conj(a) * b),
                2.0 * std::imag(std::conj(a) * b)};
    }

    // Inverse of bloch(); the global phase is fixed by making the larger
    // component real and nonnegative.
    static PolarizationVector from_bloch(const std::array<double, 3>& s) {
        const double n = std::sqrt(s[0] * s[0] + s[1] * s[1] + s[2] * s[2]);
        if (!(n > 0.0)) throw std::invalid_argument("bloch vector has zero norm");
        const double s1 = s[0] / n, s2 = s[1] / n, s3 = s[2] / n;
        const double a = std::sqrt(std::max(0.0, (1.0 + s1) / 2.0));
        if (a < 1e-12) return PolarizationVector(0.0, 1.0);
        return PolarizationVector(a, complexd(s2, s3) / (2.0 * a));
    }
};

// |<a|b>|^2 between two pure polarizations.
inline double classical_fidelity(const PolarizationVector& a, const PolarizationVector& b) {
    return std::norm(a.jones.dot(b.jones));
}

// ---------------------------------------------------------------------------
// SU(2) helpers.
// ---------------------------------------------------------------------------

// Rotation by `angle` about the Bloch axis `axis` (need not be normalized):
// U = cos(angle/2) I - i sin(angle/2) (n . sigma). Trace is real and >= 0
// for angle in [0, pi], which is the canonical form used when comparing.
inline Matrix2c su2_rotation(const std::array<double, 3>& axis, double angle) {
    double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (!(n > 0.0)) throw std::invalid_argument("rotation axis has zero norm");
    const double nx = axis[0] / n, ny = axis[1] / n, nz = axis[2] / n;
    const double c = std::cos(angle / 2.0), s = std::sin(angle / 2.0);
    // Pauli component order matches bloch(): 0 = diagonal, 1 = real
    // off-diagonal, 2 = imaginary off-diagonal.
    Matrix2c u;
    u << complexd(c, -s * nx), complexd(-s * nz, -s * ny),
         complexd(s * nz, -s * ny), complexd(c, s * nx);
    return u;
}

// Nearest special-unitary matrix: fixes accumulated round-off after long
// compositions. A 2x2 special unitary is [[a, -conj(b)], [b, conj(a)]].
inline Matrix2c project_su2(const Matrix2c& m) {
    complexd a = 0.5 * (m(0, 0) + std::conj(m(1, 1)));
    complexd b = 0.5 * (m(1, 0) - std::conj(m(0, 1)));
    const double n = std::sqrt(std::norm(a) + std::norm(b));
    if (!(n > 0.0)) throw std::invalid_argument("cannot project zero matrix to SU(2)");
    a /= n;
    b /= n;
    Matrix2c u;
    u << a, -std::conj(b), b, std::conj(a);
    return u;
}

// Rotation angle in [0, pi] of an SU(2) element, global phase removed.
inline double su2_rotation_angle(const Matrix2c& u) {
    const double half_trace = 0.5 * std::abs(u.trace());
    return 2.0 * std::acos(std::min(1.0, half_trace));
}

// SO(3) action of an SU(2) element on Bloch vectors.
inline Eigen::Matrix3d bloch_rotation_of(const Matrix2c& u) {
    static const std::array<Matrix2c, 3> sigma = [] {
        std::array<Matrix2c, 3> s;
        s[0] << 1, 0, 0, -1;
        s[1] << 0, 1, 1, 0;
        s[2] << 0, complexd(0, -1), complexd(0, 1), 0;
        return s;
    }();
    Eigen::Matrix3d r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            r(i, j) = 0.5 * std::real((sigma[i] * u * sigma[j] * u.adjoint()).trace());
    return r;
}

// Inverse of bloch_rotation_of up to global sign; returns the canonical
// (angle in [0, pi]) SU(2) element.
inline Matrix2c su2_from_bloch_rotation(const Eigen::Matrix3d& r) {
    const double cos_angle = std::min(1.0, std::max(-1.0, (r.trace() - 1.0) / 2.0));
    const double angle = std::acos(cos_angle);
    std::array<double, 3> axis{r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1)};
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (n > 1e-12) {
        for (auto& c : axis) c /= n;
    } else if (angle > kPi / 2.0) {
        // angle ~ pi: axis from the symmetric part, r ~ 2 n n^T - I.
        int k = 0;
        for (int i = 1; i < 3; ++i)
            if (r(i, i) > r(k, k)) k = i;
        axis = {0.0, 0.0, 0.0};
        axis[k] = std::sqrt(std::max(0.0, (r(k, k) + 1.0) / 2.0));
        for (int i = 0; i < 3; ++i)
            if (i != k) axis[i] = r(i, k) / (2.0 * axis[k]);
    } else {
        axis = {0.0, 0.0, 1.0};
    }
    return su2_rotation(axis, angle);
}

inline Matrix2c random_su2(RandomStream& rng) {
    return su2_rotation(rng.unit_sphere(), 2.0 * kPi * rng.uniform());
}

// ---------------------------------------------------------------------------
// ChannelTransform: one arm's polarization channel.
// ---------------------------------------------------------------------------
struct ChannelTransform {
    Matrix2c unitary = Matrix2c::Identity();  // birefringence rotation
    double scalar_transmission = 1.0;         // polarization-independent loss
    double pdl_db = 0.0;                      // polarization-dependent loss
    PolarizationVector pdl_axis = PolarizationVector::horizontal();

    void validate(double tol = 1e-10) const {
        if (!((unitary.adjoint() * unitary - Matrix2c::Identity()).norm() < tol))
            throw std::invalid_argument("channel unitary is not unitary");
        if (!(scalar_transmission > 0.0 && scalar_transmission <= 1.0))
            throw std::invalid_argument("scalar transmission outside (0, 1]");
        if (!(pdl_db >= 0.0)) throw std::invalid_argument("negative PDL");
    }

    // Jones-space operator: PDL (applied first) then the unitary. The stated
    // dB is the power ratio between principal axes, so the amplitude factor
    // is 10^(-pdl_db/20).
    Matrix2c jones_operator() const {
        if (pdl_db == 0.0) return unitary;
        const Vector2c v = pdl_axis.jones;
        Vector2c w;
        w << -std::conj(v(1)), std::conj(v(0));
        Matrix2c basis;
        basis.col(0) = v;
        basis.col(1) = w;
        Matrix2c d = Matrix2c::Zero();
        d(0, 0) = 1.0;
        d(1, 1) = std::pow(10.0, -pdl_db / 20.0);
        return unitary * basis * d * basis.adjoint();
    }
};

// ---------------------------------------------------------------------------
// TwoQubitState: 4x4 density matrix, basis {HH, HV, VH, VV}.
// ---------------------------------------------------------------------------
struct TwoQubitState {
    Matrix4c rho = Matrix4c::Identity() / 4.0;

    TwoQubitState() = default;
    explicit TwoQubitState(const Matrix4c& m) : rho(m) {}

    void re_hermitize() { rho = 0.5 * (rho + rho.adjoint().eval()); }

    double trace() const { return std::real(rho.trace()); }

    void validate(double tol = 1e-9) const {
        if (!((rho - rho.adjoint()).norm() < tol))
            throw std::invalid_argument("density matrix is not Hermitian");
        if (!(std::abs(trace() - 1.0) < tol))
            throw std::invalid_argument("density matrix trace is not 1");
        Eigen::SelfAdjointEigenSolver<Matrix4c> es(rho);
        if (es.eigenvalues().minCoeff() < -tol)
            throw std::invalid_argument("density matrix is not positive semidefinite");
    }

    double purity() const { return std::real((rho * rho).trace()); }

    // Random full-rank state from the Ginibre ensemble (test utility).
    static TwoQubitState random(RandomStream& rng) {
        Matrix4c g;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) g(i, j) = complexd(rng.gaussian(), rng.gaussian());
        Matrix4c m = g * g.adjoint();
        m /= m.trace();
        TwoQubitState s(m);
        s.re_hermitize();
        return s;
    }
};

enum class Arm { signal, idler };

inline Matrix4c kron2(const Matrix2c& a, const Matrix2c& b) {
    Matrix4c k;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
    return k;
}

inline TwoQubitState bell_phi_plus() {
    Matrix4c m = Matrix4c::Zero();
    m(0, 0) = m(0, 3) = m(3, 0) = m(3, 3) = 0.5;
    return TwoQubitState(m);
}

// Werner-like mixture V |phi+><phi+| + (1-V)/4 I.
inline TwoQubitState werner_state(double visibility) {
    if (!(visibility >= 0.0 && visibility <= 1.0))
        throw std::invalid_argument("visibility outside [0, 1]");
    Matrix4c m = visibility * bell_phi_plus().rho + (1.0 - visibility) * Matrix4c::Identity() / 4.0;
    return TwoQubitState(m);
}

// Isotropic depolarizing mix; scales the visibility of any state by m.
inline TwoQubitState depolarize(const TwoQubitState& s, double m) {
    if (!(m >= 0.0 && m <= 1.0)) throw std::invalid_argument("depolarize factor outside [0, 1]");
    TwoQubitState out(m * s.rho + (1.0 - m) * Matrix4c::Identity() / 4.0);
    out.re_hermitize();
    return out;
}

// Overlap fidelity Tr(rho sigma); equals the Uhlmann fidelity when either
// argument is pure, which covers every use in this library.
inline double fidelity(const TwoQubitState& a, const TwoQubitState& b) {
    return std::real((a.rho * b.rho).trace());
}

inline double fidelity_to_phi_plus(const TwoQubitState& s) {
    return fidelity(s, bell_phi_plus());
}

struct ArmTransformResult {
    TwoQubitState state;       // renormalized output state
    double transmission = 1.0; // fraction of input ensemble transmitted
};

// Applies a one-arm channel (U x I) or (I x U) including PDL and scalar loss.
// The returned transmission folds the PDL's state-dependent loss with the
// scalar transmission; the state is renormalized and re-Hermitized.
inline ArmTransformResult apply_arm_transform(const TwoQubitState& s,
                                              const ChannelTransform& t,
                                              Arm arm) {
    t.validate(1e-8);
    const Matrix2c m2 = t.jones_operator();
    const Matrix4c m4 = (arm == Arm::signal) ? kron2(m2, Matrix2c::Identity())
                                             : kron2(Matrix2c::Identity(), m2);
    Matrix4c out = m4 * s.rho * m4.adjoint();
    const double kept = std::real(out.trace());
    if (!(kept > 0.0)) throw std::invalid_argument("arm transform annihilated the state");
    TwoQubitState res(out / kept);
    res.re_hermitize();
    return {res, kept * t.scalar_transmission};
}

// Projector onto the linear polarization at `angle_rad`.
inline Matrix2c analyzer_projector(double angle_rad) {
    const Vector2c j = PolarizationVector::linear(angle_rad).jones;
    return j * j.adjoint();
}

// P(outcome_signal, outcome_idler) with analyzers at basis angles alpha
// (signal) and beta (idler); false selects the orthogonal port.
inline double coincidence_probability(const TwoQubitState& s, double alpha, double beta,
                                      bool signal_plus = true, bool idler_plus = true) {
    const double a = signal_plus ? alpha : alpha + kPi / 2.0;
    const double b = idler_plus ? beta : beta + kPi / 2.0;
    const Matrix4c proj = kron2(analyzer_projector(a), analyzer_projector(b));
    const double p = std::real((s.rho * proj).trace());
    return std::min(1.0, std::max(0.0, p));
}

// Single-arm detection probability behind one analyzer port.
inline double singles_probability(const TwoQubitState& s, Arm arm, double angle_rad) {
    const Matrix2c proj = analyzer_projector(angle_rad);
    const Matrix4c p4 = (arm == Arm::signal) ? kron2(proj, Matrix2c::Identity())
                                             : kron2(Matrix2c::Identity(), proj);
    const double p = std::real((s.rho * p4).trace());
    return std::min(1.0, std::max(0.0, p));
}

// Correlation E(alpha, beta) = P++ + P-- - P+- - P-+.
inline double correlation_e(const TwoQubitState& s, double alpha, double beta) {
    return coincidence_probability(s, alpha, beta, true, true) +
           coincidence_probability(s, alpha, beta, false, false) -
           coincidence_probability(s, alpha, beta, true, false) -
           coincidence_probability(s, alpha, beta, false, true);
}

// Reduced single-arm state.
inline Matrix2c reduced_state(const TwoQubitState& s, Arm arm) {
    Matrix2c r = Matrix2c::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                r(i, j) += (arm == Arm::signal) ? s.rho(2 * i + k, 2 * j + k)
                                                : s.rho(k * 2 + i, k * 2 + j);
    return r;
}

} // namespace entsim
