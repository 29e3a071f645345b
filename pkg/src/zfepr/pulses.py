"""Pulse primitives: RF unitaries on the target, MW unitaries on the NV,
the spin-locking channel and photoluminescence readout.

Pulses are ideal and instantaneous; a finite-duration RF drive enters only
through its flip angle theta = Omega_x * t_RF.
"""

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DecayModel",
    "Pulse",
    "mw_pi",
    "mw_2pi",
    "rf_st1",
    "rf_st0",
    "free",
    "spinlock",
    "readout",
    "u_st1",
    "u_st0",
    "nv_pulse",
    "spinlock_channel",
    "readout_pl",
]

_SQRT2 = math.sqrt(2.0)

_PSI_PLUS = np.array([1.0, 0.0, 1.0], dtype=complex) / _SQRT2
_PSI_MINUS = np.array([1.0, 0.0, -1.0], dtype=complex) / _SQRT2
_KET0 = np.array([0.0, 1.0, 0.0], dtype=complex)

# pi pulse: |0> <-> |psi+> (up to -i), |psi-> untouched
_MW_PI = np.array(
    [
        [0.5, -1j / _SQRT2, -0.5],
        [-1j / _SQRT2, 0.0, -1j / _SQRT2],
        [-0.5, -1j / _SQRT2, 0.5],
    ],
    dtype=complex,
)
# 2pi pulse: swaps |+1> and |-1|, fixes |0>; reverses the interferometer phase
_MW_2PI = np.array([[0, 0, 1], [0, 1, 0], [1, 0, 0]], dtype=complex)


@dataclass(frozen=True)
class DecayModel:
    """NV decoherence parameters: echo time T2 with stretch exponent p, and
    the spin-locking relaxation time T1rho.  Infinities switch a channel off.
    """

    t2_nv_us: float = 16.0
    stretch_p: float = 2.0
    t1rho_us: float = 150.0

    def __post_init__(self):
        if not self.t2_nv_us > 0:
            raise ValueError("t2_nv_us must be positive")
        if not 1.0 <= self.stretch_p <= 3.0:
            raise ValueError("stretch exponent must be in [1, 3]")
        if not self.t1rho_us > 0:
            raise ValueError("t1rho_us must be positive")

    def echo_factor(self, tau_us):
        """Coherence envelope exp(-(tau/T2)^p) for one interrogation block."""
        if tau_us <= 0 or math.isinf(self.t2_nv_us):
            return 1.0
        return math.exp(-((tau_us / self.t2_nv_us) ** self.stretch_p))

    def lock_factor(self, t_us):
        """Locked-contrast envelope exp(-T/T1rho)."""
        if t_us <= 0 or math.isinf(self.t1rho_us):
            return 1.0
        return math.exp(-t_us / self.t1rho_us)


#: No-decoherence model for closed-form equivalence checks.
IDEAL = DecayModel(t2_nv_us=math.inf, stretch_p=2.0, t1rho_us=math.inf)


@dataclass(frozen=True)
class Pulse:
    """One element of a pulse sequence.

    ``kind`` is one of mw_pi, mw_2pi, rf_st1, rf_st0, free, spinlock,
    readout.  ``value`` carries the flip angle (rad) or duration (us).
    ``frame`` applies to free evolution only: "joint" evolves sensor and
    target together, "target" evolves the target alone, which is how free
    gaps inside a spin-locking window behave (the drive decouples the NV).
    """

    kind: str
    value: float = 0.0
    frame: str = "joint"

    def __post_init__(self):
        if self.kind in ("free", "spinlock") and self.value < 0:
            raise ValueError(f"{self.kind} duration must be >= 0")
        if not math.isfinite(self.value):
            raise ValueError("pulse parameter must be finite")
        if self.frame not in ("joint", "target"):
            raise ValueError(f"unknown frame {self.frame!r}")


def mw_pi():
    return Pulse("mw_pi")


def mw_2pi():
    return Pulse("mw_2pi")


def rf_st1(theta):
    return Pulse("rf_st1", theta)


def rf_st0(theta):
    return Pulse("rf_st0", theta)


def free(tau_us, frame="joint"):
    return Pulse("free", tau_us, frame)


def spinlock(t_us):
    return Pulse("spinlock", t_us)


def readout():
    return Pulse("readout")


def u_st1(theta):
    """S0 <-> T+-1 transition unitary for flip angle ``theta`` (4x4).

    theta = 2*pi exchanges T+1 and T-1 and flips the sign of S0, which is the
    decoupling pulse used inside interrogation blocks.
    """
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    i_s = 1j * s / _SQRT2
    return np.array(
        [
            [(1 + c) / 2, i_s, 0, (1 - c) / 2],
            [i_s, c, 0, -i_s],
            [0, 0, 1, 0],
            [(1 - c) / 2, -i_s, 0, (1 + c) / 2],
        ]
    )


def u_st0(theta):
    """S0 <-> T0 transition unitary for flip angle ``theta`` (4x4)."""
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, -1j * s, 0],
            [0, -1j * s, c, 0],
            [0, 0, 0, 1],
        ]
    )


def nv_pulse(kind):
    """3x3 MW unitary: "mw_pi" maps |0> to (|+1>+|-1>)/sqrt(2) leaving the
    antisymmetric state alone; "mw_2pi" swaps |+1> and |-1> (phase reversal).
    """
    if kind == "mw_pi":
        return _MW_PI.copy()
    if kind == "mw_2pi":
        return _MW_2PI.copy()
    raise ValueError(f"unknown MW pulse kind {kind!r}")


def _require_density_matrix(rho, tol=1e-10):
    rho = np.asarray(rho, dtype=complex)
    if abs(np.trace(rho).real - 1.0) > 1e-9 or abs(np.trace(rho).imag) > 1e-9:
        raise ValueError("density matrix must have unit trace")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise ValueError("density matrix must be Hermitian")
    if np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix must be positive semidefinite")
    return rho


def spinlock_channel(rho, t_us, decay=None, validate=True):
    """Spin-locking as its net effect: a dephasing channel in the dressed basis.

    Populations of |psi+>, |psi-> and |0> survive; every coherence between
    them is erased, and the psi+/psi- population imbalance (which stores the
    first interrogation phase) relaxes by exp(-T/T1rho).  Accepts a bare 3x3
    NV density matrix or a 3d x 3d joint one (NV factor first).
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0] // 3
    if rho.shape != (3 * d, 3 * d):
        raise ValueError("density matrix dimension must be a multiple of 3")
    if validate and d == 1:
        _require_density_matrix(rho)

    eye = np.eye(d, dtype=complex)
    basis = (_PSI_PLUS, _KET0, _PSI_MINUS)
    # block extraction in the dressed basis: B_ab = (<a| x 1) rho (|b> x 1)
    lift = [np.kron(v.reshape(3, 1), eye) for v in basis]
    blocks = [lift[a].conj().T @ rho @ lift[a] for a in range(3)]

    e = 1.0 if decay is None else decay.lock_factor(t_us)
    b_plus = 0.5 * (1 + e) * blocks[0] + 0.5 * (1 - e) * blocks[2]
    b_minus = 0.5 * (1 - e) * blocks[0] + 0.5 * (1 + e) * blocks[2]

    out = np.zeros_like(rho)
    for vec, block in zip(basis, (b_plus, blocks[1], b_minus)):
        out += np.kron(np.outer(vec, vec.conj()), block)
    return out


def readout_pl(rho_joint):
    """Photoluminescence observable: population of NV |0>, traced over the
    target.  Dimensionless in [0, 1]."""
    rho = np.asarray(rho_joint)
    d = rho.shape[0] // 3
    if rho.shape != (3 * d, 3 * d):
        raise ValueError("expected an NV (x) target density matrix")
    block = rho[d : 2 * d, d : 2 * d]
    return float(np.trace(block).real)
