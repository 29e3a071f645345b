"""Measurement protocols: closed-form signals and a brute-force density
matrix simulator that must agree with them.

Phase convention: every ``cos(C tau)`` in the formulas means the angular
phase ``2*pi * C_MHz * tau_us``.  ``tau`` is the total free evolution of one
interrogation block (two halves of tau/2 around the decoupling pulse).

The simulator evolves the full 12x12 sensor+target density matrix element by
element.  Free gaps that fall inside a spin-locking window evolve the target
factor alone: the locked sensor averages the secular coupling away, which is
exactly how the closed-form treatment handles that interval.
"""

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .constants import NV_ZFS_MHZ, TWO_PI
from .hamiltonians import (
    DEFAULT_OPS,
    DipolarGeometry,
    NoiseDraw,
    TargetSpec,
    dipolar_constant,
    st0_fluctuation,
    target_levels_mhz,
)
from .noise import sample_noise
from .pulses import Pulse, free, mw_2pi, mw_pi, nv_pulse, readout, rf_st0, rf_st1, spinlock
from .pulses import spinlock_channel, u_st0, u_st1, readout_pl
from .spectra import TimeSeries

__all__ = [
    "SequenceError",
    "deer_signal_general",
    "deer_signal",
    "corr_rabi",
    "corr_ramsey_diff",
    "corr_signal",
    "deer_sequence",
    "correlation_rabi_sequence",
    "correlation_ramsey_sequences",
    "simulate_sequence",
    "simulate_alternative_correlation",
    "monte_carlo_signal",
    "synthesize_ramsey_series",
]

_EYE3 = np.eye(3, dtype=complex)
_EYE4 = np.eye(4, dtype=complex)
_MW_PI_JOINT = np.kron(nv_pulse("mw_pi"), _EYE4)
_MW_2PI_JOINT = np.kron(nv_pulse("mw_2pi"), _EYE4)
_SZZ_DIAG = np.array([0.5, 0.0, 0.0, -0.5])


class SequenceError(ValueError):
    """Malformed pulse sequence."""


def _phase(coupling_mhz, tau_us):
    return TWO_PI * coupling_mhz * tau_us


def _check_transition(transition):
    if transition not in ("st1", "st0"):
        raise ValueError(f"unknown transition {transition!r}")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def deer_signal_general(theta, tau_us, coupling_mhz):
    """Interrogation signal for arbitrary RF flip angle theta.

    S = (1/32) [25 + 3 cos(Ct) + 4 cos(Ct/2) + 4 (1 - cos(Ct)) cos(theta/2)
    + 2 (1 - cos(Ct/2))^2 cos(theta)], the weighted average of cos^2(phi)
    over the thermal target states and their RF branches.
    """
    ct = _phase(coupling_mhz, tau_us)
    return (
        25.0
        + 3.0 * np.cos(ct)
        + 4.0 * np.cos(ct / 2.0)
        + 4.0 * (1.0 - np.cos(ct)) * np.cos(theta / 2.0)
        + 2.0 * (1.0 - np.cos(ct / 2.0)) ** 2 * np.cos(theta)
    ) / 32.0


def deer_signal(tau_us, couplings, decay=None):
    """Decoupling-form signal (theta fixed at 2*pi) with the stretched
    exponential sensor envelope:  sum_i w_i [3/4 + 1/4 e^{-(tau/T2)^p} cos(C_i tau)].

    ``couplings`` is a single strength in MHz or an iterable of (C_i, w_i)
    pairs with weights summing to one; several strengths produce the beating
    envelope seen when the target axis hops between orientations.
    """
    pairs = _coupling_pairs(couplings)
    env = 1.0 if decay is None else decay.echo_factor(tau_us)
    total = 0.0
    for c, w in pairs:
        total += w * (0.75 + 0.25 * env * np.cos(_phase(c, tau_us)))
    return total


def _coupling_pairs(couplings):
    if np.isscalar(couplings):
        return ((float(couplings), 1.0),)
    pairs = tuple((float(c), float(w)) for c, w in couplings)
    if abs(sum(w for _, w in pairs) - 1.0) > 1e-9:
        raise ValueError("coupling weights must sum to 1")
    return pairs


def corr_rabi(transition, theta, tau_us, coupling_mhz):
    """Correlated term <cos 2phi1 cos 2phi2> of a correlation Rabi sweep.

    (1/8)(1 - cos(Ct))^2 cos(theta) + 3/8 + (1/4) cos(Ct) + (3/8) cos^2(Ct);
    the S0<->T+-1 and S0<->T0 drive variants give the same expression.
    """
    _check_transition(transition)
    cc = np.cos(_phase(coupling_mhz, tau_us))
    return (1.0 - cc) ** 2 * np.cos(theta) / 8.0 + 0.375 + cc / 4.0 + 0.375 * cc * cc


def corr_ramsey_diff(transition, t_us, tau_us, coupling_mhz, noise=None,
                     spec=None, n_draws=2000, threads=1):
    """Differential correlation Ramsey signal (sig minus ref correlated term).

    st1:  (1/4)(1-cos Ct)^2 <cos(dw t)> cos(w_st1 t), with the noise average
    evaluated analytically from the Gaussian characteristic function
    (dw = delta_z/2 -> envelope exp(-(pi sigma_z t)^2 / 2)).

    st0:  (1/4)(1-cos Ct)^2 <cos((w_st0 + dw_st0) t)>, averaged by Monte
    Carlo because dw_st0 is a quadratic form of the noise.

    The measured photoluminescence difference is half this value.
    """
    _check_transition(transition)
    spec = spec or TargetSpec()
    t = np.asarray(t_us, dtype=float)
    amp = 0.25 * (1.0 - np.cos(_phase(coupling_mhz, tau_us))) ** 2
    if transition == "st1":
        carrier = np.cos(TWO_PI * spec.f_st1_mhz * t)
        env = 1.0
        if noise is not None and noise.sigma_z_mhz > 0:
            env = np.exp(-0.5 * (math.pi * noise.sigma_z_mhz * t) ** 2)
        out = amp * env * carrier
    else:
        if noise is None:
            out = amp * np.cos(TWO_PI * spec.f_st0_mhz * t)
        else:
            out = amp * _averaged_cos(spec.f_st0_mhz, t, spec, noise, n_draws, threads)
    return float(out) if np.isscalar(t_us) else out


#: Fixed Monte Carlo chunk size.  Chunk boundaries never depend on the thread
#: count, and partial sums are combined in index order, so results are
#: bit-identical at any parallelism level.
_MC_CHUNK = 512


def _mc_chunks(n_draws):
    return [(i, min(i + _MC_CHUNK, n_draws)) for i in range(0, n_draws, _MC_CHUNK)]


def _run_chunks(worker, n_draws, threads):
    bounds = _mc_chunks(n_draws)
    if threads <= 1 or len(bounds) == 1:
        partials = [worker(i0, i1) for i0, i1 in bounds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            partials = list(pool.map(lambda b: worker(*b), bounds))
    total = partials[0]
    for part in partials[1:]:
        total = total + part
    return total


def _averaged_cos(f_mhz, t, spec, noise, n_draws, threads=1):
    """Monte Carlo <cos(2 pi (f + dw_st0) t)> with fixed-order accumulation."""

    def worker(i0, i1):
        draws = sample_noise(noise, i1 - i0, start=i0)
        dw = st0_fluctuation(draws[:, 0], draws[:, 1], draws[:, 2], spec)
        return np.cos(TWO_PI * np.outer(f_mhz + dw, t)).sum(axis=0)

    return _run_chunks(worker, n_draws, threads) / n_draws


def corr_signal(phi1, phi2, variant="main"):
    """Correlation signal for one phase pair.

    main:        (1/2) [1 + cos(2 phi1) cos(2 phi2)]
    alternative: (1/8) [3 + cos(2 phi1) + cos(2 phi2) + 3 cos(2 phi1) cos(2 phi2)]

    The alternative protocol trades the locking drive for a plain wait, at
    the cost of a quarter of the correlated-term contrast.  Statistical
    averaging over phase realizations is the caller's business.
    """
    c1, c2 = np.cos(2.0 * phi1), np.cos(2.0 * phi2)
    if variant == "main":
        return 0.5 * (1.0 + c1 * c2)
    if variant == "alternative":
        return (3.0 + c1 + c2 + 3.0 * c1 * c2) / 8.0
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# sequence builders
# ---------------------------------------------------------------------------

def deer_sequence(theta, tau_us, transition="st1"):
    """One interrogation block: pi - tau/2 - (2pi MW + theta RF) - tau/2 - pi."""
    _check_transition(transition)
    rf = rf_st1 if transition == "st1" else rf_st0
    return [
        mw_pi(), free(tau_us / 2.0), mw_2pi(), rf(theta), free(tau_us / 2.0),
        mw_pi(), readout(),
    ]


def _correlation_sequence(manipulation, tau_us, lock_us):
    block = [free(tau_us / 2.0), mw_2pi(), rf_st1(2.0 * math.pi), free(tau_us / 2.0)]
    return ([mw_pi()] + block + [spinlock(lock_us)] + list(manipulation)
            + block + [mw_pi(), readout()])


def correlation_rabi_sequence(transition, theta, tau_us, lock_us=10.0):
    """Two interrogation blocks around a locked window holding one RF drive.

    The S0<->T0 drive is sandwiched between pi pulses on the S0<->T+-1
    transition, which shuttle population through the auxiliary states.
    """
    _check_transition(transition)
    if transition == "st1":
        manip = [rf_st1(theta)]
    else:
        manip = [rf_st1(math.pi), rf_st0(theta), rf_st1(math.pi)]
    return _correlation_sequence(manip, tau_us, lock_us)


def correlation_ramsey_sequences(transition, t_us, tau_us, lock_us=10.0):
    """(signal, reference) sequences for the differential Ramsey measurement.

    Signal closes the target superposition with -pi/2, reference with +pi/2;
    their difference cancels every background term.
    """
    _check_transition(transition)

    def build(sign):
        if transition == "st1":
            manip = [rf_st1(math.pi / 2.0), free(t_us, frame="target"),
                     rf_st1(sign * math.pi / 2.0)]
        else:
            manip = [rf_st1(math.pi), rf_st0(math.pi / 2.0),
                     free(t_us, frame="target"), rf_st0(sign * math.pi / 2.0),
                     rf_st1(math.pi)]
        return _correlation_sequence(manip, tau_us, lock_us)

    return build(-1.0), build(+1.0)


# ---------------------------------------------------------------------------
# density-matrix simulator
# ---------------------------------------------------------------------------

def _validate_sequence(sequence):
    if not sequence:
        raise SequenceError("empty sequence")
    for el in sequence:
        if not isinstance(el, Pulse):
            raise SequenceError(f"not a pulse element: {el!r}")
    if sequence[-1].kind != "readout":
        raise SequenceError("sequence must end with a readout")
    if any(el.kind == "readout" for el in sequence[:-1]):
        raise SequenceError("readout must be the final element")
    seen_mw = False
    in_window = False
    for el in sequence:
        if el.kind in ("mw_pi", "mw_2pi"):
            seen_mw = True
            in_window = False
        elif el.kind == "spinlock":
            if not seen_mw:
                raise SequenceError("spin locking before any MW pulse")
            in_window = True
        elif el.kind == "free" and el.frame == "target" and not in_window:
            raise SequenceError("target-frame free evolution outside a locked window")


class _Propagators:
    """Cached eigendecompositions for one (spec, coupling, noise) context.

    Free-evolution unitaries are memoized by duration, which makes repeated
    interrogation blocks (and Monte Carlo sweeps sharing one draw) cheap.
    """

    def __init__(self, spec, coupling_mhz, noise, zfs_mhz, ops):
        h_target = np.diag(target_levels_mhz(spec)).astype(complex)
        if noise is not None:
            h_target = h_target + (noise.delta_x * ops.sx_t + noise.delta_y * ops.sy_t
                                   + noise.delta_z * ops.sz_t)
        self._target_eig = np.linalg.eigh(TWO_PI * h_target)
        self._block_eig = []
        for m in (1.0, 0.0, -1.0):
            block = h_target + np.diag(zfs_mhz * m * m + coupling_mhz * m * _SZZ_DIAG)
            self._block_eig.append(np.linalg.eigh(TWO_PI * block))
        self._joint_cache = {}
        self._target_cache = {}

    def joint_free(self, tau_us):
        u = self._joint_cache.get(tau_us)
        if u is None:
            u = np.zeros((12, 12), dtype=complex)
            for k, (w, v) in enumerate(self._block_eig):
                u[4 * k : 4 * k + 4, 4 * k : 4 * k + 4] = \
                    (v * np.exp(-1j * w * tau_us)) @ v.conj().T
            self._joint_cache[tau_us] = u
        return u

    def target_free(self, tau_us):
        u = self._target_cache.get(tau_us)
        if u is None:
            w, v = self._target_eig
            u = np.kron(_EYE3, (v * np.exp(-1j * w * tau_us)) @ v.conj().T)
            self._target_cache[tau_us] = u
        return u


def _apply_echo_decay(rho, factor):
    """Scale the target-modulated sectors of the |+1><-1| sensor coherence."""
    if factor >= 1.0:
        return
    mask = np.ones((4, 4))
    mask[0, :] = factor
    mask[:, 0] = factor
    mask[3, :] = factor
    mask[:, 3] = factor
    rho[0:4, 8:12] *= mask
    rho[8:12, 0:4] *= mask


def simulate_sequence(sequence, spec, coupling, noise=None, decay=None,
                      zfs_mhz=NV_ZFS_MHZ, ops=DEFAULT_OPS):
    """Evolve |0><0| (x) I/4 through the sequence and read out.

    ``coupling`` is a strength in MHz or a :class:`DipolarGeometry`;
    ``noise`` an optional quasi-static :class:`NoiseDraw` held constant for
    the whole shot.  The sensor echo envelope is applied to the modulated
    coherence sectors whenever an interrogation window closes (at a MW pi
    pulse or at the locking channel), which reproduces the closed-form decay
    model exactly.
    """
    _validate_sequence(sequence)
    c_mhz = dipolar_constant(coupling) if isinstance(coupling, DipolarGeometry) else float(coupling)
    props = _Propagators(spec, c_mhz, noise, zfs_mhz, ops)
    return _run_sequence(sequence, props, decay)


def _run_sequence(sequence, props, decay):
    rho = np.zeros((12, 12), dtype=complex)
    rho[4:8, 4:8] = _EYE4 / 4.0
    t_coherent = 0.0

    for el in sequence:
        kind = el.kind
        if kind == "free":
            if el.frame == "target":
                u = props.target_free(el.value)
            else:
                u = props.joint_free(el.value)
                t_coherent += el.value
            rho = u @ rho @ u.conj().T
        elif kind == "mw_pi":
            if decay is not None and t_coherent > 0.0:
                _apply_echo_decay(rho, decay.echo_factor(t_coherent))
            t_coherent = 0.0
            rho = _MW_PI_JOINT @ rho @ _MW_PI_JOINT.conj().T
        elif kind == "mw_2pi":
            rho = _MW_2PI_JOINT @ rho @ _MW_2PI_JOINT.conj().T
        elif kind == "rf_st1":
            u = np.kron(_EYE3, u_st1(el.value))
            rho = u @ rho @ u.conj().T
        elif kind == "rf_st0":
            u = np.kron(_EYE3, u_st0(el.value))
            rho = u @ rho @ u.conj().T
        elif kind == "spinlock":
            if decay is not None and t_coherent > 0.0:
                _apply_echo_decay(rho, decay.echo_factor(t_coherent))
            t_coherent = 0.0
            rho = spinlock_channel(rho, el.value, decay, validate=False)
        elif kind == "readout":
            return readout_pl(rho)
        else:  # pragma: no cover - Pulse constructor restricts kinds
            raise SequenceError(f"unknown element kind {kind!r}")
    raise SequenceError("sequence must end with a readout")


def _dephase_nv_energy_basis(rho):
    """Erase every coherence between the sensor energy levels |+1>, |0>, |-1>."""
    out = np.zeros_like(rho)
    for k in range(3):
        sl = slice(4 * k, 4 * k + 4)
        out[sl, sl] = rho[sl, sl]
    return out


def simulate_alternative_correlation(manipulation, tau_us, spec, coupling,
                                     noise=None, zfs_mhz=NV_ZFS_MHZ, ops=DEFAULT_OPS):
    """Correlation protocol without the locking drive.

    Both interrogation blocks are closed by pi pulses and the stored state
    simply waits: the sensor fully dephases in its energy basis, which costs
    a quarter of the correlated-term contrast (Eq. corr_signal
    ``variant="alternative"``).  ``manipulation`` is a list of target pulses
    applied during the wait.
    """
    c_mhz = dipolar_constant(coupling) if isinstance(coupling, DipolarGeometry) else float(coupling)
    props = _Propagators(spec, c_mhz, noise, zfs_mhz, ops)
    block = [free(tau_us / 2.0), mw_2pi(), rf_st1(2.0 * math.pi), free(tau_us / 2.0)]

    rho = np.zeros((12, 12), dtype=complex)
    rho[4:8, 4:8] = _EYE4 / 4.0

    def apply(elems):
        nonlocal rho
        for el in elems:
            if el.kind == "free":
                u = props.joint_free(el.value)
            elif el.kind == "mw_pi":
                u = _MW_PI_JOINT
            elif el.kind == "mw_2pi":
                u = _MW_2PI_JOINT
            elif el.kind == "rf_st1":
                u = np.kron(_EYE3, u_st1(el.value))
            elif el.kind == "rf_st0":
                u = np.kron(_EYE3, u_st0(el.value))
            else:
                raise SequenceError(f"element {el.kind!r} not allowed here")
            rho = u @ rho @ u.conj().T

    apply([mw_pi()] + block + [mw_pi()])
    rho = _dephase_nv_energy_basis(rho)
    apply(list(manipulation))
    apply([mw_pi()] + block + [mw_pi()])
    return readout_pl(rho)


# ---------------------------------------------------------------------------
# Monte Carlo averaging and series synthesis
# ---------------------------------------------------------------------------

def monte_carlo_signal(sequence_family, t_grid, spec, coupling, noise, n_draws,
                       decay=None, zfs_mhz=NV_ZFS_MHZ, threads=1):
    """Noise-averaged signal of ``sequence_family(t)`` on a time grid.

    Draw ``i`` uses the deterministic per-sample seed ``noise.seed + i``, so
    the average is reproducible bit for bit no matter how the draws are
    chunked or parallelized.
    """
    if n_draws < 1:
        raise ValueError("need at least one draw")
    t_grid = np.asarray(t_grid, dtype=float)
    sequences = [sequence_family(t) for t in t_grid]
    for seq in sequences:
        _validate_sequence(seq)
    c_mhz = dipolar_constant(coupling) if isinstance(coupling, DipolarGeometry) else float(coupling)

    def worker(i0, i1):
        part = np.zeros(len(t_grid))
        for i in range(i0, i1):
            draw = NoiseDraw(*sample_noise(noise, 1, start=i)[0])
            props = _Propagators(spec, c_mhz, draw, zfs_mhz, DEFAULT_OPS)
            part += np.array([_run_sequence(seq, props, decay) for seq in sequences])
        return part

    acc = _run_chunks(worker, n_draws, threads)
    return TimeSeries(times=t_grid, values=acc / n_draws)


def synthesize_ramsey_series(transition, t_grid, spec, coupling_mhz, tau_us,
                             noise=None, n_draws=2000, threads=1):
    """Differential Ramsey time series from the closed forms, line structure
    included.

    The c13 doublet (st1) and the static offset doublet (st0) enter as
    equal-weight cosine sums sharing one noise realization set.
    """
    _check_transition(transition)
    t = np.asarray(t_grid, dtype=float)
    amp = 0.25 * (1.0 - np.cos(_phase(coupling_mhz, tau_us))) ** 2

    if transition == "st1":
        center = spec.f_st1_mhz
        if spec.c13_splitting_mhz:
            half = 0.5 * spec.c13_splitting_mhz
            lines = ((center - half, 0.5), (center + half, 0.5))
        else:
            lines = ((center, 1.0),)
        env = 1.0
        if noise is not None and noise.sigma_z_mhz > 0:
            env = np.exp(-0.5 * (math.pi * noise.sigma_z_mhz * t) ** 2)
        values = amp * env * sum(w * np.cos(TWO_PI * f * t) for f, w in lines)
    else:
        center = spec.f_st0_mhz
        if spec.st0_offset_doublet_mhz is not None:
            o1, o2 = spec.st0_offset_doublet_mhz
            lines = ((center + o1, 0.5), (center + o2, 0.5))
        else:
            lines = ((center, 1.0),)
        if noise is None:
            values = amp * sum(w * np.cos(TWO_PI * f * t) for f, w in lines)
        else:
            values = amp * sum(
                w * _averaged_cos(f, t, spec, noise, n_draws, threads) for f, w in lines
            )
    return TimeSeries(times=t, values=values)
