"""Static-field dependence sweeps and residual-field compensation.

The compensation simulation mirrors the three-step lab procedure: the ODMR
linewidth of a sensor broadens symmetrically with the axial field, so
sweeping a coil current and locating the symmetric minimum of the linewidth
curve nulls one field projection.  Two sensors lying in the plane
perpendicular to X pin down Bz (their Y projections cancel on averaging) and
By; a third sensor perpendicular to Y fixes Bx.  What limits the residual is
the current stability of the supplies, not the fit.
"""

import math
from dataclasses import dataclass

import numpy as np

from .constants import GAMMA_E_MHZ_PER_G
from .fitting import levenberg_marquardt
from .hamiltonians import FieldVector, transitions_vs_field

__all__ = [
    "CoilConfig",
    "ScanPlan",
    "OdmrScan",
    "CompensationResult",
    "BsweepPoint",
    "NV_AXES",
    "bsweep",
    "write_bsweep_csv",
    "odmr_linewidth_model",
    "find_symmetric_center",
    "simulate_odmr_scan",
    "compensate_3axis",
    "format_compensation_report",
]

_S6 = math.sqrt(6.0)
_S3 = math.sqrt(3.0)

#: Sensor axes used by the compensation procedure, lab frame.  A and B lie in
#: the plane perpendicular to X (opposite Y projections, equal Z projection);
#: C lies in the plane perpendicular to Y.
NV_AXES = {
    "A": np.array([0.0, 2.0 / _S6, 1.0 / _S3]),
    "B": np.array([0.0, -2.0 / _S6, 1.0 / _S3]),
    "C": np.array([2.0 / _S6, 0.0, 1.0 / _S3]),
}

_AXIS_VECTORS = {
    "X": np.array([1.0, 0.0, 0.0]),
    "Y": np.array([0.0, 1.0, 0.0]),
    "Z": np.array([0.0, 0.0, 1.0]),
}


@dataclass(frozen=True)
class CoilConfig:
    """Helmholtz coil pair: field per current and supply stability."""

    coefficient_g_per_a: float = 2.8
    current_stability_a: float = 0.004
    axis: str = "Z"

    def __post_init__(self):
        if not self.coefficient_g_per_a > 0:
            raise ValueError("coil coefficient must be positive")
        if self.axis not in _AXIS_VECTORS:
            raise ValueError("axis must be one of X, Y, Z")


@dataclass(frozen=True)
class ScanPlan:
    """Linewidth-vs-current scan settings for the compensation simulation.

    The window should sample the dip core (broadening comparable to the base
    width): far out on the linear arms the symmetric-peak fit function no
    longer tracks the quadrature broadening shape.
    """

    i_min_a: float = -0.5
    i_max_a: float = 0.5
    n_points: int = 201
    base_width_mhz: float = 2.0
    jitter_frac: float = 0.03

    def __post_init__(self):
        if not self.i_min_a < self.i_max_a:
            raise ValueError("scan range must be increasing")
        if self.n_points < 7:
            raise ValueError("need at least 7 scan points")
        if not self.base_width_mhz > 0:
            raise ValueError("base width must be positive")

    def currents(self, center_a=0.0):
        return center_a + np.linspace(self.i_min_a, self.i_max_a, self.n_points)


@dataclass(frozen=True)
class OdmrScan:
    """Extracted ODMR linewidths versus coil current for one sensor."""

    currents_a: np.ndarray
    linewidths_mhz: np.ndarray
    nv_orientation: np.ndarray

    def __post_init__(self):
        currents = np.asarray(self.currents_a, dtype=float)
        widths = np.asarray(self.linewidths_mhz, dtype=float)
        if currents.shape != widths.shape or currents.ndim != 1:
            raise ValueError("currents and linewidths must be 1-d, equal length")
        if np.any(np.diff(currents) <= 0):
            raise ValueError("currents must be strictly increasing")
        object.__setattr__(self, "currents_a", currents)
        object.__setattr__(self, "linewidths_mhz", widths)
        object.__setattr__(self, "nv_orientation",
                           np.asarray(self.nv_orientation, dtype=float))


def odmr_linewidth_model(i_a, center_i0_a, coil, base_width_mhz, nv_axis_projection):
    """Unresolved-splitting broadening: the two shifted lines of an axial
    field merge into one line of width
    sqrt(base^2 + (2 gamma_e proj coeff (I - I0))^2), symmetric about I0."""
    if not base_width_mhz > 0:
        raise ValueError("base width must be positive")
    split = 2.0 * GAMMA_E_MHZ_PER_G * nv_axis_projection * coil.coefficient_g_per_a
    return np.sqrt(base_width_mhz**2 + (split * (np.asarray(i_a, float) - center_i0_a)) ** 2)


def find_symmetric_center(scan):
    """Locate the symmetric minimum of a linewidth-vs-current curve.

    Fits an inverted Gaussian (the lab choice: any symmetric peak function
    does, since only the center is consumed) and returns (I0, standard
    error) in Amperes.  The scan must bracket the minimum with at least 7
    points; a minimum on the scan edge is rejected.
    """
    currents = scan.currents_a
    widths = scan.linewidths_mhz
    if len(currents) < 7:
        raise ValueError("need at least 7 scan points")
    imin = int(np.argmin(widths))
    if imin in (0, len(widths) - 1):
        raise ValueError("linewidth minimum not bracketed by the scan")

    top = float(widths.max())
    depth = float(widths.min() - top)  # negative: inverted peak
    span = float(currents[-1] - currents[0])
    p0 = np.array([top, depth, float(currents[imin]), span / 4.0])

    def fun(params):
        c0, a, i0, s = params
        z = (currents - i0) / s
        g = np.exp(-0.5 * z * z)
        resid = c0 + a * g - widths
        jac = np.column_stack([
            np.ones_like(currents),
            g,
            a * g * z / s,
            a * g * z * z / s,
        ])
        return resid, jac

    res = levenberg_marquardt(fun, p0)
    i0 = float(res.params[2])
    se = float(np.sqrt(max(res.covariance[2, 2], 0.0)))
    if not currents[0] <= i0 <= currents[-1]:
        raise ValueError("fitted center outside the scan range")
    return i0, se


def simulate_odmr_scan(nv_axis, coil_axis, total_field, coil, plan, rng, center_a=0.0):
    """Synthesize one linewidth-vs-current scan for a sensor axis.

    ``total_field`` is the field present before this coil is energized; the
    extracted linewidths carry Gaussian jitter of ``jitter_frac * base``.
    ``center_a`` recenters the scan window (used for the refinement pass).
    """
    n = np.asarray(nv_axis, dtype=float)
    axis_vec = _AXIS_VECTORS[coil_axis]
    proj = float(n @ axis_vec)
    axial0 = float(n @ np.asarray(total_field, dtype=float))
    currents = plan.currents(center_a)
    axial = axial0 + proj * coil.coefficient_g_per_a * currents
    widths = np.sqrt(plan.base_width_mhz**2 + (2.0 * GAMMA_E_MHZ_PER_G * axial) ** 2)
    widths = widths + plan.jitter_frac * plan.base_width_mhz * rng.standard_normal(len(currents))
    return OdmrScan(currents_a=currents, linewidths_mhz=widths, nv_orientation=n)


@dataclass(frozen=True)
class CompensationResult:
    """Outcome of the three-step procedure."""

    currents_a: dict
    fit_errors_a: dict
    applied_field: FieldVector
    residual_g: np.ndarray

    @property
    def residual_abs_g(self):
        return np.abs(self.residual_g)


def compensate_3axis(true_field, coil, plan=ScanPlan(), seed=0):
    """Simulate the full Bz -> By -> Bx compensation.

    Step (i) sweeps the Z coil with sensors A and B and averages the two
    symmetric centers, which cancels their equal-and-opposite Y projections.
    Steps (ii)/(iii) sweep Y with sensor A and X with sensor C.  Each applied
    current is the fitted center plus a supply-stability error, so the
    per-axis residual is of order stability * coefficient.
    """
    rng = np.random.default_rng(seed)
    b = np.asarray(true_field.as_array() if isinstance(true_field, FieldVector)
                   else true_field, dtype=float).copy()
    coeff = coil.coefficient_g_per_a
    currents, fit_errors = {}, {}

    def measure(nv_name, axis):
        # two passes: a window centered on the first estimate removes the
        # systematic pull an off-center window exerts through the mismatch
        # between the quadrature curve and the symmetric-peak fit function
        scan = simulate_odmr_scan(NV_AXES[nv_name], axis, b, coil, plan, rng)
        coarse, _ = find_symmetric_center(scan)
        scan = simulate_odmr_scan(NV_AXES[nv_name], axis, b, coil, plan, rng,
                                  center_a=coarse)
        return find_symmetric_center(scan)

    # (i) Bz from sensors A and B, averaged
    i_za, se_a = measure("A", "Z")
    i_zb, se_b = measure("B", "Z")
    i_z = 0.5 * (i_za + i_zb)
    fit_errors["Z"] = 0.5 * math.hypot(se_a, se_b)
    delivered_z = i_z + coil.current_stability_a * rng.standard_normal()
    currents["Z"] = delivered_z
    b = b + coeff * delivered_z * _AXIS_VECTORS["Z"]

    # (ii) By from sensor A (insensitive to Bx)
    i_y, fit_errors["Y"] = measure("A", "Y")
    delivered_y = i_y + coil.current_stability_a * rng.standard_normal()
    currents["Y"] = delivered_y
    b = b + coeff * delivered_y * _AXIS_VECTORS["Y"]

    # (iii) Bx from sensor C
    i_x, fit_errors["X"] = measure("C", "X")
    delivered_x = i_x + coil.current_stability_a * rng.standard_normal()
    currents["X"] = delivered_x
    b = b + coeff * delivered_x * _AXIS_VECTORS["X"]

    applied = FieldVector(*(b - (true_field.as_array() if isinstance(true_field, FieldVector)
                                 else np.asarray(true_field, float))))
    return CompensationResult(currents_a=currents, fit_errors_a=fit_errors,
                              applied_field=applied, residual_g=b)


def format_compensation_report(result):
    lines = ["# three-axis compensation"]
    for axis in ("Z", "Y", "X"):
        lines.append(
            f"axis {axis}: current_A = {result.currents_a[axis]:+.6f}"
            f" ; fit_error_A = {result.fit_errors_a[axis]:.6f}"
        )
    rx, ry, rz = result.residual_g
    lines.append(f"residual_G = ({rx:+.6f}, {ry:+.6f}, {rz:+.6f})")
    lines.append(f"residual_abs_G = {np.abs(result.residual_g).max():.6f} (max axis)")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# field-dependence sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BsweepPoint:
    """Aggregated line extrema at one field value, plus the full line lists
    (frequency, weight) merged over orientations."""

    b_g: float
    f_st1_low: float
    f_st1_high: float
    f_st0_low: float
    f_st0_high: float
    st1_lines: tuple
    st0_lines: tuple


def bsweep(spec, b_values_g, direction, mode="perturbative"):
    """Transition frequencies versus field magnitude along ``direction``.

    ``direction`` must be a unit vector.  Along the surface normal of a
    (001) sample all four defect orientations project equally
    (cos theta = 1/sqrt(3)), so their lines coincide.
    """
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    points = []
    for b in np.asarray(b_values_g, dtype=float):
        field = FieldVector(*(b * direction))
        st1, st0 = [], []
        for lines in transitions_vs_field(field, spec, mode=mode):
            st1 += [(f, w * lines.weight) for f, w in lines.st1]
            st0 += [(f, w * lines.weight) for f, w in lines.st0]
        f1 = [f for f, _ in st1]
        f0 = [f for f, _ in st0]
        points.append(BsweepPoint(
            b_g=float(b),
            f_st1_low=min(f1), f_st1_high=max(f1),
            f_st0_low=min(f0), f_st0_high=max(f0),
            st1_lines=tuple(st1), st0_lines=tuple(st0),
        ))
    return points


def write_bsweep_csv(points, path):
    """CSV columns: B_Gauss, f_ST1_low, f_ST1_high, f_ST0_low, f_ST0_high."""
    with open(path, "w", newline="\n") as fh:
        fh.write("B_Gauss,f_ST1_low,f_ST1_high,f_ST0_low,f_ST0_high\n")
        for p in points:
            row = (p.b_g, p.f_st1_low, p.f_st1_high, p.f_st0_low, p.f_st0_high)
            fh.write(",".join(f"{x:.12g}" for x in row) + "\n")
