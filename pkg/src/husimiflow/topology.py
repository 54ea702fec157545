"""Stagnation points of the current: detection, classification, winding.

Near a stagnation point the current linearizes through the 2x2 gradient
matrix

    G = [[dJ/dz, dJ/dzbar], [dJbar/dz, dJbar/dzbar]],

whose bottom row is the elementwise conjugate of the top row reversed, so
the trace is real.  Eigenvalue structure maps to the local flow type:
real opposite-sign -> saddle, real same-sign -> node, complex pair with
nonzero real part -> spiral, purely imaginary pair -> vortex.

The winding index counts full rotations of J around a clockwise loop;
one counterclockwise rotation of J contributes -1.  Saddles carry index
-1, all other nondegenerate types +1, and the two determinations
(eigenvalue signs vs the independent loop integral) are cross-checked on
every detected point: disagreements are reported as anomalies, never
reconciled silently.

Zeros of the Husimi function are "trivial" stagnation points (the
analytic factor of the amplitude vanishes); remaining zeros of J are
"non-trivial".  Each -1/+1 pair forms a topological dipole whose total
index is zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import ndimage

from .current import CurrentField
from .errors import ConvergenceError
from .husimi import HusimiField, find_zeros
from .phase_space import PhaseSpaceConfig

DEGENERACY_TOL = 1e-8       # eigenvalue / imaginary-part discrimination, * ||G||
Q_SEARCH_FLOOR = 1e-12      # non-trivial search restricted to Q > floor * max Q
WINDING_RADIUS_CELLS = 2.0
WINDING_SAMPLES = 64


@dataclass
class Classification:
    label: str                       # saddle / attractive-node / ... / degenerate
    eigenvalues: tuple               # (lambda_plus, lambda_minus)
    trace_defect: float | None = None  # |tr G + dQ/dt| when context given

    @property
    def expected_index(self) -> int | None:
        if self.label == "saddle":
            return -1
        if self.label == "degenerate":
            return None
        return 1


@dataclass
class StagnationPoint:
    z: complex
    x: float
    p: float
    kind: str                        # trivial | nontrivial
    classification: str
    eigenvalues: tuple
    index: int | None
    gradient: np.ndarray
    anomaly: bool = False
    partner_id: int | None = None


@dataclass
class Dipole:
    saddle: StagnationPoint
    partner: StagnationPoint
    separation: float                # |dz| in dimensionless units

    def total_index(self) -> int:
        return (self.saddle.index or 0) + (self.partner.index or 0)


@dataclass
class StagnationReport:
    points: list
    anomalies: list = dataclass_field(default_factory=list)
    nonconverged: list = dataclass_field(default_factory=list)
    unstable_zeros: list = dataclass_field(default_factory=list)

    def saddles(self):
        return [p for p in self.points if p.classification == "saddle"]

    def by_index(self, index: int):
        return [p for p in self.points if p.index == index]


# -- gradient and classification -------------------------------------------


def gradient_matrix(sampler, z0: complex, h: float = 1e-2,
                    adapt_tol: float = 1e-4, max_shrink: int = 3) -> np.ndarray:
    """Richardson-extrapolated central differences of J around z0.

    Returns [[dJ/dz, dJ/dzbar], [conj(dJ/dzbar), conj(dJ/dz)]].  Two
    Richardson levels must agree to adapt_tol relative; h is halved up to
    max_shrink times before giving up.
    """
    def wirtinger_pair(step: float):
        def central(direction: complex):
            return (sampler(z0 + direction * step)
                    - sampler(z0 - direction * step)) / (2.0 * step)
        du = central(1.0)
        dv = central(1.0j)
        return 0.5 * (du - 1.0j * dv), 0.5 * (du + 1.0j * dv)

    for _ in range(max_shrink + 1):
        c1 = wirtinger_pair(h)
        c2 = wirtinger_pair(0.5 * h)
        c4 = wirtinger_pair(0.25 * h)
        rich_a = ((4.0 * c2[0] - c1[0]) / 3.0, (4.0 * c2[1] - c1[1]) / 3.0)
        rich_b = ((4.0 * c4[0] - c2[0]) / 3.0, (4.0 * c4[1] - c2[1]) / 3.0)
        scale = max(abs(rich_b[0]), abs(rich_b[1]), 1e-300)
        err = max(abs(rich_a[0] - rich_b[0]), abs(rich_a[1] - rich_b[1]))
        if err <= adapt_tol * scale:
            dz, dzb = rich_b
            return np.array([[dz, dzb], [np.conj(dzb), np.conj(dz)]])
        h *= 0.5
    raise ConvergenceError(
        f"gradient step adaptation failed at z0={z0:.6g} (residual {err:.3e})")


def classify(gradient: np.ndarray, dqdt: float | None = None) -> Classification:
    """Eigenvalues of G and the flow type they imply.

    Real/imaginary discrimination happens at DEGENERACY_TOL * ||G||; an
    eigenvalue gap below the same threshold is flagged degenerate rather
    than classified.  When dqdt is supplied the trace identity
    tr G = -dQ/dt is reported as a defect for diagnostics.
    """
    gradient = np.asarray(gradient, dtype=complex)
    lam = np.linalg.eigvals(gradient)
    lam = sorted(lam, key=lambda w: (w.real, w.imag), reverse=True)
    lam_p, lam_m = lam
    gnorm = float(np.linalg.norm(gradient))
    tol = DEGENERACY_TOL * max(gnorm, 1e-300)
    defect = None if dqdt is None else abs((lam_p + lam_m).real + dqdt)

    if abs(lam_p - lam_m) < tol:
        return Classification("degenerate", (lam_p, lam_m), defect)
    if abs(lam_p.imag) < tol and abs(lam_m.imag) < tol:
        a, b = lam_p.real, lam_m.real
        if a * b < 0.0:
            return Classification("saddle", (lam_p, lam_m), defect)
        label = "attractive-node" if a < 0.0 else "repulsive-node"
        return Classification(label, (lam_p, lam_m), defect)
    if abs(lam_p.real) < tol and abs(lam_m.real) < tol:
        return Classification("vortex", (lam_p, lam_m), defect)
    label = "attractive-spiral" if lam_p.real < 0.0 else "repulsive-spiral"
    return Classification(label, (lam_p, lam_m), defect)


def winding_index(sampler, z0: complex, radius: float,
                  n_samples: int = WINDING_SAMPLES, floor: float = 0.0,
                  max_shrink: int = 2) -> int:
    """Index of the flow: rotations of J along a clockwise loop around z0.

    The angle increments are unwrapped sample to sample (each must stay
    below pi; the sample count doubles as needed).  One counterclockwise
    rotation of J contributes -1.  If |J| on the loop falls below `floor`
    the loop radius shrinks and the integral is retried.
    """
    for attempt in range(max_shrink + 1):
        r = radius * 0.5**attempt
        n = n_samples
        while n <= 4096:
            angles = -2.0 * np.pi * np.arange(n) / n  # clockwise traversal
            points = z0 + r * np.exp(1j * angles)
            values = np.array([sampler(w) for w in points])
            mags = np.abs(values)
            if mags.min() <= floor or mags.min() == 0.0:
                break  # loop touches another stagnation point: shrink
            args = np.angle(values)
            deltas = np.diff(np.concatenate([args, args[:1]]))
            deltas = (deltas + np.pi) % (2.0 * np.pi) - np.pi
            if np.max(np.abs(deltas)) < 0.9 * np.pi:
                total = float(deltas.sum())
                index = -total / (2.0 * np.pi)
                nearest = round(index)
                if abs(index - nearest) > 0.05:
                    raise ConvergenceError(
                        f"winding integral not integral at z0={z0:.6g}: {index:.3f}")
                return int(nearest)
            n *= 2
    raise ConvergenceError(f"winding loop failed around z0={z0:.6g}")


# -- detection ---------------------------------------------------------------


def _newton_current(sampler, z0: complex, tol_abs: float, h: float,
                    max_iter: int = 50):
    """2D Newton on (Re J, Im J) with a central-difference Jacobian.

    Iterates until the step stagnates (quadratic-convergence plateau)
    rather than stopping at first tolerance contact, so candidates inside
    the basin of a deep zero slide all the way into it.
    """
    z = z0
    val = sampler(z)
    for _ in range(max_iter):
        ju = (sampler(z + h) - sampler(z - h)) / (2.0 * h)
        jv = (sampler(z + 1j * h) - sampler(z - 1j * h)) / (2.0 * h)
        jac = np.array([[ju.real, jv.real], [ju.imag, jv.imag]])
        try:
            step = np.linalg.solve(jac, [val.real, val.imag])
        except np.linalg.LinAlgError:
            return z, abs(val), False
        dz = step[0] + 1j * step[1]
        if abs(dz) > 1e4 * h:
            return z, abs(val), False
        z_new = z - dz
        val_new = sampler(z_new)
        if abs(val_new) <= abs(val):
            z, val = z_new, val_new
        else:
            break
        if abs(dz) < 1e-7 * h:
            break
    return z, abs(val), abs(val) <= tol_abs


def find_stagnation_points(cur: CurrentField, fld: HusimiField,
                           q_floor: float = Q_SEARCH_FLOOR,
                           newton_tol: float = 1e-10,
                           dqdt: np.ndarray | None = None) -> StagnationReport:
    """All stagnation points of the current field, classified and indexed.

    Trivial points are seeded from the stable Husimi zeros; non-trivial
    candidates are grid cells where |J| has a local minimum while Q stays
    above q_floor * max Q, refined by 2D Newton on (Re J, Im J).  Every
    returned point carries its gradient matrix, classification and
    independently computed winding index; points whose classification and
    index disagree land in report.anomalies.

    dqdt, when given, must be the dQ/dt array on the window grid; the
    nearest node value is passed to classify() for the trace diagnostic.
    """
    if cur.window is not fld.window and (
            cur.window.nx != fld.window.nx or cur.window.np_ != fld.window.np_
            or not np.allclose(cur.window.x_nodes, fld.window.x_nodes)
            or not np.allclose(cur.window.p_nodes, fld.window.p_nodes)):
        raise ValueError("current and Husimi fields must share a window")
    cfg = cur.cfg
    window = cur.window
    sampler = cur.sampler()
    du, dv = window.cell_z(cfg)
    cell = math.hypot(du, dv)
    jmag = np.abs(cur.j)
    jmax = float(jmag.max())
    tol_abs = newton_tol * jmax
    qmax = float(fld.q.max())

    zero_result = find_zeros(fld, stability_check=True)
    trivial_seeds = [w for w in zero_result.zeros if w.stable]
    unstable = [w for w in zero_result.zeros if not w.stable]

    def grid_dqdt(z: complex) -> float | None:
        if dqdt is None:
            return None
        i = int(np.argmin(np.abs(window.x_nodes - 2.0 * cfg.sigma_x * z.real)))
        k = int(np.argmin(np.abs(window.p_nodes - 2.0 * cfg.sigma_p * z.imag)))
        return float(dqdt[k, i])

    # pass 1: collect refined locations.  Trivial points come from the
    # Husimi zeros; non-trivial ones are zeros of the secondary factor
    # flow_factor (J = amplitude * flow_factor), searched where Q is
    # meaningful.  Using the secondary factor keeps tight dipole partners
    # visible inside the |J| depression that surrounds each Husimi zero.
    candidates: list[tuple[complex, str]] = [(w.z, "trivial") for w in trivial_seeds]
    nonconverged: list = []
    if cur.flow_factor is None:
        raise ValueError("current field carries no flow_factor")
    flow_sampler = cur.flow_sampler()
    fmag = np.abs(cur.flow_factor)
    q_mask = fld.q > q_floor * qmax
    fmax = float(fmag[q_mask].max()) if q_mask.any() else float(fmag.max())
    ftol_abs = newton_tol * fmax
    is_min = (fmag <= ndimage.minimum_filter(fmag, size=3)) & q_mask
    is_min[:1, :] = is_min[-1:, :] = False
    is_min[:, :1] = is_min[:, -1:] = False
    zmesh = window.z_mesh(cfg)
    for r, c in zip(*np.nonzero(is_min)):
        z_guess = complex(zmesh[r, c])
        z_ref, resid, ok = _newton_current(flow_sampler, z_guess, ftol_abs,
                                           0.1 * cell)
        if not ok or not window.contains_z(z_ref, cfg, pad_cells=1.0):
            nonconverged.append((z_ref, resid))
            continue
        if any(abs(z_ref - zc) < 0.5 * cell for zc, _ in candidates):
            continue
        # a vanishing analytic factor means this is really a Husimi zero
        s0 = fld.evaluator.stack_at(z_ref, 0)[0]
        kind = "trivial" if abs(s0) < 1e-6 * math.sqrt(qmax) else "nontrivial"
        candidates.append((z_ref, kind))

    # pass 2: classify and index with loops sized to the nearest neighbor
    points: list[StagnationPoint] = []
    anomalies: list[StagnationPoint] = []
    for z, kind in candidates:
        others = [zc for zc, _ in candidates if zc is not z]
        nearest = min((abs(z - zc) for zc in others), default=math.inf)
        radius = min(WINDING_RADIUS_CELLS * cell, 0.45 * nearest)
        radius = max(radius, 0.25 * cell)
        grad = gradient_matrix(sampler, z, h=min(0.25 * cell, 0.5 * radius))
        info = classify(grad, grid_dqdt(z))
        try:
            idx = winding_index(sampler, z, radius, floor=1e-14 * jmax)
        except ConvergenceError:
            idx = None
        x = 2.0 * cfg.sigma_x * z.real
        p = 2.0 * cfg.sigma_p * z.imag
        point = StagnationPoint(z, x, p, kind, info.label, info.eigenvalues,
                                idx, grad)
        expected = info.expected_index
        if expected is not None and idx is not None and idx != expected:
            point.anomaly = True
            anomalies.append(point)
        else:
            points.append(point)

    points.sort(key=lambda pt: (pt.x, pt.p))
    anomalies.sort(key=lambda pt: (pt.x, pt.p))
    return StagnationReport(points, anomalies, nonconverged, unstable)


# -- dipole pairing ----------------------------------------------------------


def pair_dipoles(points, max_sep: float):
    """Greedy nearest-neighbor matching of -1 points to +1 points.

    max_sep is a |dz| bound in dimensionless units.  Returns (dipoles,
    unpaired); the total index of dipoles plus unpaired points equals the
    total index of the input.
    """
    neg = [p for p in points if p.index == -1]
    pos = [p for p in points if p.index == 1]
    pairs = sorted(
        ((abs(a.z - b.z), ia, ib) for ia, a in enumerate(neg)
         for ib, b in enumerate(pos)),
        key=lambda t: t[0])
    used_a, used_b = set(), set()
    dipoles = []
    for sep, ia, ib in pairs:
        if sep > max_sep:
            break
        if ia in used_a or ib in used_b:
            continue
        used_a.add(ia)
        used_b.add(ib)
        neg[ia].partner_id = ib
        pos[ib].partner_id = ia
        dipoles.append(Dipole(neg[ia], pos[ib], sep))
    unpaired = [p for i, p in enumerate(neg) if i not in used_a]
    unpaired += [p for i, p in enumerate(pos) if i not in used_b]
    unpaired += [p for p in points if p.index not in (-1, 1)]
    return dipoles, unpaired


def enclosed_index_sum(sampler, points, center: complex, radius: float,
                       n_samples: int = 256) -> tuple[int, int]:
    """(loop winding, sum of member indices) for points inside the loop."""
    inside = [p for p in points if abs(p.z - center) < radius]
    total = sum(p.index or 0 for p in inside)
    loop = winding_index(sampler, center, radius, n_samples=n_samples)
    return loop, total


# -- export ------------------------------------------------------------------


def report_to_csv(report: StagnationReport, cfg: PhaseSpaceConfig, path,
                  time: float | None = None) -> None:
    with open(path, "w") as fh:
        fh.write("# husimiflow stagnation-report v1\n")
        fh.write(f"# config_hash = {cfg.config_hash()}\n")
        if time is not None:
            fh.write(f"# time = {time!r}\n")
        fh.write("# columns: x, p, kind, class, re_lp, im_lp, re_lm, im_lm,"
                 " index, partner_id, anomaly\n")
        for pt in report.points + report.anomalies:
            lp, lm = pt.eigenvalues
            idx = "" if pt.index is None else pt.index
            partner = "" if pt.partner_id is None else pt.partner_id
            fh.write(f"{pt.x!r},{pt.p!r},{pt.kind},{pt.classification},"
                     f"{lp.real!r},{lp.imag!r},{lm.real!r},{lm.imag!r},"
                     f"{idx},{partner},{int(pt.anomaly)}\n")
