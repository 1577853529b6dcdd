"""Exact pure-point transforms of weighted combs and the pairing verifier.

The transform of a comb built from a weight h on the internal space is a
pure-point measure on the dual direct space: one atom at the direct part of
every dual-lattice point, with amplitude density * h-check evaluated at the
internal part.  Enumeration is finite once the direct radius and (for a real
internal factor) an internal cutoff are fixed; everything left out is
accounted for by certified bounds from the counting geometry.

The pairing verifier checks <mu, g> = <mu-hat, g-check> for compactly
supported spline test functions: the left side is a finite exact sum, the
right side a peak sum plus certified truncation bounds.
"""

import numpy as np
from scipy.special import gamma as _gamma

from . import bounds
from .cps import dual_cps, enumerate_model_set
from .errors import InsufficientPeakCoverage, UnsupportedDimension
from .measures import AtomicMeasure, merge_atoms
from .profiles import BSpline1D, transform_weight

_TWO_PI_I = 2j * np.pi


def volume_ball(n, radius):
    return float(np.pi ** (n / 2.0) / _gamma(n / 2.0 + 1.0) * radius ** n)


class PeakList:
    """Atoms of a comb transform: positions, complex amplitudes, bookkeeping.

    Peaks with |amplitude| below amp_floor are omitted; the total mass that
    was dropped or never enumerated is tracked in discarded_mass_bound.
    """

    def __init__(self, ks, amps, k_max, amp_floor, discarded_mass_bound=0.0,
                 stars=None, provenance=None):
        ks = np.atleast_2d(np.asarray(ks, dtype=float))
        self.ks = ks
        self.amps = np.asarray(amps, dtype=complex).reshape(-1)
        self.k_max = float(k_max)
        self.amp_floor = float(amp_floor)
        self.discarded_mass_bound = float(discarded_mass_bound)
        self.stars = stars
        self.provenance = provenance or {}

    @property
    def count(self):
        return self.amps.size

    @property
    def dim(self):
        return self.ks.shape[1]

    def amplitude_at(self, k, gap=1e-9):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        hit = np.all(np.abs(self.ks - k) <= gap, axis=1)
        return complex(self.amps[hit].sum())

    def strongest(self, count):
        """Indices of the strongest peaks, by |amplitude| then position."""
        order = np.lexsort((np.arange(self.count), -np.abs(self.amps)))
        return order[:count]

    def intensities(self):
        return np.abs(self.amps) ** 2


def transform_comb(cps, weight, k_max, amp_floor=None, s_max=None,
                   budget=None):
    """Pure-point transform of the comb with internal weight ``weight``.

    Amplitude at a dual direct position k is density * h-check(k-star),
    summed over coincident direct positions.  For a real internal factor the
    enumeration is cut at |k-star| <= s_max (derived from amp_floor when not
    given); the certified mass of everything dropped is recorded.
    """
    tw = transform_weight(weight)
    dual = dual_cps(cps)
    geo = bounds.DualGeometry(dual)
    dens = cps.density

    if amp_floor is None:
        scale = abs(tw.integral) if abs(tw.integral) > 0 else 1.0
        amp_floor = 1e-12 * dens * scale
    if cps.m > 0 and s_max is None:
        if amp_floor <= 0:
            raise ValueError("need amp_floor > 0 or an explicit s_max")
        s = 1.0
        while dens * float(tw.envelope(np.array([s]))[0]) > amp_floor \
                and s < 1e8:
            s *= 1.5
        s_max = s

    k, kr, kz = dual.enumerate_points(k_max, s_max=s_max, budget=budget)
    if k.shape[0] == 0:
        return PeakList(np.empty((0, cps.n)), [], k_max, amp_floor,
                        provenance={"cps": cps, "weight": weight,
                                    "transformed_weight": tw,
                                    "s_max": s_max})
    amps = dens * tw.value(kr if cps.m else None, kz if cps.z else None)

    # merge amplitudes at coincident direct positions, carrying one
    # representative internal star for each surviving peak
    merged_k, merged_amps, rep = merge_atoms(k, amps, return_index=True)
    stars = (kr[rep] if cps.m else None, kz[rep] if cps.z else None)

    discarded = 0.0
    if amp_floor > 0:
        weak = np.abs(merged_amps) < amp_floor
        discarded += float(np.abs(merged_amps[weak]).sum())
        merged_k, merged_amps = merged_k[~weak], merged_amps[~weak]
        stars = (stars[0][~weak] if stars[0] is not None else None,
                 stars[1][~weak] if stars[1] is not None else None)
    if cps.m > 0:
        discarded += bounds.discarded_sigma_mass(
            geo, dens, tw.envelope, tw.c_env, tw.p, k_max, s_max)

    return PeakList(merged_k, merged_amps, k_max, amp_floor, discarded,
                    stars=stars,
                    provenance={"cps": cps, "weight": weight,
                                "transformed_weight": tw, "s_max": s_max})


def comb_from_weight(cps, weight, radius, budget=None):
    """Atomic comb: model-set points of {weight != 0} with weight values.

    Stars are kept in the measure metadata for later pointwise access.
    """
    from .cps import Window

    supports = weight.support_real()
    boxes = None
    if supports:
        lo = [s[0] for s in supports]
        hi = [s[1] for s in supports]
        if not all(np.isfinite(lo)) or not all(np.isfinite(hi)):
            raise ValueError("comb weights need a compactly supported profile")
        boxes = [(lo, hi)]
    discrete = list(weight.discrete.values.keys()) if weight.discrete else None
    window = Window(boxes, discrete)
    x, sr, sz = enumerate_model_set(cps, window, radius, budget=budget)
    wts = weight.eval_internal(sr if cps.m else None, sz if cps.z else None)
    plateau = None
    if "window" in weight.meta and "plateau_pad" in weight.meta:
        # the bump equals 1 on the dilated window by construction; snap the
        # evaluated values there to kill inclusion-exclusion roundoff
        base = weight.meta["window"]
        plateau = np.ones(x.shape[0], dtype=bool)
        if cps.m:
            plateau &= base.dilate(weight.meta["plateau_pad"]) \
                .contains_real(sr)
        if cps.z:
            plateau &= base.contains_discrete(sz)
        wts = np.where(plateau, 1.0 + 0.0j, wts)
    keep = np.abs(wts) > 1e-15
    x, wts = x[keep], wts[keep]
    meta = {"cps": cps, "weight": weight}
    distinct = np.unique(np.round(x, 9), axis=0).shape[0] == x.shape[0]
    if distinct:
        # positions stay in enumeration order through the constructor, so
        # per-atom side arrays remain aligned
        meta["stars_real"] = sr[keep]
        meta["stars_z"] = sz[keep]
        if plateau is not None:
            meta["plateau_mask"] = plateau[keep]
    return AtomicMeasure(x, wts, radius, meta=meta, prune_zeros=False)


# ---------------------------------------------------------------------------
# Test functions for the pairing check


class BSplineTestFunction:
    """Tensor product of per-axis box-spline factors on the direct space."""

    def __init__(self, axes, label=None):
        self.axes = [ax if isinstance(ax, BSpline1D) else
                     BSpline1D([(1.0, [tuple(b) for b in ax])])
                     for ax in axes]
        self.transforms = [ax.transform() for ax in self.axes]
        self.label = label or f"bspline{len(self.axes)}d"

    @classmethod
    def centered(cls, n_boxes, width, center=0.0, scale=1.0, dim=1,
                 label=None):
        """n_boxes-fold convolution of equal boxes, normalized to integral
        ``scale``, centered per axis."""
        w = width / n_boxes
        boxes = [(-w / 2.0, w / 2.0)] * n_boxes
        coeff = scale / w ** n_boxes
        axis = BSpline1D([(coeff, [(a + center / n_boxes,
                                    b + center / n_boxes)
                                   for a, b in boxes])])
        return cls([axis] * dim, label=label)

    @property
    def dim(self):
        return len(self.axes)

    def eval(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(points.shape[0], dtype=complex)
        for d, ax in enumerate(self.axes):
            out = out * ax(points[:, d])
        return out

    def transform_eval(self, ks):
        ks = np.atleast_2d(np.asarray(ks, dtype=float))
        out = np.ones(ks.shape[0], dtype=complex)
        for d, t in enumerate(self.transforms):
            out = out * t.value(ks[:, d])
        return out

    def transform_error(self, ks):
        return np.zeros(np.atleast_2d(ks).shape[0])

    def envelope(self, s):
        s = np.asarray(s, dtype=float)
        if self.dim == 1:
            return self.transforms[0].envelope(s)
        m0 = [float(t.envelope(np.zeros(1))[0]) for t in self.transforms]
        best = np.zeros(s.shape)
        for i, t in enumerate(self.transforms):
            others = np.prod([m0[j] for j in range(self.dim) if j != i])
            best = np.maximum(best, t.envelope(s / np.sqrt(self.dim)) * others)
        return best

    @property
    def c_env(self):
        m0 = [float(t.envelope(np.zeros(1))[0]) for t in self.transforms]
        return max(t.c_env * np.prod([m0[j] for j in range(self.dim)
                                      if j != i]) * self.dim ** (t.p / 2.0)
                   for i, t in enumerate(self.transforms))

    @property
    def p(self):
        return min(t.p for t in self.transforms)

    def support_radius(self):
        r2 = 0.0
        for ax in self.axes:
            lo, hi = ax.support()
            r2 += max(abs(lo), abs(hi)) ** 2
        return float(np.sqrt(r2))

    def scaled(self, factor):
        return BSplineTestFunction([factor * ax for ax in [self.axes[0]]] +
                                   self.axes[1:],
                                   label=f"{self.label}*{factor}")

    def tv_bound(self):
        return float(np.prod([ax.abs_integral_bound() for ax in self.axes]))


class ModulatedTestFunction:
    """g times a bounded analytic factor (e.g. the transform of a finite
    measure); the transform is evaluated by Gauss-Legendre quadrature with a
    node-doubling error estimate.  One-dimensional direct space only."""

    def __init__(self, g, factor, factor_tv, factor_shift, nodes=384,
                 label=None):
        if g.dim != 1:
            raise UnsupportedDimension("modulated test functions are 1D")
        self.g = g
        self.factor = factor
        self.factor_tv = float(factor_tv)
        self.factor_shift = float(factor_shift)
        self.nodes = nodes
        self.label = label or f"{g.label}*factor"
        lo, hi = g.axes[0].support()
        self._lo, self._hi = lo, hi
        self._rule = {}

    @property
    def dim(self):
        return 1

    def eval(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return self.g.eval(points) * self.factor(points)

    def _quad(self, ks, n):
        if n not in self._rule:
            x, w = np.polynomial.legendre.leggauss(n)
            x = 0.5 * (self._hi - self._lo) * x + 0.5 * (self._hi + self._lo)
            w = 0.5 * (self._hi - self._lo) * w
            f = self.g.eval(x[:, None]) * self.factor(x[:, None])
            self._rule[n] = (x, w * f)
        x, wf = self._rule[n]
        ks = np.atleast_2d(np.asarray(ks, dtype=float))[:, 0]
        out = np.empty(ks.size, dtype=complex)
        block = max(1, int(4e6 // max(x.size, 1)))
        for i in range(0, ks.size, block):
            phase = np.exp(_TWO_PI_I * np.outer(ks[i:i + block], x))
            out[i:i + block] = phase @ wf
        return out

    def transform_eval(self, ks):
        return self._quad(ks, self.nodes)

    def transform_error(self, ks):
        coarse = self._quad(ks, self.nodes // 2)
        fine = self._quad(ks, self.nodes)
        return np.abs(fine - coarse)

    def envelope(self, s):
        s = np.asarray(s, dtype=float)
        shifted = np.maximum(s - self.factor_shift, 0.0)
        return self.factor_tv * self.g.envelope(shifted)

    @property
    def c_env(self):
        return self.factor_tv * self.g.c_env * \
            (1.0 + self.factor_shift) ** self.g.p

    @property
    def p(self):
        return self.g.p

    def support_radius(self):
        return self.g.support_radius()

    def tv_bound(self):
        return self.g.tv_bound() * self.factor_tv


class PairingReport:
    """Two-sided evaluation of <mu, g> = <mu-hat, g-check> with budgets."""

    def __init__(self, test_id, lhs, rhs, lhs_error, rhs_error, tolerance):
        self.test_id = test_id
        self.lhs = lhs
        self.rhs = rhs
        self.lhs_error = lhs_error
        self.rhs_error = rhs_error
        self.tolerance = tolerance

    @property
    def defect(self):
        return abs(self.lhs - self.rhs)

    @property
    def passed(self):
        return self.defect <= self.tolerance + self.lhs_error + self.rhs_error

    def as_dict(self):
        return {"test_id": self.test_id,
                "lhs": [self.lhs.real, self.lhs.imag],
                "rhs": [self.rhs.real, self.rhs.imag],
                "defect": self.defect,
                "lhs_error": self.lhs_error,
                "rhs_error": self.rhs_error,
                "tolerance": self.tolerance,
                "passed": bool(self.passed)}


def verify_pairing(mu, peaks, g, tolerance, lhs_error=0.0):
    """Check the transform pairing of an atomic comb against its peak list.

    mu must be complete out to the support of g (plus margin); peaks must be
    enumerated widely enough that the certified tail bound stays below
    tolerance / 2, otherwise InsufficientPeakCoverage is raised.
    """
    if g.support_radius() > mu.truncation_radius + 1e-9:
        raise ValueError("test function support exceeds the comb patch")
    prov = peaks.provenance
    if "transformed_weight" not in prov:
        raise ValueError("peak list lacks provenance for certified bounds")
    tw = prov["transformed_weight"]
    cps = prov["cps"]
    geo = bounds.DualGeometry(dual_cps(cps))
    dens = cps.density

    tail = bounds.pairing_direct_tail(
        geo, dens, tw.envelope, tw.c_env, tw.p,
        g.envelope, g.c_env, g.p, peaks.k_max)
    s_max = prov.get("s_max")
    if cps.m > 0 and s_max is not None:
        tail += bounds.pairing_sigma_tail(
            geo, dens, tw.envelope, tw.c_env, tw.p,
            g.envelope, g.c_env, g.p, s_max)
    if peaks.amp_floor > 0 and peaks.discarded_mass_bound > 0:
        tail += peaks.discarded_mass_bound * g.tv_bound()
    if tail > tolerance / 2.0:
        raise InsufficientPeakCoverage(
            f"certified tail bound {tail:.3e} exceeds tolerance/2 "
            f"= {tolerance / 2.0:.3e}; enlarge k_max / s_max")

    lhs = complex(np.sum(mu.weights * g.eval(mu.positions))) if mu.count \
        else 0.0 + 0.0j
    vals = g.transform_eval(peaks.ks)
    rhs = complex(np.sum(peaks.amps * vals))
    quad_err = float(np.sum(np.abs(peaks.amps) * g.transform_error(peaks.ks)))
    label = getattr(g, "label", "g")
    return PairingReport(label, lhs, rhs, lhs_error, tail + quad_err,
                         tolerance)


def plan_comb_enumeration(cps, weight, g_envelopes, tolerance, k_start=4.0,
                          s_start=4.0):
    """Smallest (k_max, s_max) with certified pairing tails below tol/4 each.

    g_envelopes: list of (envelope callable, c_env, p) for the test corpus;
    the plan covers the worst of them.
    """
    tw = transform_weight(weight)
    geo = bounds.DualGeometry(dual_cps(cps))
    dens = cps.density
    target = tolerance / 4.0

    def solve(tail_fn, start, cap):
        hi = start
        while hi < cap and tail_fn(hi) >= target:
            hi *= 1.3
        lo = hi / 1.3
        for _ in range(8):
            mid = 0.5 * (lo + hi)
            if tail_fn(mid) < target:
                hi = mid
            else:
                lo = mid
        return hi

    k_max = solve(lambda k: max(bounds.pairing_direct_tail(
        geo, dens, tw.envelope, tw.c_env, tw.p, env, c, p, k)
        for env, c, p in g_envelopes), k_start, 1e7)
    s_max = None
    if cps.m > 0:
        s_max = solve(lambda s: max(bounds.pairing_sigma_tail(
            geo, dens, tw.envelope, tw.c_env, tw.p, env, c, p, s)
            for env, c, p in g_envelopes), s_start, 1e8)
    return k_max, s_max


# ---------------------------------------------------------------------------
# Direct-space cross checks


def periodogram(patch, radius, k_grid):
    """I_R(k) = |sum over |x| <= R of w(x) e^{-2 pi i k x}|^2 / vol(B_R)."""
    k_grid = np.atleast_2d(np.asarray(k_grid, dtype=float))
    if patch.count == 0:
        return np.zeros(k_grid.shape[0])
    keep = np.linalg.norm(patch.positions, axis=1) <= radius + 1e-12
    pos = patch.positions[keep]
    wts = patch.weights[keep]
    sums = np.exp(-_TWO_PI_I * k_grid @ pos.T) @ wts
    return np.abs(sums) ** 2 / volume_ball(patch.dim, radius)


def autocorrelation_patch(patch, radius):
    """Finite-patch autocorrelation over the centered ball of the radius.

    gamma_R = sum over pairs w(x) conj(w(y)) delta_{x-y} / vol(B_R); atoms
    merged, positive definite by construction.
    """
    keep = np.linalg.norm(patch.positions, axis=1) <= radius + 1e-12
    pos = patch.positions[keep]
    wts = patch.weights[keep]
    if pos.shape[0] == 0:
        return AtomicMeasure(np.empty((0, patch.dim)), [], 2 * radius)
    if pos.shape[0] > 4000:
        raise ValueError("patch too large for the pairwise autocorrelation")
    diffs = (pos[:, None, :] - pos[None, :, :]).reshape(-1, patch.dim)
    prods = (wts[:, None] * np.conj(wts)[None, :]).reshape(-1)
    vol = volume_ball(patch.dim, radius)
    return AtomicMeasure(diffs, prods / vol, 2 * radius,
                         meta={"radius": radius, "source": patch.meta},
                         prune_zeros=False)
