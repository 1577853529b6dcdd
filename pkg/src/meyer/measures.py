"""Translation-bounded atomic measures, K-norms and finite mixed measures.

An ``AtomicMeasure`` is a finitely truncated weighted Dirac comb: positions
inside a ball, complex weights, and the truncation radius inside which the
atom list is complete.  The sliding-window norm ``|mu|(t + K)`` over closed
boxes is computed exactly by anchoring window edges at atom coordinates.

A ``FiniteMixedMeasure`` carries an explicit Lebesgue decomposition: finitely
many atoms (pp), a compactly supported spline density (ac) and Cantor-type
iterated-function-system components (sc), each with a closed-form transform.
"""

from math import factorial

import numpy as np

from .errors import WindowTooLarge
from .profiles import _box_conv_antiderivative, _box_conv_values

MERGE_GAP = 1e-9
_TWO_PI_I = 2j * np.pi


class Box:
    """Closed axis-aligned box in R^n."""

    def __init__(self, lo, hi):
        self.lo = np.atleast_1d(np.asarray(lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ValueError("box needs lo < hi componentwise")

    @property
    def dim(self):
        return self.lo.size

    @property
    def lengths(self):
        return self.hi - self.lo

    @property
    def diameter(self):
        return float(np.linalg.norm(self.lengths))

    def translate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return Box(self.lo + t, self.hi + t)

    def contains(self, points, slack=1e-12):
        points = np.atleast_2d(points)
        return np.all((points >= self.lo - slack) &
                      (points <= self.hi + slack), axis=1)

    def corner_radius(self):
        return float(np.linalg.norm(np.maximum(np.abs(self.lo),
                                               np.abs(self.hi))))

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


def merge_atoms(positions, weights, gap=MERGE_GAP, return_index=False):
    """Sum weights at positions closer than gap (grid-based for n >= 2).

    With return_index=True, also returns the index into the input arrays of
    one representative per merged atom.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    weights = np.asarray(weights, dtype=complex)
    if positions.shape[0] == 0:
        if return_index:
            return positions, weights, np.empty(0, dtype=np.int64)
        return positions, weights
    if positions.shape[1] == 1:
        order = np.argsort(positions[:, 0], kind="stable")
        pos = positions[order, 0]
        wts = weights[order]
        groups = np.concatenate([[0], np.cumsum(np.diff(pos) > gap)])
        count = groups[-1] + 1
        merged_wts = np.zeros(count, dtype=complex)
        np.add.at(merged_wts, groups, wts)
        first = np.searchsorted(groups, np.arange(count), side="left")
        merged_pos = pos[first][:, None]
        if return_index:
            return merged_pos, merged_wts, order[first]
        return merged_pos, merged_wts
    keys = np.round(positions / gap).astype(np.int64)
    _, idx, inv = np.unique(keys, axis=0, return_index=True,
                            return_inverse=True)
    merged_wts = np.zeros(idx.size, dtype=complex)
    np.add.at(merged_wts, inv, weights)
    merged_pos = positions[idx]
    order = np.lexsort(merged_pos.T[::-1])
    if return_index:
        return merged_pos[order], merged_wts[order], idx[order]
    return merged_pos[order], merged_wts[order]


class AtomicMeasure:
    """Weighted Dirac comb, complete inside |x| <= truncation_radius."""

    def __init__(self, positions, weights, truncation_radius, meta=None,
                 prune_zeros=True):
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if positions.size == 0:
            positions = positions.reshape(0, max(positions.shape[-1], 1))
        weights = np.asarray(weights, dtype=complex).reshape(-1)
        if positions.shape[0] != weights.size:
            raise ValueError("positions and weights must align")
        positions, weights = merge_atoms(positions, weights)
        if prune_zeros and weights.size:
            keep = np.abs(weights) > 0.0
            positions, weights = positions[keep], weights[keep]
        if positions.shape[0]:
            radii = np.linalg.norm(positions, axis=1)
            if radii.max() > truncation_radius + 1e-9:
                raise ValueError("atom outside the truncation radius")
        self.positions = positions
        self.weights = weights
        self.truncation_radius = float(truncation_radius)
        self.meta = dict(meta or {})

    @property
    def dim(self):
        return self.positions.shape[1]

    @property
    def count(self):
        return self.positions.shape[0]

    def translate(self, t):
        """Shift atoms by t; completeness shrinks to trunc - |t| and atoms
        falling outside the new certified zone are dropped."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        trunc = self.truncation_radius - float(np.linalg.norm(t))
        moved = self.positions + t
        keep = np.linalg.norm(moved, axis=1) <= trunc + 1e-12
        return AtomicMeasure(moved[keep], self.weights[keep], trunc,
                             self.meta)

    def restrict(self, radius):
        keep = np.linalg.norm(self.positions, axis=1) <= radius + 1e-12
        return AtomicMeasure(self.positions[keep], self.weights[keep],
                             min(radius, self.truncation_radius), self.meta)

    def scale_weights(self, factor):
        return AtomicMeasure(self.positions, factor * self.weights,
                             self.truncation_radius, self.meta)

    def __add__(self, other):
        trunc = min(self.truncation_radius, other.truncation_radius)
        pos = np.vstack([self.positions, other.positions])
        wts = np.concatenate([self.weights, other.weights])
        keep = np.linalg.norm(pos, axis=1) <= trunc + 1e-12
        return AtomicMeasure(pos[keep], wts[keep], trunc, prune_zeros=False)

    def __sub__(self, other):
        return self + other.scale_weights(-1.0)

    def weight_at(self, point, gap=MERGE_GAP):
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if self.count == 0:
            return 0.0 + 0.0j
        hit = np.all(np.abs(self.positions - point) <= gap, axis=1)
        return complex(self.weights[hit].sum())

    def total_abs(self):
        return float(np.abs(self.weights).sum())


def k_norm(measure, box, return_t=False):
    """Exact sup over translates t of |mu|(t + K) in the safe zone.

    Anchors the lower edge of the closed window at atom coordinates; for a
    closed box the supremum is attained at such an anchor.  Windows must fit
    inside the truncated region.
    """
    if not isinstance(box, Box):
        box = Box(*box)
    trunc = measure.truncation_radius
    if box.diameter >= trunc:
        raise WindowTooLarge(
            f"diam(K) = {box.diameter:.3g} >= truncation radius {trunc:.3g}")
    if measure.count == 0:
        return (0.0, np.zeros(box.dim)) if return_t else 0.0
    if box.dim != measure.dim:
        raise ValueError("box dimension must match the measure")
    value, anchor = _sweep(measure.positions, np.abs(measure.weights),
                           box.lengths, trunc)
    t = anchor - box.lo
    return (value, t) if return_t else value


def _sweep(positions, mags, lengths, trunc):
    n = positions.shape[1]
    if n == 1:
        pos = positions[:, 0]
        order = np.argsort(pos, kind="stable")
        pos, mags = pos[order], mags[order]
        L = lengths[0]
        ok = (pos >= -trunc) & (pos + L <= trunc + 1e-12)
        if not ok.any():
            return 0.0, positions[0]
        csum = np.concatenate([[0.0], np.cumsum(mags)])
        right = np.searchsorted(pos, pos + L + 1e-12, side="right")
        sums = csum[right] - csum[np.arange(pos.size)]
        sums[~ok] = -np.inf
        best = int(np.argmax(sums))
        return float(sums[best]), np.array([pos[best]])
    # Recursive anchored sweep: anchor the first axis at atom coordinates,
    # then sweep the remaining axes inside the slab.
    best_val, best_anchor = 0.0, positions[0].copy()
    first = np.unique(np.round(positions[:, 0], 12))
    L0 = lengths[0]
    for a in first:
        corners0 = max(abs(a), abs(a + L0))
        if corners0 > trunc:
            continue
        slab = (positions[:, 0] >= a - 1e-12) & \
               (positions[:, 0] <= a + L0 + 1e-12)
        if not slab.any():
            continue
        sub_trunc = np.sqrt(max(trunc ** 2 - corners0 ** 2, 1e-12))
        val, anchor = _sweep(positions[slab][:, 1:], mags[slab],
                             lengths[1:], sub_trunc)
        if val > best_val:
            best_val = val
            best_anchor = np.concatenate([[a], anchor])
    return best_val, best_anchor


def norm_distance(mu, nu, box):
    """||mu - nu||_K with atoms at coincident positions merged first."""
    return k_norm(mu - nu, box)


# ---------------------------------------------------------------------------
# Finite mixed measures


class SplineDensity:
    """Finite B-spline mixture as a density on R^n.

    terms : list of (coeff, axes) with axes a list (length n) of box lists;
    each term is coeff * prod_d conv-of-boxes(x_d).
    """

    def __init__(self, terms):
        self.terms = [(complex(c), [[(float(a), float(b)) for a, b in boxes]
                                    for boxes in axes])
                      for c, axes in terms]
        if not self.terms:
            raise ValueError("need at least one term")
        self.dim = len(self.terms[0][1])

    @classmethod
    def triangle(cls, half_width, center=0.0, mass=1.0):
        """Symmetric triangle on [center - hw, center + hw] of given mass."""
        h = half_width / 2.0
        coeff = mass / half_width ** 2
        boxes = [(center - h, center + h), (-h, h)]
        return cls([(coeff, [boxes])])

    def eval(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(points.shape[0], dtype=complex)
        for coeff, axes in self.terms:
            term = np.full(points.shape[0], coeff, dtype=complex)
            for d, boxes in enumerate(axes):
                term = term * _box_conv_values(boxes, points[:, d])
            out += term
        return out

    def integral(self):
        total = 0.0 + 0.0j
        for coeff, axes in self.terms:
            total += coeff * np.prod([
                np.prod([b - a for a, b in boxes]) for boxes in axes])
        return total

    def abs_integral(self):
        """int |rho|; exact for nonnegative mixtures, else via quadrature."""
        coeffs = np.array([c for c, _ in self.terms])
        if np.all(coeffs.real >= 0) and np.all(np.abs(coeffs.imag) < 1e-15):
            return float(sum(
                c.real * np.prod([np.prod([b - a for a, b in boxes])
                                  for boxes in axes])
                for c, axes in self.terms))
        if self.dim != 1:
            raise NotImplementedError("signed multi-d densities")
        lo, hi = self.support_box()
        grid = np.linspace(lo[0], hi[0], 20001)
        vals = np.abs(self.eval(grid[:, None]))
        return float(np.trapezoid(vals, grid))

    def box_integral(self, box):
        """Exact integral over a closed box (per-axis antiderivatives)."""
        total = 0.0 + 0.0j
        for coeff, axes in self.terms:
            term = coeff
            for d, boxes in enumerate(axes):
                hi = _box_conv_antiderivative(boxes, np.array([box.hi[d]]))[0]
                lo = _box_conv_antiderivative(boxes, np.array([box.lo[d]]))[0]
                term = term * (hi - lo)
            total += term
        return total

    def support_box(self):
        lo = np.full(self.dim, np.inf)
        hi = np.full(self.dim, -np.inf)
        for _, axes in self.terms:
            for d, boxes in enumerate(axes):
                lo[d] = min(lo[d], sum(a for a, _ in boxes))
                hi[d] = max(hi[d], sum(b for _, b in boxes))
        return lo, hi

    def transform(self, points):
        """rho-hat with the +2*pi*i convention at points (count, n)."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(points.shape[0], dtype=complex)
        for coeff, axes in self.terms:
            term = np.full(points.shape[0], coeff, dtype=complex)
            for d, boxes in enumerate(axes):
                k = points[:, d]
                for a, b in boxes:
                    w = b - a
                    term = term * (w * np.sinc(w * k)
                                   * np.exp(_TWO_PI_I * 0.5 * (a + b) * k))
            out += term
        return out


class CantorComponent:
    """Affinely placed product of standard Cantor-type IFS measures.

    Per axis the standard measure on [0, 1] has contraction ratio
    r in (0, 1/2) and digit shifts {0, 1 - r}; the component is its image
    under u -> shift + scale * u, carrying a complex total mass.
    """

    def __init__(self, ratio, mass=1.0, scale=1.0, shift=0.0, dim=1):
        ratios = np.broadcast_to(np.asarray(ratio, dtype=float), (dim,)).copy()
        if np.any((ratios <= 0) | (ratios >= 0.5)):
            raise ValueError("contraction ratios must lie in (0, 1/2)")
        self.ratios = ratios
        self.mass = complex(mass)
        self.scales = np.broadcast_to(np.asarray(scale, dtype=float),
                                      (dim,)).copy()
        self.shifts = np.broadcast_to(np.asarray(shift, dtype=float),
                                      (dim,)).copy()
        if np.any(self.scales <= 0):
            raise ValueError("scales must be > 0")
        self.dim = dim

    def support_box(self):
        return self.shifts.copy(), self.shifts + self.scales

    def transform(self, points, tol=1e-10):
        """Truncated cosine-product transform; tail below tol per factor."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(points.shape[0], self.mass, dtype=complex)
        for d in range(self.dim):
            v = self.scales[d] * points[:, d]
            phase = np.exp(_TWO_PI_I * self.shifts[d] * points[:, d])
            out = out * phase * _cantor_hat(v, self.ratios[d], tol)
        return out

    def transform_tail_bound(self, v_max, tol=1e-10):
        return abs(self.mass) * self.dim * 1.0000001 * tol

    def box_mass(self, box, depth=48):
        """Mass of a closed box, exact to 2^-depth per axis."""
        total = self.mass
        for d in range(self.dim):
            a = (box.lo[d] - self.shifts[d]) / self.scales[d]
            b = (box.hi[d] - self.shifts[d]) / self.scales[d]
            lo_val, hi_val = _cantor_interval_mass(a, b, self.ratios[d], depth)
            total = total * 0.5 * (lo_val + hi_val)
        return total

    def total_variation(self):
        return abs(self.mass)


def _cantor_hat(v, r, tol):
    """prod_{j>=1} cos(pi (1-r) r^{j-1} v) times the e^{pi i v} phase."""
    v = np.asarray(v, dtype=float)
    out = np.exp(1j * np.pi * v)
    vmax = float(np.max(np.abs(v))) if v.size else 0.0
    u = (1.0 - r) * vmax
    terms = 0
    while np.pi * u > np.sqrt(2.0 * tol * (1.0 - r * r)) and terms < 300:
        terms += 1
        u *= r
    scale = 1.0 - r
    for j in range(max(terms, 1)):
        out = out * np.cos(np.pi * scale * v)
        scale *= r
    return out


def _cantor_interval_mass(a, b, r, depth):
    """Bracket [lower, upper] for the standard measure of [a, b]."""
    if b < 0.0 or a > 1.0 or b <= a:
        return 0.0, 0.0
    if a <= 0.0 and b >= 1.0:
        return 1.0, 1.0
    if depth == 0:
        return 0.0, 1.0
    left = _cantor_interval_mass(a / r, b / r, r, depth - 1)
    right = _cantor_interval_mass((a - (1.0 - r)) / r, (b - (1.0 - r)) / r,
                                  r, depth - 1)
    return (0.5 * (left[0] + right[0]), 0.5 * (left[1] + right[1]))


class FiniteMixedMeasure:
    """Finite measure with explicit pp, ac and sc parts."""

    def __init__(self, pp=None, ac=None, sc=None, dim=1):
        if pp is not None:
            pos, mass = pp
            pos = np.atleast_2d(np.asarray(pos, dtype=float))
            mass = np.asarray(mass, dtype=complex).reshape(-1)
            pos, mass = merge_atoms(pos, mass)
            self.pp_positions, self.pp_masses = pos, mass
            dim = pos.shape[1]
        else:
            self.pp_positions = np.empty((0, dim))
            self.pp_masses = np.empty(0, dtype=complex)
        self.ac = ac
        if ac is not None:
            dim = ac.dim
        self.sc = list(sc or [])
        for comp in self.sc:
            dim = comp.dim
        self.dim = dim

    def parts(self):
        out = {}
        out["pp"] = FiniteMixedMeasure(
            pp=(self.pp_positions, self.pp_masses), dim=self.dim) \
            if self.pp_masses.size else FiniteMixedMeasure(dim=self.dim)
        out["ac"] = FiniteMixedMeasure(ac=self.ac, dim=self.dim)
        out["sc"] = FiniteMixedMeasure(sc=self.sc, dim=self.dim)
        return out

    def is_empty(self):
        return (self.pp_masses.size == 0 and self.ac is None
                and not self.sc)

    def support_radius(self):
        r = 0.0
        if self.pp_masses.size:
            r = float(np.linalg.norm(self.pp_positions, axis=1).max())
        if self.ac is not None:
            lo, hi = self.ac.support_box()
            r = max(r, float(np.linalg.norm(np.maximum(np.abs(lo),
                                                       np.abs(hi)))))
        for comp in self.sc:
            lo, hi = comp.support_box()
            r = max(r, float(np.linalg.norm(np.maximum(np.abs(lo),
                                                       np.abs(hi)))))
        return r


def total_variation(nu):
    """|nu|(G): sum of part variations (closed form)."""
    total = float(np.abs(nu.pp_masses).sum()) if nu.pp_masses.size else 0.0
    if nu.ac is not None:
        total += nu.ac.abs_integral()
    total += sum(c.total_variation() for c in nu.sc)
    return total


class MixedTransform:
    """Callable nu-check(x) = int e^{+2 pi i k x} d nu(k), with error budget."""

    def __init__(self, nu, tol=1e-10):
        self.nu = nu
        self.tol = tol
        self.sup_bound = total_variation(nu)

    def __call__(self, points):
        nu = self.nu
        points = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(points.shape[0], dtype=complex)
        if nu.pp_masses.size:
            out += np.exp(_TWO_PI_I * points @ nu.pp_positions.T) \
                @ nu.pp_masses
        if nu.ac is not None:
            out += nu.ac.transform(points)
        for comp in nu.sc:
            out += comp.transform(points, self.tol)
        return out

    def tail_bound(self, x_max=None):
        return sum(c.transform_tail_bound(x_max, self.tol) for c in
                   self.nu.sc)


def transform_finite(nu, tol=1e-10):
    """Closed-form transform of a finite mixed measure.

    The returned callable satisfies sup |nu-check| <= |nu|(G); Cantor factors
    are truncated products with certified per-factor tail below tol.
    """
    return MixedTransform(nu, tol)


# ---------------------------------------------------------------------------
# Convolution of a peak list with a finite measure


class ShiftedCopies:
    """sum_i amp_i * T_{y_i} base for a density or Cantor base part."""

    def __init__(self, offsets, amps, base):
        self.offsets = np.atleast_2d(np.asarray(offsets, dtype=float))
        self.amps = np.asarray(amps, dtype=complex).reshape(-1)
        self.base = base

    def box_value(self, box):
        total = 0.0 + 0.0j
        for y, a in zip(self.offsets, self.amps):
            shifted = Box(box.lo - y, box.hi - y)
            if isinstance(self.base, SplineDensity):
                total += a * self.base.box_integral(shifted)
            else:
                total += a * self.base.box_mass(shifted)
        return total

    def abs_box_value(self, box):
        """Upper estimate of the variation on the box (exact for disjoint
        translated supports)."""
        total = 0.0
        for y, a in zip(self.offsets, self.amps):
            shifted = Box(box.lo - y, box.hi - y)
            if isinstance(self.base, SplineDensity):
                total += abs(a) * abs(self.base.box_integral(shifted))
            else:
                total += abs(a) * abs(self.base.box_mass(shifted))
        return total

    def density_eval(self, points):
        points = np.atleast_2d(points)
        out = np.zeros(points.shape[0], dtype=complex)
        for y, a in zip(self.offsets, self.amps):
            out += a * self.base.eval(points - y)
        return out


class MixedMeasureView:
    """gamma-hat = omega-hat * nu restricted to an evaluation window."""

    def __init__(self, pp, ac_copies, sc_copies, window):
        self.pp = pp
        self.ac_copies = ac_copies
        self.sc_copies = list(sc_copies)
        self.window = window

    def measure_of_box(self, box):
        total = 0.0 + 0.0j
        if self.pp is not None and self.pp.count:
            inside = box.contains(self.pp.positions)
            total += complex(self.pp.weights[inside].sum())
        if self.ac_copies is not None:
            total += self.ac_copies.box_value(box)
        for copies in self.sc_copies:
            total += copies.box_value(box)
        return total

    def part_abs_box(self, box):
        """(pp, ac, sc) variation estimates on the box."""
        pp = 0.0
        if self.pp is not None and self.pp.count:
            inside = box.contains(self.pp.positions)
            pp = float(np.abs(self.pp.weights[inside]).sum())
        ac = 0.0
        if self.ac_copies is not None:
            lo, hi = box.lo, box.hi
            grid = [np.linspace(a, b, 257) for a, b in zip(lo, hi)]
            mesh = np.stack(np.meshgrid(*grid, indexing="ij"), axis=-1)
            pts = mesh.reshape(-1, box.dim)
            vals = np.abs(self.ac_copies.density_eval(pts))
            vol = float(np.prod(box.lengths))
            ac = float(vals.mean() * vol)
        sc = sum(c.abs_box_value(box) for c in self.sc_copies)
        return pp, ac, float(sc)

    def norm_estimates(self, box, anchors):
        """Per-part and total sliding-norm estimates over given anchors.

        The total uses the pointwise identity |mu|(t+K) = sum of part
        variations (the parts are mutually singular), so the sandwich
        max_part <= total <= sum_parts holds by construction.
        """
        part_sups = {"pp": 0.0, "ac": 0.0, "sc": 0.0}
        total_sup = 0.0
        for t in anchors:
            moved = box.translate(t)
            pp, ac, sc = self.part_abs_box(moved)
            part_sups["pp"] = max(part_sups["pp"], pp)
            part_sups["ac"] = max(part_sups["ac"], ac)
            part_sups["sc"] = max(part_sups["sc"], sc)
            total_sup = max(total_sup, pp + ac + sc)
        return part_sups, total_sup


def convolve_peaks(peaks, nu, eval_window):
    """Translated-copies form of (peak comb) * nu on an evaluation window.

    peaks must cover the window dilated by the support radius of nu, else
    InsufficientPeakCoverage is raised by the caller-facing wrapper in the
    diffraction module.
    """
    from .errors import InsufficientPeakCoverage

    if not isinstance(eval_window, Box):
        eval_window = Box(*eval_window)
    need = eval_window.corner_radius() + nu.support_radius()
    if peaks.k_max + 1e-9 < need:
        raise InsufficientPeakCoverage(
            f"peaks enumerated to |k| <= {peaks.k_max:.6g} but the window "
            f"needs {need:.6g}")
    ks, amps = peaks.ks, peaks.amps

    pp = None
    if nu.pp_masses.size:
        pos = (ks[:, None, :] + nu.pp_positions[None, :, :]).reshape(
            -1, eval_window.dim)
        wts = (amps[:, None] * nu.pp_masses[None, :]).reshape(-1)
        keep = eval_window.contains(pos)
        pp = AtomicMeasure(pos[keep], wts[keep],
                           eval_window.corner_radius() + 1e-9,
                           prune_zeros=False)

    ac_copies = None
    if nu.ac is not None:
        lo, hi = nu.ac.support_box()
        radius = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
        keep = _copies_touching(ks, eval_window, radius)
        ac_copies = ShiftedCopies(ks[keep], amps[keep], nu.ac)

    sc_copies = []
    for comp in nu.sc:
        lo, hi = comp.support_box()
        radius = float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi))))
        keep = _copies_touching(ks, eval_window, radius)
        sc_copies.append(ShiftedCopies(ks[keep], amps[keep], comp))

    return MixedMeasureView(pp, ac_copies, sc_copies, eval_window)


def _copies_touching(ks, window, radius):
    pad = radius + 1e-9
    return np.all((ks >= window.lo - pad - np.max(window.lengths)) &
                  (ks <= window.hi + pad + np.max(window.lengths)), axis=1)


def convolve_atomic(mu, nu):
    """mu * nu for atomic mu and the pp part of nu (exact atoms)."""
    if not nu.pp_masses.size:
        raise ValueError("nu has no pp part")
    pos = (mu.positions[:, None, :] + nu.pp_positions[None, :, :]) \
        .reshape(-1, mu.dim)
    wts = (mu.weights[:, None] * nu.pp_masses[None, :]).reshape(-1)
    shift = float(np.linalg.norm(nu.pp_positions, axis=1).max())
    trunc = mu.truncation_radius - shift
    keep = np.linalg.norm(pos, axis=1) <= trunc + 1e-12
    return AtomicMeasure(pos[keep], wts[keep], trunc, prune_zeros=False)


def measure_box_abs(mu, box):
    """|mu|(K) for an atomic measure and a closed box (exact)."""
    if not isinstance(box, Box):
        box = Box(*box)
    inside = box.contains(mu.positions)
    return float(np.abs(mu.weights[inside]).sum())
