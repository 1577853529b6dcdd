"""Lattices in R^n x R^m x Z^z, cut-and-project schemes and model sets.

Coordinates are split into three blocks: the first ``n`` rows of a basis
matrix are the direct-space coordinates, the next ``m`` rows the real
internal coordinates and the last ``z`` rows the discrete internal
coordinates (which must be integers for every generator).  Generators are
the *columns* of the basis.

The dual lattice is realized as the inverse-transpose basis; its discrete
block lives on the torus, so dual points carry their discrete coordinates
both as computed (pre-mod) and reduced mod 1.
"""

import os

import numpy as np

from .bounds import lll_reduce
from .errors import (
    DegenerateBasis,
    EnumerationBudgetExceeded,
    NonIntegerDiscreteCoordinates,
)

DEFAULT_ENUMERATION_BUDGET = 10_000_000
TOLERANCE_DET = 1e-12
TOLERANCE_INT = 1e-12
TOLERANCE_PAIRING = 1e-9


def enumeration_budget():
    """Candidate cap for lattice enumeration; env MEYER_BUDGET overrides."""
    raw = os.environ.get("MEYER_BUDGET")
    if raw:
        return int(float(raw))
    return DEFAULT_ENUMERATION_BUDGET


class Lattice:
    """Full-rank lattice in R^N with an integer discrete block.

    Parameters
    ----------
    basis : (N, N) array_like
        Columns are the generators.
    dim_direct, dim_internal_real, dim_internal_discrete : int
        Block sizes n, m, z with n + m + z = N.
    """

    def __init__(self, basis, dim_direct, dim_internal_real=0,
                 dim_internal_discrete=0, tolerance_det=TOLERANCE_DET):
        basis = np.array(basis, dtype=float)
        n, m, z = dim_direct, dim_internal_real, dim_internal_discrete
        N = n + m + z
        if n < 1 or m < 0 or z < 0:
            raise ValueError("need n >= 1, m >= 0, z >= 0")
        if basis.shape != (N, N):
            raise ValueError(f"basis must be {N}x{N}, got {basis.shape}")
        det = np.linalg.det(basis)
        if abs(det) < tolerance_det:
            raise DegenerateBasis(f"|det| = {abs(det):.3e} < {tolerance_det:.1e}")
        if z > 0:
            zblock = basis[n + m:, :]
            if np.max(np.abs(zblock - np.round(zblock))) > TOLERANCE_INT:
                raise NonIntegerDiscreteCoordinates(
                    "generators must have integer coordinates in the last "
                    f"{z} rows")
            basis[n + m:, :] = np.round(zblock)
        self.basis = basis
        self.dim_direct = n
        self.dim_internal_real = m
        self.dim_internal_discrete = z
        self.dim_total = N
        self.covolume = abs(det)
        self.inverse_basis = np.linalg.inv(basis)
        # reduced generators keep integer bounding boxes tight when the
        # basis is skewed; they span the same lattice
        self.reduced_basis = lll_reduce(basis)
        self.reduced_inverse = np.linalg.inv(self.reduced_basis)

    @property
    def density(self):
        """Points per unit N-volume, 1/covolume."""
        return 1.0 / self.covolume

    def dual_basis(self):
        """Inverse-transpose basis; generates the annihilator lattice."""
        return self.inverse_basis.T.copy()

    def enumerate_region(self, lows, highs, budget=None):
        """All lattice points in the axis-aligned box [lows, highs].

        Returns an array of shape (count, N), sorted lexicographically by
        coordinate.  Raises EnumerationBudgetExceeded when the integer
        bounding box in lattice coordinates holds more candidates than the
        budget allows.
        """
        lows = np.asarray(lows, dtype=float)
        highs = np.asarray(highs, dtype=float)
        if budget is None:
            budget = enumeration_budget()
        points = _enumerate_box(self.basis, lows, highs, budget)
        return points[np.lexsort(points.T[::-1])]


def _enumerate_box(basis, lows, highs, budget):
    """Lattice points of basis * Z^N inside the closed box [lows, highs].

    The generators are first re-combined (unimodularly) to be short in the
    metric scaled to the box shape, which keeps the integer bounding box
    close to the actual point count even for thin or skewed regions.  The
    bounding box is then walked in slabs along its longest axis so memory
    stays bounded; the budget caps the bounding-box volume.  Output is
    unsorted.
    """
    N = basis.shape[0]
    widths = np.maximum(np.asarray(highs, dtype=float) - lows, 1e-9)
    scaled = basis / widths[:, None]
    reduced_scaled = lll_reduce(scaled)
    change = np.linalg.solve(scaled, reduced_scaled)
    change_int = np.round(change)
    if np.max(np.abs(change - change_int)) < 1e-6 and \
            abs(abs(np.linalg.det(change_int)) - 1.0) < 1e-6:
        basis = basis @ change_int
    inverse_basis = np.linalg.inv(basis)
    corners = np.array(np.meshgrid(*zip(lows, highs), indexing="ij"))
    corners = corners.reshape(N, -1).T
    images = corners @ inverse_basis.T
    lo = np.floor(images.min(axis=0) - 1e-9).astype(np.int64)
    hi = np.ceil(images.max(axis=0) + 1e-9).astype(np.int64)
    sizes = (hi - lo + 1).astype(float)
    total = int(np.prod(sizes))
    if total > budget:
        raise EnumerationBudgetExceeded(
            f"{total} candidate vectors exceed the budget of {budget}")
    axis = int(np.argmax(sizes))
    rest_axes = [i for i in range(N) if i != axis]
    rest = [np.arange(lo[i], hi[i] + 1, dtype=np.int64) for i in rest_axes]
    if rest:
        rest_grid = np.array(np.meshgrid(*rest, indexing="ij"),
                             dtype=np.int64).reshape(len(rest), -1).T
    else:
        rest_grid = np.zeros((1, 0), dtype=np.int64)
    slab_rows = max(1, int(4_000_000 // max(rest_grid.shape[0], 1)))
    tol = 1e-9
    found = []
    for start in range(int(lo[axis]), int(hi[axis]) + 1, slab_rows):
        firsts = np.arange(start, min(start + slab_rows, hi[axis] + 1),
                           dtype=np.int64)
        coeffs = np.empty((firsts.size * rest_grid.shape[0], N))
        coeffs[:, axis] = np.repeat(firsts, rest_grid.shape[0])
        for col, i in enumerate(rest_axes):
            coeffs[:, i] = np.tile(rest_grid[:, col], firsts.size)
        points = coeffs @ basis.T
        mask = np.all((points >= lows - tol) & (points <= highs + tol),
                      axis=1)
        if mask.any():
            found.append(points[mask])
    if not found:
        return np.empty((0, N))
    return np.vstack(found)


class Window:
    """Compact internal window: union of real boxes times a finite set.

    Parameters
    ----------
    real_boxes : sequence of (lows, highs) pairs in R^m, or None when m=0.
    discrete : iterable of integer tuples in Z^z, or None when z=0.
    margin : float, optional bump margin recorded with the window.
    """

    def __init__(self, real_boxes=None, discrete=None, margin=0.0):
        if margin < 0:
            raise ValueError("margin must be >= 0")
        self.margin = float(margin)
        if real_boxes is None:
            real_boxes = []
        boxes = []
        for lo, hi in real_boxes:
            lo = np.atleast_1d(np.asarray(lo, dtype=float))
            hi = np.atleast_1d(np.asarray(hi, dtype=float))
            if np.any(hi <= lo):
                raise ValueError("window boxes must have positive volume")
            boxes.append((lo, hi))
        self.real_boxes = boxes
        self.dim_real = boxes[0][0].size if boxes else 0
        if discrete is None:
            discrete = []
        self.discrete = sorted({tuple(int(round(c)) for c in np.atleast_1d(p))
                                for p in discrete})
        self.dim_discrete = len(self.discrete[0]) if self.discrete else 0

    def contains_real(self, y):
        """Vectorized membership of points y (count, m) in the box union."""
        y = np.atleast_2d(y)
        if not self.real_boxes:
            return np.ones(y.shape[0], dtype=bool)
        mask = np.zeros(y.shape[0], dtype=bool)
        for lo, hi in self.real_boxes:
            mask |= np.all((y >= lo - 1e-12) & (y <= hi + 1e-12), axis=1)
        return mask

    def contains_discrete(self, j):
        j = np.atleast_2d(np.round(j).astype(np.int64))
        if not self.discrete:
            return np.ones(j.shape[0], dtype=bool)
        allowed = set(self.discrete)
        return np.array([tuple(row) in allowed for row in j])

    def real_hull(self):
        """Bounding box (lows, highs) of the real part."""
        if not self.real_boxes:
            return np.zeros(0), np.zeros(0)
        lo = np.min([b[0] for b in self.real_boxes], axis=0)
        hi = np.max([b[1] for b in self.real_boxes], axis=0)
        return lo, hi

    def dilate(self, pad):
        """Window with every real box grown by pad on each side."""
        boxes = [(lo - pad, hi + pad) for lo, hi in self.real_boxes]
        return Window(boxes or None, self.discrete or None, self.margin)


class EuclideanCPS:
    """Cut-and-project scheme with direct space R^n, internal R^m x Z^z."""

    def __init__(self, lattice):
        self.lattice = lattice
        self.n = lattice.dim_direct
        self.m = lattice.dim_internal_real
        self.z = lattice.dim_internal_discrete

    @property
    def density(self):
        return self.lattice.density

    @property
    def covolume(self):
        return self.lattice.covolume

    def split(self, points):
        """Split full-space points into (direct, internal_real, internal_z)."""
        points = np.atleast_2d(points)
        n, m = self.n, self.m
        return (points[:, :n], points[:, n:n + m],
                np.round(points[:, n + m:]).astype(np.int64))


class ValidationReport:
    """Outcome of the desk-scale CPS witnesses."""

    def __init__(self, covolume, r_check, injectivity_ok, min_direct_norm,
                 density_ok, delta_achieved, delta_check):
        self.covolume = covolume
        self.r_check = r_check
        self.injectivity_ok = injectivity_ok
        self.min_direct_norm = min_direct_norm
        self.density_ok = density_ok
        self.delta_achieved = delta_achieved
        self.delta_check = delta_check

    @property
    def valid(self):
        return self.injectivity_ok and self.density_ok

    def as_dict(self):
        return {
            "covolume": self.covolume,
            "r_check": self.r_check,
            "injectivity_ok": bool(self.injectivity_ok),
            "min_direct_norm": self.min_direct_norm,
            "density_ok": bool(self.density_ok),
            "delta_achieved": self.delta_achieved,
            "delta_check": self.delta_check,
            "valid": bool(self.valid),
        }


def validate_cps(cps, r_check=None, delta_check=0.05, tolerance_inj=1e-9,
                 budget=None):
    """Run finite injectivity and density witnesses on a CPS.

    Injectivity witness: no nonzero lattice vector with full norm <= r_check
    may have a direct part shorter than tolerance_inj.  Density witness: the
    internal parts of lattice vectors whose direct part lies in the r_check
    ball must form a delta_check-net of the reference internal box
    [-1, 1]^m (for each discrete residue in {-1, 0, 1}^z).
    """
    lat = cps.lattice
    if r_check is None:
        r_check = 50.0 * lat.covolume ** (1.0 / lat.dim_total)
    N = lat.dim_total
    points = lat.enumerate_region([-r_check] * N, [r_check] * N, budget)
    full_norm = np.linalg.norm(points, axis=1)
    points = points[(full_norm <= r_check) & (full_norm > 1e-12)]
    direct, internal_real, internal_z = cps.split(points)

    direct_norm = np.linalg.norm(direct, axis=1)
    min_direct = float(direct_norm.min()) if direct_norm.size else np.inf
    injectivity_ok = min_direct > tolerance_inj

    # Density uses a wider patch in the direct ball only.
    box_lo = [-r_check] * cps.n + [-2.0] * cps.m + [-2.0] * cps.z
    box_hi = [r_check] * cps.n + [2.0] * cps.m + [2.0] * cps.z
    patch = lat.enumerate_region(box_lo, box_hi, budget)
    pdir, preal, pz = cps.split(patch)
    in_ball = np.linalg.norm(pdir, axis=1) <= r_check
    preal, pz = preal[in_ball], pz[in_ball]

    delta_achieved = 0.0
    density_ok = True
    residues = ([tuple(v) for v in
                 np.array(np.meshgrid(*([[-1, 0, 1]] * cps.z), indexing="ij"))
                 .reshape(cps.z, -1).T] if cps.z else [()])
    for res in residues:
        if cps.z:
            sel = np.all(pz == np.array(res), axis=1)
        else:
            sel = np.ones(preal.shape[0], dtype=bool)
        stars = preal[sel]
        if cps.m == 0:
            if not sel.any():
                density_ok = False
            continue
        if stars.shape[0] == 0:
            density_ok = False
            delta_achieved = np.inf
            continue
        grid_1d = np.arange(-1.0, 1.0 + 1e-9, delta_check)
        grid = np.array(np.meshgrid(*([grid_1d] * cps.m), indexing="ij"))
        grid = grid.reshape(cps.m, -1).T
        dists = np.min(
            np.linalg.norm(grid[:, None, :] - stars[None, :, :], axis=2),
            axis=1)
        worst = float(dists.max())
        delta_achieved = max(delta_achieved, worst)
        if worst > delta_check:
            density_ok = False

    return ValidationReport(lat.covolume, r_check, injectivity_ok, min_direct,
                            density_ok, delta_achieved, delta_check)


class DualCPS:
    """Annihilator lattice realized in R^n x R^m x R^z (torus coords mod 1)."""

    def __init__(self, basis, n, m, z, parent_covolume):
        self.basis = np.asarray(basis, dtype=float)
        self.n = n
        self.m = m
        self.z = z
        self.parent_covolume = parent_covolume
        self.covolume = abs(np.linalg.det(self.basis))
        self.inverse_basis = np.linalg.inv(self.basis)
        self.reduced_basis = lll_reduce(self.basis)
        self.reduced_inverse = np.linalg.inv(self.reduced_basis)

    @property
    def density(self):
        return 1.0 / self.covolume

    def pairing_matrix(self, primal_basis):
        """<u_i, v_j> for primal generators u and dual generators v."""
        return primal_basis.T @ self.basis

    def enumerate_points(self, k_max, s_max=None, budget=None):
        """Dual points: |k| <= k_max, torus coordinates reduced to [0, 1).

        For m > 0, s_max bounds the real internal block; when omitted the
        *full-space* norm is bounded by k_max instead, which keeps the
        output finite.  Returns (k, k_star_real, k_star_z_premod) arrays
        sorted lexicographically by k then internal coordinates.
        """
        if k_max <= 0:
            raise ValueError("k_max must be > 0")
        n, m, z = self.n, self.m, self.z
        if budget is None:
            budget = enumeration_budget()
        full_norm_cut = s_max is None and (m > 0)
        if s_max is None:
            s_max = k_max
        lows = [-k_max] * n + [-s_max] * m + [-1e-12] * z
        highs = [k_max] * n + [s_max] * m + [1.0 - 1e-12] * z
        points = _enumerate_box(self.basis, np.array(lows),
                                np.array(highs), budget)
        if points.shape[0] == 0:
            return np.empty((0, n)), np.empty((0, m)), np.empty((0, z))
        k = points[:, :n]
        kr = points[:, n:n + m]
        kz = points[:, n + m:]
        mask = np.linalg.norm(k, axis=1) <= k_max + 1e-9
        if m:
            if full_norm_cut:
                mask &= np.linalg.norm(points[:, :n + m], axis=1) \
                    <= k_max + 1e-9
            else:
                mask &= np.all(np.abs(kr) <= s_max + 1e-9, axis=1)
        if z:
            mask &= np.all((kz >= -1e-12) & (kz < 1.0 - 1e-12), axis=1)
        k, kr, kz = k[mask], kr[mask], kz[mask]
        order = np.lexsort(np.hstack([k, kr, kz]).T[::-1])
        return k[order], kr[order], kz[order]


def dual_cps(cps):
    """Dual CPS: inverse-transpose basis, densities reciprocal."""
    lat = cps.lattice
    basis = lat.dual_basis()
    dual = DualCPS(basis, cps.n, cps.m, cps.z, lat.covolume)
    pairing = dual.pairing_matrix(lat.basis)
    if np.max(np.abs(pairing - np.round(pairing))) > TOLERANCE_PAIRING:
        raise DegenerateBasis("dual pairing failed integrality check")
    return dual


def enumerate_model_set(cps, window, radius, budget=None):
    """Model set points: |x| <= radius (direct part) with star in the window.

    Returns (x, star_real, star_z) arrays sorted lexicographically by x then
    star.  Weights at coincident direct positions are the caller's concern;
    for an injective CPS positions are distinct.
    """
    if radius < 0:
        raise ValueError("radius must be >= 0")
    lat = cps.lattice
    n, m, z = cps.n, cps.m, cps.z
    lo_r, hi_r = window.real_hull()
    if m and (lo_r.size != m):
        raise ValueError("window real dimension does not match the CPS")
    lows = [-radius] * n
    highs = [radius] * n
    if m:
        lows += list(lo_r)
        highs += list(hi_r)
    if z:
        if not window.discrete:
            raise ValueError("discrete window must be nonempty when z > 0")
        dmat = np.array(window.discrete)
        lows += list(dmat.min(axis=0) - 0.1)
        highs += list(dmat.max(axis=0) + 0.1)
    points = lat.enumerate_region(lows, highs, budget)
    x, sr, sz = cps.split(points)
    mask = np.linalg.norm(x, axis=1) <= radius + 1e-9
    if m:
        mask &= window.contains_real(sr)
    if z:
        mask &= window.contains_discrete(sz)
    x, sr, sz = x[mask], sr[mask], sz[mask]
    order = np.lexsort(np.hstack([x, sr, sz.astype(float)]).T[::-1])
    return x[order], sr[order], sz[order]


def enumerate_dual_points(dual, k_max, s_max=None, budget=None):
    """Module-level wrapper around DualCPS.enumerate_points."""
    return dual.enumerate_points(k_max, s_max=s_max, budget=budget)


# ---------------------------------------------------------------------------
# Stock schemes used throughout tests and demos.

TAU = (1.0 + np.sqrt(5.0)) / 2.0


def fibonacci_cps():
    """n=1, m=1 scheme whose [-1, tau-1] model set is the Fibonacci chain."""
    basis = np.array([[1.0, TAU],
                      [1.0, 1.0 - TAU]])
    return EuclideanCPS(Lattice(basis, 1, 1, 0))


def fibonacci_window(margin=0.0):
    return Window([([-1.0], [TAU - 1.0])], margin=margin)


def z2_cps():
    """Degenerate identity scheme; its combs realize integer Dirac combs."""
    return EuclideanCPS(Lattice(np.eye(2), 1, 1, 0))


def cubic_cps(scale=None):
    """n=2, m=1 scheme from the three real embeddings of Z[2 cos(2 pi / 7)].

    The basis columns are the embeddings of 1, b, b^2 for b = 2 cos(2 pi/7);
    two embeddings act as the direct plane, the third as the internal line.
    By default the basis is rescaled to unit covolume.
    """
    roots = 2.0 * np.cos(2.0 * np.pi * np.arange(1, 4) / 7.0)
    # rows: embeddings at roots 2 and 3 form the direct plane, root 1 the
    # internal line; columns are the embeddings of 1, b, b^2
    basis = np.array([[1.0, roots[1], roots[1] ** 2],
                      [1.0, roots[2], roots[2] ** 2],
                      [1.0, roots[0], roots[0] ** 2]])
    if scale is None:
        scale = abs(np.linalg.det(basis)) ** (-1.0 / 3.0)
    return EuclideanCPS(Lattice(basis * scale, 2, 1, 0))


def sqrt2_z_cps():
    """n=1, z=1 scheme; window {0, 1} selects Z united with sqrt(2) + Z."""
    basis = np.array([[np.sqrt(2.0), 1.0],
                      [1.0, 0.0]])
    return EuclideanCPS(Lattice(basis, 1, 0, 1))


def fibonacci_z_cps():
    """n=1, m=1, z=1 scheme mixing the Fibonacci plane with a Z factor."""
    basis = np.array([[1.0, TAU, np.sqrt(2.0)],
                      [1.0, 1.0 - TAU, 0.0],
                      [0.0, 0.0, 1.0]])
    return EuclideanCPS(Lattice(basis, 1, 1, 1))
