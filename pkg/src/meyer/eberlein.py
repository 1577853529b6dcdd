"""Synthesis of combs with prescribed mixed spectra and their splitting.

A ``PingPongSystem`` packages a comb built from a plateau bump over a model
set: the comb weights are 1 on the window's model set, the support is
uniformly discrete, and the transform is an explicit peak list.  Multiplying
the comb by the transform of a finite mixed measure synthesizes a measure
whose own transform is the peak comb convolved with that mixed measure, so
the pure-point / absolutely-continuous / singular-continuous parts of the
spectrum each have an explicit preimage: the generalized Eberlein
decomposition of the synthesized measure.

The polarization path writes the comb as a combination of four positive
definite combs and carries any synthesized measure along, giving the
decomposition into positive definite pieces.
"""

import numpy as np

from .cps import Window, dual_cps, enumerate_model_set
from .diffraction import (BSplineTestFunction, ModulatedTestFunction,
                          comb_from_weight, transform_comb, verify_pairing)
from .errors import NegativePart
from .measures import (AtomicMeasure, Box, FiniteMixedMeasure, convolve_peaks,
                       total_variation, transform_finite)
from .profiles import BSpline1D, WeightProfile, build_bump, transform_weight


class PingPongSystem:
    """Plateau comb over a model set with its probe and peak machinery.

    The comb weight is exactly 1 at every point of the window's model set;
    the probe f is a normalized centered box whose self-correlation tent has
    (f*f~)(0) = 1 and support strictly inside the minimal atom gap.
    """

    def __init__(self, cps, window, margin=None, radius=100.0, bump_order=2,
                 probe_scale=1.0, exclude=None, budget=None):
        self.cps = cps
        self.window = window
        self.bump = build_bump(window, margin=margin, exclude=exclude,
                               order=bump_order)
        self.radius = float(radius)
        self.comb = comb_from_weight(cps, self.bump, radius, budget=budget)
        if self.comb.count < 2:
            raise ValueError("comb patch too small")
        if "plateau_mask" not in self.comb.meta:
            raise ValueError("comb lost its per-atom metadata; the scheme "
                             "must project injectively")
        self.plateau_mask = self.comb.meta["plateau_mask"]
        gaps = _min_gap(self.comb.positions)
        self.uniform_gap = 0.99 * gaps
        self.probe_half_width = probe_scale * self.uniform_gap / 5.0
        self._peaks_cache = {}
        self.budget = budget

    def probe_tent(self, u):
        """(f*f~)(u) for the normalized box probe; equals 1 at 0."""
        a = self.probe_half_width
        u = np.asarray(u, dtype=float)
        return np.maximum(2.0 * a - np.abs(u), 0.0) / (2.0 * a)

    def probe_support(self):
        return 2.0 * self.probe_half_width

    def with_probe_scale(self, scale):
        clone = object.__new__(PingPongSystem)
        clone.__dict__.update(self.__dict__)
        clone.probe_half_width = scale * self.uniform_gap / 5.0
        return clone

    def peaks(self, k_max, s_max=None, amp_floor=0.0):
        key = (round(k_max, 9), None if s_max is None else round(s_max, 9),
               amp_floor)
        if key not in self._peaks_cache:
            self._peaks_cache[key] = transform_comb(
                self.cps, self.bump, k_max, amp_floor=amp_floor,
                s_max=s_max, budget=self.budget)
        return self._peaks_cache[key]

    def model_set_points(self):
        """Direct positions whose stars lie in the window itself."""
        return self.comb.positions[self.plateau_mask]


def _min_gap(positions):
    if positions.shape[1] == 1:
        return float(np.min(np.diff(np.sort(positions[:, 0]))))
    best = np.inf
    for i in range(positions.shape[0]):
        d = np.linalg.norm(positions - positions[i], axis=1)
        d[i] = np.inf
        best = min(best, float(d.min()))
    return best


def synthesize_gamma(system, nu, radius):
    """Comb whose transform is the system's peak comb convolved with nu.

    Atom weights are nu-check(x) times the comb weight, nu-check being the
    +2*pi*i transform of the finite measure.
    """
    if radius > system.radius + 1e-9:
        raise ValueError("synthesis radius exceeds the comb patch")
    F = transform_finite(nu)
    keep = np.linalg.norm(system.comb.positions, axis=1) <= radius + 1e-12
    pos = system.comb.positions[keep]
    wts = system.comb.weights[keep] * F(pos)
    meta = dict(system.comb.meta)
    meta["nu"] = nu
    meta["plateau_mask"] = system.plateau_mask[keep]
    return AtomicMeasure(pos, wts, radius, meta=meta, prune_zeros=False)


class EberleinTriple:
    """gamma split into preimages of the three spectral parts."""

    def __init__(self, system, gamma, gamma_s, gamma_0a, gamma_0s, nu):
        self.system = system
        self.gamma = gamma
        self.gamma_s = gamma_s
        self.gamma_0a = gamma_0a
        self.gamma_0s = gamma_0s
        self.nu = nu
        self.nu_parts = nu.parts()

    def reconstruction_residual(self):
        """max |gamma_s + gamma_0a + gamma_0s - gamma| over atoms."""
        total = self.gamma_s.weights + self.gamma_0a.weights + \
            self.gamma_0s.weights
        return float(np.max(np.abs(total - self.gamma.weights))) \
            if self.gamma.count else 0.0

    def components(self):
        return {"pp": self.gamma_s, "ac": self.gamma_0a, "sc": self.gamma_0s}

    def spectral_view(self, part, window, k_max, s_max=None):
        """The spectral part as a translated-copies mixed view."""
        peaks = self.system.peaks(k_max, s_max=s_max)
        if not isinstance(window, Box):
            window = Box(*window)
        return convolve_peaks(peaks, self.nu_parts[part], window)


def eberlein_decompose(system, nu, radius):
    """Split the synthesized measure by the Lebesgue parts of nu.

    Component weights use the transform of the corresponding part of nu, so
    the component transforms are the peak comb convolved with exactly that
    part; reconstruction is exact up to the transform truncation.
    """
    gamma = synthesize_gamma(system, nu, radius)
    parts = nu.parts()
    components = {}
    keep = np.linalg.norm(system.comb.positions, axis=1) <= radius + 1e-12
    pos = system.comb.positions[keep]
    base = system.comb.weights[keep]
    for name, part in parts.items():
        F = transform_finite(part)
        meta = dict(gamma.meta)
        meta["part"] = name
        components[name] = AtomicMeasure(pos, base * F(pos), radius,
                                         meta=meta, prune_zeros=False)
    return EberleinTriple(system, gamma, components["pp"], components["ac"],
                          components["sc"], nu)


class PingPongReport:
    def __init__(self, direct_residual, checked_atoms, off_plateau_mass,
                 direct_passed, spectral_reports, tolerance):
        self.direct_residual = direct_residual
        self.checked_atoms = checked_atoms
        self.off_plateau_mass = off_plateau_mass
        self.direct_passed = direct_passed
        self.spectral_reports = spectral_reports
        self.tolerance = tolerance

    @property
    def spectral_passed(self):
        return all(r.passed for r in self.spectral_reports)

    @property
    def passed(self):
        return self.direct_passed and self.spectral_passed

    def as_dict(self):
        return {"direct_residual": self.direct_residual,
                "checked_atoms": self.checked_atoms,
                "off_plateau_mass": self.off_plateau_mass,
                "direct_passed": bool(self.direct_passed),
                "spectral": [r.as_dict() for r in self.spectral_reports],
                "passed": bool(self.passed)}


def pingpong_verify(system, gamma, nu_expected, tolerance=1e-9,
                    test_functions=None, pairing_tolerance=1e-6,
                    k_max=None, s_max=None):
    """Check the two sides of the synthesis construction.

    Direct identity: multiplying (gamma convolved with the probe tent) by
    the comb reproduces gamma at every model-set atom, provided the tent
    support stays inside the uniform gap; checked atomwise on the plateau.
    Spectral identity: <gamma, g> equals the peak comb paired against g
    modulated by the transform of the expected finite measure.
    """
    comb = system.comb
    tent_radius = system.probe_support()
    a = system.probe_half_width

    check_radius = min(gamma.truncation_radius, comb.truncation_radius) \
        - tent_radius
    anchors = comb.positions[
        (np.linalg.norm(comb.positions, axis=1) <= check_radius)
        & system.plateau_mask]
    if gamma.count and anchors.shape[0]:
        if gamma.dim == 1:
            gpos = gamma.positions[:, 0]
            order = np.argsort(gpos)
            gpos = gpos[order]
            gwts = gamma.weights[order]
            lo = np.searchsorted(gpos, anchors[:, 0] - 2 * a, side="left")
            hi = np.searchsorted(gpos, anchors[:, 0] + 2 * a, side="right")
            conv = np.array([
                np.sum(gwts[l:h] * system.probe_tent(gpos[l:h] - x))
                for l, h, x in zip(lo, hi, anchors[:, 0])], dtype=complex)
        else:
            conv = np.array([
                np.sum(gamma.weights * system.probe_tent(
                    np.linalg.norm(gamma.positions - x, axis=1)))
                for x in anchors], dtype=complex)
        gamma_at = _weights_at(gamma, anchors)
        comb_at = _weights_at(comb, anchors)
        residual = float(np.max(np.abs(conv * comb_at - gamma_at)))
    else:
        residual = 0.0
    off_plateau = 0.0
    if gamma.count:
        mask = system.plateau_mask[
            np.linalg.norm(system.comb.positions, axis=1)
            <= gamma.truncation_radius + 1e-12]
        if mask.size == gamma.count:
            off_plateau = float(np.abs(gamma.weights[~mask]).sum())
    direct_ok = residual <= tolerance

    spectral = []
    if test_functions:
        F = transform_finite(nu_expected)
        tv = total_variation(nu_expected)
        shift = nu_expected.support_radius()
        peaks = system.peaks(k_max, s_max=s_max) if k_max else None
        if peaks is None:
            raise ValueError("spectral checks need k_max")
        for g in test_functions:
            mod = ModulatedTestFunction(g, F, tv, shift,
                                        label=f"{g.label}|nu")
            lhs_err = F.tail_bound() * float(
                np.abs(comb.weights
                       * g.eval(comb.positions)).sum())
            spectral.append(verify_pairing(comb, peaks, mod,
                                           pairing_tolerance,
                                           lhs_error=lhs_err))
    return PingPongReport(residual, anchors.shape[0], off_plateau, direct_ok,
                          spectral, tolerance)


def _weights_at(measure, points):
    """Weights of a sorted atomic measure at given positions (0 if absent)."""
    if measure.dim == 1:
        pos = measure.positions[:, 0]
        order = np.argsort(pos)
        pos = pos[order]
        idx = np.searchsorted(pos, points[:, 0] - 1e-9, side="left")
        out = np.zeros(points.shape[0], dtype=complex)
        valid = (idx < pos.size)
        hit = valid & (np.abs(pos[np.minimum(idx, pos.size - 1)]
                              - points[:, 0]) <= 1e-9)
        out[hit] = measure.weights[order][idx[hit]]
        return out
    return np.array([measure.weight_at(p) for p in points], dtype=complex)


# ---------------------------------------------------------------------------
# Polarization into positive definite combs


def _single_axis(profile):
    if isinstance(profile, WeightProfile):
        if len(profile.axes) != 1 or profile.discrete is not None:
            raise ValueError("polarization expects one real internal factor")
        return profile.axes[0]
    if isinstance(profile, BSpline1D):
        return profile
    raise TypeError("expected a spline profile")


class PolarizationSplit:
    """Four positive definite combs combining to the cross-correlation comb.

    The internal weights are the quarter self-correlations of g + h, g - h,
    g + ih, g - ih; their alternating combination equals the weight g * h~
    pointwise, so the five combs share support and satisfy the combination
    identity atom by atom.
    """

    def __init__(self, cps, g, h, radius=100.0, budget=None):
        self.cps = cps
        self.g = _single_axis(g)
        self.h = _single_axis(h)
        gg, hh = self.g, self.h
        pl, mi = gg + hh, gg + (-1.0) * hh
        pli = gg + 1j * hh
        mii = gg + (-1j) * hh
        self.part_profiles = [
            0.25 * pl.convolve(pl.reflect_conj()),
            0.25 * mi.convolve(mi.reflect_conj()),
            0.25 * pli.convolve(pli.reflect_conj()),
            0.25 * mii.convolve(mii.reflect_conj()),
        ]
        self.combined_profile = gg.convolve(hh.reflect_conj())
        lo = min(p.support()[0] for p in
                 self.part_profiles + [self.combined_profile])
        hi = max(p.support()[1] for p in
                 self.part_profiles + [self.combined_profile])
        window = Window([([lo], [hi])])
        x, sr, sz = enumerate_model_set(cps, window, radius, budget=budget)
        self.positions = x
        self.stars = sr
        self.radius = radius
        self.part_weights = [p(sr[:, 0]) for p in self.part_profiles]
        self.combined_weights = self.combined_profile(sr[:, 0])
        self.budget = budget

    def combs(self):
        return [AtomicMeasure(self.positions, w, self.radius,
                              prune_zeros=False)
                for w in self.part_weights]

    def combined_comb(self):
        return AtomicMeasure(self.positions, self.combined_weights,
                             self.radius, prune_zeros=False)

    def identity_residual(self):
        w1, w2, w3, w4 = self.part_weights
        return float(np.max(np.abs(w1 - w2 + 1j * w3 - 1j * w4
                                   - self.combined_weights)))

    def peak_lists(self, k_max, s_max=None, amp_floor=0.0):
        return [transform_comb(self.cps, WeightProfile([p]), k_max,
                               amp_floor=amp_floor, s_max=s_max,
                               budget=self.budget)
                for p in self.part_profiles]

    def plateau_values(self, points):
        """Combined weight at internal points; 1 on the plateau window."""
        return self.combined_profile(np.asarray(points, dtype=float))


def polarization_split(cps, g, h, radius=100.0, budget=None):
    """Build the four positive definite combs for internal weights g, h."""
    return PolarizationSplit(cps, g, h, radius=radius, budget=budget)


def polarization_profiles(window, margin):
    """Plateau profile and unit-mass mollifier for the polarization setup.

    g is 1 on the window dilated by the margin; h is a normalized box
    supported inside (-margin/2, margin/2), so the cross-correlation g * h~
    equals 1 on the window.
    """
    g = build_bump(window, margin=margin).axes[0]
    h = BSpline1D([(1.0 / margin, [(-margin / 2.0, margin / 2.0)])])
    return g, h


_POSDEF_TABLE = [
    [(0, 0), (1, 1), (2, 3), (3, 2)],
    [(1, 0), (0, 1), (2, 2), (3, 3)],
    [(2, 0), (3, 1), (0, 2), (1, 3)],
    [(3, 0), (2, 1), (1, 2), (0, 3)],
]


def posdef_decompose_gamma(split, nu_parts, radius=None, gamma=None):
    """Write a synthesized measure as gamma_1 - gamma_2 + i gamma_3
    - i gamma_4 with every piece a combination of positive definite factors.

    nu_parts are the four positive finite measures with
    nu = nu_1 - nu_2 + i nu_3 - i nu_4; the pieces mix their transforms with
    the four polarization combs according to the sesquilinear expansion.
    """
    if len(nu_parts) != 4:
        raise ValueError("need exactly four positive parts")
    for j, part in enumerate(nu_parts):
        _require_positive(part, j)
    radius = radius or split.radius
    keep = np.linalg.norm(split.positions, axis=1) <= radius + 1e-12
    pos = split.positions[keep]
    transforms = [transform_finite(p) for p in nu_parts]
    f_vals = [F(pos) if not p.is_empty() else np.zeros(pos.shape[0],
                                                       dtype=complex)
              for F, p in zip(transforms, nu_parts)]
    omega_w = [w[keep] for w in split.part_weights]
    gammas = []
    for row in _POSDEF_TABLE:
        wts = np.zeros(pos.shape[0], dtype=complex)
        for f_idx, w_idx in row:
            wts += f_vals[f_idx] * omega_w[w_idx]
        gammas.append(AtomicMeasure(pos, wts, radius, prune_zeros=False))

    combined = split.combined_weights[keep]
    nu_check = f_vals[0] - f_vals[1] + 1j * f_vals[2] - 1j * f_vals[3]
    target = nu_check * combined if gamma is None else \
        _weights_at(gamma, pos)
    recon = gammas[0].weights - gammas[1].weights + 1j * gammas[2].weights \
        - 1j * gammas[3].weights
    residual = float(np.max(np.abs(recon - target))) if pos.shape[0] else 0.0
    return gammas, residual


def _require_positive(part, index):
    if part.pp_masses.size:
        if np.any(part.pp_masses.real < -1e-12) or \
                np.any(np.abs(part.pp_masses.imag) > 1e-12):
            raise NegativePart(f"nu_{index + 1} has non-positive atoms")
    if part.ac is not None:
        coeffs = np.array([c for c, _ in part.ac.terms])
        if np.any(coeffs.real < -1e-12) or np.any(np.abs(coeffs.imag) > 1e-12):
            raise NegativePart(f"nu_{index + 1} has a signed density")
    for comp in part.sc:
        if comp.mass.real < -1e-12 or abs(comp.mass.imag) > 1e-12:
            raise NegativePart(f"nu_{index + 1} has a signed singular part")
