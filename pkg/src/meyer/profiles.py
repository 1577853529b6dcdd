"""Weight functions on the internal space with exact Fourier transforms.

Three families are closed under everything the pipelines need:

* ``BSpline1D`` -- finite linear combinations of iterated box convolutions.
  Pointwise values come from the inclusion-exclusion formula for the
  convolution of ``q`` indicators, transforms are products of shifted sinc
  factors, and the family is closed under sums, scalar multiples,
  convolution and conjugate reflection.
* ``Gaussian1D`` -- polynomial times ``exp(-pi (x/sigma)^2)``; closed under
  the transform (a Hermite-type recursion maps polynomials to polynomials).
* ``DiscreteProfile`` -- finitely supported functions on Z^z whose
  transforms are trigonometric polynomials on the torus.

A ``WeightProfile`` is a tensor product of one-dimensional real factors and
an optional discrete factor.
"""

import numpy as np
import numpy.polynomial.polynomial as npoly

from .cps import Window
from .errors import ExclusionTooClose

_TWO_PI_I = 2j * np.pi


def _plus_pow(u, p):
    """(u)_+^p with the convention 0^0 = 0 (half-open indicators)."""
    if p == 0:
        return (u > 0).astype(float)
    return np.where(u > 0, u, 0.0) ** p


class BSpline1D:
    """Linear combination of convolutions of box indicators on R.

    terms : list of (coeff, boxes) with complex coeff and boxes a list of
    (a, b) intervals; the term is coeff * 1_[a1,b1] * ... * 1_[aq,bq]
    (* = convolution; a single box is the plain indicator).
    """

    def __init__(self, terms):
        cleaned = []
        for coeff, boxes in terms:
            boxes = [(float(a), float(b)) for a, b in boxes]
            if not boxes:
                raise ValueError("each term needs at least one box")
            for a, b in boxes:
                if b <= a:
                    raise ValueError("boxes must have positive width")
            cleaned.append((complex(coeff), boxes))
        self.terms = cleaned

    # -- algebra ----------------------------------------------------------

    def __add__(self, other):
        return BSpline1D(self.terms + other.terms)

    def __rmul__(self, scalar):
        return BSpline1D([(scalar * c, boxes) for c, boxes in self.terms])

    def convolve(self, other):
        terms = [(c1 * c2, b1 + b2)
                 for c1, b1 in self.terms for c2, b2 in other.terms]
        return BSpline1D(terms)

    def reflect_conj(self):
        """x -> conj(f(-x)); boxes reflect, coefficients conjugate."""
        terms = [(np.conj(c), [(-b, -a) for a, b in boxes])
                 for c, boxes in self.terms]
        return BSpline1D(terms)

    # -- evaluation -------------------------------------------------------

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for coeff, boxes in self.terms:
            out += coeff * _box_conv_values(boxes, x)
        return out

    def antiderivative_values(self, x):
        """Exact running integral int_{-inf}^x of the profile."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for coeff, boxes in self.terms:
            out += coeff * _box_conv_antiderivative(boxes, x)
        return out

    def integral(self):
        return sum(c * np.prod([b - a for a, b in boxes])
                   for c, boxes in self.terms)

    def abs_integral_bound(self):
        """Upper bound on int |f| (sum of term variations)."""
        return sum(abs(c) * np.prod([b - a for a, b in boxes])
                   for c, boxes in self.terms)

    def support(self):
        lo = min(sum(a for a, _ in boxes) for _, boxes in self.terms)
        hi = max(sum(b for _, b in boxes) for _, boxes in self.terms)
        return lo, hi

    def sup_bound(self):
        """Upper bound on ||f||_inf."""
        total = 0.0
        for c, boxes in self.terms:
            widths = sorted(b - a for a, b in boxes)
            total += abs(c) * np.prod(widths[:-1]) if len(widths) > 1 \
                else abs(c)
        return total

    def lipschitz_bound(self):
        """Upper bound on the slope; inf for single-box terms."""
        total = 0.0
        for c, boxes in self.terms:
            if len(boxes) < 2:
                return np.inf
            widths = np.array(sorted(b - a for a, b in boxes))
            # pull out the narrowest box; the rest is bounded by the
            # product of its widths except the largest
            rest = widths[1:]
            total += abs(c) * (np.prod(rest[:-1]) if rest.size > 1 else 1.0)
        return total

    # -- transform --------------------------------------------------------

    def transform(self):
        terms = self.terms

        def value(k):
            k = np.asarray(k, dtype=float)
            out = np.zeros(k.shape, dtype=complex)
            for coeff, boxes in terms:
                factor = np.ones(k.shape, dtype=complex) * coeff
                for a, b in boxes:
                    w = b - a
                    factor = factor * (w * np.sinc(w * k)
                                       * np.exp(_TWO_PI_I * 0.5 * (a + b) * k))
                out += factor
            return out

        def envelope(s):
            s = np.asarray(s, dtype=float)
            out = np.zeros(s.shape)
            for coeff, boxes in terms:
                mass = abs(coeff) * np.prod([b - a for a, b in boxes])
                q = len(boxes)
                with np.errstate(divide="ignore", over="ignore"):
                    decay = abs(coeff) * np.where(
                        s > 0, (np.pi * np.maximum(s, 1e-300)) ** (-q), np.inf)
                out += np.minimum(mass, decay)
            return out

        p = min(len(boxes) for _, boxes in terms)
        c_env = sum(abs(c) * 2.0 ** p
                    * max(np.prod([b - a for a, b in boxes]),
                          np.pi ** (-len(boxes)))
                    for c, boxes in terms)
        return Transformed1D(value, envelope, c_env, p)


def _subset_width_sums(boxes):
    widths = np.array([b - a for a, b in boxes])
    q = len(boxes)
    sums = np.zeros(2 ** q)
    signs = np.ones(2 ** q)
    for s in range(2 ** q):
        bits = [(s >> i) & 1 for i in range(q)]
        sums[s] = float(np.dot(bits, widths))
        signs[s] = -1.0 if sum(bits) % 2 else 1.0
    return sums, signs


def _box_conv_values(boxes, x):
    from math import factorial
    q = len(boxes)
    if q == 1:
        a, b = boxes[0]
        return ((x >= a) & (x <= b)).astype(float)
    lo = sum(a for a, _ in boxes)
    hi = sum(b for _, b in boxes)
    sums, signs = _subset_width_sums(boxes)
    u = x[..., None] - lo - sums
    vals = np.einsum("...s,s->...", _plus_pow(u, q - 1), signs) \
        / factorial(q - 1)
    return np.where((x > lo) & (x < hi), vals, 0.0)


def _box_conv_antiderivative(boxes, x):
    from math import factorial
    q = len(boxes)
    lo = sum(a for a, _ in boxes)
    hi = sum(b for _, b in boxes)
    sums, signs = _subset_width_sums(boxes)
    u = x[..., None] - lo - sums
    vals = np.einsum("...s,s->...", _plus_pow(u, q), signs) / factorial(q)
    mass = float(np.prod([b - a for a, b in boxes]))
    return np.where(x <= lo, 0.0, np.where(x >= hi, mass, vals))


class Gaussian1D:
    """q(x) * exp(-pi (x/sigma)^2) with a complex polynomial q."""

    def __init__(self, poly, sigma):
        self.poly = np.atleast_1d(np.asarray(poly, dtype=complex))
        if sigma <= 0:
            raise ValueError("sigma must be > 0")
        self.sigma = float(sigma)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return npoly.polyval(x, self.poly) * np.exp(-np.pi * (x / self.sigma) ** 2)

    def integral(self):
        # int x^j exp(-pi x^2/s^2): zero for odd j, sigma-scaled moments else
        total = 0.0 + 0.0j
        s = self.sigma
        for j, c in enumerate(self.poly):
            if j % 2 == 1 or c == 0:
                continue
            # int x^j e^{-a x^2} = (j-1)!! / (2a)^{j/2} * sqrt(pi/a), a = pi/s^2
            a = np.pi / s ** 2
            dfact = float(np.prod(np.arange(j - 1, 0, -2))) if j >= 2 else 1.0
            total += c * dfact / (2 * a) ** (j // 2) * np.sqrt(np.pi / a)
        return total

    def support(self):
        return -np.inf, np.inf

    def transform(self):
        """Closed form: another Gaussian1D profile, evaluated directly."""
        out = self.transform_profile()

        def value(k):
            return out(np.asarray(k, dtype=float))

        grid = np.concatenate([[0.0], np.geomspace(1e-3, 1e3, 4001)])
        vals = np.abs(out(grid))
        p = 8
        c_env = float(np.max(vals * (1.0 + grid) ** p)) * 1.0001

        def envelope(s):
            s = np.asarray(s, dtype=float)
            return c_env / (1.0 + np.abs(s)) ** p

        return Transformed1D(value, envelope, c_env, p)

    def transform_profile(self):
        a = np.pi * self.sigma ** 2
        pj = np.array([1.0 + 0.0j])
        total = np.zeros(1, dtype=complex)
        for j, c in enumerate(self.poly):
            if j > 0:
                pj = npoly.polyadd(npoly.polyder(pj),
                                   npoly.polymul([0.0, -2.0 * a], pj))
            if c != 0:
                total = npoly.polyadd(total, c * (_TWO_PI_I ** (-j)) * pj)
        return Gaussian1D(self.sigma * total, 1.0 / self.sigma)

    def weighted_sup(self, power):
        """sup over x of (1 + x^power) |phi(x)|, by derivative analysis."""
        return _weighted_gaussian_sup(self, power, 0.0)


class TaperedGaussian1D:
    """Gaussian times a compactly supported B-spline taper (or its
    complement); used for splitting a Schwartz-class factor.  Evaluation
    only -- no closed-form transform."""

    def __init__(self, gaussian, taper, complement=False):
        self.gaussian = gaussian
        self.taper = taper
        self.complement = complement

    def __call__(self, x):
        t = self.taper(np.asarray(x, dtype=float)).real
        t = 1.0 - t if self.complement else t
        return self.gaussian(x) * t

    def support(self):
        if self.complement:
            return -np.inf, np.inf
        return self.taper.support()

    def integral(self):
        raise NotImplementedError("tapered factors have no closed integral")

    def transform(self):
        raise NotImplementedError("tapered factors have no closed transform")


class Transformed1D:
    """Closed-form transform of a 1D factor with a decay envelope."""

    def __init__(self, value, envelope, c_env, p):
        self.value = value
        self.envelope = envelope
        self.c_env = c_env
        self.p = p


class DiscreteProfile:
    """Finitely supported complex function on Z^z."""

    def __init__(self, values):
        self.values = {tuple(int(c) for c in np.atleast_1d(k)): complex(v)
                       for k, v in values.items()}
        if not self.values:
            raise ValueError("discrete profile must have nonempty support")
        self.dim = len(next(iter(self.values)))

    def __call__(self, j):
        j = np.atleast_2d(np.round(j).astype(np.int64))
        return np.array([self.values.get(tuple(row), 0.0) for row in j])

    def sum_abs(self):
        return sum(abs(v) for v in self.values.values())

    def total(self):
        return sum(self.values.values())

    def sup(self):
        return max(abs(v) for v in self.values.values())

    def reflect_conj(self):
        return DiscreteProfile({tuple(-c for c in k): np.conj(v)
                                for k, v in self.values.items()})

    def transform_value(self, theta):
        """Trigonometric polynomial on the torus, theta of shape (count, z)."""
        theta = np.atleast_2d(np.asarray(theta, dtype=float))
        out = np.zeros(theta.shape[0], dtype=complex)
        for k, v in self.values.items():
            out += v * np.exp(_TWO_PI_I * theta @ np.array(k, dtype=float))
        return out


class WeightProfile:
    """Tensor product of per-axis real factors and a discrete factor."""

    def __init__(self, axes=None, discrete=None, meta=None):
        self.axes = list(axes) if axes else []
        self.discrete = discrete
        self.meta = dict(meta or {})

    @property
    def dim_real(self):
        return len(self.axes)

    def eval_internal(self, star_real, star_z=None):
        count = None
        if self.axes:
            star_real = np.atleast_2d(np.asarray(star_real, dtype=float))
            count = star_real.shape[0]
            out = np.ones(count, dtype=complex)
            for i, axis in enumerate(self.axes):
                out = out * axis(star_real[:, i])
        else:
            out = None
        if self.discrete is not None:
            star_z = np.atleast_2d(star_z)
            vals = self.discrete(star_z)
            out = vals if out is None else out * vals
        if out is None:
            raise ValueError("profile has no factors")
        return out

    def integral(self):
        total = 1.0 + 0.0j
        for axis in self.axes:
            total *= axis.integral()
        if self.discrete is not None:
            total *= self.discrete.total()
        return total

    def reflect_conj(self):
        axes = [ax.reflect_conj() for ax in self.axes]
        disc = self.discrete.reflect_conj() if self.discrete else None
        return WeightProfile(axes, disc, self.meta)

    def support_real(self):
        return [ax.support() for ax in self.axes]

    def lipschitz_bound(self):
        """Slope bound along any internal real direction (tensor product)."""
        if not self.axes:
            return 0.0
        sups, lips = [], []
        for ax in self.axes:
            lips.append(ax.lipschitz_bound() if hasattr(ax, "lipschitz_bound")
                        else np.inf)
            sups.append(ax.sup_bound() if hasattr(ax, "sup_bound") else np.inf)
        disc = self.discrete.sup() if self.discrete else 1.0
        total = 0.0
        for i in range(len(self.axes)):
            others = np.prod([sups[j] for j in range(len(self.axes)) if j != i]) \
                if len(self.axes) > 1 else 1.0
            total = max(total, lips[i] * others)
        return total * disc


class TransformedWeight:
    """Evaluates the +2*pi*i transform of a WeightProfile on dual points."""

    def __init__(self, profile):
        self.profile = profile
        self.axis_transforms = [ax.transform() for ax in profile.axes]
        self.discrete = profile.discrete
        self.integral = complex(profile.integral())
        sup_disc = self.discrete.sum_abs() if self.discrete else 1.0
        self.sup_discrete = sup_disc
        if self.axis_transforms:
            self.c_env = float(np.prod([t.c_env for t in self.axis_transforms])
                               ) * sup_disc
            self.p = min(t.p for t in self.axis_transforms)
        else:
            self.c_env = sup_disc
            self.p = 0

    def value(self, k_real, k_z=None):
        """Transform at dual internal points (k_real (count,m), k_z (count,z))."""
        out = None
        if self.axis_transforms:
            k_real = np.atleast_2d(np.asarray(k_real, dtype=float))
            out = np.ones(k_real.shape[0], dtype=complex)
            for i, t in enumerate(self.axis_transforms):
                out = out * t.value(k_real[:, i])
        if self.discrete is not None:
            vals = self.discrete.transform_value(k_z)
            out = vals if out is None else out * vals
        if out is None:
            raise ValueError("profile has no factors")
        return out

    def envelope(self, s):
        """Bound on |transform| when the real dual block has norm >= s."""
        s = np.asarray(s, dtype=float)
        m = len(self.axis_transforms)
        if m == 0:
            return np.full(s.shape, self.sup_discrete)
        if m == 1:
            return self.axis_transforms[0].envelope(s) * self.sup_discrete
        best = np.zeros(s.shape)
        m0 = [float(t.envelope(np.zeros(1))[0]) for t in self.axis_transforms]
        for i, t in enumerate(self.axis_transforms):
            others = np.prod([m0[j] for j in range(m) if j != i])
            best = np.maximum(best, t.envelope(s / np.sqrt(m)) * others)
        return best * self.sup_discrete

    def verify_envelope(self, samples=1000, k_hi=1e3, rng=None):
        """Sample |transform| at log-spaced radii against the envelope."""
        rng = rng or np.random.default_rng(0)
        radii = np.geomspace(1e-3, k_hi, samples)
        m = max(len(self.axis_transforms), 1)
        if self.axis_transforms:
            dirs = rng.normal(size=(samples, len(self.axis_transforms)))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            pts = dirs * radii[:, None]
        else:
            pts = None
        kz = rng.random((samples, self.discrete.dim)) if self.discrete else None
        vals = np.abs(self.value(pts, kz))
        env = self.envelope(radii) if self.axis_transforms else \
            np.full(samples, self.sup_discrete)
        return bool(np.all(vals <= env * (1 + 1e-9) + 1e-300)), vals, env


def transform_weight(profile):
    """Closed-form transform of a weight profile with decay envelope."""
    return TransformedWeight(profile)


# ---------------------------------------------------------------------------
# Bump construction


def _bump_axis(a, b, margin, order):
    """1D plateau bump: outer box convolved with order-1 unit-mass boxes.

    Equals 1 on [a - margin, b + margin], vanishes outside
    [a - 2 margin, b + 2 margin], slope bounded by order/margin-ish.
    """
    if order < 2:
        raise ValueError("bump order must be >= 2")
    w = margin / (order - 1)
    boxes = [(a - 1.5 * margin, b + 1.5 * margin)]
    coeff = 1.0
    for _ in range(order - 1):
        boxes.append((-w / 2.0, w / 2.0))
        coeff /= w
    return BSpline1D([(coeff, boxes)])


def _merged_intervals(intervals, merge_gap):
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    out = [list(ivs[0])]
    for a, b in ivs[1:]:
        if a - out[-1][1] <= merge_gap:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return out


def build_bump(window, margin=None, exclude=None, order=2):
    """Plateau weight: exactly 1 on the window, support within margin 2m.

    Per real axis the bump is an outer indicator convolved with ``order - 1``
    normalized boxes of total width ``margin`` (an explicit element of the
    convolution span), so the plateau and support are exact.  The discrete
    factor is the indicator of the window's finite set.

    When ``exclude`` is given (an internal point, as (real, discrete) or a
    bare real point), the construction guarantees the bump vanishes there;
    the point must be at distance > 2 * margin from the window.
    """
    if margin is None:
        margin = window.margin
    if window.dim_real and margin <= 0:
        raise ValueError("margin must be > 0 for a real window factor")

    exclude_real = exclude_z = None
    if exclude is not None:
        if isinstance(exclude, tuple) and len(exclude) == 2 and \
                window.dim_discrete:
            exclude_real, exclude_z = exclude
        else:
            exclude_real = exclude
        if exclude_real is not None:
            exclude_real = np.atleast_1d(np.asarray(exclude_real, dtype=float))

    axes = []
    if window.dim_real == 1:
        merged = _merged_intervals([(lo[0], hi[0]) for lo, hi in
                                    window.real_boxes], 2.0 * margin)
        gaps = [merged[i + 1][0] - merged[i][1] for i in range(len(merged) - 1)]
        if any(g <= 4.0 * margin for g in gaps):
            raise ValueError(
                "window intervals separated by less than 4 * margin; "
                "use a smaller margin")
        profile = _bump_axis(merged[0][0], merged[0][1], margin, order)
        for a, b in merged[1:]:
            profile = profile + _bump_axis(a, b, margin, order)
        axes.append(profile)
    elif window.dim_real > 1:
        if len(window.real_boxes) != 1:
            raise NotImplementedError(
                "multi-box windows are only supported for a 1D real factor")
        lo, hi = window.real_boxes[0]
        for a, b in zip(lo, hi):
            axes.append(_bump_axis(a, b, margin, order))

    discrete = None
    if window.dim_discrete:
        discrete = DiscreteProfile({p: 1.0 for p in window.discrete})

    if exclude is not None:
        excluded_by_discrete = False
        if window.dim_discrete and exclude_z is not None:
            key = tuple(int(round(c)) for c in np.atleast_1d(exclude_z))
            excluded_by_discrete = key not in set(window.discrete)
        if not excluded_by_discrete and window.dim_real:
            dist = _distance_to_real_window(exclude_real, window)
            if dist <= 2.0 * margin + 1e-12:
                raise ExclusionTooClose(
                    f"excluded point at distance {dist:.6g} <= 2 * margin "
                    f"= {2 * margin:.6g} from the window")
        elif not excluded_by_discrete and not window.dim_real:
            raise ExclusionTooClose(
                "excluded point lies in the discrete window")

    meta = {"window": window, "margin": float(margin), "order": int(order),
            "plateau_pad": float(margin), "support_pad": 2.0 * float(margin)}
    return WeightProfile(axes, discrete, meta)


def _distance_to_real_window(point, window):
    best = np.inf
    for lo, hi in window.real_boxes:
        gap = np.maximum(np.maximum(lo - point, point - hi), 0.0)
        best = min(best, float(np.linalg.norm(gap)))
    return best


# ---------------------------------------------------------------------------
# Schwartz-class splitting


class TailDescriptor:
    """Far-field remainder of a Gaussian factor after tapering."""

    def __init__(self, func, r_cut, power, bound):
        self.func = func
        self.r_cut = r_cut
        self.power = power
        self.bound = bound

    def __call__(self, x):
        return self.func(x)


def _weighted_gaussian_sup(gaussian, power, x_min):
    """sup over |x| >= x_min of (1 + |x|^power) |phi(x)|.

    The derivative of the squared weighted profile is a polynomial times a
    Gaussian; beyond its largest real root the profile decreases, so a dense
    scan of [x_min, root] plus the endpoint value is an upper bound.
    """
    q = gaussian.poly
    s = gaussian.sigma
    w = np.zeros(power + 1)
    w[0] = 1.0
    w[power] = 1.0
    q2 = npoly.polymul(q, np.conj(q))
    body = npoly.polymul(npoly.polymul(w, w), q2.real)
    deriv = npoly.polyadd(npoly.polyder(body),
                          npoly.polymul([0.0, -4.0 * np.pi / s ** 2], body))
    roots = np.roots(deriv[::-1]) if np.any(np.abs(deriv) > 0) else np.array([])
    real_roots = roots[np.abs(roots.imag) < 1e-9].real if roots.size else \
        np.array([])
    x_hi = max([x_min + 1.0] + [abs(r) for r in real_roots]) + 1.0

    def weighted(x):
        return (1.0 + np.abs(x) ** power) * np.abs(gaussian(x))

    grid = np.linspace(x_min, x_hi, 8192)
    return float(np.max(weighted(grid)))


def schwartz_split(phi, r_cut, power=2):
    """Split a Gaussian factor into a tapered compact part plus a tail.

    Returns (phi1, tail) where phi1 = phi * taper vanishes outside
    [-r_cut - 1, r_cut + 1] and equals phi on [-r_cut, r_cut]; the tail
    descriptor carries a verified bound on sup (1 + |x|^power)|phi2| over
    the region where the tail is nonzero.  power = 2 * d for the
    d-dimensional weighted sup norm.
    """
    if isinstance(phi, WeightProfile):
        if len(phi.axes) != 1 or not isinstance(phi.axes[0], Gaussian1D):
            raise ValueError("schwartz_split expects a single Gaussian factor")
        phi = phi.axes[0]
    if r_cut < 0:
        raise ValueError("r_cut must be >= 0")
    if r_cut == 0:
        taper = BSpline1D([(0.0, [(-1.0, 1.0)])])
        phi1 = TaperedGaussian1D(phi, taper, complement=False)
        bound = _weighted_gaussian_sup(phi, power, 0.0)
        tail = TailDescriptor(TaperedGaussian1D(phi, taper, complement=True),
                              r_cut, power, bound)
        return phi1, tail
    taper_window = Window([([-r_cut], [r_cut])])
    taper = build_bump(taper_window, margin=0.5).axes[0]
    phi1 = TaperedGaussian1D(phi, taper, complement=False)
    phi2 = TaperedGaussian1D(phi, taper, complement=True)
    bound = _weighted_gaussian_sup(phi, power, r_cut)
    return phi1, TailDescriptor(phi2, r_cut, power, bound)
