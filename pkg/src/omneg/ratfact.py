"""Rational functions of frequency and the Wiener-Hopf toolkit.

Fourier convention: f(w) = int f(t) exp(i w t) dt, so a causal function
(supported on t > 0) has all of its poles in the lower half w-plane.

A :class:`Rational` is kept as a *sum of factored terms*

    sum_k  g_k * prod(w - z_k) / prod(w - p_k)

so that products, projections and residues never have to re-root a
numerator.  Only :meth:`Rational.collapse` (used by the spectral
factorization) finds numerator roots.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np

# relative tolerance for treating two poles as the same pole
CLUSTER_RTOL = 1e-6
# relative tolerance for cancelling a zero against a pole
CANCEL_RTOL = 1e-9
# poles closer than this (relative) to the real axis are rejected
AXIS_RTOL = 1e-9


class RationalError(ValueError):
    """Raised for ill-posed rational-function operations."""


def _scale_of(values) -> float:
    mags = np.abs(np.asarray(values, dtype=complex))
    mags = mags[mags > 0]
    if mags.size == 0:
        return 1.0
    return float(np.exp(np.mean(np.log(mags))))


def poly_roots(coeffs) -> np.ndarray:
    """Roots of a polynomial given in descending powers.

    Companion-matrix eigenvalues followed by one Newton polish step per
    root (kept only when it lowers the residual).
    """
    c = np.atleast_1d(np.asarray(coeffs, dtype=complex))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        raise RationalError("zero polynomial has no well-defined roots")
    c = c[nz[0]:]
    if c.size == 1:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c).astype(complex)
    dc = np.polyder(c)
    for k, x in enumerate(roots):
        fx = np.polyval(c, x)
        dfx = np.polyval(dc, x)
        if dfx != 0:
            y = x - fx / dfx
            if abs(np.polyval(c, y)) < abs(fx):
                roots[k] = y
    return roots


def _cluster(points, rtol=CLUSTER_RTOL, scale=None):
    """Group nearly equal complex numbers.

    Returns (representatives, multiplicities, labels)."""
    pts = np.asarray(points, dtype=complex)
    if scale is None:
        scale = max(_scale_of(pts), 1e-300)
    reps: list[complex] = []
    mult: list[int] = []
    labels = np.empty(pts.size, dtype=int)
    for i, x in enumerate(pts):
        for j, r in enumerate(reps):
            if abs(x - r) <= rtol * max(abs(r), scale):
                mult[j] += 1
                labels[i] = j
                break
        else:
            reps.append(complex(x))
            mult.append(1)
            labels[i] = len(reps) - 1
    # replace each cluster by its mean so symmetric splits cancel to 2nd order
    for j in range(len(reps)):
        if mult[j] > 1:
            reps[j] = complex(np.mean(pts[labels == j]))
    return np.array(reps, dtype=complex), np.array(mult, dtype=int), labels


def _cancel(zeros, poles, rtol=CANCEL_RTOL):
    zeros = list(zeros)
    keep_p = []
    for p in poles:
        tol = rtol * max(abs(p), 1e-300)
        for k, z in enumerate(zeros):
            if abs(z - p) <= tol:
                del zeros[k]
                break
        else:
            keep_p.append(p)
    return np.array(zeros, dtype=complex), np.array(keep_p, dtype=complex)


def _series_mul(a, b, n):
    return np.convolve(a, b)[:n]


def _inv_linear_series(c, n):
    """Taylor coefficients of 1/(c + d) in d, to order n-1."""
    k = np.arange(n)
    return (-1.0) ** k / c ** (k + 1)


@dataclass(frozen=True)
class PartialFractions:
    """poly (ascending powers) + sum_p sum_j coeffs[p][j] / (w - p)**(j+1)."""

    poly: np.ndarray
    poles: np.ndarray
    coeffs: tuple

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape, dtype=complex)
        for k, a in enumerate(self.poly):
            out = out + a * w**k
        for p, cs in zip(self.poles, self.coeffs):
            for j, c in enumerate(cs):
                out = out + c / (w - p) ** (j + 1)
        return out

    def select(self, lower: bool) -> "PartialFractions":
        keep = [k for k, p in enumerate(self.poles) if (p.imag < 0) == lower]
        return PartialFractions(
            np.zeros(0, dtype=complex),
            self.poles[keep],
            tuple(self.coeffs[k] for k in keep),
        )

    def residues(self) -> np.ndarray:
        return np.array([cs[0] for cs in self.coeffs], dtype=complex)

    def max_order(self) -> int:
        return max((len(cs) for cs in self.coeffs), default=0)

    def to_rational(self, with_poly: bool = True) -> "Rational":
        terms = []
        if with_poly:
            for k, a in enumerate(self.poly):
                if a != 0:
                    terms.append((a, np.zeros(k), np.zeros(0)))
        for p, cs in zip(self.poles, self.coeffs):
            for j, c in enumerate(cs):
                if c != 0:
                    terms.append((c, np.zeros(0), np.full(j + 1, p)))
        return Rational(terms)


class Rational:
    """Sum of factored rational terms in the frequency variable w."""

    __slots__ = ("terms",)

    def __init__(self, terms=()):
        clean = []
        for g, z, p in terms:
            g = complex(g)
            if g == 0:
                continue
            z = np.atleast_1d(np.asarray(z, dtype=complex))
            p = np.atleast_1d(np.asarray(p, dtype=complex))
            z, p = _cancel(z, p)
            clean.append((g, z, p))
        self.terms = tuple(clean)

    # ---- construction -------------------------------------------------
    @classmethod
    def const(cls, c) -> "Rational":
        return cls([(c, [], [])])

    @classmethod
    def zpk(cls, zeros, poles, gain=1.0) -> "Rational":
        return cls([(gain, zeros, poles)])

    @classmethod
    def from_coeffs(cls, num, den=(1.0,)) -> "Rational":
        """Build from coefficient lists in *ascending* powers of w."""
        num = np.trim_zeros(np.asarray(num, dtype=complex), "b")
        den = np.trim_zeros(np.asarray(den, dtype=complex), "b")
        if den.size == 0:
            raise RationalError("zero denominator")
        if num.size == 0:
            return cls()
        gain = num[-1] / den[-1]
        return cls([(gain, poly_roots(num[::-1]), poly_roots(den[::-1]))])

    # ---- basic algebra -------------------------------------------------
    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        out = np.zeros(w.shape, dtype=complex)
        for g, z, p in self.terms:
            val = np.full(w.shape, g, dtype=complex)
            for x in z:
                val = val * (w - x)
            for x in p:
                val = val / (w - x)
            out = out + val
        return out

    def __bool__(self):
        return bool(self.terms)

    def __neg__(self):
        return Rational([(-g, z, p) for g, z, p in self.terms])

    def __add__(self, other):
        other = _as_rational(other)
        return Rational(self.terms + other.terms)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-_as_rational(other))

    def __rsub__(self, other):
        return _as_rational(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return Rational([(g * other, z, p) for g, z, p in self.terms])
        other = _as_rational(other)
        terms = []
        for g1, z1, p1 in self.terms:
            for g2, z2, p2 in other.terms:
                terms.append((g1 * g2, np.concatenate([z1, z2]), np.concatenate([p1, p2])))
        return Rational(terms)

    __rmul__ = __mul__

    def inverse(self) -> "Rational":
        single = self if len(self.terms) == 1 else self.collapse()
        if not single.terms:
            raise RationalError("cannot invert the zero function")
        g, z, p = single.terms[0]
        return Rational([(1.0 / g, p, z)])

    def __truediv__(self, other):
        if np.isscalar(other):
            return self * (1.0 / other)
        return self * _as_rational(other).inverse()

    def __pow__(self, n: int):
        out = Rational.const(1.0)
        for _ in range(n):
            out = out * self
        return out

    # ---- symmetry operations ------------------------------------------
    def reflect(self) -> "Rational":
        """w -> f(-w)."""
        return Rational([(g * (-1.0) ** (len(z) - len(p)), -z, -p) for g, z, p in self.terms])

    def conj(self) -> "Rational":
        """w -> conj(f(conj(w))); equals conj(f(w)) on the real axis."""
        return Rational([(np.conj(g), np.conj(z), np.conj(p)) for g, z, p in self.terms])

    def conj_reflect(self) -> "Rational":
        """Spectrum of conj(f(t)) given the spectrum f(w) of f(t)."""
        return self.reflect().conj()

    def times_w(self, k: int = 1) -> "Rational":
        """Multiply by w**k."""
        return Rational([(g, np.concatenate([z, np.zeros(k)]), p) for g, z, p in self.terms])

    # ---- structure -----------------------------------------------------
    def all_poles(self) -> np.ndarray:
        if not self.terms:
            return np.zeros(0, dtype=complex)
        return np.concatenate([p for _, _, p in self.terms])

    def poles(self) -> np.ndarray:
        """Distinct poles (clustered)."""
        ps = self.all_poles()
        if ps.size == 0:
            return ps
        return _cluster(ps)[0]

    def degree(self) -> int:
        """Largest (numerator - denominator) degree over the terms."""
        if not self.terms:
            return -(10**9)
        return max(len(z) - len(p) for _, z, p in self.terms)

    def is_strictly_proper(self) -> bool:
        pf = self.partial_fractions()
        return bool(np.all(np.abs(pf.poly) <= 1e-12 * max(1.0, _pf_norm(pf))))

    def collapse(self) -> "Rational":
        """Combine all terms into one factored term (re-roots the numerator)."""
        if len(self.terms) <= 1:
            return self
        all_p = self.all_poles()
        scale = _scale_of(np.concatenate([all_p] + [z for _, z, _ in self.terms]))
        if all_p.size:
            reps, _, _ = _cluster(all_p, scale=scale)
            need = np.zeros(reps.size, dtype=int)
            term_labels = []
            for _, _, p in self.terms:
                cnt = np.zeros(reps.size, dtype=int)
                for x in p:
                    cnt[np.argmin(np.abs(reps - x))] += 1
                term_labels.append(cnt)
                need = np.maximum(need, cnt)
        else:
            reps = np.zeros(0, dtype=complex)
            need = np.zeros(0, dtype=int)
            term_labels = [np.zeros(0, dtype=int) for _ in self.terms]
        # work in x = w / scale so the coefficients stay balanced
        num = np.zeros(1, dtype=complex)
        for (g, z, _), cnt in zip(self.terms, term_labels):
            extra = np.repeat(reps, need - cnt)
            roots = np.concatenate([z, extra]) / scale
            c = np.poly(roots) if roots.size else np.ones(1, dtype=complex)
            c = c * g * scale ** (len(z) + extra.size - 0)
            num = np.polyadd(num, c)
        mag = np.max(np.abs(num)) if num.size else 0.0
        if mag == 0:
            return Rational()
        first = np.flatnonzero(np.abs(num) > 1e-12 * mag)[0]
        num = num[first:]
        zeros = poly_roots(num) * scale
        den_roots = np.repeat(reps, need)
        # leading coefficient of prod(w - z) in w-units
        gain = num[0] / scale ** (num.size - 1)
        return Rational([(gain, zeros, den_roots)])

    # ---- partial fractions --------------------------------------------
    def partial_fractions(self) -> PartialFractions:
        all_p = self.all_poles()
        reps = np.zeros(0, dtype=complex)
        if all_p.size:
            reps, _, _ = _cluster(all_p)
        acc: dict[int, np.ndarray] = {}
        poly = np.zeros(1, dtype=complex)
        for g, z, p in self.terms:
            if p.size:
                lab = np.array([int(np.argmin(np.abs(reps - x))) for x in p])
            else:
                lab = np.zeros(0, dtype=int)
            uniq = np.unique(lab)
            for j in uniq:
                k = int(np.sum(lab == j))
                pj = reps[j]
                series = np.array([g], dtype=complex)
                for x in z:
                    series = _series_mul(series, np.array([pj - x, 1.0]), k)
                for jj in uniq:
                    if jj == j:
                        continue
                    inv = _inv_linear_series(pj - reps[jj], k)
                    for _ in range(int(np.sum(lab == jj))):
                        series = _series_mul(series, inv, k)
                series = np.concatenate([series, np.zeros(k - series.size)])
                # coefficient of 1/(w-p)^(m) is series[k-m]
                cs = series[::-1].copy()
                prev = acc.get(j)
                if prev is None:
                    acc[j] = cs
                else:
                    n = max(prev.size, cs.size)
                    acc[j] = np.pad(prev, (0, n - prev.size)) + np.pad(cs, (0, n - cs.size))
            d = len(z) - len(p)
            if d >= 0:
                # expansion at infinity in u = 1/w
                n = d + 1
                ser = np.array([g], dtype=complex)
                for x in z:
                    ser = _series_mul(ser, np.array([1.0, -x]), n)
                for x in p:
                    ser = _series_mul(ser, x ** np.arange(n), n)
                ser = np.concatenate([ser, np.zeros(n - ser.size)])
                # g w^d (1 + e1/w + ...) -> ascending polynomial coefficients
                asc = ser[::-1]
                poly = np.pad(poly, (0, max(0, asc.size - poly.size)))
                poly[: asc.size] += asc
        keys = sorted(acc)
        poles = reps[keys] if keys else np.zeros(0, dtype=complex)
        coeffs = tuple(np.trim_zeros(acc[k], "b") if np.any(acc[k]) else acc[k][:1] for k in keys)
        return PartialFractions(poly, poles, coeffs)

    def __repr__(self):
        return f"Rational({len(self.terms)} terms, poles={np.round(self.poles(), 6)})"


def _pf_norm(pf: PartialFractions) -> float:
    vals = [np.max(np.abs(c)) for c in pf.coeffs if c.size] + [0.0]
    return float(max(vals))


def _as_rational(x) -> Rational:
    if isinstance(x, Rational):
        return x
    if np.isscalar(x):
        return Rational.const(x) if x != 0 else Rational()
    raise TypeError(f"cannot interpret {type(x).__name__} as a rational function")


# ----------------------------------------------------------------------
# spectral factorization and projections
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralFactors:
    """R = plus * minus with plus holding the lower-half-plane roots."""

    plus: Rational
    minus: Rational
    plus_zeros: np.ndarray
    plus_poles: np.ndarray
    gain: float

    def __call__(self, w):
        return self.plus(w) * self.minus(w)


def _check_axis(points, scale, what):
    bad = np.abs(np.asarray(points).imag) <= AXIS_RTOL * scale
    return bad


def spectral_factorize(spectrum) -> SpectralFactors:
    """Split a rational function that is positive on the real axis.

    ``spectrum`` may be a :class:`Rational` or anything with a
    ``to_rational()`` method.  Poles and zeros are assigned by half-plane;
    real zeros must come in even multiplicity and are shared equally.
    """
    R = spectrum.to_rational() if hasattr(spectrum, "to_rational") else spectrum
    R = R.collapse()
    if not R.terms:
        raise RationalError("not factorizable: spectrum vanishes identically")
    g, z, p = R.terms[0]
    scale = _scale_of(np.concatenate([z, p]))
    if np.any(_check_axis(p, scale, "pole")):
        raise RationalError("non-integrable spectrum: pole on the real axis")
    if (len(z) - len(p)) % 2:
        raise RationalError("not factorizable: odd total degree")
    on_axis = _check_axis(z, scale, "zero")
    real_z = z[on_axis].real
    plus_z = list(z[(~on_axis) & (z.imag < 0)])
    if real_z.size:
        reps, mult, _ = _cluster(real_z.astype(complex), scale=scale)
        for r, m in zip(reps, mult):
            if m % 2:
                raise RationalError(
                    f"not factorizable: real zero at {r.real:.6g} of odd multiplicity {m}"
                )
            plus_z.extend([complex(r.real)] * (m // 2))
    plus_p = p[p.imag < 0]
    n_lower_p = plus_p.size
    if 2 * n_lower_p != p.size:
        raise RationalError("poles are not in conjugate pairs; spectrum is not real")
    lower_z = (~on_axis) & (z.imag < 0)
    if 2 * int(np.sum(lower_z)) + real_z.size != z.size:
        raise RationalError("zeros are not in conjugate pairs; spectrum is not real")
    # sign/phase of the gain: R must be positive on the axis
    probe = np.array([0.0, 1.0, -1.0]) * scale + 0.37 * scale
    vals = R(probe)
    if np.any(vals.real <= 0) or np.any(np.abs(vals.imag) > 1e-8 * np.abs(vals)):
        raise RationalError("not factorizable: spectrum is not positive on the real axis")
    plus_z = np.array(plus_z, dtype=complex)
    # |g| with the phase fixed by conjugate pairing: g must be real positive
    lead = g.real
    if lead <= 0:
        raise RationalError("not factorizable: negative leading coefficient")
    c = np.sqrt(lead)
    order_z = np.lexsort((plus_z.imag, plus_z.real)) if plus_z.size else []
    order_p = np.lexsort((plus_p.imag, plus_p.real)) if plus_p.size else []
    plus_z = plus_z[order_z]
    plus_p = plus_p[order_p]
    plus = Rational([(c, plus_z, plus_p)])
    return SpectralFactors(plus, plus.conj(), plus_z, plus_p, float(lead))


def causal_project(f: Rational) -> Rational:
    """[f]_+ : partial-fraction terms with lower-half-plane poles.

    Any polynomial part (delta functions at t = 0) is dropped.
    """
    pf = f.partial_fractions()
    _reject_real_poles(pf)
    return pf.select(lower=True).to_rational()


def anticausal_project(f: Rational) -> Rational:
    pf = f.partial_fractions()
    _reject_real_poles(pf)
    return pf.select(lower=False).to_rational()


def polynomial_part(f: Rational) -> np.ndarray:
    return f.partial_fractions().poly


def _reject_real_poles(pf: PartialFractions):
    if pf.poles.size:
        scale = _scale_of(pf.poles)
        if np.any(np.abs(pf.poles.imag) <= AXIS_RTOL * scale):
            raise RationalError("ambiguous projection: pole on the real axis")


def wiener_hopf_solve(M: SpectralFactors, g: Rational) -> Rational:
    """Solve int_0^inf M(t - t') h(t') dt' = g(t), t > 0.

    ``g`` is the spectrum of g(t) restricted to t > 0.  Returns
    h_+(w) = [g / M_-]_+ / M_+.
    """
    inner = causal_project(g / M.minus)
    return inner / M.plus


def strictly_proper_part(f: Rational) -> Rational:
    pf = f.partial_fractions()
    return pf.to_rational(with_poly=False)


def causal_derivative(f: Rational) -> Rational:
    """Spectrum of d/dt[f(t)] on t > 0 for a causal, strictly proper f.

    The jump f(0+) sits in the polynomial part of -i w f and is removed.
    """
    return strictly_proper_part(f.times_w() * (-1j))


def inverse_ft_rational(f: Rational, t):
    """int dw/2pi f(w) exp(-i w t), evaluated by residues.

    At t = 0 the mean of the two one-sided limits is returned.
    """
    pf = f.partial_fractions()
    if np.any(np.abs(pf.poly) > 1e-12 * max(1.0, _pf_norm(pf))):
        raise RationalError("inverse transform needs a strictly proper function")
    _reject_real_poles(pf)
    t = np.asarray(t, dtype=float)
    out = np.zeros(t.shape, dtype=complex)
    for p, cs in zip(pf.poles, pf.coeffs):
        lower = p.imag < 0
        sel = t > 0 if lower else t < 0
        sign = -1j if lower else 1j
        tt = np.where(sel | (t == 0), t, 0.0)
        val = np.zeros(t.shape, dtype=complex)
        for j, c in enumerate(cs):
            val = val + c * (-1j * tt) ** j / factorial(j)
        val = sign * val * np.exp(-1j * p * tt)
        out = out + np.where(sel, val, 0.0) + np.where(t == 0, 0.5 * val, 0.0)
    return out


def real_line_integral(f: Rational) -> complex:
    """int dw/2pi f(w) for an integrable rational f (principal value at
    infinity when the decay is only 1/w)."""
    pf = f.partial_fractions()
    if np.any(np.abs(pf.poly) > 1e-12 * max(1.0, _pf_norm(pf))):
        raise RationalError("integral diverges: f has a polynomial part")
    _reject_real_poles(pf)
    res = pf.residues() if pf.poles.size else np.zeros(0)
    lower = pf.poles.imag < 0
    return complex(0.5 * (-1j * np.sum(res[lower]) + 1j * np.sum(res[~lower])))
