"""Constant-coefficient differential symbols and their structural checks.

Conventions
-----------
A symbol ``A(xi) = sum_alpha a_alpha xi**alpha`` represents the operator
``A(D)`` with ``D_j = -i d/dx_j``, so that ``d/dt + A(D)`` is the Fourier
multiplier ``i k + A(xi)`` under the transform with kernel
``exp(-i x.xi - i k t)``.  The last spatial coordinate is the normal
direction of the half space; polynomials "in z" always refer to it.

Roots of ``z -> i eta + A(xi', z)`` are split into ``rho_plus`` (Im > 0) and
``rho_minus`` (Im < 0).  The factors ``M_plus``/``M_minus`` are monic, the
leading coefficient ``a`` of ``xi_n**(2m)`` is carried separately, so that
``i eta + A(xi', z) = a * M_plus(z) * M_minus(z)``.
"""

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from . import _kernels
from .errors import (DegenerateRoot, DimensionMismatch, RootOnRealAxis,
                     SingularCharMatrix, WrongSplit)

ROOT_TOL = 1e-9
DET_TOL = 1e-8


@dataclass(frozen=True)
class DifferentialSymbol:
    n: int
    order: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("spatial dimension must be >= 0")
        clean = {}
        for alpha, c in dict(self.coeffs).items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise DimensionMismatch(f"multi-index {alpha} does not have length {self.n}")
            if any(a < 0 for a in alpha) or sum(alpha) > self.order:
                raise ValueError(f"multi-index {alpha} incompatible with order {self.order}")
            c = complex(c)
            if c != 0:
                clean[alpha] = clean.get(alpha, 0) + c
        object.__setattr__(self, "coeffs", clean)

    @property
    def is_homogeneous(self):
        return all(sum(a) == self.order for a in self.coeffs)

    @property
    def leading(self):
        """Coefficient of xi_n**order."""
        key = (0,) * (self.n - 1) + (self.order,) if self.n else ()
        return self.coeffs.get(key, 0j)

    def __call__(self, xi):
        return eval_symbol(self, xi)

    def __neg__(self):
        return DifferentialSymbol(self.n, self.order, {a: -c for a, c in self.coeffs.items()})

    def scaled(self, factor):
        return DifferentialSymbol(self.n, self.order,
                                  {a: factor * c for a, c in self.coeffs.items()})


@dataclass(frozen=True)
class OperatorTuple:
    interior: DifferentialSymbol
    boundary: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "boundary", tuple(self.boundary))
        if self.interior.order % 2:
            raise ValueError("interior operator must have even order 2m")
        m = self.m
        if len(self.boundary) != m:
            raise ValueError(f"expected {m} boundary operators, got {len(self.boundary)}")
        for b in self.boundary:
            if b.n != self.interior.n:
                raise DimensionMismatch("boundary operator dimension differs from interior")
            if b.order > 2 * m - 1:
                raise ValueError(f"boundary order {b.order} exceeds 2m-1 = {2 * m - 1}")

    @property
    def m(self):
        return self.interior.order // 2

    @property
    def n(self):
        return self.interior.n

    @property
    def boundary_orders(self):
        return [b.order for b in self.boundary]

    def principal(self):
        return OperatorTuple(principal_part(self.interior),
                             tuple(principal_part(b) for b in self.boundary))


@dataclass
class SamplingPolicy:
    points: int = 512
    seed: int = 0


@dataclass
class ConditionResult:
    ok: bool
    margin: float
    witness: dict | None
    samples: int
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return {"ok": self.ok, "margin": self.margin, "witness": self.witness,
                "samples": self.samples, **self.detail}


@dataclass
class EllipticityReport:
    properly_elliptic: ConditionResult
    agmon_ray: dict
    complementing: dict
    samples_used: int

    @property
    def ok(self):
        return (self.properly_elliptic.ok
                and all(r.ok for r in self.agmon_ray.values())
                and all(r.ok for r in self.complementing.values()))

    def to_dict(self):
        return {
            "ok": self.ok,
            "properly_elliptic": self.properly_elliptic.to_dict(),
            "agmon_ray": {f"{t:.16e}": r.to_dict() for t, r in self.agmon_ray.items()},
            "complementing": {f"{t:.16e}": r.to_dict() for t, r in self.complementing.items()},
            "samples_used": self.samples_used,
        }


@dataclass
class SymbolFactorization:
    """Root split and monic factors for a batch of (eta, xi') modes."""
    eta: np.ndarray
    xi_prime: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    c_plus: np.ndarray
    c_minus: np.ndarray
    leading: complex
    margin: np.ndarray

    def __len__(self):
        return len(self.eta)

    def entry(self, i):
        return SymbolFactorization(self.eta[i:i + 1], self.xi_prime[i:i + 1],
                                   self.rho_plus[i:i + 1], self.rho_minus[i:i + 1],
                                   self.c_plus[i:i + 1], self.c_minus[i:i + 1],
                                   self.leading, self.margin[i:i + 1])

    def m_plus(self, z):
        """Evaluate M_plus at points z, shape (M, P)."""
        return _kernels.horner(self.c_plus, np.atleast_2d(z))

    def m_minus(self, z):
        return _kernels.horner(self.c_minus, np.atleast_2d(z))


@dataclass
class CharMatrix:
    F: np.ndarray
    F_inv: np.ndarray
    cond: np.ndarray
    det_ratio: np.ndarray


# ------------------------------------------------------------------ basics

def monomial(n, alpha, coeff=1.0):
    alpha = tuple(alpha)
    return DifferentialSymbol(n, sum(alpha), {alpha: coeff})


def laplacian_power(n, m, coeff=1.0):
    """coeff * |xi|^(2m) expanded into monomials."""
    coeffs = {}
    for combo in product(range(n), repeat=m):
        alpha = [0] * n
        for ax in combo:
            alpha[ax] += 2
        coeffs[tuple(alpha)] = coeffs.get(tuple(alpha), 0) + coeff
    return DifferentialSymbol(n, 2 * m, coeffs)


def principal_part(sym):
    return DifferentialSymbol(sym.n, sym.order,
                              {a: c for a, c in sym.coeffs.items() if sum(a) == sym.order})


def eval_symbol(sym, xi=None, *, xi_prime=None, z=None):
    """Evaluate ``sum a_alpha xi**alpha``.

    ``xi`` has trailing dimension n and may be complex.  Alternatively pass
    ``xi_prime`` (trailing dimension n-1) and a complex ``z`` for the last
    component; the result is then the polynomial in z.
    """
    if xi is None:
        if z is None:
            raise DimensionMismatch("either xi or (xi_prime, z) is required")
        xp = np.asarray([] if xi_prime is None else xi_prime, dtype=float).reshape(-1)
        if xp.size != sym.n - 1:
            raise DimensionMismatch(f"xi_prime must have {sym.n - 1} components")
        coeffs = z_coeffs(sym, xp.reshape(1, -1))[0]
        val = np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), coeffs)
        return val if np.ndim(val) else complex(val)
    xi = np.asarray(xi)
    if xi.shape[-1:] != (sym.n,):
        raise DimensionMismatch(f"argument must have {sym.n} components, got shape {xi.shape}")
    out = np.zeros(xi.shape[:-1], dtype=complex)
    for alpha, c in sym.coeffs.items():
        term = np.full(xi.shape[:-1], c, dtype=complex)
        for ax, p in enumerate(alpha):
            if p:
                term = term * xi[..., ax] ** p
        out = out + term
    return out if out.ndim else complex(out)


def z_coeffs(sym, xi_prime):
    """Ascending coefficients in z of ``z -> sym(xi', z)`` for each row of xi_prime.

    ``xi_prime`` has shape (M, n-1); the result has shape (M, order+1).
    """
    xi_prime = np.asarray(xi_prime, dtype=float)
    if xi_prime.ndim != 2 or xi_prime.shape[1] != sym.n - 1:
        raise DimensionMismatch(f"xi_prime must have shape (M, {sym.n - 1})")
    out = np.zeros((xi_prime.shape[0], sym.order + 1), dtype=complex)
    for alpha, c in sym.coeffs.items():
        term = np.full(xi_prime.shape[0], c, dtype=complex)
        for ax, p in enumerate(alpha[:-1]):
            if p:
                term = term * xi_prime[:, ax] ** p
        out[:, alpha[-1]] += term
    return out


def poly_roots(asc):
    """Roots of polynomials given by ascending coefficient rows (companion eigenvalues).

    LAPACK's geev balances the companion matrix before the QR iteration.
    """
    asc = np.atleast_2d(np.asarray(asc, dtype=complex))
    d = asc.shape[1] - 1
    lead = asc[:, -1]
    comp = np.zeros((asc.shape[0], d, d), dtype=complex)
    comp[:, 0, :] = -asc[:, -2::-1] / lead[:, None]
    if d > 1:
        idx = np.arange(d - 1)
        comp[:, idx + 1, idx] = 1.0
    return np.linalg.eigvals(comp)


def parabolic_length(eta, xi, m):
    xi = np.asarray(xi, dtype=float)
    nrm = np.linalg.norm(xi, axis=-1) if xi.ndim else abs(xi)
    return (np.abs(eta) ** 2 + nrm ** (4 * m)) ** (1.0 / (4 * m))


# -------------------------------------------------------------- sampling

def unit_sphere(n, count, seed=0):
    """Deterministic point set on the unit sphere of R^n."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    if n == 3:
        i = np.arange(count) + 0.5
        phi = np.arccos(1 - 2 * i / count)
        theta = np.pi * (1 + 5 ** 0.5) * i
        return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi),
                         np.cos(phi)], axis=1)
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((count, n))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def parabolic_hemisphere(n, m, count, seed=0):
    """Samples (r, xi') with r >= 0 on the parabolic unit sphere, poles included.

    Returns (r, xi_prime) with xi_prime of shape (M, n-1).
    """
    if n == 1:
        return np.array([1.0]), np.zeros((1, 0))
    dirs = unit_sphere(n, 2 * count, seed)
    dirs = dirs[dirs[:, 0] >= 0]
    dirs = np.vstack([[1.0] + [0.0] * (n - 1), dirs])
    lam = 1.0 / parabolic_length(dirs[:, 0], dirs[:, 1:], m)
    return lam ** (2 * m) * dirs[:, 0], lam[:, None] * dirs[:, 1:]


def _orthonormal_pairs(n, count, seed):
    if n == 2:
        a = np.pi * np.arange(count) / count
        xi = np.stack([np.cos(a), np.sin(a)], axis=1)
        zeta = np.stack([-np.sin(a), np.cos(a)], axis=1)
        return zeta, xi
    rng = np.random.default_rng(seed)
    xi = unit_sphere(n, count, seed)
    zeta = rng.standard_normal(xi.shape)
    zeta -= np.sum(zeta * xi, axis=1, keepdims=True) * xi
    zeta /= np.linalg.norm(zeta, axis=1, keepdims=True)
    return zeta, xi


def _line_poly(sym, zeta, xi):
    """Ascending coefficients of tau -> sym(zeta + tau xi), via interpolation at roots of unity."""
    d = sym.order
    nodes = np.exp(2j * np.pi * np.arange(d + 1) / (d + 1))
    pts = zeta[:, None, :] + nodes[None, :, None] * xi[:, None, :]
    vals = eval_symbol(sym, pts)
    return np.fft.fft(vals, axis=1) / (d + 1)


# ------------------------------------------------------------- conditions

def check_properly_elliptic(sym, sampling=None):
    sampling = sampling or SamplingPolicy()
    hs = principal_part(sym)
    m = hs.order // 2
    sphere = unit_sphere(hs.n, sampling.points, sampling.seed)
    vals = np.abs(eval_symbol(hs, sphere))
    i_min = int(np.argmin(vals))
    scale = max(1.0, float(np.max(vals)))
    if vals[i_min] <= 1e-10 * scale:
        return ConditionResult(False, float(vals[i_min]),
                               {"xi": sphere[i_min].tolist(), "value": float(vals[i_min])},
                               len(sphere), {"reason": "principal symbol vanishes"})
    if hs.n < 2:
        return ConditionResult(True, float(vals[i_min]), None, len(sphere))
    zeta, xi = _orthonormal_pairs(hs.n, sampling.points, sampling.seed)
    roots = poly_roots(_line_poly(hs, zeta, xi))
    rel = np.abs(roots.imag) / (1 + np.abs(roots))
    if np.any(rel < ROOT_TOL):
        i = int(np.argmin(np.min(rel, axis=1)))
        raise DegenerateRoot("root on the real axis for a sampled (zeta, xi) pair",
                             {"zeta": zeta[i].tolist(), "xi": xi[i].tolist()})
    n_plus = np.sum(roots.imag > 0, axis=1)
    bad = np.nonzero(n_plus != m)[0]
    margin = float(np.min(rel))
    if len(bad):
        i = int(bad[0])
        return ConditionResult(False, margin,
                               {"zeta": zeta[i].tolist(), "xi": xi[i].tolist(),
                                "n_plus": int(n_plus[i]), "n_minus": int(2 * m - n_plus[i])},
                               len(sphere) + len(xi), {"reason": "wrong root split"})
    return ConditionResult(True, margin, None, len(sphere) + len(xi))


def check_agmon_ray(sym, theta, sampling=None):
    sampling = sampling or SamplingPolicy()
    hs = principal_part(sym)
    sphere = unit_sphere(hs.n, sampling.points, sampling.seed)
    vals = np.atleast_1d(eval_symbol(hs, sphere))
    dist = np.abs(np.angle(vals * np.exp(-1j * theta)))
    dist[vals == 0] = 0.0
    i = int(np.argmin(dist))
    margin = float(dist[i])
    ok = margin > ROOT_TOL
    witness = None if ok else {"xi": sphere[i].tolist(),
                               "value": [float(vals[i].real), float(vals[i].imag)]}
    return ConditionResult(ok, margin, witness, len(sphere))


def _split_shifted(hs, shift, xi_prime):
    """Split the roots of ``shift + hs(xi', z)`` for a batch of modes."""
    m = hs.order // 2
    asc = z_coeffs(hs, xi_prime)
    asc[:, 0] += shift
    roots = poly_roots(asc)
    plus, minus, status = _kernels.classify_roots(roots, ROOT_TOL)
    return plus, minus, status, m


def factorize(sym, eta, xi_prime=None):
    """Root split and Vieta coefficients of ``z -> i eta + A^H(xi', z)``.

    ``eta`` has shape (M,), ``xi_prime`` shape (M, n-1).  Raises
    RootOnRealAxis / WrongSplit naming the first offending mode.
    """
    hs = principal_part(sym)
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if xi_prime is None:
        xi_prime = np.zeros((len(eta), hs.n - 1))
    xi_prime = np.asarray(xi_prime, dtype=float).reshape(len(eta), hs.n - 1)
    zero = (eta == 0) & np.all(xi_prime == 0, axis=1)
    if np.any(zero):
        raise RootOnRealAxis("(eta, xi') = (0, 0) is excluded", {"eta": 0.0, "xi_prime": [0.0] * (hs.n - 1)})
    a = hs.leading
    if a == 0:
        raise WrongSplit("coefficient of xi_n^(2m) vanishes", {})
    plus, minus, status, m = _split_shifted(hs, 1j * eta, xi_prime)
    for code, exc, msg in ((1, RootOnRealAxis, "root on the real axis"),
                           (2, WrongSplit, "root split differs from m/m")):
        bad = np.nonzero(status == code)[0]
        if len(bad):
            i = int(bad[0])
            raise exc(f"{msg} at eta={eta[i]:.6g}, xi'={xi_prime[i].tolist()}",
                      {"eta": float(eta[i]), "xi_prime": xi_prime[i].tolist()})
    margin = np.min(np.abs(np.concatenate([plus.imag, minus.imag], axis=1)), axis=1)
    return SymbolFactorization(eta, xi_prime, plus, minus,
                               _kernels.vieta(plus), _kernels.vieta(minus), a, margin)


def split_roots(sym, eta, xi_prime=()):
    """Single-mode root split: returns (rho_plus, rho_minus, leading)."""
    xp = np.asarray(xi_prime, dtype=float).reshape(1, -1)
    if xp.shape[1] != sym.n - 1:
        raise DimensionMismatch(f"xi_prime must have {sym.n - 1} components")
    fact = factorize(sym, [eta], xp)
    return fact.rho_plus[0], fact.rho_minus[0], fact.leading


def half_symbol_coeffs(roots):
    """Monic coefficients c_0..c_m (c_0 = 1, highest power first) of prod (z - root)."""
    roots = np.asarray(roots, dtype=complex).reshape(1, -1)
    return _kernels.vieta(roots)[0]


def poly_mod(p, q_monic, return_quotient=False):
    """Remainder of p modulo a monic q; coefficients are in ascending order."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q_monic, dtype=complex)
    m = len(q) - 1
    if q[-1] != 1:
        raise ValueError("divisor must be monic")
    r = p.copy()
    quot = np.zeros(max(len(p) - m, 1), dtype=complex)
    for top in range(len(p) - 1, m - 1, -1):
        lead = r[top]
        quot[top - m] = lead
        r[top - m:top + 1] -= lead * q
    rem = np.zeros(m, dtype=complex)
    rem[:min(m, len(p))] = r[:min(m, len(p))]
    return (rem, quot) if return_quotient else rem


def _char_from_roots(bdry_syms, xi_prime, c_plus):
    n_modes = c_plus.shape[0]
    m = c_plus.shape[1] - 1
    q = c_plus[:, ::-1]  # ascending, monic
    F = np.zeros((n_modes, m, m), dtype=complex)
    for j, b in enumerate(bdry_syms):
        F[:, j, :] = _kernels.polymod(z_coeffs(b, xi_prime), q)
    rows = np.prod(np.linalg.norm(F, axis=2), axis=1)
    det = np.abs(np.linalg.det(F))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rows > 0, det / np.where(rows > 0, rows, 1), 0.0)
    return F, ratio


def char_matrix_batch(tuple_, fact, strict=True):
    """Characteristic matrices for every mode of a factorization."""
    bdry = [principal_part(b) for b in tuple_.boundary]
    F, ratio = _char_from_roots(bdry, fact.xi_prime, fact.c_plus)
    singular = ratio <= DET_TOL
    if strict and np.any(singular):
        i = int(np.nonzero(singular)[0][0])
        raise SingularCharMatrix(
            f"complementing condition fails at eta={fact.eta[i]:.6g}, xi'={fact.xi_prime[i].tolist()}",
            {"eta": float(fact.eta[i]), "xi_prime": fact.xi_prime[i].tolist(),
             "det_ratio": float(ratio[i])})
    F_inv = np.zeros_like(F)
    cond = np.full(len(F), np.inf)
    ok = ~singular
    if np.any(ok):
        F_inv[ok] = np.linalg.inv(F[ok])
        cond[ok] = np.linalg.cond(F[ok])
    return CharMatrix(F, F_inv, cond, ratio)


def char_matrix(tuple_, eta, xi_prime=(), fact=None):
    """Characteristic matrix at one mode (eta, xi')."""
    if fact is None:
        fact = factorize(tuple_.interior, [eta], np.asarray(xi_prime, dtype=float).reshape(1, -1))
    cm = char_matrix_batch(tuple_, fact)
    return CharMatrix(cm.F[0], cm.F_inv[0], cm.cond[0], cm.det_ratio[0])


def check_complementing(tuple_, theta, sampling=None):
    """Complementing condition on the ray e^{i theta} over the parabolic unit sphere."""
    sampling = sampling or SamplingPolicy()
    hs = principal_part(tuple_.interior)
    bdry = [principal_part(b) for b in tuple_.boundary]
    r, xi_prime = parabolic_hemisphere(hs.n, tuple_.m, sampling.points, sampling.seed)
    plus, minus, status, m = _split_shifted(hs, -r * np.exp(1j * theta), xi_prime)
    bad = np.nonzero(status != 0)[0]
    if len(bad):
        i = int(bad[0])
        raise RootOnRealAxis(f"root split fails at r={r[i]:.6g}, xi'={xi_prime[i].tolist()}",
                             {"r": float(r[i]), "xi_prime": xi_prime[i].tolist()})
    _, ratio = _char_from_roots(bdry, xi_prime, _kernels.vieta(plus))
    i = int(np.argmin(ratio))
    ok = bool(ratio[i] > DET_TOL)
    witness = None if ok else {"r": float(r[i]), "xi_prime": xi_prime[i].tolist(),
                               "det_ratio": float(ratio[i])}
    return ConditionResult(ok, float(ratio[i]), witness, len(r))


def check_all(tuple_or_sym, sampling=None, thetas=(np.pi / 2, -np.pi / 2)):
    """Run every applicable check; the complementing check only for tuples."""
    sampling = sampling or SamplingPolicy()
    sym = tuple_or_sym.interior if isinstance(tuple_or_sym, OperatorTuple) else tuple_or_sym
    pe = check_properly_elliptic(sym, sampling)
    agmon = {t: check_agmon_ray(sym, t, sampling) for t in thetas}
    comp = {}
    used = pe.samples + sum(r.samples for r in agmon.values())
    if isinstance(tuple_or_sym, OperatorTuple) and pe.ok and all(r.ok for r in agmon.values()):
        comp = {t: check_complementing(tuple_or_sym, t, sampling) for t in thetas}
        used += sum(r.samples for r in comp.values())
    return EllipticityReport(pe, agmon, comp, used)
