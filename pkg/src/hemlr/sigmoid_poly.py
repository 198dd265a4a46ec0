"""Polynomial sigmoid surrogates.

Two fits are provided. fit_ls is the plain continuous least-squares
projection of a target function onto polynomials of a given degree,
computed in a Legendre basis so the normal system is diagonal. The
training surrogate is then produced by fit_penalized, which minimizes

    F(p) = lambda0 * int (base - p)^2 dx + lambda1 * int (base' - p')^2 dx

over polynomials p of lower degree, where base is the high-degree fit.
F is quadratic in the coefficients of p, so the minimizer solves a
normal system whose entries are monomial moments of the domain; the
system is assembled and solved in exact rational arithmetic and only
the final coefficients are rounded to float.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from numpy.polynomial import legendre
from numpy.polynomial.polynomial import Polynomial
from scipy.special import expit

from hemlr.errors import SingularSystem


def sigmoid(x):
    """Numerically stable logistic function."""
    return expit(x)


@dataclass(frozen=True)
class PolyApprox:
    """Polynomial with ascending coefficients and the interval it was fit on."""

    coeffs: tuple
    domain: tuple

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


@dataclass(frozen=True)
class FitObjective:
    """Weights of the value term and the gradient term of F."""

    lambda0: float
    lambda1: float

    def __post_init__(self):
        if self.lambda0 < 0 or self.lambda1 < 0 or self.lambda0 + self.lambda1 <= 0:
            raise ValueError("need lambda0, lambda1 >= 0 with lambda0 + lambda1 > 0")


def fit_ls(target, degree: int, domain=(-8.0, 8.0),
           quadrature_points: int = 256) -> PolyApprox:
    """Continuous L2 projection of target onto degree-n polynomials.

    Uses Gauss-Legendre quadrature against the Legendre basis of the
    mapped domain, then converts to monomial coefficients. The node
    count must be at least 4x the degree so polynomial targets of that
    degree are integrated exactly.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise SingularSystem(f"degenerate domain [{lo}, {hi}]")
    if quadrature_points < max(4 * degree, 1):
        raise ValueError("quadrature resolution below 4x degree")

    u, w = legendre.leggauss(quadrature_points)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    fx = np.asarray(target(mid + half * u), dtype=np.float64)
    # P_k orthogonality on [-1,1]: <P_k,P_k> = 2/(2k+1)
    V = legendre.legvander(u, degree)
    leg_coef = (V * w[:, None]).T @ fx * (2.0 * np.arange(degree + 1) + 1.0) / 2.0
    in_u = Polynomial(legendre.leg2poly(leg_coef))
    # substitute u = (x - mid)/half to get raw monomial coefficients in x
    in_x = in_u(Polynomial([-mid / half, 1.0 / half]))
    coeffs = np.zeros(degree + 1)
    coeffs[: len(in_x.coef)] = in_x.coef
    return PolyApprox(coeffs=tuple(coeffs), domain=(lo, hi))


def _moment(lo: Fraction, hi: Fraction, k: int) -> Fraction:
    return (hi ** (k + 1) - lo ** (k + 1)) / (k + 1)


def _solve_exact(A, b):
    """Gaussian elimination over Fractions; raises on a singular system."""
    m = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(m):
        pivot = next((r for r in range(col, m) if M[r][col] != 0), None)
        if pivot is None:
            raise SingularSystem("normal system is singular")
        M[col], M[pivot] = M[pivot], M[col]
        inv = M[col][col]
        for r in range(m):
            if r != col and M[r][col] != 0:
                factor = M[r][col] / inv
                M[r] = [a - factor * p for a, p in zip(M[r], M[col])]
    return [M[i][m] / M[i][i] for i in range(m)]


def fit_penalized(base: PolyApprox, degree: int, obj: FitObjective) -> PolyApprox:
    """Minimize F over polynomials of the given degree on base's domain.

    With p = sum c_i x^i the stationarity conditions are linear:
        (lambda0 * M + lambda1 * D) c = lambda0 * M~ beta + lambda1 * D~ beta
    where M_ij = int x^(i+j) dx, D_ij = i*j*int x^(i+j-2) dx and the
    tilde versions are the rectangular analogues against the base
    coefficients beta. All entries are exact rationals.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    if degree > base.degree:
        raise ValueError("degree must not exceed the base fit's degree")
    lo, hi = Fraction(base.domain[0]), Fraction(base.domain[1])
    if not lo < hi:
        raise SingularSystem(f"degenerate domain [{lo}, {hi}]")
    lam0, lam1 = Fraction(obj.lambda0), Fraction(obj.lambda1)
    beta = [Fraction(b) for b in base.coeffs]
    m = degree + 1

    def entry(i: int, j: int) -> Fraction:
        val = lam0 * _moment(lo, hi, i + j)
        if i >= 1 and j >= 1:
            val += lam1 * i * j * _moment(lo, hi, i + j - 2)
        return val

    A = [[entry(i, j) for j in range(m)] for i in range(m)]
    b = [sum(entry(i, j) * beta[j] for j in range(len(beta))) for i in range(m)]
    c = _solve_exact(A, b)
    return PolyApprox(coeffs=tuple(float(v) for v in c), domain=base.domain)


def penalized_objective(candidate: PolyApprox, base: PolyApprox,
                        obj: FitObjective) -> float:
    """Value of F for a candidate polynomial (used by optimality checks)."""
    lo, hi = base.domain
    diff = Polynomial(np.asarray(base.coeffs)) - Polynomial(np.asarray(candidate.coeffs))
    dgrad = diff.deriv()

    def sq_int(p: Polynomial) -> float:
        anti = (p * p).integ()
        return float(anti(hi) - anti(lo))

    return obj.lambda0 * sq_int(diff) + obj.lambda1 * sq_int(dgrad)


def poly_eval(p: PolyApprox, x, clamp: bool = False):
    """Horner evaluation, elementwise over arrays.

    With clamp set, inputs are clipped to the fit domain first; the
    encrypted path cannot clamp, so equivalence tests run with it off.
    """
    x = np.asarray(x, dtype=np.float64)
    if clamp:
        x = np.clip(x, p.domain[0], p.domain[1])
    acc = np.full_like(x, p.coeffs[-1])
    for c in reversed(p.coeffs[:-1]):
        acc = acc * x + c
    return acc


def fitted_surrogate(degree: int = 3, lambda0: float = 128.0, lambda1: float = 1.0,
                     domain=(-8.0, 8.0), base_degree: int = 11,
                     quadrature_points: int = 256) -> PolyApprox:
    """The training activation: penalized low-degree fit of the
    high-degree least-squares sigmoid approximant."""
    base = fit_ls(sigmoid, base_degree, domain, quadrature_points)
    return fit_penalized(base, degree, FitObjective(lambda0, lambda1))


def poly_to_json_dict(p: PolyApprox) -> dict:
    return {"domain": [p.domain[0], p.domain[1]], "coeffs": list(p.coeffs)}


def poly_from_json_dict(d: dict) -> PolyApprox:
    return PolyApprox(coeffs=tuple(float(c) for c in d["coeffs"]),
                      domain=(float(d["domain"][0]), float(d["domain"][1])))
