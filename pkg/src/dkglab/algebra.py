"""Dirac matrix algebra in the standard (Dirac) representation.

All matrices are dense complex 4x4 numpy arrays. Functions that take
frequency vectors broadcast over leading axes, so ``projection(+1, xi)``
with ``xi`` of shape ``(N, 3)`` returns an ``(N, 4, 4)`` stack.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

I2 = np.eye(2, dtype=complex)
I4 = np.eye(4, dtype=complex)
Z2 = np.zeros((2, 2), dtype=complex)

_PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)


class DomainError(ValueError):
    """Raised for inputs outside an operation's domain (zero vectors, bad indices)."""


class Sign(enum.IntEnum):
    """The two sign choices that label half-wave species and projections."""

    PLUS = 1
    MINUS = -1

    def __neg__(self) -> "Sign":
        return Sign(-int(self))

    @property
    def symbol(self) -> str:
        return "+" if self is Sign.PLUS else "-"

    @classmethod
    def parse(cls, value) -> "Sign":
        if isinstance(value, Sign):
            return value
        if value in ("+", "plus", 1, 1.0):
            return cls.PLUS
        if value in ("-", "minus", -1, -1.0):
            return cls.MINUS
        raise DomainError(f"not a sign: {value!r}")


def _block(a, b, c, d):
    return np.block([[a, b], [c, d]])


def pauli(index: int) -> np.ndarray:
    if index not in (1, 2, 3):
        raise DomainError(f"pauli index must be 1..3, got {index}")
    return _PAULI[index - 1].copy()


def basis_matrix(kind: str, index: int = 0) -> np.ndarray:
    """Return one of the constant matrices gamma^mu, beta, alpha^j, S^m, sigma^j.

    ``beta`` ignores ``index``. Gamma takes 0..3, the others 1..3.
    """
    if kind == "pauli":
        return pauli(index)
    if kind == "beta":
        return _block(I2, Z2, Z2, -I2)
    if kind == "gamma":
        if index == 0:
            return _block(I2, Z2, Z2, -I2)
        if index not in (1, 2, 3):
            raise DomainError(f"gamma index must be 0..3, got {index}")
        s = _PAULI[index - 1]
        return _block(Z2, s, -s, Z2)
    if index not in (1, 2, 3):
        raise DomainError(f"{kind} index must be 1..3, got {index}")
    s = _PAULI[index - 1]
    if kind == "alpha":
        return _block(Z2, s, s, Z2)
    if kind == "spin":
        return _block(s, Z2, Z2, s)
    raise DomainError(f"unknown matrix kind {kind!r}")


BETA = basis_matrix("beta")
ALPHA = np.stack([basis_matrix("alpha", j) for j in (1, 2, 3)])
SPIN = np.stack([basis_matrix("spin", j) for j in (1, 2, 3)])
GAMMA = np.stack([basis_matrix("gamma", mu) for mu in range(4)])
for _m in (BETA, ALPHA, SPIN, GAMMA):
    _m.setflags(write=False)


def unit(xi) -> tuple[np.ndarray, np.ndarray]:
    """Normalize vectors along the last axis.

    Returns ``(xi_hat, is_zero)``; zero vectors map to the zero vector so
    that every caller applies the same convention for them.
    """
    xi = np.asarray(xi, dtype=float)
    norm = np.linalg.norm(xi, axis=-1)
    is_zero = norm == 0.0
    safe = np.where(is_zero, 1.0, norm)
    return xi / safe[..., None], is_zero


def _require_nonzero(*vectors):
    for v in vectors:
        if np.any(np.linalg.norm(np.asarray(v, dtype=float), axis=-1) == 0.0):
            raise DomainError("zero vector where a direction is required")


def alpha_dot(v) -> np.ndarray:
    """``v . alpha`` for real 3-vectors ``v`` (broadcast over leading axes)."""
    v = np.asarray(v, dtype=float)
    return np.einsum("...j,jab->...ab", v.astype(complex), ALPHA)


def spin_dot(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.einsum("...j,jab->...ab", v.astype(complex), SPIN)


def projection(sign, xi) -> np.ndarray:
    """Eigenprojection of ``alpha . xi`` onto the eigenvalue ``sign * |xi|``.

    At ``xi = 0`` this returns ``I/2``, the average of the two one-sided
    limits; that zero mode is then not idempotent, which callers must allow for.
    """
    s = int(Sign.parse(sign))
    xi_hat, _ = unit(xi)
    return 0.5 * (I4 + s * alpha_dot(xi_hat))


def angle(xi, eta) -> np.ndarray:
    """Angle in [0, pi] between vectors, via atan2(|xi x eta|, xi . eta)."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    _require_nonzero(xi, eta)
    cross = np.linalg.norm(np.cross(xi, eta), axis=-1)
    dot = np.einsum("...j,...j->...", xi, eta)
    return np.arctan2(cross, dot)


def bilinear_symbol(first, second, eta, zeta) -> np.ndarray:
    """Symbol of ``(psi, psi') -> <beta Pi_first(D) psi, Pi_second(D) psi'>``.

    ``eta`` is the frequency of ``psi`` and ``-zeta`` that of ``psi'``; the
    result is ``beta Pi_{-second}(-zeta) Pi_first(eta)``. Zero vectors use
    the ``I/2`` convention of :func:`projection`.
    """
    second = Sign.parse(second)
    zeta = np.asarray(zeta, dtype=float)
    return BETA @ projection(-second, -zeta) @ projection(first, eta)


def null_symbol(sign, eta, zeta) -> np.ndarray:
    """``beta Pi_{-sign}(-zeta) Pi_+(eta)`` for nonzero ``eta``, ``zeta``."""
    _require_nonzero(eta, zeta)
    return bilinear_symbol(Sign.PLUS, sign, eta, zeta)


def projection_product_decomposition(xi, eta):
    """Split ``4 Pi_+(xi) Pi_-(eta)`` into scalar, rotation and displacement parts.

    Returns ``(1 - xi_hat.eta_hat, xi_hat x eta_hat, xi_hat - eta_hat)`` so that
    ``4 Pi_+(xi) Pi_-(eta) = scalar I - i rot.S + disp.alpha``.
    """
    _require_nonzero(xi, eta)
    a, _ = unit(xi)
    b, _ = unit(eta)
    scalar = 1.0 - np.einsum("...j,...j->...", a, b)
    return scalar, np.cross(a, b), a - b


def reconstruct_projection_product(scalar, rot, disp) -> np.ndarray:
    scalar = np.asarray(scalar, dtype=float)
    return scalar[..., None, None] * I4 - 1j * spin_dot(rot) + alpha_dot(disp)


def operator_norm(m) -> np.ndarray:
    """Largest singular value (LAPACK SVD, deterministic), stacked over leading axes."""
    return np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)[..., 0]


def random_directions(samples: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform unit vectors on the sphere (normalized Gaussians)."""
    v = rng.standard_normal((samples, 3))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def angle_bound(theta):
    """Bound ``theta/2 + theta**2/8`` on ``|Pi_+(xi) Pi_-(eta)|``.

    Triangle inequality on the decomposition: ``(u.S)^2 = I`` for unit ``u``
    and ``(w.alpha)^2 = |w|^2 I`` give
    ``4|Pi_+ Pi_-| <= (1 - cos t) + sin t + 2 sin(t/2) <= t^2/2 + 2t``.
    """
    theta = np.asarray(theta, dtype=float)
    return theta / 2 + theta**2 / 8


@dataclass
class IdentityCheck:
    name: str
    max_deviation: float
    tol: float
    exact: bool

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tol)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "max_deviation": float(self.max_deviation),
            "tol": float(self.tol),
            "exact": self.exact,
            "passed": self.passed,
        }


@dataclass
class AlgebraReport:
    samples: int
    seed: int
    tol: float
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self) -> dict:
        return {
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
        }


def _dev(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


def _hermitian_dev(m) -> float:
    return _dev(m, np.conj(np.swapaxes(m, -1, -2)))


def verify_algebra(samples: int = 10_000, seed: int = 0, tol: float = 1e-12) -> AlgebraReport:
    """Check the Dirac matrix identities and the projection identities.

    Integer-matrix identities are held to ``min(tol, 0)``, i.e. bitwise;
    the projection identities on ``samples`` random directions to ``tol``.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    report = AlgebraReport(samples=samples, seed=seed, tol=tol)
    exact_tol = 0.0

    def exact(name, dev):
        report.checks.append(IdentityCheck(name, dev, exact_tol, True))

    def approx(name, dev):
        report.checks.append(IdentityCheck(name, dev, tol, False))

    delta = np.eye(3)
    eps = np.zeros((3, 3, 3))
    for j, k, l in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[j, k, l] = 1.0
        eps[k, j, l] = -1.0

    exact("alpha^j beta = -beta alpha^j",
          max(_dev(ALPHA[j] @ BETA, -BETA @ ALPHA[j]) for j in range(3)))
    exact("alpha^j alpha^k + alpha^k alpha^j = 2 delta^jk I",
          max(_dev(ALPHA[j] @ ALPHA[k] + ALPHA[k] @ ALPHA[j], 2 * delta[j, k] * I4)
              for j in range(3) for k in range(3)))
    exact("alpha^j alpha^k = delta^jk I + i eps^jkl S^l",
          max(_dev(ALPHA[j] @ ALPHA[k],
                   delta[j, k] * I4 + 1j * np.einsum("l,lab->ab", eps[j, k], SPIN))
              for j in range(3) for k in range(3)))
    exact("beta^2 = I", _dev(BETA @ BETA, I4))
    exact("(alpha^j)^2 = I", max(_dev(ALPHA[j] @ ALPHA[j], I4) for j in range(3)))
    exact("beta^dagger = beta", _hermitian_dev(BETA))
    exact("(alpha^j)^dagger = alpha^j", max(_hermitian_dev(ALPHA[j]) for j in range(3)))
    exact("alpha^j = gamma^0 gamma^j",
          max(_dev(GAMMA[0] @ GAMMA[j + 1], ALPHA[j]) for j in range(3)))
    exact("S^m = i gamma^k gamma^l",
          max(_dev(1j * GAMMA[k + 1] @ GAMMA[l + 1], SPIN[m])
              for k, l, m in ((0, 1, 2), (1, 2, 0), (2, 0, 1))))

    rng = np.random.default_rng(seed)
    dirs = random_directions(samples, rng)
    scales = np.exp(rng.uniform(-3.0, 3.0, samples))
    xi = dirs * scales[:, None]
    pp = projection(+1, xi)
    pm = projection(-1, xi)
    ax = alpha_dot(xi)
    mag = np.linalg.norm(xi, axis=-1)[:, None, None]
    approx("Pi_pm^2 = Pi_pm", max(_dev(pp @ pp, pp), _dev(pm @ pm, pm)))
    approx("Pi_pm^dagger = Pi_pm", max(_hermitian_dev(pp), _hermitian_dev(pm)))
    approx("Pi_+ Pi_- = 0", max(_dev(pp @ pm, 0), _dev(pm @ pp, 0)))
    approx("Pi_+ + Pi_- = I", _dev(pp + pm, I4))
    approx("trace Pi_pm = 2",
           max(_dev(np.trace(pp, axis1=-2, axis2=-1), 2), _dev(np.trace(pm, axis1=-2, axis2=-1), 2)))
    approx("Pi_pm beta = beta Pi_mp", max(_dev(pp @ BETA, BETA @ pm), _dev(pm @ BETA, BETA @ pp)))
    approx("Pi_+(-xi) = Pi_-(xi)", _dev(projection(+1, -xi), pm))
    # relative to |xi|^2 since scales span several decades
    approx("(alpha.xi)^2 = |xi|^2 I", _dev((ax @ ax) / mag**2, I4))
    approx("(alpha.xi) Pi_pm = pm |xi| Pi_pm",
           max(_dev(ax @ pp / mag, pp), _dev(ax @ pm / mag, -pm)))
    return report
