"""Phase-space state, mass matrices and potentials for separable Hamiltonians.

Everything downstream works with Hamiltonians of the form

    H(q, p) = (1/2) p^T M p + V(q)

where ``M`` is a constant symmetric positive semi-definite matrix (an
inverse-mass tensor: ``dq/dt = M p``) and ``V`` depends on position only.
Potentials expose exact directional derivatives up to order eight; the
operator engine is built entirely on that contract, so no finite
differencing enters any integrator path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Highest derivative tensor any correction generator ever contracts.
MAX_DERIVATIVE_ORDER = 8


def _as_vector(x, name="array"):
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class PhasePoint:
    """Immutable phase-space state (q, p), both shape (N,)."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = _as_vector(self.q, "q")
        p = _as_vector(self.p, "p")
        if q.shape != p.shape:
            raise ValueError(f"q and p must match, got {q.shape} vs {p.shape}")
        q.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def dim(self) -> int:
        return self.q.size

    def as_array(self) -> np.ndarray:
        """Concatenated (q, p) vector, length 2N."""
        return np.concatenate([self.q, self.p])

    @classmethod
    def from_array(cls, z: np.ndarray) -> "PhasePoint":
        z = _as_vector(z, "z")
        if z.size % 2:
            raise ValueError("phase vector length must be even")
        n = z.size // 2
        return cls(z[:n], z[n:])


class MassMatrix:
    """Constant symmetric positive semi-definite index-raising matrix."""

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.ndim == 0:
            m = m.reshape(1, 1)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"mass matrix must be square, got shape {m.shape}")
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.T).max() > 1e-12 * scale:
            raise ValueError("mass matrix must be symmetric")
        m = 0.5 * (m + m.T)
        if np.linalg.eigvalsh(m).min() < -1e-12 * scale:
            raise ValueError("mass matrix must be positive semi-definite")
        m.flags.writeable = False
        self.mat = m

    @classmethod
    def identity(cls, dim: int) -> "MassMatrix":
        return cls(np.eye(dim))

    @classmethod
    def diagonal(cls, values) -> "MassMatrix":
        return cls(np.diag(np.asarray(values, dtype=float)))

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def raise_index(self, covector: np.ndarray) -> np.ndarray:
        """Map a momentum-like covector to a velocity-like vector, M @ v."""
        v = _as_vector(covector, "covector")
        if v.size != self.dim:
            raise ValueError(f"covector length {v.size} does not match mass dim {self.dim}")
        return self.mat @ v

    def __repr__(self):
        return f"MassMatrix(dim={self.dim})"


def raise_index(covector: np.ndarray, mass: MassMatrix) -> np.ndarray:
    """Raise an index with the mass matrix: returns M @ covector."""
    return mass.raise_index(covector)


class Potential:
    """Position-dependent potential with exact directional derivatives.

    Subclasses implement :meth:`value`, :meth:`gradient` and
    :meth:`_contract`; the latter evaluates the fully contracted k-th
    derivative tensor

        D^k V(q)[u_1, ..., u_k]

    exactly (no finite differences).  The contraction is symmetric in the
    directions and linear in each of them.
    """

    def value(self, q: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dir_deriv(self, q: np.ndarray, dirs) -> float:
        """Contract the k-th derivative tensor at q with k direction vectors."""
        q = _as_vector(q, "q")
        dirs = [np.asarray(u, dtype=float) for u in dirs]
        k = len(dirs)
        if not 1 <= k <= MAX_DERIVATIVE_ORDER:
            raise ValueError(
                f"derivative order {k} unsupported (1..{MAX_DERIVATIVE_ORDER})"
            )
        for u in dirs:
            if u.shape != q.shape:
                raise ValueError("direction shape does not match q")
        return float(self._contract(q, dirs))

    def _contract(self, q: np.ndarray, dirs: list) -> float:
        raise NotImplementedError

    # Optional structure probes used for dispatch; None means "not this shape".

    def poly1d_coefficients(self):
        """Ascending coefficients if V is a 1-D polynomial, else None."""
        return None

    def quadratic_matrix(self, dim: int):
        """Stiffness K if V(q) = (1/2) q^T K q of the given size, else None."""
        return None


class Polynomial1D(Potential):
    """One-dimensional polynomial potential, coefficients in ascending order."""

    def __init__(self, coefficients):
        c = np.asarray(coefficients, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        self.coefficients = c
        # derivative coefficient rows, cached up to the supported order
        self._deriv = [c]
        for _ in range(MAX_DERIVATIVE_ORDER):
            prev = self._deriv[-1]
            self._deriv.append(prev[1:] * np.arange(1, prev.size) if prev.size > 1
                               else np.zeros(0))

    def _poly(self, q, order):
        if q.size != 1:
            raise ValueError(f"1-D polynomial potential got q of length {q.size}")
        c = self._deriv[order]
        if c.size == 0:
            return 0.0
        x = float(q[0])
        acc = 0.0
        for coeff in c[::-1]:
            acc = acc * x + coeff
        return acc

    def value(self, q):
        q = _as_vector(q, "q")
        return self._poly(q, 0)

    def gradient(self, q):
        q = _as_vector(q, "q")
        return np.array([self._poly(q, 1)])

    def _contract(self, q, dirs):
        acc = self._poly(q, len(dirs))
        for u in dirs:
            acc *= u[0]
        return acc

    def poly1d_coefficients(self):
        return self.coefficients

    def quadratic_matrix(self, dim):
        c = self.coefficients
        if dim != 1 or c.size > 3:
            return None
        if any(abs(c[i]) > 0.0 for i in range(min(2, c.size))):
            return None
        k = 2.0 * c[2] if c.size == 3 else 0.0
        return np.array([[k]])

    def __repr__(self):
        return f"Polynomial1D({self.coefficients.tolist()})"


class Quartic(Polynomial1D):
    """The anharmonic benchmark potential V(q) = q^4 / 4, one dimensional."""

    def __init__(self):
        super().__init__([0.0, 0.0, 0.0, 0.0, 0.25])

    def __repr__(self):
        return "Quartic()"


class Harmonic(Potential):
    """Isotropic harmonic potential V(q) = (1/2) omega^2 |q|^2, any dimension."""

    def __init__(self, omega: float = 1.0):
        omega = float(omega)
        if omega <= 0.0:
            raise ValueError("omega must be positive")
        self.omega = omega

    def value(self, q):
        q = _as_vector(q, "q")
        return 0.5 * self.omega**2 * float(q @ q)

    def gradient(self, q):
        q = _as_vector(q, "q")
        return self.omega**2 * q

    def _contract(self, q, dirs):
        if len(dirs) == 1:
            return self.omega**2 * float(q @ dirs[0])
        if len(dirs) == 2:
            return self.omega**2 * float(dirs[0] @ dirs[1])
        return 0.0

    def poly1d_coefficients(self):
        return np.array([0.0, 0.0, 0.5 * self.omega**2])

    def quadratic_matrix(self, dim):
        return self.omega**2 * np.eye(dim)

    def __repr__(self):
        return f"Harmonic(omega={self.omega})"


class Quadratic(Potential):
    """General quadratic form V(q) = (1/2) q^T K q with symmetric K."""

    def __init__(self, stiffness):
        k = np.asarray(stiffness, dtype=float)
        if k.ndim != 2 or k.shape[0] != k.shape[1]:
            raise ValueError(f"stiffness must be square, got shape {k.shape}")
        scale = max(1.0, float(np.abs(k).max()))
        if np.abs(k - k.T).max() > 1e-12 * scale:
            raise ValueError("stiffness must be symmetric")
        k = 0.5 * (k + k.T)
        k.flags.writeable = False
        self.stiffness = k

    def value(self, q):
        q = _as_vector(q, "q")
        return 0.5 * float(q @ (self.stiffness @ q))

    def gradient(self, q):
        q = _as_vector(q, "q")
        return self.stiffness @ q

    def _contract(self, q, dirs):
        if len(dirs) == 1:
            return float(dirs[0] @ (self.stiffness @ q))
        if len(dirs) == 2:
            return float(dirs[0] @ (self.stiffness @ dirs[1]))
        return 0.0

    def poly1d_coefficients(self):
        if self.stiffness.shape == (1, 1):
            return np.array([0.0, 0.0, 0.5 * self.stiffness[0, 0]])
        return None

    def quadratic_matrix(self, dim):
        if self.stiffness.shape[0] != dim:
            return None
        return self.stiffness

    def __repr__(self):
        return f"Quadratic(dim={self.stiffness.shape[0]})"


def dir_deriv(potential: Potential, q: np.ndarray, dirs) -> float:
    """Exact contraction D^k V(q)[u_1, ..., u_k]; k = len(dirs), k <= 8."""
    return potential.dir_deriv(q, dirs)


def hamiltonian(x: PhasePoint, potential: Potential, mass: MassMatrix) -> float:
    """Total energy (1/2) p^T M p + V(q)."""
    if x.dim != mass.dim:
        raise ValueError(f"state dim {x.dim} does not match mass dim {mass.dim}")
    return 0.5 * float(x.p @ (mass.mat @ x.p)) + potential.value(x.q)
