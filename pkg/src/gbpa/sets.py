"""Decision sets and their exact linear maximization oracles.

A decision set X is the learner's action set. Its support function
value(theta) = max_{w in X} <w, theta> is the baseline potential every
smoothed potential approximates, and the oracle's maximizer is the
follow-the-leader action. All oracles here are closed-form; error is
pure rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ArgmaxResult",
    "DecisionSet",
    "Simplex",
    "L2Ball",
    "Interval01",
    "VertexSet",
    "linear_oracle",
    "lipschitz_constant",
]

_NORMS = ("l1", "l2", "linf")


@dataclass(frozen=True)
class ArgmaxResult:
    """Outcome of one linear maximization: the action, its value, and whether a tie was broken."""

    maximizer: np.ndarray
    value: float
    tie_broken: bool


class DecisionSet:
    """Base class. Subclasses are immutable and safe to share across threads."""

    kind: str = "abstract"

    def __init__(self, dimension: int):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self._dimension = int(dimension)

    @property
    def dimension(self) -> int:
        return self._dimension

    # norm of the reward budget for this set's standard game
    reward_norm: str = "l2"

    def check_vector(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self._dimension,):
            raise ValueError(
                f"expected vector of dimension {self._dimension}, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError("non-finite entries in reward vector")
        return theta

    def argmax(self, theta) -> ArgmaxResult:
        raise NotImplementedError

    def argmax_batch(self, Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Row-wise oracle: Z is (M, N); returns (maximizers (M, N), values (M,))."""
        raise NotImplementedError

    def support_values(self, Z: np.ndarray) -> np.ndarray:
        """Row-wise support function max_{x in X} <x, z>, shape (M,)."""
        _, vals = self.argmax_batch(np.asarray(Z, dtype=float))
        return vals

    def contains(self, w, tol: float = 1e-12) -> bool:
        raise NotImplementedError

    def norm_bound(self, norm: str) -> float:
        """sup_{x in X} ||x||, the Lipschitz constant of the support function."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "dimension": self._dimension}

    def __repr__(self) -> str:
        return f"{type(self).__name__}(N={self._dimension})"


class Simplex(DecisionSet):
    """Probability simplex; vertices are the standard basis. Min-index tie-break."""

    kind = "simplex"
    reward_norm = "linf"

    def argmax(self, theta) -> ArgmaxResult:
        theta = self.check_vector(theta)
        i = int(np.argmax(theta))  # argmax returns the first maximal index
        w = np.zeros(self._dimension)
        w[i] = 1.0
        tie = int(np.count_nonzero(theta == theta[i])) > 1
        return ArgmaxResult(w, float(theta[i]), tie)

    def argmax_batch(self, Z):
        idx = np.argmax(Z, axis=1)
        W = np.zeros_like(Z)
        W[np.arange(Z.shape[0]), idx] = 1.0
        return W, Z[np.arange(Z.shape[0]), idx]

    def support_values(self, Z):
        return np.max(np.asarray(Z, dtype=float), axis=1)

    def contains(self, w, tol: float = 1e-12) -> bool:
        w = np.asarray(w, dtype=float)
        return (
            w.shape == (self._dimension,)
            and bool(np.all(w >= -tol))
            and abs(float(np.sum(w)) - 1.0) <= tol
        )

    def norm_bound(self, norm: str) -> float:
        if norm not in _NORMS:
            raise ValueError(f"unknown norm {norm!r}")
        return 1.0  # attained at any vertex; L1 holds on the whole set


class L2Ball(DecisionSet):
    """Euclidean unit ball. At theta = 0 every action is optimal; returns 0."""

    kind = "l2ball"
    reward_norm = "l2"

    def argmax(self, theta) -> ArgmaxResult:
        theta = self.check_vector(theta)
        r = float(np.linalg.norm(theta))
        if r == 0.0:
            return ArgmaxResult(np.zeros(self._dimension), 0.0, True)
        return ArgmaxResult(theta / r, r, False)

    def argmax_batch(self, Z):
        norms = np.linalg.norm(Z, axis=1)
        safe = np.where(norms == 0.0, 1.0, norms)
        return Z / safe[:, None], norms

    def support_values(self, Z):
        return np.linalg.norm(np.asarray(Z, dtype=float), axis=1)

    def contains(self, w, tol: float = 1e-12) -> bool:
        w = np.asarray(w, dtype=float)
        return w.shape == (self._dimension,) and float(np.linalg.norm(w)) <= 1.0 + tol

    def norm_bound(self, norm: str) -> float:
        if norm == "l2":
            return 1.0
        if norm == "l1":
            return float(np.sqrt(self._dimension))
        if norm == "linf":
            return 1.0
        raise ValueError(f"unknown norm {norm!r}")


class Interval01(DecisionSet):
    """The interval [0, 1] in one dimension; vertices {0, 1}, min-vertex tie-break."""

    kind = "interval01"
    reward_norm = "l2"

    def __init__(self):
        super().__init__(1)

    def argmax(self, theta) -> ArgmaxResult:
        theta = self.check_vector(theta)
        t = float(theta[0])
        if t > 0.0:
            return ArgmaxResult(np.ones(1), t, False)
        return ArgmaxResult(np.zeros(1), 0.0, t == 0.0)

    def argmax_batch(self, Z):
        W = (Z > 0.0).astype(float)
        return W, np.maximum(Z[:, 0], 0.0)

    def contains(self, w, tol: float = 1e-12) -> bool:
        w = np.asarray(w, dtype=float)
        return w.shape == (1,) and -tol <= float(w[0]) <= 1.0 + tol

    def norm_bound(self, norm: str) -> float:
        if norm not in _NORMS:
            raise ValueError(f"unknown norm {norm!r}")
        return 1.0


class VertexSet(DecisionSet):
    """Convex hull of an explicit vertex list; oracle is an exhaustive scan."""

    kind = "vertexset"
    reward_norm = "l2"

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2 or V.shape[0] == 0:
            raise ValueError("vertices must be a nonempty list of equal-length vectors")
        if not np.all(np.isfinite(V)):
            raise ValueError("non-finite vertex coordinates")
        super().__init__(V.shape[1])
        self._V = V
        self._V.setflags(write=False)

    @property
    def vertices(self) -> np.ndarray:
        return self._V

    def argmax(self, theta) -> ArgmaxResult:
        theta = self.check_vector(theta)
        scores = self._V @ theta
        i = int(np.argmax(scores))
        tie = int(np.count_nonzero(scores == scores[i])) > 1
        return ArgmaxResult(self._V[i].copy(), float(scores[i]), tie)

    def argmax_batch(self, Z):
        scores = Z @ self._V.T  # (M, n_vertices)
        idx = np.argmax(scores, axis=1)
        return self._V[idx], scores[np.arange(Z.shape[0]), idx]

    def contains(self, w, tol: float = 1e-12) -> bool:
        w = np.asarray(w, dtype=float)
        if w.shape != (self._dimension,):
            return False
        # cheap path: w is (numerically) one of the vertices
        if np.min(np.max(np.abs(self._V - w), axis=1)) <= tol:
            return True
        # otherwise decide hull membership by LP feasibility
        from scipy.optimize import linprog

        n = self._V.shape[0]
        A_eq = np.vstack([self._V.T, np.ones((1, n))])
        b_eq = np.concatenate([w, [1.0]])
        res = linprog(np.zeros(n), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if not res.success:
            return False
        recon = self._V.T @ res.x
        return float(np.max(np.abs(recon - w))) <= max(tol, 1e-9)

    def norm_bound(self, norm: str) -> float:
        # a norm is convex, so its hull maximum sits at a vertex
        if norm == "l1":
            return float(np.max(np.sum(np.abs(self._V), axis=1)))
        if norm == "l2":
            return float(np.max(np.linalg.norm(self._V, axis=1)))
        if norm == "linf":
            return float(np.max(np.abs(self._V)))
        raise ValueError(f"unknown norm {norm!r}")

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "dimension": self._dimension,
            "vertices": self._V.tolist(),
        }


def linear_oracle(set_: DecisionSet, theta) -> ArgmaxResult:
    """Exact maximizer and value of <w, theta> over the decision set."""
    return set_.argmax(theta)


def lipschitz_constant(set_: DecisionSet, norm: str) -> float:
    """sup_{x in X} ||x|| for norm in {'l1','l2','linf'}."""
    return set_.norm_bound(norm)
