"""Linear operators, test-matrix generators and small I/O helpers.

Operators are immutable.  A shifted operator ``alpha*I + S`` keeps ``alpha``
and ``S`` apart so that the transpose is applied as ``alpha*x - S x`` without
ever forming the sum.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import scipy.io
import scipy.sparse as sp

SKEW_TOL = 1e-12

Matrix = Union[np.ndarray, sp.csr_matrix]


class Structure(enum.Enum):
    GENERAL = "general"
    SKEW = "skew"
    SHIFTED_SKEW = "shifted-skew"


class DimensionError(ValueError):
    """Vector length does not match the operator dimension."""

    def __init__(self, expected: int, got: int):
        super().__init__(f"dimension mismatch: operator is {expected}x{expected}, vector has length {got}")
        self.expected = expected
        self.got = got


class MatrixMarketError(ValueError):
    """Malformed or unsupported Matrix Market input."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


class SkewValidationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Square real operator with forward and transpose application.

    Build instances through :func:`from_matrix`, :func:`shifted` or the
    generators rather than calling the constructor directly.
    """

    n: int
    structure: Structure
    storage: str  # "dense", "csr" or "shift"
    matrix: Matrix | None = None
    alpha: float = 0.0
    base: "LinearOperator | None" = None

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or x.shape[0] != self.n:
            raise DimensionError(self.n, x.shape[0] if x.ndim else 0)
        return x

    def apply(self, x) -> np.ndarray:
        x = self._check(x)
        if self.storage == "shift":
            return self.alpha * x + self.base.apply(x)
        return np.asarray(self.matrix @ x, dtype=float)

    def apply_transpose(self, x) -> np.ndarray:
        x = self._check(x)
        if self.storage == "shift":
            return self.alpha * x + self.base.apply_transpose(x)
        if self.structure is Structure.SKEW:
            return -np.asarray(self.matrix @ x, dtype=float)
        return np.asarray(self.matrix.T @ x, dtype=float)

    __matmul__ = apply

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    @property
    def is_skew(self) -> bool:
        return self.structure is Structure.SKEW

    @property
    def is_shifted_skew(self) -> bool:
        return self.structure is Structure.SHIFTED_SKEW

    @property
    def skew_part(self) -> "LinearOperator":
        """``S`` for ``alpha*I + S``; the operator itself when it is skew."""
        if self.storage == "shift":
            return self.base
        if self.is_skew:
            return self
        raise ValueError("operator has no skew-symmetric part on record")

    @property
    def shift(self) -> float:
        return self.alpha if self.storage == "shift" else 0.0

    def to_dense(self) -> np.ndarray:
        if self.storage == "shift":
            return self.alpha * np.eye(self.n) + self.base.to_dense()
        if sp.issparse(self.matrix):
            return self.matrix.toarray()
        return np.array(self.matrix, dtype=float)

    def frobenius_norm(self) -> float:
        if self.storage == "shift":
            # S has zero diagonal, so the two parts are Frobenius-orthogonal.
            return math.hypot(abs(self.alpha) * math.sqrt(self.n), self.base.frobenius_norm())
        if sp.issparse(self.matrix):
            return float(sp.linalg.norm(self.matrix))
        return float(np.linalg.norm(self.matrix))

    def negated(self) -> "LinearOperator":
        if self.storage == "shift":
            return shifted(-self.alpha, self.base.negated())
        return LinearOperator(self.n, self.structure, self.storage, -self.matrix)

    def __repr__(self) -> str:
        extra = f", alpha={self.alpha!r}" if self.storage == "shift" else ""
        return f"LinearOperator(n={self.n}, structure={self.structure.value}, storage={self.storage}{extra})"


def apply(op: LinearOperator, x) -> np.ndarray:
    return op.apply(x)


def apply_transpose(op: LinearOperator, x) -> np.ndarray:
    return op.apply_transpose(x)


def skew_defect(M: Matrix) -> float:
    """``max|M + M^T| / max|M|`` (0 for the zero matrix)."""
    if sp.issparse(M):
        big = abs(M).max() if M.nnz else 0.0
        d = abs(M + M.T)
        defect = d.max() if d.nnz else 0.0
    else:
        M = np.asarray(M, dtype=float)
        big = np.abs(M).max() if M.size else 0.0
        defect = np.abs(M + M.T).max() if M.size else 0.0
    return float(defect / big) if big > 0 else 0.0


def from_matrix(M, structure: Structure | str = Structure.GENERAL, *, tol: float = SKEW_TOL) -> LinearOperator:
    """Wrap a dense array or sparse matrix.

    Sparse input is converted to CSR.  ``structure="skew"`` is validated
    against ``tol`` relative to the largest entry.
    """
    structure = Structure(structure)
    if structure is Structure.SHIFTED_SKEW:
        raise ValueError("use shifted(alpha, S) for shifted-skew operators")
    if sp.issparse(M):
        mat = sp.csr_matrix(M, dtype=float)
        storage = "csr"
    else:
        mat = np.array(M, dtype=float)
        mat.setflags(write=False)
        storage = "dense"
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"operator must be square, got shape {mat.shape}")
    if structure is Structure.SKEW:
        defect = skew_defect(mat)
        if defect > tol:
            raise SkewValidationError(f"matrix is not skew-symmetric: max|A+A^T|/max|A| = {defect:.3e} > {tol:.1e}")
    return LinearOperator(mat.shape[0], structure, storage, mat)


def shifted(alpha: float, S: LinearOperator) -> LinearOperator:
    """``alpha*I + S`` for skew ``S`` and nonzero ``alpha``."""
    if not S.is_skew:
        raise ValueError("shift base must be a skew-symmetric operator")
    alpha = float(alpha)
    if alpha == 0.0:
        raise ValueError("shift alpha must be nonzero")
    return LinearOperator(S.n, Structure.SHIFTED_SKEW, "shift", None, alpha, S)


def make_tridiag_skew(m: int, sigma: float) -> LinearOperator:
    """``S_m(sigma)``: ``sigma`` on the superdiagonal, ``-sigma`` below."""
    if m < 1:
        raise ValueError("m must be positive")
    off = np.full(m - 1, float(sigma))
    S = sp.diags([-off, off], [-1, 1], shape=(m, m), format="csr")
    return LinearOperator(m, Structure.SKEW, "csr", S)


def make_conv2d_skew(m: int, sigma1: float, sigma2: float) -> LinearOperator:
    """``I_m (x) S_m(sigma1) + S_m(sigma2) (x) I_m`` (an m^2 x m^2 skew operator)."""
    if m < 1:
        raise ValueError("m must be positive")
    eye = sp.identity(m, format="csr")
    S = sp.kron(eye, make_tridiag_skew(m, sigma1).matrix) + sp.kron(make_tridiag_skew(m, sigma2).matrix, eye)
    S = sp.csr_matrix(S)
    S.eliminate_zeros()
    return LinearOperator(m * m, Structure.SKEW, "csr", S)


def example_rhs(kind: str, n: int) -> np.ndarray:
    """Unit right-hand side with entries ``1/sqrt(2)`` and ``-+1/sqrt(2)`` at the ends.

    ``consistent`` puts ``-1/sqrt(2)`` last, ``inconsistent`` puts ``+1/sqrt(2)``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if kind not in ("consistent", "inconsistent"):
        raise ValueError(f"unknown rhs kind {kind!r}")
    b = np.zeros(n)
    b[0] = 1.0 / math.sqrt(2.0)
    b[-1] = -b[0] if kind == "consistent" else b[0]
    return b


# --- reproducible random vectors -------------------------------------------

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 (Steele, Lea, Flood 2014) with a Box-Muller normal sampler.

    Uniforms are the top 53 bits of each output scaled by 2**-53, so the
    stream is reproducible in any language with 64-bit integers.
    """

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform on [0, 1)."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self, size: int) -> np.ndarray:
        out = np.empty(size)
        i = 0
        while i < size:
            u1 = 1.0 - self.uniform()  # (0, 1]
            u2 = self.uniform()
            r = math.sqrt(-2.0 * math.log(u1))
            out[i] = r * math.cos(2.0 * math.pi * u2)
            if i + 1 < size:
                out[i + 1] = r * math.sin(2.0 * math.pi * u2)
            i += 2
        return out


def random_rhs(n: int, seed: int) -> np.ndarray:
    return SplitMix64(seed).normal(n)


# --- file formats ------------------------------------------------------------

def load_matrix_market(path, *, skew: bool | None = None, tol: float = SKEW_TOL) -> LinearOperator:
    """Read a real, square, coordinate-format Matrix Market file.

    ``skew=None`` flags the operator skew when the header says so or the
    entries pass validation; ``skew=True`` makes a failed validation an error;
    ``skew=False`` never flags it.
    """
    path = Path(path)
    with path.open() as fh:
        lines = fh.readlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    header = lines[0].split()
    if len(header) != 5 or header[0].lower() != "%%matrixmarket":
        raise MatrixMarketError("missing '%%MatrixMarket' banner", 1)
    obj, fmt, field, symmetry = (h.lower() for h in header[1:])
    if obj != "matrix" or fmt != "coordinate":
        raise MatrixMarketError(f"only 'matrix coordinate' is supported, got '{obj} {fmt}'", 1)
    if field not in ("real", "integer", "double"):
        raise MatrixMarketError(f"field '{field}' is not supported (real only)", 1)
    if symmetry not in ("general", "skew-symmetric", "symmetric"):
        raise MatrixMarketError(f"symmetry '{symmetry}' is not supported", 1)

    lineno = 1
    it = iter(enumerate(lines[1:], start=2))
    size = None
    for lineno, line in it:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        try:
            size = tuple(int(p) for p in parts)
        except ValueError:
            raise MatrixMarketError(f"bad size line {s!r}", lineno) from None
        if len(size) != 3:
            raise MatrixMarketError(f"size line needs 'rows cols nnz', got {s!r}", lineno)
        break
    if size is None:
        raise MatrixMarketError("missing size line", lineno)
    nrows, ncols, nnz = size
    if nrows != ncols:
        raise MatrixMarketError(f"matrix is not square ({nrows}x{ncols})", lineno)

    rows, cols, vals = [], [], []
    for lineno, line in it:
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise MatrixMarketError(f"expected 'row col value', got {s!r}", lineno)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"cannot parse entry {s!r}", lineno) from None
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError(f"index ({i}, {j}) out of range", lineno)
        if not math.isfinite(v):
            raise MatrixMarketError("non-finite value", lineno)
        if symmetry == "skew-symmetric" and i <= j:
            raise MatrixMarketError("skew-symmetric files may only store the strict lower triangle", lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
    if len(vals) != nnz:
        raise MatrixMarketError(f"header declares {nnz} entries, found {len(vals)}", lineno)

    rows, cols, vals = np.array(rows, dtype=int), np.array(cols, dtype=int), np.array(vals)
    if symmetry != "general":
        off = rows != cols
        sign = -1.0 if symmetry == "skew-symmetric" else 1.0
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, sign * vals[off]]))
    M = sp.csr_matrix((vals, (rows, cols)), shape=(nrows, ncols))
    M.sum_duplicates()

    if symmetry == "skew-symmetric" and skew is not False:
        return LinearOperator(nrows, Structure.SKEW, "csr", M)
    if skew is False:
        return LinearOperator(nrows, Structure.GENERAL, "csr", M)
    defect = skew_defect(M)
    if defect <= tol:
        return LinearOperator(nrows, Structure.SKEW, "csr", M)
    if skew:
        raise SkewValidationError(f"{path}: not skew-symmetric (max|A+A^T|/max|A| = {defect:.3e})")
    return LinearOperator(nrows, Structure.GENERAL, "csr", M)


def write_matrix_market(path, op: LinearOperator) -> None:
    """Write ``op`` in coordinate format; skew operators use the skew qualifier."""
    M = sp.coo_matrix(op.to_dense())
    symmetry = "skew-symmetric" if op.is_skew else "general"
    scipy.io.mmwrite(str(path), M, field="real", symmetry=symmetry, precision=17)


def read_vector(path) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=float, comments="#"))


def write_vector(path, x) -> None:
    with open(path, "w") as fh:
        for v in np.asarray(x, dtype=float):
            fh.write(repr(float(v)) + "\n")
