"""Dense complex linear algebra for states, effects and channels.

All composite spaces use row-major flattening: for subsystems with dims
``(d0, d1, ...)`` the basis state ``|i0 i1 ...>`` sits at flat index
``i0 * d1 * d2 ... + i1 * d2 ... + ...``, which is what ``numpy.kron`` and
``reshape`` produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError

PSD_TOL = 1e-9
COMPLETENESS_TOL = 1e-9


@dataclass(frozen=True)
class ComplexTensor:
    """A dense multi-mode complex array.

    ``data`` holds the amplitudes flattened in row-major order over ``dims``.
    """

    dims: tuple[int, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("a tensor needs at least one mode")
        for k, d in enumerate(dims):
            if d < 1:
                raise DimensionError(f"mode {k} has dimension {d}; must be >= 1")
        data = np.asarray(self.data, dtype=complex).reshape(-1)
        if data.size != int(np.prod(dims)):
            raise DimensionError(
                f"{data.size} amplitudes do not fill modes {dims} "
                f"(expected {int(np.prod(dims))})"
            )
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ComplexTensor":
        arr = np.asarray(arr, dtype=complex)
        return cls(arr.shape, arr)

    def to_array(self) -> np.ndarray:
        return self.data.reshape(self.dims)

    def matricize(self, row_modes: Sequence[int]) -> np.ndarray:
        """Group ``row_modes`` into rows and the remaining modes into columns."""
        row_modes = list(row_modes)
        col_modes = [k for k in range(len(self.dims)) if k not in row_modes]
        arr = self.to_array().transpose(row_modes + col_modes)
        rows = int(np.prod([self.dims[k] for k in row_modes]))
        return arr.reshape(rows, -1)


def tensor_product(a: ComplexTensor, b: ComplexTensor) -> ComplexTensor:
    """Outer product; the mode list of the result is ``a.dims + b.dims``."""
    return ComplexTensor(a.dims + b.dims, np.multiply.outer(a.to_array(), b.to_array()))


def kron(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product of operators in the given subsystem order."""
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, np.asarray(m, dtype=complex))
    return out


def _check_square(m: np.ndarray, dims: Sequence[int]) -> int:
    total = int(np.prod(dims)) if len(dims) else 1
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {m.shape}")
    if m.shape[0] != total:
        raise DimensionError(
            f"matrix of size {m.shape[0]} does not match subsystem dims {list(dims)} "
            f"(product {total})"
        )
    return total


def partial_trace(m: np.ndarray, subsystem_dims: Sequence[int], traced: Iterable[int]) -> np.ndarray:
    """Trace out the subsystems listed in ``traced``.

    Kept subsystems stay in their original relative order. Tracing every
    subsystem returns the 1x1 matrix ``[[Tr m]]``.
    """
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in subsystem_dims]
    _check_square(m, dims)
    traced = sorted(set(traced))
    for k in traced:
        if not 0 <= k < len(dims):
            raise DimensionError(f"subsystem index {k} out of range for {len(dims)} subsystems")
    n = len(dims)
    keep = [k for k in range(n) if k not in traced]
    t = m.reshape(dims + dims)
    letters = [chr(ord("a") + k) for k in range(n)]
    cols = [chr(ord("A") + k) if k in keep else letters[k] for k in range(n)]
    out = "".join(letters[k] for k in keep) + "".join(cols[k] for k in keep)
    res = np.einsum("".join(letters) + "".join(cols) + "->" + out, t)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return res.reshape(d_keep, d_keep)


def decohere(m: np.ndarray, subsystem_dims: Sequence[int], targets: Iterable[int]) -> np.ndarray:
    """Zero every element that is off-diagonal on any target subsystem."""
    m = np.asarray(m, dtype=complex)
    dims = [int(d) for d in subsystem_dims]
    _check_square(m, dims)
    n = len(dims)
    t = m.reshape(dims + dims).copy()
    for k in set(targets):
        if not 0 <= k < n:
            raise DimensionError(f"subsystem index {k} out of range for {n} subsystems")
        mask_shape = [1] * (2 * n)
        mask_shape[k] = dims[k]
        mask_shape[n + k] = dims[k]
        t = t * np.eye(dims[k]).reshape(mask_shape)
    return t.reshape(m.shape)


@dataclass(frozen=True)
class KrausChannel:
    """A CP map ``rho -> sum_a K_a rho K_a^dagger``."""

    in_dim: int
    out_dim: int
    kraus: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        ks = np.asarray(self.kraus, dtype=complex)
        if ks.ndim == 2:
            ks = ks[None]
        if ks.ndim != 3 or ks.shape[0] == 0:
            raise DimensionError("kraus must be a non-empty list of matrices")
        if ks.shape[1:] != (self.out_dim, self.in_dim):
            raise DimensionError(
                f"Kraus operators have shape {ks.shape[1:]}, expected "
                f"({self.out_dim}, {self.in_dim})"
            )
        ks.setflags(write=False)
        object.__setattr__(self, "kraus", ks)

    @classmethod
    def from_operators(cls, ops: Sequence[np.ndarray]) -> "KrausChannel":
        ks = np.asarray(ops, dtype=complex)
        if ks.ndim == 2:
            ks = ks[None]
        return cls(ks.shape[2], ks.shape[1], ks)

    @classmethod
    def identity(cls, d: int) -> "KrausChannel":
        return cls(d, d, np.eye(d)[None])

    @classmethod
    def from_state(cls, rho: np.ndarray, tol: float = PSD_TOL) -> "KrausChannel":
        """The preparation channel from the trivial space onto ``rho``."""
        rho = np.asarray(rho, dtype=complex)
        w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
        if w.min(initial=0.0) < -tol:
            raise ValueError(f"state has negative eigenvalue {w.min():.3g}")
        ops = [np.sqrt(max(x, 0.0)) * v[:, [k]] for k, x in enumerate(w) if x > tol * 1e-3]
        if not ops:
            ops = [np.zeros((rho.shape[0], 1))]
        return cls(1, rho.shape[0], np.asarray(ops))

    def superop(self) -> np.ndarray:
        """Transfer tensor ``T[i, j, k, l]`` with ``M(|k><l|) = sum T[i,j,k,l] |i><j|``."""
        return np.einsum("aik,ajl->ijkl", self.kraus, self.kraus.conj())


def choi_to_kraus(choi: np.ndarray, in_dim: int, out_dim: int, tol: float = PSD_TOL) -> KrausChannel:
    """Convert a Choi matrix ``sum_kl |k><l| (x) M(|k><l|)`` (input first) to Kraus form."""
    choi = np.asarray(choi, dtype=complex)
    if choi.shape != (in_dim * out_dim, in_dim * out_dim):
        raise DimensionError(
            f"Choi matrix has shape {choi.shape}, expected {(in_dim * out_dim,) * 2}"
        )
    if not np.allclose(choi, choi.conj().T, atol=tol):
        raise ValueError("Choi matrix is not Hermitian")
    w, v = np.linalg.eigh((choi + choi.conj().T) / 2)
    if w.min() < -tol:
        raise ValueError(f"Choi matrix has negative eigenvalue {w.min():.3g}; map is not CP")
    ops = []
    for k in range(len(w) - 1, -1, -1):
        if w[k] <= tol * 1e-3:
            continue
        vec = np.sqrt(w[k]) * v[:, k]
        # vec[k_in * out_dim + i_out] -> K[i_out, k_in]
        ops.append(vec.reshape(in_dim, out_dim).T)
    if not ops:
        ops = [np.zeros((out_dim, in_dim))]
    return KrausChannel(in_dim, out_dim, np.asarray(ops))


def kraus_to_choi(ch: KrausChannel) -> np.ndarray:
    t = ch.superop()  # i j k l
    d = ch.in_dim * ch.out_dim
    return t.transpose(2, 0, 3, 1).reshape(d, d)


def apply_channel(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (ch.in_dim, ch.in_dim):
        raise DimensionError(f"input of shape {rho.shape} does not match channel in_dim {ch.in_dim}")
    return np.einsum("aik,kl,ajl->ij", ch.kraus, rho, ch.kraus.conj())


@dataclass(frozen=True)
class Povm:
    """Ordered effects, one per outcome label."""

    dim: int
    elements: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        els = np.asarray(self.elements, dtype=complex)
        if els.ndim != 3 or els.shape[0] == 0 or els.shape[1:] != (self.dim, self.dim):
            raise DimensionError(
                f"POVM elements must be a non-empty list of {self.dim}x{self.dim} matrices"
            )
        els.setflags(write=False)
        object.__setattr__(self, "elements", els)

    @classmethod
    def from_elements(cls, els: Sequence[np.ndarray]) -> "Povm":
        arr = np.asarray(els, dtype=complex)
        return cls(arr.shape[1], arr)

    def __len__(self) -> int:
        return self.elements.shape[0]


@dataclass
class Issue:
    location: str
    message: str

    def as_dict(self) -> dict:
        return {"location": self.location, "message": self.message}


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)
    deviation: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.issues

    def fail(self, location: str, message: str) -> None:
        self.issues.append(Issue(location, message))

    def merge(self, other: "ValidationReport") -> None:
        self.issues.extend(other.issues)
        self.deviation = max(self.deviation, other.deviation)

    def __bool__(self) -> bool:
        return self.ok


def _min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2).min())


def validate_cptp(ch: KrausChannel, tol: float = COMPLETENESS_TOL, where: str = "channel") -> ValidationReport:
    rep = ValidationReport()
    s = np.einsum("aki,akj->ij", ch.kraus.conj(), ch.kraus)
    dev = float(np.abs(s - np.eye(ch.in_dim)).max())
    rep.deviation = dev
    if dev > tol:
        rep.fail(where, f"sum of K^dagger K deviates from identity by {dev:.3g}")
    return rep


def validate_povm(p: Povm, tol: float = COMPLETENESS_TOL, where: str = "povm") -> ValidationReport:
    rep = ValidationReport()
    for k, e in enumerate(p.elements):
        herm = float(np.abs(e - e.conj().T).max())
        if herm > tol:
            rep.fail(f"{where}[{k}]", f"element is not Hermitian (deviation {herm:.3g})")
            continue
        lo = _min_eig(e)
        if lo < -PSD_TOL:
            rep.fail(f"{where}[{k}]", f"element is not positive semidefinite (min eigenvalue {lo:.3g})")
    dev = float(np.abs(p.elements.sum(axis=0) - np.eye(p.dim)).max())
    rep.deviation = dev
    if dev > tol:
        rep.fail(where, f"elements sum to identity only within {dev:.3g}")
    return rep


def validate_state(rho: np.ndarray, tol: float = COMPLETENESS_TOL, where: str = "state") -> ValidationReport:
    rep = ValidationReport()
    rho = np.asarray(rho, dtype=complex)
    herm = float(np.abs(rho - rho.conj().T).max())
    if herm > tol:
        rep.fail(where, f"state is not Hermitian (deviation {herm:.3g})")
        return rep
    lo = _min_eig(rho)
    if lo < -PSD_TOL:
        rep.fail(where, f"state is not positive semidefinite (min eigenvalue {lo:.3g})")
    dev = abs(np.trace(rho) - 1)
    rep.deviation = float(dev)
    if dev > tol:
        rep.fail(where, f"state has trace {np.trace(rho).real:.12g}, expected 1")
    return rep


def basis_projector(d: int, k: int) -> np.ndarray:
    p = np.zeros((d, d), dtype=complex)
    p[k, k] = 1
    return p


def max_entangled(d: int) -> np.ndarray:
    """``|Phi+> = sum_k |kk> / sqrt(d)`` as a vector."""
    v = np.zeros(d * d, dtype=complex)
    v[[k * d + k for k in range(d)]] = 1 / np.sqrt(d)
    return v
