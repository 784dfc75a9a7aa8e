"""Polynomial ROM structure: data vectors, data matrices and the ROM rhs.

Terms always appear in the fixed order Constant, Linear, Quadratic, Input,
Bilinear. Quadratic terms use the compressed Kronecker product (products
q_i q_j for i <= j) with no scaling of the cross terms; bilinear terms use
the full u (x) q product ordered u-major.
"""

__all__ = [
    "TERMS",
    "MissingInputs",
    "ModelStructure",
    "kron_compressed",
    "kron_expansion_matrix",
    "build_data_vector",
    "build_data_matrix",
    "rom_rhs",
]

from dataclasses import dataclass

import numpy as np

TERMS = ("Constant", "Linear", "Quadratic", "Input", "Bilinear")
_ALIASES = {
    "c": "Constant", "constant": "Constant",
    "a": "Linear", "linear": "Linear",
    "h": "Quadratic", "quadratic": "Quadratic",
    "b": "Input", "input": "Input",
    "n": "Bilinear", "bilinear": "Bilinear",
}


class MissingInputs(ValueError):
    """The structure needs inputs but none were supplied."""


def _canonical(term):
    key = str(term).strip().lower()
    if key not in _ALIASES:
        raise ValueError(f"unknown structure term {term!r}; "
                         f"expected one of {TERMS}")
    return _ALIASES[key]


@dataclass(frozen=True)
class ModelStructure:
    """Which polynomial terms a ROM contains, and its dimensions.

    Parameters
    ----------
    terms : iterable of str
        Any subset of ``TERMS`` (case-insensitive; single-letter codes
        c, A, H, B, N also accepted). Stored in canonical order.
    r : int
        State dimension.
    p : int
        Input dimension (0 if no Input/Bilinear terms).
    """

    terms: tuple
    r: int
    p: int = 0

    def __post_init__(self):
        given = {_canonical(t) for t in self.terms}
        if not given:
            raise ValueError("structure must contain at least one term")
        object.__setattr__(self, "terms",
                           tuple(t for t in TERMS if t in given))
        if self.r < 1:
            raise ValueError("r must be positive")
        if self.needs_inputs and self.p < 1:
            raise ValueError("Input/Bilinear terms need p >= 1")
        if self.p < 0:
            raise ValueError("p must be nonnegative")

    @property
    def needs_inputs(self):
        return "Input" in self.terms or "Bilinear" in self.terms

    def width(self, term):
        r, p = self.r, self.p
        return {
            "Constant": 1,
            "Linear": r,
            "Quadratic": r * (r + 1) // 2,
            "Input": p,
            "Bilinear": r * p,
        }[term]

    @property
    def d(self):
        """Number of columns d(r, p) of the data matrix."""
        return sum(self.width(t) for t in self.terms)

    def slices(self):
        """Map term name -> column slice in the data vector."""
        out, start = {}, 0
        for t in self.terms:
            out[t] = slice(start, start + self.width(t))
            start += self.width(t)
        return out

    def to_list(self):
        return list(self.terms)


def _triu_indices(r):
    return np.triu_indices(r)


def kron_compressed(q):
    """Unique quadratic monomials q_i q_j, i <= j, in lexicographic order.

    Accepts (r,) or (r, k) arrays; columns are treated independently.
    """
    q = np.asarray(q, dtype=float)
    i, j = _triu_indices(q.shape[0])
    return q[i] * q[j]


def kron_expansion_matrix(r):
    """Matrix E (r^2 x r(r+1)/2) with E @ kron_compressed(q) = kron(q, q)."""
    i, j = _triu_indices(r)
    E = np.zeros((r * r, i.size))
    for col, (a, b) in enumerate(zip(i, j)):
        E[a * r + b, col] = 1.0
        E[b * r + a, col] = 1.0
    return E


def _check_inputs(structure, u, ncols):
    if not structure.needs_inputs:
        return None
    if u is None:
        raise MissingInputs(
            f"structure {structure.terms} requires inputs of dimension "
            f"{structure.p}")
    u = np.asarray(u, dtype=float)
    if u.ndim == 1 and ncols is not None:
        u = u.reshape(structure.p, -1)
    if u.shape[0] != structure.p or (ncols is not None
                                     and u.shape[1] != ncols):
        raise ValueError(f"inputs have shape {u.shape}, expected "
                         f"({structure.p}, {ncols or ''})")
    return u


def _blocks(structure, Q, U):
    """Column blocks of the (transposed) data matrix for states Q (r, k)."""
    out = []
    for term in structure.terms:
        if term == "Constant":
            out.append(np.ones((1,) + Q.shape[1:]))
        elif term == "Linear":
            out.append(Q)
        elif term == "Quadratic":
            out.append(kron_compressed(Q))
        elif term == "Input":
            out.append(U)
        elif term == "Bilinear":
            # u-major: (u_1 q_1, ..., u_1 q_r, u_2 q_1, ...)
            out.append((U[:, None] * Q[None, :]).reshape(
                (-1,) + Q.shape[1:]))
    return out


def build_data_vector(q, u, structure):
    """Data vector d(q, u) of length ``structure.d``."""
    q = np.asarray(q, dtype=float)
    if q.shape != (structure.r,):
        raise ValueError(f"state has shape {q.shape}, expected "
                         f"({structure.r},)")
    if structure.needs_inputs:
        if u is None:
            raise MissingInputs(f"structure {structure.terms} needs inputs")
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if u.shape != (structure.p,):
            raise ValueError(f"input has shape {u.shape}, expected "
                             f"({structure.p},)")
    return np.concatenate(_blocks(structure, q, u))


def build_data_matrix(states, inputs, structure):
    """Data matrix with row j equal to d(states[:, j], inputs[:, j]).

    Parameters
    ----------
    states : (r, k) array_like
    inputs : (p, k) array_like or None
    structure : ModelStructure

    Returns
    -------
    (k, d) ndarray
    """
    Q = np.asarray(states, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != structure.r:
        raise ValueError(f"states have shape {Q.shape}, expected "
                         f"({structure.r}, k)")
    U = _check_inputs(structure, inputs, Q.shape[1])
    return np.concatenate(_blocks(structure, Q, U), axis=0).T


def rom_rhs(op_matrix, q, u, structure):
    """Evaluate O d(q, u).

    ``op_matrix`` may be a single (r, d) matrix or a stack (..., r, d); in
    the stacked case ``q`` has shape (..., r) and the evaluation is batched.
    """
    O = np.asarray(op_matrix, dtype=float)
    if O.shape[-1] != structure.d or O.shape[-2] != structure.r:
        raise ValueError(f"operator shape {O.shape} does not match "
                         f"(r, d) = ({structure.r}, {structure.d})")
    q = np.asarray(q, dtype=float)
    if O.ndim == 2 and q.ndim == 1:
        return O @ build_data_vector(q, u, structure)
    # Batched: q (..., r) -> blocks over last axis.
    Qt = np.moveaxis(q, -1, 0)
    U = None
    if structure.needs_inputs:
        if u is None:
            raise MissingInputs(f"structure {structure.terms} needs inputs")
        U = np.asarray(u, dtype=float).reshape(
            (structure.p,) + (1,) * (Qt.ndim - 1))
    d = np.concatenate(
        [np.broadcast_to(b, (b.shape[0],) + Qt.shape[1:])
         for b in _blocks(structure, Qt, U)], axis=0)
    d = np.moveaxis(d, 0, -1)
    return np.einsum("...ij,...j->...i", O, d)
