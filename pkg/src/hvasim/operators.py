"""Sparse matrices and basis permutations on the 2^N computational basis.

Site 1 is the most significant bit of a basis index; bit value 0 is spin up
(sigma^z = +1).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .models import Axis, PauliTermList


def site_bit(site: int, n_sites: int) -> int:
    """Bit position (from the least significant end) holding ``site``."""
    return n_sites - site


def site_mask(site: int, n_sites: int) -> int:
    return 1 << site_bit(site, n_sites)


@lru_cache(maxsize=32)
def _indices(dim: int) -> np.ndarray:
    idx = np.arange(dim, dtype=np.int64)
    idx.setflags(write=False)
    return idx


def pauli_string_action(
    sites: tuple[int, ...], axes: tuple[Axis, ...], n_sites: int
) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(target, phase)`` with ``P|i> = phase[i] |target[i]>``."""
    idx = _indices(1 << n_sites)
    flip = 0
    phase = np.ones(idx.size, dtype=complex)
    for site, axis in zip(sites, axes):
        bit = (idx >> site_bit(site, n_sites)) & 1
        if axis is Axis.Z:
            phase *= 1 - 2 * bit
        elif axis is Axis.X:
            flip |= site_mask(site, n_sites)
        else:
            # Y|0> = i|1>, Y|1> = -i|0>
            phase *= 1j * (1 - 2 * bit)
            flip |= site_mask(site, n_sites)
    return idx ^ flip, phase


def terms_to_sparse(terms: PauliTermList) -> sp.csr_matrix:
    """Sparse matrix of a term list; real dtype whenever the operator is real."""
    n = terms.n_sites
    dim = 1 << n
    rows, cols, vals = [], [], []
    cols_base = _indices(dim)
    for term in terms:
        target, phase = pauli_string_action(term.sites, term.axes, n)
        rows.append(target)
        cols.append(cols_base)
        vals.append(term.coefficient * phase)
    if not rows:
        return sp.csr_matrix((dim, dim), dtype=float)
    data = np.concatenate(vals)
    mat = sp.coo_matrix((data, (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)).tocsr()
    mat.sum_duplicates()
    mat.eliminate_zeros()
    if np.all(mat.data.imag == 0):
        mat = mat.real.tocsr()
    return mat


def terms_diagonal(terms: PauliTermList) -> np.ndarray:
    """Diagonal of a term list made of Z strings only."""
    n = terms.n_sites
    out = np.zeros(1 << n)
    for term in terms:
        if any(a is not Axis.Z for a in term.axes):
            raise ValueError("terms_diagonal requires Z-only terms")
        _, phase = pauli_string_action(term.sites, term.axes, n)
        out += term.coefficient * phase.real
    return out


def translation_permutation(n_sites: int, shift: int = 1) -> np.ndarray:
    """Index map ``perm`` such that ``(T psi)[perm[i]] = psi[i]`` for site j -> j + shift."""
    idx = _indices(1 << n_sites)
    shift %= n_sites
    if shift == 0:
        return idx.copy()
    # site j sits at bit N - j; moving it to site j + shift lowers the bit by shift
    mask = (1 << n_sites) - 1
    return ((idx >> shift) | (idx << (n_sites - shift))) & mask


def inversion_permutation(n_sites: int) -> np.ndarray:
    """Index map for the lattice inversion j <-> N - j + 1 (bit reversal)."""
    idx = _indices(1 << n_sites)
    out = np.zeros_like(idx)
    for b in range(n_sites):
        out |= ((idx >> b) & 1) << (n_sites - 1 - b)
    return out


def apply_permutation(psi: np.ndarray, perm: np.ndarray) -> np.ndarray:
    out = np.empty_like(psi)
    out[perm] = psi
    return out
