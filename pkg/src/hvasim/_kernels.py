"""In-place numba kernels for the two ansatz families.

All kernels mutate ``psi`` (complex128, length 2^N) and release the GIL.
"""

import numpy as np
from numba import njit

_OPTS = dict(cache=True, nogil=True, fastmath=True)


@njit(**_OPTS)
def xyz_bonds(psi, masks_a, masks_b, theta, delta_y, delta_z):
    """Apply exp(-i theta (XX + dy YY + dz ZZ)) on every bond (a, b).

    XX, YY and ZZ preserve the pair parity, so each bond gate is two 2x2
    blocks: {00, 11} with generator (1 - dy) sigma^x + dz and {01, 10} with
    generator (1 + dy) sigma^x - dz.
    """
    pe = np.exp(-1j * theta * delta_z)
    po = np.exp(1j * theta * delta_z)
    ae = pe * np.cos(theta * (1.0 - delta_y))
    be = -1j * pe * np.sin(theta * (1.0 - delta_y))
    ao = po * np.cos(theta * (1.0 + delta_y))
    bo = -1j * po * np.sin(theta * (1.0 + delta_y))
    quarter = psi.shape[0] >> 2
    for k in range(masks_a.shape[0]):
        ma = masks_a[k]
        mb = masks_b[k]
        lo = min(ma, mb)
        hi = max(ma, mb)
        lo_low = lo - 1
        for t in range(quarter):
            # insert zero bits at the positions of lo and hi
            u = ((t & ~lo_low) << 1) | (t & lo_low)
            i00 = ((u & ~(hi - 1)) << 1) | (u & (hi - 1))
            i11 = i00 | ma | mb
            i01 = i00 | mb
            i10 = i00 | ma
            x = psi[i00]
            y = psi[i11]
            psi[i00] = ae * x + be * y
            psi[i11] = ae * y + be * x
            x = psi[i01]
            y = psi[i10]
            psi[i01] = ao * x + bo * y
            psi[i10] = ao * y + bo * x


@njit(**_OPTS)
def x_rotations(psi, n_sites, theta):
    """Apply prod_j exp(+i theta X_j)."""
    c = np.cos(theta)
    s = 1j * np.sin(theta)
    half = psi.shape[0] >> 1
    for b in range(n_sites):
        m = 1 << b
        low = m - 1
        for t in range(half):
            i = ((t & ~low) << 1) | (t & low)
            j = i | m
            x = psi[i]
            y = psi[j]
            psi[i] = c * x + s * y
            psi[j] = c * y + s * x


@njit(**_OPTS)
def diagonal_phase(psi, levels, level_index, theta):
    """Multiply psi[i] by exp(-i theta levels[level_index[i]])."""
    table = np.exp(-1j * theta * levels)
    for i in range(psi.shape[0]):
        psi[i] *= table[level_index[i]]


@njit(**_OPTS)
def xyz_generator_overlap(lam, phi, masks_a, masks_b, delta_y, delta_z):
    """Return <lam| H_bonds |phi> for the bond sum over (masks_a, masks_b)."""
    acc = 0j
    dim = phi.shape[0]
    for k in range(masks_a.shape[0]):
        ma = masks_a[k]
        mb = masks_b[k]
        both = ma | mb
        for i in range(dim):
            j = i ^ both
            same = ((i & ma) != 0) == ((i & mb) != 0)
            if same:
                # parity-even pair: XX + dy YY -> (1 - dy) flip, ZZ -> +1
                acc += np.conj(lam[i]) * ((1.0 - delta_y) * phi[j] + delta_z * phi[i])
            else:
                acc += np.conj(lam[i]) * ((1.0 + delta_y) * phi[j] - delta_z * phi[i])
    return acc


@njit(**_OPTS)
def x_generator_overlap(lam, phi, n_sites):
    """Return <lam| sum_j X_j |phi>."""
    acc = 0j
    dim = phi.shape[0]
    for b in range(n_sites):
        m = 1 << b
        for i in range(dim):
            acc += np.conj(lam[i]) * phi[i ^ m]
    return acc


@njit(**_OPTS)
def diagonal_overlap(lam, phi, diag):
    acc = 0j
    for i in range(phi.shape[0]):
        acc += np.conj(lam[i]) * diag[i] * phi[i]
    return acc
