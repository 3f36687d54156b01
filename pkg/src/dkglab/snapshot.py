"""DKG1 binary snapshots.

Layout (little endian): 4-byte magic ``DKG1``, u32 version, u32 n, f64 L,
then f64 data: the spinor as (n, n, n, 4, 2) interleaved real/imaginary
parts in row-major grid order, then phi (n, n, n), then phi_t (n, n, n).
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import Grid3, ScalarState, SpinorField

MAGIC = b"DKG1"
VERSION = 1
_HEADER = struct.Struct("<4sIId")


class SnapshotError(ValueError):
    pass


def encode(psi: SpinorField, scalar: ScalarState) -> bytes:
    grid = psi.grid
    if scalar.grid != grid:
        raise SnapshotError("spinor and scalar live on different grids")
    u = np.moveaxis(psi.physical(), 0, -1)
    inter = np.stack([u.real, u.imag], axis=-1).astype("<f8")
    head = _HEADER.pack(MAGIC, VERSION, grid.n, float(grid.L))
    return b"".join([head, inter.tobytes(), scalar.phi.astype("<f8").tobytes(),
                     scalar.phi_t.astype("<f8").tobytes()])


def decode(blob: bytes) -> tuple[SpinorField, ScalarState]:
    if len(blob) < _HEADER.size:
        raise SnapshotError("truncated header")
    magic, version, n, L = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"unsupported version {version}")
    grid = Grid3(n, L)
    cells = n**3
    expected = _HEADER.size + 8 * cells * (8 + 2)
    if len(blob) != expected:
        raise SnapshotError(f"expected {expected} bytes, got {len(blob)}")
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size)
    spin = data[: 8 * cells].reshape(n, n, n, 4, 2)
    u = np.moveaxis(spin[..., 0] + 1j * spin[..., 1], -1, 0)
    phi = data[8 * cells: 9 * cells].reshape(grid.shape)
    phi_t = data[9 * cells:].reshape(grid.shape)
    return SpinorField(grid, u), ScalarState(grid, phi.copy(), phi_t.copy())


def write(path, psi: SpinorField, scalar: ScalarState) -> Path:
    path = Path(path)
    path.write_bytes(encode(psi, scalar))
    return path


def read(path) -> tuple[SpinorField, ScalarState]:
    return decode(Path(path).read_bytes())
