"""Array container format, sampling masks and reconstruction configuration.

Arrays are plain ``numpy.ndarray`` objects of dtype ``complex128``.  On disk
they use the ``MRA1`` layout::

    b"MRA1" | rank (u32 LE) | dims[rank] (u32 LE) | data (f64 LE re, im, ...)

with data in row-major order.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

MAGIC = b"MRA1"
MAX_RANK = 32
# refuse headers that would describe more than 2**40 elements (16 TiB payload)
MAX_ELEMENTS = 2**40


class ArrayFormatError(ValueError):
    """Raised when an MRA1 file cannot be decoded."""

    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


class BadMagicError(ArrayFormatError):
    pass


class TruncatedArrayError(ArrayFormatError):
    pass


class DimOverflowError(ArrayFormatError):
    pass


def as_complex_array(a) -> np.ndarray:
    """Return ``a`` as a C-contiguous complex128 array, checking it is finite."""
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.ndim == 0:
        raise ValueError("arrays must have at least one dimension")
    if any(d <= 0 for d in arr.shape):
        raise ValueError(f"all extents must be positive, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("array contains non-finite values")
    return arr


def write_array(path, a) -> None:
    """Write ``a`` to ``path`` in the MRA1 format.

    Raises
    ------
    OSError
        If the file cannot be written.  The message always names ``path``.
    """
    arr = as_complex_array(a)
    header = MAGIC + struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    payload = arr.astype("<c16", copy=False).tobytes(order="C")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(payload)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write array to {path}: {exc.strerror}") from exc


def read_array(path) -> np.ndarray:
    """Read an MRA1 file written by :func:`write_array` (bit-exact inverse)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot read array from {path}: {exc.strerror}") from exc

    if len(raw) < 8:
        if raw[:4] != MAGIC[: len(raw)]:
            raise BadMagicError(path, "bad magic")
        raise TruncatedArrayError(path, "file too short for header")
    if raw[:4] != MAGIC:
        raise BadMagicError(path, f"bad magic {raw[:4]!r}, expected {MAGIC!r}")
    (rank,) = struct.unpack_from("<I", raw, 4)
    if rank == 0 or rank > MAX_RANK:
        raise DimOverflowError(path, f"rank {rank} outside [1, {MAX_RANK}]")
    header_len = 8 + 4 * rank
    if len(raw) < header_len:
        raise TruncatedArrayError(path, "file truncated inside dims")
    dims = struct.unpack_from(f"<{rank}I", raw, 8)
    if any(d == 0 for d in dims):
        raise ArrayFormatError(path, f"zero extent in dims {dims}")
    count = 1
    for d in dims:
        count *= d
        if count > MAX_ELEMENTS:
            raise DimOverflowError(path, f"dims {dims} describe too many elements")
    expected = header_len + 16 * count
    if len(raw) < expected:
        raise TruncatedArrayError(
            path, f"payload truncated: {len(raw) - header_len} of {16 * count} bytes"
        )
    if len(raw) > expected:
        raise ArrayFormatError(path, f"{len(raw) - expected} trailing bytes")
    data = np.frombuffer(raw, dtype="<c16", count=count, offset=header_len)
    return data.astype(np.complex128).reshape(dims)


@dataclass
class SamplingMask:
    """Binary k-space sampling pattern in centered (fftshifted) layout.

    ``acr_origin`` is the top-left corner of the fully sampled
    auto-calibration square, again in centered coordinates.
    """

    indicator: np.ndarray
    acr_origin: Optional[tuple[int, int]]
    acr_size: Optional[tuple[int, int]]

    def __post_init__(self):
        self.indicator = np.asarray(self.indicator, dtype=bool)
        if self.indicator.ndim != 2:
            raise ValueError("sampling masks are two-dimensional")
        if (self.acr_origin is None) != (self.acr_size is None):
            raise ValueError("acr_origin and acr_size must be given together")
        if self.acr_size is not None:
            self.acr_origin = tuple(int(o) for o in self.acr_origin)
            self.acr_size = tuple(int(s) for s in self.acr_size)
            (o0, o1), (s0, s1) = self.acr_origin, self.acr_size
            u, v = self.indicator.shape
            if o0 < 0 or o1 < 0 or o0 + s0 > u or o1 + s1 > v or s0 <= 0 or s1 <= 0:
                raise ValueError(f"ACR {self.acr_origin}+{self.acr_size} outside {self.shape}")
            if not self.indicator[o0 : o0 + s0, o1 : o1 + s1].all():
                raise ValueError("ACR must be fully sampled")
        if not self.indicator.any():
            raise ValueError("mask collects no samples")

    @property
    def shape(self) -> tuple[int, int]:
        return self.indicator.shape

    @property
    def fraction(self) -> float:
        return float(self.indicator.sum()) / self.indicator.size

    @property
    def has_acr(self) -> bool:
        return self.acr_size is not None

    def acr_slices(self) -> tuple[slice, slice]:
        if self.acr_size is None:
            raise ValueError("mask carries no ACR metadata")
        (o0, o1), (s0, s1) = self.acr_origin, self.acr_size
        return slice(o0, o0 + s0), slice(o1, o1 + s1)

    @classmethod
    def full(cls, dims) -> "SamplingMask":
        return cls(np.ones(dims, dtype=bool), (0, 0), tuple(dims))

    def save(self, path) -> None:
        """Write the indicator as a {0, 1} MRA1 array plus ``<path>.json`` metadata."""
        write_array(path, self.indicator.astype(np.complex128))
        meta = {"acr_origin": self.acr_origin, "acr_size": self.acr_size}
        Path(str(path) + ".json").write_text(json.dumps(meta))

    @classmethod
    def load(cls, path) -> "SamplingMask":
        values = read_array(path)
        if values.ndim != 2 or not np.all(np.isin(values, (0, 1))):
            raise ArrayFormatError(path, "mask file must hold a 2D {0,1} array")
        meta_path = Path(str(path) + ".json")
        origin = size = None
        if meta_path.exists():
            meta = json.loads(meta_path.read_text())
            origin, size = meta.get("acr_origin"), meta.get("acr_size")
        return cls(values.real.astype(bool), origin, size)


CONFIG_FIELDS = ("nu", "lambda_s", "kappa", "max_iters", "sigma_sq", "acr_size", "seed")


@dataclass
class ReconConfig:
    """Solver and regularization parameters.

    ``gamma`` (k-space weights, centered layout) and ``support`` (boolean
    pixel set) are arrays and travel as MRA1 files; every scalar field
    round-trips through JSON.
    """

    nu: float = 0.1
    lambda_s: float = 0.5
    kappa: Optional[float] = None
    max_iters: int = 1000
    sigma_sq: Optional[float] = None
    acr_size: Optional[tuple[int, int]] = None
    seed: int = 0
    gamma: Optional[np.ndarray] = field(default=None, repr=False)
    support: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")
        if self.lambda_s < 0:
            raise ValueError(f"lambda_s must be nonnegative, got {self.lambda_s}")
        if self.kappa is not None and not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ValueError(f"max_iters must be a positive integer, got {self.max_iters}")
        if self.sigma_sq is not None and self.sigma_sq < 0:
            raise ValueError(f"sigma_sq must be nonnegative, got {self.sigma_sq}")
        if self.gamma is not None:
            g = np.asarray(self.gamma)
            if not (np.all(np.isfinite(g)) and np.all(g > 0)):
                raise ValueError("gamma must be strictly positive and finite")
        if self.support is not None and self.sigma_sq is None:
            raise ValueError("a support set requires sigma_sq")
        if self.acr_size is not None:
            self.acr_size = tuple(int(s) for s in self.acr_size)

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in CONFIG_FIELDS}, indent=2)

    @classmethod
    def from_json(cls, text: str, **arrays) -> "ReconConfig":
        raw = json.loads(text)
        unknown = set(raw) - set(CONFIG_FIELDS)
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**raw, **arrays)

    @classmethod
    def load(cls, path, **arrays) -> "ReconConfig":
        return cls.from_json(Path(path).read_text(), **arrays)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
