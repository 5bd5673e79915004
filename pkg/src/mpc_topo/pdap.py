"""Power-delay-angle profile (PDAP) container, file I/O and sample extraction."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

import numpy as np

__all__ = [
    "Pdap",
    "MpcSample",
    "MpcSamples",
    "NormalizationContext",
    "PdapFormatError",
    "PdapValidationError",
    "DegenerateAxisError",
    "load_pdap",
    "save_pdap",
    "pdap_to_dict",
    "pdap_from_dict",
    "denoise",
    "normalization_context",
]

CSV_CORNER = "delay_ns\\angle_deg"


class PdapFormatError(ValueError):
    """Raised when a PDAP file cannot be parsed."""


class PdapValidationError(ValueError):
    """Raised when parsed PDAP content violates the grid invariants."""


class DegenerateAxisError(ValueError):
    """Raised when a sample set has zero spread along an axis."""


def _frozen(a: Any, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _check_uniform_axis(axis: np.ndarray, name: str) -> None:
    if axis.ndim != 1 or axis.size < 2:
        raise PdapValidationError(f"{name} must be a 1D array with at least 2 entries")
    if not np.all(np.isfinite(axis)):
        raise PdapValidationError(f"{name} contains non-finite values")
    steps = np.diff(axis)
    if np.any(steps <= 0):
        raise PdapValidationError(f"{name} must be strictly increasing")
    # exact decimal grids rarely survive float parsing bit-exactly
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-9 * max(1.0, abs(axis).max())):
        raise PdapValidationError(f"{name} is not uniformly spaced")


@dataclass(frozen=True, eq=False)
class Pdap:
    """Dense delay x angle grid of path power in dB.

    ``power[i, j]`` is the power at ``delay_axis[i]`` (ns) and ``angle_axis[j]`` (deg).
    Arrays are copied and made read-only on construction.
    """

    delay_axis: np.ndarray
    angle_axis: np.ndarray
    power: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "delay_axis", _frozen(self.delay_axis))
        object.__setattr__(self, "angle_axis", _frozen(self.angle_axis))
        object.__setattr__(self, "power", _frozen(self.power))
        object.__setattr__(self, "meta", dict(self.meta or {}))
        _check_uniform_axis(self.delay_axis, "delay_axis")
        _check_uniform_axis(self.angle_axis, "angle_axis")
        expected = (self.delay_axis.size, self.angle_axis.size)
        if self.power.shape != expected:
            raise PdapValidationError(
                f"power grid has shape {self.power.shape}, expected {expected}"
            )
        if not np.all(np.isfinite(self.power)):
            raise PdapValidationError("power grid contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.power.shape

    @property
    def delay_step(self) -> float:
        return float(self.delay_axis[1] - self.delay_axis[0])

    @property
    def angle_step(self) -> float:
        return float(self.angle_axis[1] - self.angle_axis[0])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pdap):
            return NotImplemented
        return (
            np.array_equal(self.delay_axis, other.delay_axis)
            and np.array_equal(self.angle_axis, other.angle_axis)
            and np.array_equal(self.power, other.power)
            and self.meta == other.meta
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class MpcSample:
    tau: float
    phi: float
    power: float
    grid_index: tuple[int, int]


class MpcSamples:
    """Columnar set of MPC samples taken from the nodes of a :class:`Pdap`.

    Iterating yields :class:`MpcSample` records; the ``tau``, ``phi``, ``power``
    and ``grid_index`` arrays are the primary (vectorised) interface.
    """

    def __init__(self, tau, phi, power, grid_index):
        self.tau = _frozen(tau)
        self.phi = _frozen(phi)
        self.power = _frozen(power)
        self.grid_index = _frozen(np.asarray(grid_index, dtype=np.int64).reshape(-1, 2), np.int64)
        n = self.tau.size
        if not (self.phi.size == n and self.power.size == n and self.grid_index.shape[0] == n):
            raise ValueError("sample columns have inconsistent lengths")

    @classmethod
    def from_pdap(cls, p: Pdap, mask: np.ndarray | None = None) -> "MpcSamples":
        if mask is None:
            mask = np.ones(p.shape, dtype=bool)
        ii, jj = np.nonzero(mask)
        return cls(p.delay_axis[ii], p.angle_axis[jj], p.power[ii, jj], np.column_stack([ii, jj]))

    @classmethod
    def from_records(cls, records) -> "MpcSamples":
        records = list(records)
        return cls(
            [r.tau for r in records],
            [r.phi for r in records],
            [r.power for r in records],
            np.array([r.grid_index for r in records], dtype=np.int64).reshape(-1, 2),
        )

    def __len__(self) -> int:
        return int(self.tau.size)

    def __getitem__(self, k: int) -> MpcSample:
        i, j = self.grid_index[k]
        return MpcSample(float(self.tau[k]), float(self.phi[k]), float(self.power[k]), (int(i), int(j)))

    def __iter__(self) -> Iterator[MpcSample]:
        for k in range(len(self)):
            yield self[k]

    def subset(self, index) -> "MpcSamples":
        return MpcSamples(self.tau[index], self.phi[index], self.power[index], self.grid_index[index])

    @property
    def points(self) -> np.ndarray:
        """(N, 2) array of (tau, phi)."""
        return np.column_stack([self.tau, self.phi])

    def strongest(self) -> MpcSample:
        return self[int(np.argmax(self.power))]


@dataclass(frozen=True)
class NormalizationContext:
    """Axis scales used by the normalised sample distance.

    ``sigma_tau``/``sigma_phi`` are population standard deviations over the
    sample set; the ranges are kept for min-max normalisation.
    """

    sigma_tau: float
    sigma_phi: float
    tau_range: tuple[float, float] = (0.0, 1.0)
    phi_range: tuple[float, float] = (0.0, 1.0)

    def scale(self, tau, phi) -> np.ndarray:
        """Map (tau, phi) to sigma-normalised coordinates, shape (..., 2)."""
        return np.stack([np.asarray(tau, float) / self.sigma_tau, np.asarray(phi, float) / self.sigma_phi], -1)

    def unscale(self, pts) -> np.ndarray:
        pts = np.asarray(pts, float)
        return np.stack([pts[..., 0] * self.sigma_tau, pts[..., 1] * self.sigma_phi], -1)

    def to_dict(self) -> dict:
        return {
            "sigma_tau_ns": self.sigma_tau,
            "sigma_phi_deg": self.sigma_phi,
            "tau_range_ns": list(self.tau_range),
            "phi_range_deg": list(self.phi_range),
        }


def normalization_context(samples: MpcSamples) -> NormalizationContext:
    if len(samples) < 2:
        raise DegenerateAxisError("need at least 2 samples for a normalization context")
    sigma_tau = float(np.std(samples.tau))
    sigma_phi = float(np.std(samples.phi))
    if sigma_tau == 0.0:
        raise DegenerateAxisError("all sample delays are identical")
    if sigma_phi == 0.0:
        raise DegenerateAxisError("all sample angles are identical")
    return NormalizationContext(
        sigma_tau,
        sigma_phi,
        (float(samples.tau.min()), float(samples.tau.max())),
        (float(samples.phi.min()), float(samples.phi.max())),
    )


def denoise(p: Pdap, threshold_db: float) -> MpcSamples:
    """Keep grid nodes whose power is strictly above ``threshold_db``."""
    if np.isnan(threshold_db):
        raise ValueError("threshold_db must not be NaN")
    return MpcSamples.from_pdap(p, p.power > threshold_db)


# --------------------------------------------------------------------------
# serialization


def pdap_to_dict(p: Pdap) -> dict:
    d = {
        "delay_ns": p.delay_axis.tolist(),
        "angle_deg": p.angle_axis.tolist(),
        "power_db": p.power.tolist(),
    }
    if p.meta:
        d["meta"] = p.meta
    return d


def pdap_from_dict(d: dict) -> Pdap:
    for key in ("delay_ns", "angle_deg", "power_db"):
        if key not in d:
            raise PdapFormatError(f"missing key '{key}'")
    rows = d["power_db"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise PdapFormatError("'power_db' must be an array of arrays")
    n_ang = len(d["angle_deg"])
    for i, row in enumerate(rows):
        if len(row) != n_ang:
            raise PdapValidationError(
                f"power_db row {i} has {len(row)} values, expected {n_ang} (len(angle_deg))"
            )
    meta = d.get("meta") or {}
    if not isinstance(meta, dict):
        raise PdapFormatError("'meta' must be an object")
    try:
        return Pdap(
            np.asarray(d["delay_ns"], dtype=float),
            np.asarray(d["angle_deg"], dtype=float),
            np.asarray(rows, dtype=float).reshape(len(rows), n_ang),
            meta,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, PdapValidationError):
            raise
        raise PdapFormatError(f"non-numeric PDAP content: {exc}") from exc


def _read_csv(text: str) -> Pdap:
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r]
    if not rows:
        raise PdapFormatError("line 1: empty CSV file")
    head = rows[0]
    if head[0].strip() != CSV_CORNER:
        raise PdapFormatError(f"line 1, field 1: expected '{CSV_CORNER}', got '{head[0]}'")

    def num(s: str, line: int, col: int) -> float:
        try:
            return float(s)
        except ValueError:
            raise PdapFormatError(f"line {line}, field {col}: not a number: '{s}'") from None

    angles = [num(s, 1, c + 2) for c, s in enumerate(head[1:])]
    delays, power = [], []
    for ln, row in enumerate(rows[1:], start=2):
        if len(row) != len(angles) + 1:
            raise PdapValidationError(
                f"line {ln}: expected {len(angles) + 1} fields, got {len(row)}"
            )
        delays.append(num(row[0], ln, 1))
        power.append([num(s, ln, c + 2) for c, s in enumerate(row[1:])])
    return Pdap(np.array(delays), np.array(angles), np.array(power).reshape(len(delays), len(angles)))


def _write_csv(p: Pdap) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([CSV_CORNER] + [repr(float(a)) for a in p.angle_axis])
    for t, row in zip(p.delay_axis, p.power):
        w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return buf.getvalue()


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt:
        fmt = fmt.lower()
    else:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("json", "csv"):
        raise PdapFormatError(f"unsupported PDAP format '{fmt}' (expected json or csv)")
    return fmt


def load_pdap(path, format: str | None = None) -> Pdap:
    """Read a PDAP from JSON or CSV (format inferred from the suffix if omitted)."""
    path = Path(path)
    fmt = _infer_format(path, format)
    text = path.read_text()
    if fmt == "csv":
        return _read_csv(text)
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PdapFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(d, dict):
        raise PdapFormatError("top-level JSON value must be an object")
    return pdap_from_dict(d)


def save_pdap(p: Pdap, path, format: str | None = None, extra: dict | None = None) -> None:
    """Write ``p``; CSV carries the grid only (``meta`` and ``extra`` are dropped)."""
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "csv":
        path.write_text(_write_csv(p))
        return
    d = pdap_to_dict(p)
    if extra:
        d.update(extra)
    path.write_text(json.dumps(d))
