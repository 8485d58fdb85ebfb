"""
On-disk formats.

Profile files (UTF-8)::

    {"re_tau": 2000, "pr": 7, "u_tau": 1, "theta_tau": 1, "h": 1,
     "n": 1, "m": 0, "basis": "instantaneous", "origin": "centre"}
    ---
    x2_over_h,value
    0.0,21.3
    ...

The JSON header may span several lines and ends at the sentinel ``---``.
``origin`` is ``centre`` (x2/h = 0 on the centre line) or ``wall``; wall
anchored files are flipped with ``x -> 1 - x`` on reading.

Snapshot files (binary, little endian)::

    offset  size        field
    0       8           magic b"CHSNAP\\x00\\x01"
    8       4  uint32   version (1)
    12      4  uint32   reserved (0)
    16      32 uint64x4 n1, n2, n3, n_snapshots
    48      40 float64x5 re_tau, pr, u_tau, theta_tau, h
    88      8  uint64   grid length (must equal n2)
    96      8*n2        grid, x2/h
    ...     8*n1*n2*n3  per snapshot: U1 then Theta, plane-major (x2, x1, x3)
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .moments import SnapshotEnsemble
from .types import Basis, FlowCase, MomentOrder, MomentProfile, WallNormalGrid

SENTINEL = "---"
CSV_HEADER = "x2_over_h,value"
REQUIRED_KEYS = ("re_tau", "pr", "u_tau", "theta_tau", "h", "n", "m", "basis", "origin")
CASE_KEYS = ("re_tau", "pr", "u_tau", "theta_tau", "h")

MAGIC = b"CHSNAP\x00\x01"
VERSION = 1
_HEAD = struct.Struct("<8sII4Q5dQ")


def atomic_write(path, data: bytes | str):
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": "\n"})) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_profile(profile: MomentProfile, extra_meta: dict | None = None) -> str:
    meta = {k: getattr(profile.case, k) for k in CASE_KEYS}
    meta.update(n=profile.order.n, m=profile.order.m, basis=profile.basis.value, origin="centre")
    for k, v in profile.meta.items():
        if k != "source":
            meta.setdefault(k, v)
    if extra_meta:
        meta.update(extra_meta)
    lines = [json.dumps(meta, sort_keys=True), SENTINEL, CSV_HEADER]
    lines += [f"{x!r},{v!r}" for x, v in zip(profile.x.tolist(), profile.values.tolist())]
    return "\n".join(lines) + "\n"


def write_profile(path, profile: MomentProfile, extra_meta: dict | None = None):
    atomic_write(path, format_profile(profile, extra_meta))


def parse_profile(text: str, source="<string>") -> MomentProfile:
    lines = text.splitlines()
    try:
        cut = next(i for i, line in enumerate(lines) if line.strip() == SENTINEL)
    except StopIteration:
        raise ValidationError(f"{source}: missing header sentinel line {SENTINEL!r}") from None
    try:
        meta = json.loads("\n".join(lines[:cut]))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}: header is not valid JSON ({exc})") from None
    for key in REQUIRED_KEYS:
        if key not in meta:
            raise ValidationError(f"{source}: missing metadata key {key!r}")
    body = [ln for ln in lines[cut + 1:] if ln.strip()]
    if not body or body[0].replace(" ", "") != CSV_HEADER:
        raise ValidationError(f"{source}: expected CSV header {CSV_HEADER!r} after the sentinel")
    xs, vs = [], []
    for lineno, line in enumerate(body[1:], start=cut + 3):
        parts = line.split(",")
        try:
            if len(parts) != 2:
                raise ValueError
            xs.append(float(parts[0]))
            vs.append(float(parts[1]))
        except ValueError:
            raise ValidationError(f"{source}: line {lineno}: bad record {line!r}") from None
    x = np.array(xs)
    v = np.array(vs)
    seen = {}
    for i, xi in enumerate(xs):
        if xi in seen:
            raise ValidationError(f"{source}: duplicate x2_over_h={xi!r} in records {seen[xi] + 1} and {i + 1}")
        seen[xi] = i
    step = np.diff(x)
    if np.any(step <= 0):
        i = int(np.nonzero(step <= 0)[0][0])
        raise ValidationError(f"{source}: non-monotone grid at record {i + 2} (x2_over_h={xs[i + 1]!r})")
    origin = meta["origin"]
    if origin == "wall":
        x = (1.0 - x)[::-1]
        v = v[::-1]
    elif origin not in ("centre", "center"):
        raise ValidationError(f"{source}: origin must be 'centre' or 'wall', got {origin!r}")
    try:
        case = FlowCase(**{k: meta[k] for k in CASE_KEYS})
        order = MomentOrder(meta["n"], meta["m"])
        basis = Basis(meta["basis"])
        grid = WallNormalGrid(x)
    except ValueError as exc:
        raise ValidationError(f"{source}: {exc}") from None
    extra = {k: val for k, val in meta.items() if k not in REQUIRED_KEYS and k != "pe_tau"}
    extra["source"] = str(source)
    return MomentProfile(order, grid, v, basis, case, meta=extra)


def read_profile_file(path) -> MomentProfile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None
    return parse_profile(text, source=path)


def encode_snapshots(ens: SnapshotEnsemble) -> bytes:
    n1, n2, n3 = ens.shape
    c = ens.case
    head = _HEAD.pack(MAGIC, VERSION, 0, n1, n2, n3, ens.n_snapshots,
                      c.re_tau, c.pr, c.u_tau, c.theta_tau, c.h, len(ens.grid))
    parts = [head, np.ascontiguousarray(ens.grid.points, dtype="<f8").tobytes()]
    for s in range(ens.n_snapshots):
        for field in (ens.u1[s], ens.theta[s]):
            parts.append(np.ascontiguousarray(np.moveaxis(field, 1, 0), dtype="<f8").tobytes())
    return b"".join(parts)


def decode_snapshots(buf: bytes, source="<bytes>") -> SnapshotEnsemble:
    if len(buf) < _HEAD.size:
        raise ValidationError(f"{source}: truncated header at byte {len(buf)}, expected {_HEAD.size} bytes")
    (magic, version, _reserved, n1, n2, n3, ns, re_tau, pr, u_tau, theta_tau, h,
     n_grid) = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise ValidationError(f"{source}: bad magic {magic!r} at byte 0")
    if version != VERSION:
        raise ValidationError(f"{source}: unsupported version {version} at byte 8")
    if n_grid != n2:
        raise ValidationError(f"{source}: grid length {n_grid} at byte 88 does not match n2={n2}")
    if min(n1, n2, n3, ns) < 1:
        raise ValidationError(f"{source}: empty shape ({n1}, {n2}, {n3}) x {ns} at byte 16")
    field_bytes = 8 * n1 * n2 * n3
    expected = _HEAD.size + 8 * n2 + 2 * ns * field_bytes
    if len(buf) < expected:
        raise ValidationError(f"{source}: truncated payload: {len(buf)} bytes, expected {expected} "
                              f"(data ends at byte {len(buf)}, boundary {expected})")
    if len(buf) > expected:
        raise ValidationError(f"{source}: {len(buf) - expected} trailing bytes after byte {expected}")
    off = _HEAD.size
    grid = np.frombuffer(buf, dtype="<f8", count=n2, offset=off).astype(float)
    off += 8 * n2
    u1 = np.empty((ns, n1, n2, n3))
    th = np.empty_like(u1)
    for s in range(ns):
        for target in (u1, th):
            block = np.frombuffer(buf, dtype="<f8", count=n1 * n2 * n3, offset=off).reshape(n2, n1, n3)
            target[s] = np.moveaxis(block, 0, 1)
            off += field_bytes
    try:
        return SnapshotEnsemble(u1, th, WallNormalGrid(grid), FlowCase(re_tau, pr, u_tau, theta_tau, h),
                                meta={"source": str(source)})
    except ValidationError as exc:
        raise ValidationError(f"{source}: {exc}") from None


def write_snapshot_file(path, ens: SnapshotEnsemble):
    atomic_write(path, encode_snapshots(ens))


def read_snapshot_file(path) -> SnapshotEnsemble:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None
    return decode_snapshots(buf, source=path)
