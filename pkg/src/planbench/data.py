"""Trajectory collection and the ``.swmt`` columnar file format.

Layout (all integers little-endian)::

    header
      magic            4 bytes  b"SWMT"
      version          u16      (1)
      column count     u16
      per column:
        name length    u8, then UTF-8 name
        dtype code     u8       0 = f32, 1 = i32, 2 = u8 boolean
        ndim           u8, then ndim x u32 per-step dims
      variation size   u32      f64 values stored per episode
      metadata length  u32, then UTF-8 JSON (world, variation keys, ...)
      episode count    u64
    index table, one record per episode
      step count       u64
      column offsets   u64 per column (absolute byte offsets)
      variation offset u64
    payload
      per episode: one contiguous block per column (steps x per-step
      elements), then the f64 variation block
    footer
      header CRC-32    u32      over header and index table
      payload CRC-32   u32      over the payload
      end magic        4 bytes  b"SWMT"

An episode of ``T`` transitions has ``T + 1`` rows: ``state[t]`` is the
state before ``action[t]``; the last action row is zero padding and
``terminated[t]`` marks the row where the success predicate first held.
"""

from __future__ import annotations

import json
import mmap
import os
import struct
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ContractError, DiscreteActionSpace, EpisodeError
from .rng import episode_seed, episode_stream
from .worlds.variation import ResetOptions

MAGIC = b"SWMT"
VERSION = 1
FOOTER = struct.Struct("<II4s")

DTYPES = {"f32": (0, np.dtype("<f4")), "i32": (1, np.dtype("<i4")), "bool": (2, np.dtype("u1"))}
_BY_CODE = {code: (name, dt) for name, (code, dt) in DTYPES.items()}


class FormatError(ValueError):
    """The file is not a valid trajectory file or fails its checksum."""


@dataclass(frozen=True)
class Column:
    name: str
    dtype: str
    shape: tuple = ()

    def __post_init__(self):
        if self.dtype not in DTYPES:
            raise ContractError(f"column {self.name}: dtype must be one of {sorted(DTYPES)}")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))

    @property
    def np_dtype(self) -> np.dtype:
        return DTYPES[self.dtype][1]

    @property
    def row_bytes(self) -> int:
        return int(np.prod(self.shape, dtype=int)) * self.np_dtype.itemsize


@dataclass(frozen=True)
class TrajectorySchema:
    columns: tuple

    REQUIRED = ("state", "action", "terminated")

    def __post_init__(self):
        cols = tuple(self.columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ContractError("column names must be unique")
        missing = [n for n in self.REQUIRED if n not in names]
        if missing:
            raise ContractError(f"schema is missing column(s) {missing}")
        object.__setattr__(self, "columns", cols)

    def __getitem__(self, name) -> Column:
        for c in self.columns:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]


@dataclass(frozen=True)
class WindowRequest:
    episode: int
    start: int
    length: int


def schema_for(world) -> TrajectorySchema:
    space = world.action_space
    if isinstance(space, DiscreteActionSpace):
        action = Column("action", "i32", ())
    else:
        action = Column("action", "f32", (space.dim,))
    return TrajectorySchema((Column("state", "f32", (world.state_dim,)), action, Column("terminated", "bool", ())))


# -- writing ----------------------------------------------------------------

def _header_bytes(schema: TrajectorySchema, var_size: int, meta: dict, n: int) -> bytes:
    parts = [MAGIC, struct.pack("<HH", VERSION, len(schema.columns))]
    for c in schema.columns:
        name = c.name.encode()
        parts.append(struct.pack("<B", len(name)) + name)
        parts.append(struct.pack("<BB", DTYPES[c.dtype][0], len(c.shape)))
        parts.append(struct.pack(f"<{len(c.shape)}I", *c.shape))
    blob = json.dumps(meta, sort_keys=True).encode()
    parts.append(struct.pack("<II", var_size, len(blob)) + blob)
    parts.append(struct.pack("<Q", n))
    return b"".join(parts)


def write_trajectories(path, schema: TrajectorySchema, episodes: Sequence[dict],
                       variations: Sequence | None = None, meta: dict | None = None) -> dict:
    """Write ``episodes`` (each a mapping column name -> ``(T, *shape)`` array)
    and one flat float64 variation vector per episode."""
    n = len(episodes)
    if n < 1:
        raise ContractError("need at least one episode")
    variations = [np.zeros(0)] * n if variations is None else list(variations)
    var_size = len(np.asarray(variations[0]).ravel())
    blocks, steps = [], []
    for i, ep in enumerate(episodes):
        T = None
        row = []
        for c in schema.columns:
            arr = np.ascontiguousarray(np.asarray(ep[c.name]), dtype=c.np_dtype)
            if arr.shape[1:] != c.shape:
                raise ContractError(f"episode {i}, column {c.name}: per-step shape {arr.shape[1:]} != {c.shape}")
            if T is None:
                T = arr.shape[0]
            elif arr.shape[0] != T:
                raise ContractError(f"episode {i}: columns have different step counts")
            row.append(arr.tobytes())
        if T < 1:
            raise ContractError(f"episode {i} is empty")
        var = np.ascontiguousarray(np.asarray(variations[i], dtype="<f8").ravel())
        if var.size != var_size:
            raise ContractError(f"episode {i}: variation block has {var.size} values, expected {var_size}")
        row.append(var.tobytes())
        blocks.append(row)
        steps.append(T)

    header = _header_bytes(schema, var_size, meta or {}, n)
    rec = 8 * (2 + len(schema.columns))
    offset = len(header) + n * rec
    index = bytearray()
    for T, row in zip(steps, blocks):
        offs = []
        for b in row:
            offs.append(offset)
            offset += len(b)
        index += struct.pack(f"<{len(offs) + 1}Q", T, *offs)
    head = header + bytes(index)
    payload_crc = 0
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(head)
        for row in blocks:
            for b in row:
                payload_crc = zlib.crc32(b, payload_crc)
                f.write(b)
        f.write(FOOTER.pack(zlib.crc32(head), payload_crc, MAGIC))
    os.replace(tmp, path)
    return {"path": str(path), "episodes": n, "steps": steps, "bytes": os.path.getsize(path)}


# -- reading ----------------------------------------------------------------

class TrajectoryFile:
    """Memory-mapped reader. The whole file is checksummed on open; window
    reads are one slice per requested column."""

    def __init__(self, path, verify: bool = True):
        self.path = str(path)
        self._fh = open(self.path, "rb")
        try:
            size = os.fstat(self._fh.fileno()).st_size
            if size < len(MAGIC) + FOOTER.size:
                raise FormatError(f"{self.path}: file too small")
            self._mm = mmap.mmap(self._fh.fileno(), 0, access=mmap.ACCESS_READ)
            self._parse(size, verify)
        except Exception:
            self.close()
            raise

    def _parse(self, size: int, verify: bool):
        mm = self._mm
        if mm[:4] != MAGIC:
            raise FormatError(f"{self.path}: bad magic {bytes(mm[:4])!r}")
        version, ncols = struct.unpack_from("<HH", mm, 4)
        if version != VERSION:
            raise FormatError(f"{self.path}: unsupported version {version}")
        pos, cols = 8, []
        try:
            for _ in range(ncols):
                (ln,) = struct.unpack_from("<B", mm, pos)
                name = bytes(mm[pos + 1 : pos + 1 + ln]).decode()
                pos += 1 + ln
                code, ndim = struct.unpack_from("<BB", mm, pos)
                shape = struct.unpack_from(f"<{ndim}I", mm, pos + 2)
                pos += 2 + 4 * ndim
                cols.append(Column(name, _BY_CODE[code][0], shape))
            self.variation_size, mlen = struct.unpack_from("<II", mm, pos)
            self.meta = json.loads(bytes(mm[pos + 8 : pos + 8 + mlen]).decode())
            pos += 8 + mlen
            (n,) = struct.unpack_from("<Q", mm, pos)
            pos += 8
            self.schema = TrajectorySchema(tuple(cols))
        except (struct.error, KeyError, UnicodeDecodeError, json.JSONDecodeError, ContractError) as exc:
            raise FormatError(f"{self.path}: corrupt header ({exc})") from None
        per = 2 + ncols
        end = pos + 8 * per * n
        if end > size - FOOTER.size:
            raise FormatError(f"{self.path}: index table runs past end of file")
        # copied so no buffer export outlives the mapping (close() would refuse)
        table = np.frombuffer(mm, dtype="<u8", count=per * n, offset=pos).reshape(n, per).copy()
        self.lengths = table[:, 0].astype(np.int64)
        self._offsets = table[:, 1:].astype(np.int64)
        self._payload = (end, size - FOOTER.size)
        head_crc, payload_crc, tail = FOOTER.unpack_from(mm, size - FOOTER.size)
        if tail != MAGIC:
            raise FormatError(f"{self.path}: bad footer")
        if verify:
            if zlib.crc32(mm[:end]) != head_crc:
                raise FormatError(f"{self.path}: header checksum mismatch")
            if zlib.crc32(mm[end : size - FOOTER.size]) != payload_crc:
                raise FormatError(f"{self.path}: payload checksum mismatch")
        for i in range(n):
            last = self._offsets[i, -1] + 8 * self.variation_size
            if self.lengths[i] < 1 or self._offsets[i, 0] < end or last > size - FOOTER.size:
                raise FormatError(f"{self.path}: episode {i} index entry out of range")

    def close(self):
        mm = getattr(self, "_mm", None)
        if mm is not None:
            mm.close()
            self._mm = None
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def num_episodes(self) -> int:
        return len(self.lengths)

    def _check_episode(self, episode: int):
        if not 0 <= episode < len(self):
            raise IndexError(f"episode {episode} out of range (file has {len(self)})")

    def read_window(self, req: WindowRequest | int, start: int | None = None, length: int | None = None,
                    columns: Sequence[str] | None = None) -> dict:
        """``length`` contiguous rows from ``start`` for each requested column."""
        if not isinstance(req, WindowRequest):
            req = WindowRequest(int(req), int(start), int(length))
        self._check_episode(req.episode)
        T = int(self.lengths[req.episode])
        if req.start < 0 or req.length < 1 or req.start + req.length > T:
            raise IndexError(
                f"window [{req.start}, {req.start + req.length}) outside episode {req.episode} of length {T}"
            )
        out = {}
        for name in columns or self.schema.names:
            j = self.schema.names.index(name)
            c = self.schema.columns[j]
            off = int(self._offsets[req.episode, j]) + req.start * c.row_bytes
            count = req.length * c.row_bytes // c.np_dtype.itemsize
            arr = np.frombuffer(self._mm, dtype=c.np_dtype, count=count, offset=off)
            arr = arr.reshape((req.length,) + c.shape).copy()
            out[name] = arr.astype(bool) if c.dtype == "bool" else arr
        return out

    def read_episode(self, episode: int, columns: Sequence[str] | None = None) -> dict:
        self._check_episode(episode)
        return self.read_window(WindowRequest(episode, 0, int(self.lengths[episode])), columns=columns)

    def variation(self, episode: int) -> np.ndarray:
        self._check_episode(episode)
        off = int(self._offsets[episode, -1])
        return np.frombuffer(self._mm, dtype="<f8", count=self.variation_size, offset=off).copy()

    def summary(self) -> dict:
        L = self.lengths
        return {
            "path": self.path,
            "episodes": len(self),
            "length_min": int(L.min()),
            "length_mean": float(L.mean()),
            "length_max": int(L.max()),
            "columns": {c.name: {"dtype": c.dtype, "shape": list(c.shape)} for c in self.schema.columns},
            "variation_size": self.variation_size,
            "total_bytes": os.path.getsize(self.path),
            "meta": self.meta,
        }


def read_window(path_or_file, req: WindowRequest, columns=None) -> dict:
    if isinstance(path_or_file, TrajectoryFile):
        return path_or_file.read_window(req, columns=columns)
    with TrajectoryFile(path_or_file) as f:
        return f.read_window(req, columns=columns)


def inspect(path) -> dict:
    with TrajectoryFile(path) as f:
        return f.summary()


# -- collection ---------------------------------------------------------------

def run_episode(env, policy, slot: int, reset_seed: int, rng, options, episode: int, max_steps: int):
    """Roll one episode; returns states, actions and the step of success (or None)."""
    state, info = env.reset(reset_seed, options)
    policy.on_reset(env, slot, rng=rng, episode=episode)
    states, actions = [state], []
    done_at = 0 if env.success(state, env.goal) else None
    while done_at is None and len(actions) < max_steps:
        action = policy.get_action(info, slot)
        state, done, info = env.step(action)
        states.append(state)
        actions.append(action)
        if done:
            done_at = len(actions)
    return states, actions, done_at


def collect(pool, policy, episodes: int, seed: int, options=None, out=None, max_steps: int | None = None) -> dict:
    """Record ``episodes`` episodes of ``policy`` and write them to ``out``."""
    if episodes < 1:
        raise ContractError("episodes must be >= 1")
    opts = ResetOptions.coerce(options)
    env0 = pool.envs[0]
    space = env0.variations
    schema = schema_for(env0)
    discrete = isinstance(env0.action_space, DiscreteActionSpace)
    adim = env0.action_space.dim

    def one(env, slot, i):
        steps = max_steps or env.max_steps
        try:
            states, actions, done_at = run_episode(env, policy, slot, episode_seed(seed, i),
                                                   episode_stream(seed, i), opts, i, steps)
        except Exception as exc:
            raise EpisodeError(f"collect: episode {i}: {type(exc).__name__}: {exc}") from exc
        T = len(states)
        act = np.zeros((T,) if discrete else (T, adim))
        if actions:
            act[: T - 1] = np.asarray(actions, dtype=float).reshape(act[: T - 1].shape)
        term = np.zeros(T, dtype=bool)
        if done_at is not None:
            term[done_at] = True
        return {"state": np.asarray(states), "action": act, "terminated": term}, space.flatten(env.values)

    results = pool.map(one, list(range(episodes)))
    meta = {
        "world": env0.name,
        "seed": int(seed),
        "variation_keys": [[f.key, f.size] for f in space.factors],
        "policy": type(policy).__name__,
    }
    summary = write_trajectories(out, schema, [r[0] for r in results], [r[1] for r in results], meta)
    summary["terminated_fraction"] = float(np.mean([r[0]["terminated"].any() for r in results]))
    return summary
