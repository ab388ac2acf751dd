"""Frame, mask, flow and trace files.

Sequences are directories of numbered frames (binary PGM/PPM or PNG, 8 or
16 bit).  Flows are directories of Middlebury ``.flo`` files, one per
frame pair.
"""
from __future__ import annotations

import os
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataError

FRAME_EXTS = (".pgm", ".ppm", ".pnm", ".png")
FLO_MAGIC = b"PIEH"
_INDEX = re.compile(r"(\d+)(?=\.[^.]+$)")


# ---------------------------------------------------------------------------
# PNM


def _pnm_tokens(data, path):
    # header: magic, width, height, maxval, separated by whitespace and comments
    tokens = []
    pos = 0
    while len(tokens) < 4:
        if pos >= len(data):
            raise DataError(f"{path}: truncated header")
        ch = data[pos : pos + 1]
        if ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        elif ch.isspace():
            pos += 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace() and data[end : end + 1] != b"#":
                end += 1
            tokens.append(data[pos:end])
            pos = end
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_pnm(path):
    """Read a binary PGM (P5) or PPM (P6) frame.

    Returns ``(frame, maxval)`` with ``frame`` of shape (H, W, C) scaled
    to [0, 1] by ``maxval``.
    """
    path = Path(path)
    data = path.read_bytes()
    tokens, start = _pnm_tokens(data, path)
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise DataError(f"{path}: unsupported magic {magic!r} (need P5 or P6)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise DataError(f"{path}: malformed header") from None
    if width < 1 or height < 1 or not 0 < maxval < 65536:
        raise DataError(f"{path}: invalid header values {width} {height} {maxval}")
    channels = 1 if magic == b"P5" else 3
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height * channels
    raw = data[start : start + count * dtype.itemsize]
    if len(raw) != count * dtype.itemsize:
        raise DataError(f"{path}: expected {count} samples, file is truncated")
    frame = np.frombuffer(raw, dtype).reshape(height, width, channels)
    return frame.astype(float) / maxval, maxval


def _quantize(frame, maxval):
    # round half up
    return np.floor(np.clip(frame, 0.0, 1.0) * maxval + 0.5)


def write_pnm(path, frame, bits=8):
    frame = np.asarray(frame, dtype=float)
    if frame.ndim == 2:
        frame = frame[..., None]
    channels = frame.shape[-1]
    if channels not in (1, 3):
        raise DataError(f"{path}: PNM frames need 1 or 3 channels, got {channels}")
    maxval = (1 << bits) - 1
    dtype = ">u2" if bits == 16 else "u1"
    magic = "P5" if channels == 1 else "P6"
    header = f"{magic}\n{frame.shape[1]} {frame.shape[0]}\n{maxval}\n".encode("ascii")
    Path(path).write_bytes(header + _quantize(frame, maxval).astype(dtype).tobytes())


# ---------------------------------------------------------------------------
# PNG


def read_png(path):
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=float)
            maxval = 65535
        elif im.mode in ("L", "RGB"):
            arr = np.asarray(im, dtype=float)
            maxval = 255
        elif im.mode in ("1", "P", "LA", "RGBA"):
            conv = im.convert("RGB" if im.mode in ("P", "RGBA") else "L")
            arr = np.asarray(conv, dtype=float)
            maxval = 255
        else:
            raise DataError(f"{path}: unsupported PNG mode {im.mode}")
    if arr.ndim == 2:
        arr = arr[..., None]
    return arr / maxval, maxval


def write_png(path, frame, bits=8):
    frame = np.asarray(frame, dtype=float)
    if frame.ndim == 3 and frame.shape[-1] == 1:
        frame = frame[..., 0]
    if bits == 16:
        if frame.ndim != 2:
            raise DataError(f"{path}: 16-bit PNG output supports single-channel frames only")
        Image.fromarray(_quantize(frame, 65535).astype(np.uint16)).save(path)
    else:
        Image.fromarray(_quantize(frame, 255).astype(np.uint8)).save(path)


# ---------------------------------------------------------------------------
# sequences


def read_frame(path):
    ext = Path(path).suffix.lower()
    if ext == ".png":
        return read_png(path)
    if ext in (".pgm", ".ppm", ".pnm"):
        return read_pnm(path)
    raise DataError(f"{path}: unknown frame format {ext!r}")


def list_frames(directory, exts=FRAME_EXTS):
    """Frame files of ``directory`` ordered by their numeric index.

    Indices must be contiguous.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"{directory}: not a directory")
    found = []
    for name in os.listdir(directory):
        if Path(name).suffix.lower() not in exts:
            continue
        m = _INDEX.search(name)
        if m is None:
            raise DataError(f"{directory / name}: file name carries no frame index")
        found.append((int(m.group(1)), directory / name))
    if not found:
        raise DataError(f"{directory}: no frames found")
    found.sort()
    indices = [i for i, _ in found]
    if len(set(indices)) != len(indices):
        raise DataError(f"{directory}: duplicate frame indices")
    for prev, (i, path) in zip(indices, found[1:]):
        if i != prev + 1:
            raise DataError(f"{directory}: frame index {prev + 1} missing before {path.name}")
    return [p for _, p in found]


def read_sequence(directory):
    """Read every frame of ``directory`` into a (T, H, W, C) array in [0, 1]."""
    paths = list_frames(directory)
    frames = []
    first = None
    for path in paths:
        frame, maxval = read_frame(path)
        key = (frame.shape, maxval, path.suffix.lower())
        if first is None:
            first = key
        elif frame.shape != first[0]:
            raise DataError(
                f"{path}: dimension mismatch, {frame.shape[1]}x{frame.shape[0]}x{frame.shape[2]} "
                f"instead of {first[0][1]}x{first[0][0]}x{first[0][2]}"
            )
        elif key != first:
            raise DataError(f"{path}: format or bit depth differs from {paths[0].name}")
        frames.append(frame)
    return np.stack(frames)


def write_sequence(directory, u, fmt=None, bits=8, prefix="frame"):
    """Write frames ``{prefix}_0000.<ext>``; ``fmt`` is pnm (default) or png."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 3:
        u = u[..., None]
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    fmt = (fmt or "pnm").lower()
    for t, frame in enumerate(u):
        if fmt == "png":
            write_png(directory / f"{prefix}_{t:04d}.png", frame, bits)
        elif fmt in ("pnm", "pgm", "ppm"):
            ext = ".pgm" if frame.shape[-1] == 1 else ".ppm"
            write_pnm(directory / f"{prefix}_{t:04d}{ext}", frame, bits)
        else:
            raise DataError(f"unknown output format {fmt!r}")


def read_mask(directory):
    """Missing-data mask: any nonzero pixel is missing."""
    m = read_sequence(directory)
    return np.any(m > 0, axis=-1)


def write_mask(directory, mask, prefix="mask"):
    """Write a mask as 8-bit PGM frames, 255 = missing."""
    mask = np.asarray(mask, dtype=bool)
    write_sequence(directory, mask[..., None].astype(float), "pnm", 8, prefix)


# ---------------------------------------------------------------------------
# flows


def read_flo(path):
    """Read a Middlebury flow file into an (H, W, 2) float array."""
    data = Path(path).read_bytes()
    if len(data) < 12 or data[:4] != FLO_MAGIC:
        raise DataError(f"{path}: bad flow magic")
    width, height = np.frombuffer(data[4:12], "<i4")
    if width < 1 or height < 1:
        raise DataError(f"{path}: invalid flow size {width}x{height}")
    n = int(width) * int(height) * 2
    if len(data) != 12 + 4 * n:
        raise DataError(f"{path}: expected {n} flow values")
    return np.frombuffer(data[12:], "<f4").reshape(height, width, 2).astype(float)


def write_flo(path, flow):
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[-1] != 2:
        raise DataError(f"{path}: flow must be (H, W, 2), got {flow.shape}")
    h, w = flow.shape[:2]
    Path(path).write_bytes(FLO_MAGIC + np.array([w, h], "<i4").tobytes() + flow.astype("<f4").tobytes())


def read_flow(directory):
    """Read ``directory``'s ``.flo`` files into a (T - 1, H, W, 2) array."""
    paths = list_frames(directory, exts=(".flo",))
    slices = [read_flo(p) for p in paths]
    for p, s in zip(paths, slices):
        if s.shape != slices[0].shape:
            raise DataError(f"{p}: dimension mismatch with {paths[0].name}")
    return np.stack(slices)


def write_flow(directory, flow, prefix="flow"):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, f in enumerate(np.asarray(flow)):
        write_flo(directory / f"{prefix}_{k:04d}.flo", f)


# ---------------------------------------------------------------------------
# traces


def write_trace(path, energies, level=None):
    """Two-column ``iteration energy`` text.

    ``energies`` is a list of floats, or of ``(level, energies)`` pairs as
    produced by the pipeline; each level then starts with a ``# level``
    comment line.
    """
    lines = []
    if energies and isinstance(energies[0], tuple):
        for lev, values in energies:
            lines.append(f"# level {lev}")
            lines.extend(f"{i} {e:.17g}" for i, e in enumerate(values))
    else:
        if level is not None:
            lines.append(f"# level {level}")
        lines.extend(f"{i} {e:.17g}" for i, e in enumerate(energies))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trace(path):
    """Energies of a trace file as ``(level, values)`` pairs (level None when absent)."""
    out = []
    level = None
    values = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if values or level is not None:
                out.append((level, values))
            level = int(line.split()[-1])
            values = []
            continue
        values.append(float(line.split()[1]))
    out.append((level, values))
    return out
