"""Checkpoint files: plain-text manifest plus little-endian float32 blobs.

Layout::

    PUMFA-CKPT-1\n
    [config]\n
    key = value              (one per line, optional section)
    [tensors]\n
    name dim0,dim1,... offset_bytes
    [blob]\n
    <raw little-endian float32 data>

Offsets are relative to the byte right after the ``[blob]`` marker. Writes
go through a temp file and an atomic rename.
"""

import os
import tempfile

import numpy as np

MAGIC = "PUMFA-CKPT-1"


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, arrays, config=None):
    """Write named float arrays plus a flat config dict.

    ``arrays``: mapping name -> numpy array (stored as little-endian float32).
    ``config``: mapping key -> value, stringified into the [config] section.
    """
    lines = [MAGIC, "[config]"]
    for key, value in (config or {}).items():
        lines.append(f"{key} = {value}")
    lines.append("[tensors]")
    blobs = []
    offset = 0
    for name, arr in arrays.items():
        if " " in name:
            raise CheckpointError(f"tensor name may not contain spaces: {name!r}")
        blob = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        dims = ",".join(str(d) for d in np.asarray(arr).shape) or "1"
        lines.append(f"{name} {dims} {offset}")
        blobs.append(blob)
        offset += len(blob)
    lines.append("[blob]")
    header = ("\n".join(lines) + "\n").encode("ascii")

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".ckpt.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            for blob in blobs:
                fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    """Read a checkpoint; returns (config dict, name -> float32 array)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint: {e}") from e
    marker = b"[blob]\n"
    cut = raw.find(marker)
    if cut < 0:
        raise CheckpointError(f"{path}: missing [blob] section")
    header = raw[:cut].decode("ascii").splitlines()
    blob = raw[cut + len(marker):]
    if not header or header[0] != MAGIC:
        raise CheckpointError(f"{path}: bad magic, expected {MAGIC}")

    config = {}
    tensors = {}
    section = None
    for line in header[1:]:
        line = line.strip()
        if not line:
            continue
        if line in ("[config]", "[tensors]"):
            section = line
            continue
        if section == "[config]":
            key, _, value = line.partition("=")
            config[key.strip()] = value.strip()
        elif section == "[tensors]":
            name, dims, offset = line.rsplit(" ", 2)
            shape = tuple(int(d) for d in dims.split(","))
            count = int(np.prod(shape))
            start = int(offset)
            if start + 4 * count > len(blob):
                raise CheckpointError(
                    f"{path}: blob truncated, tensor {name} extends past end"
                )
            arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start)
            tensors[name] = arr.reshape(shape).copy()
        else:
            raise CheckpointError(f"{path}: line outside any section: {line!r}")
    return config, tensors
