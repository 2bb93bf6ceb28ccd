"""
src/ndiff/checkpoint.py
Parameter checkpoints: one text header line, then little-endian float64 parameters.
Exports: CHECKPOINT_VERSION, save_checkpoint, load_checkpoint
"""

import logging
from pathlib import Path

import numpy as np

from src.ndiff.net import DenseNet

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
_MAGIC = "ndiff"


def _header(net: DenseNet) -> str:
    widths = ",".join(str(w) for w in net.widths)
    spectral = 1 if net.spectral_norm_enabled else 0
    return (
        f"{_MAGIC} version={CHECKPOINT_VERSION} widths={widths} "
        f"activation={net.activation} spectral={spectral}\n"
    )


def save_checkpoint(net: DenseNet, path: str | Path) -> Path:
    """
    Write weights, then biases, then power-iteration vectors (if any), layer by layer.

    Args:
        net: Net to persist.
        path: Target file; parent directories are created.
    Returns:
        Path written.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    blocks = [*net.weights, *net.biases, *net.power_iter_state]
    payload = np.concatenate([b.ravel() for b in blocks]).astype("<f8")
    with target.open("wb") as handle:
        handle.write(_header(net).encode("ascii"))
        handle.write(payload.tobytes())
    logger.info("Wrote checkpoint %s (%d parameters).", target, payload.size)
    return target


def _parse_header(line: str) -> dict[str, str]:
    parts = line.strip().split()
    if not parts or parts[0] != _MAGIC:
        raise ValueError("Not an ndiff checkpoint (bad header).")
    fields = dict(part.split("=", 1) for part in parts[1:])
    version = int(fields.get("version", "0"))
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"Unsupported checkpoint version {version}; expected {CHECKPOINT_VERSION}.")
    return fields


def load_checkpoint(path: str | Path) -> DenseNet:
    """
    Read a checkpoint written by `save_checkpoint`.

    Raises:
        ValueError: Bad header, unsupported version, or truncated payload.
    """
    raw = Path(path).read_bytes()
    newline = raw.find(b"\n")
    if newline < 0:
        raise ValueError("Checkpoint header line is missing.")
    fields = _parse_header(raw[:newline].decode("ascii"))
    widths = [int(w) for w in fields["widths"].split(",")]
    spectral = fields.get("spectral", "0") == "1"
    values = np.frombuffer(raw[newline + 1 :], dtype="<f8").astype(float)
    shapes = [(o, i) for i, o in zip(widths[:-1], widths[1:])]
    shapes += [(o,) for o in widths[1:]]
    if spectral:
        shapes += [(o,) for o in widths[1:]]
    expected = sum(int(np.prod(s)) for s in shapes)
    if values.size != expected:
        raise ValueError(f"Checkpoint payload has {values.size} values, expected {expected}.")
    blocks = []
    offset = 0
    for shape in shapes:
        size = int(np.prod(shape))
        blocks.append(values[offset : offset + size].reshape(shape).copy())
        offset += size
    n = len(widths) - 1
    return DenseNet(
        widths=tuple(widths),
        weights=tuple(blocks[:n]),
        biases=tuple(blocks[n : 2 * n]),
        activation=fields["activation"],
        spectral_norm_enabled=spectral,
        power_iter_state=tuple(blocks[2 * n :]),
    )
