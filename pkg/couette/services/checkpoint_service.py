"""
Checkpoint service: dump and restore a FlowState

Little-endian layout:

    offset  size          field
    0       4             magic b"CTCK"
    4       4             version (uint32)
    8       8             Lx (float64)
    16      4             K (uint32)
    20      4             n (uint32)
    24      8             nu (float64)
    32      8             t (float64)
    40      16*(2K+1)*(n+1) modes, complex128 row-major (j = -K..K, then node),
                          i.e. interleaved real/imag float64 pairs
"""
import logging
import struct

import aiofiles
import numpy as np

from couette.services.flow_service import FlowState
from couette.utils.errors import ConfigError, ShapeMismatch

logger = logging.getLogger(__name__)

MAGIC = b"CTCK"
VERSION = 1
HEADER = struct.Struct("<4sIdIIdd")


def dump_state(state: FlowState) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, state.Lx, state.K, state.n, state.nu, state.t)
    body = np.ascontiguousarray(state.modes, dtype="<c16").tobytes()
    return header + body


def load_state(data: bytes) -> FlowState:
    if len(data) < HEADER.size:
        raise ShapeMismatch(f"checkpoint of {len(data)} bytes is shorter than its header")
    magic, version, Lx, K, n, nu, t = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ConfigError(f"not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    expected = 16 * (2 * K + 1) * (n + 1)
    body = data[HEADER.size :]
    if len(body) != expected:
        raise ShapeMismatch(f"checkpoint body has {len(body)} bytes, expected {expected} for K={K}, n={n}")
    modes = np.frombuffer(body, dtype="<c16").reshape(2 * K + 1, n + 1).astype(complex)
    return FlowState(Lx=Lx, K=K, modes=modes, t=t, nu=nu)


async def read_checkpoint(path: str) -> FlowState:
    """Restore a FlowState written by dump_state"""
    async with aiofiles.open(path, "rb") as f:
        data = await f.read()
    state = load_state(data)
    logger.info(f"Checkpoint restored: {path} (t={state.t:.4f}, K={state.K}, n={state.n})")
    return state
