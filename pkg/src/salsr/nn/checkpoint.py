# -*- coding: utf-8 -*-

"""A little-endian binary checkpoint format for network parameters.

The layout is::

    magic        8 bytes   b"SALSRCKP"
    version      u16
    metadata     u32 length + UTF-8 JSON (sorted keys)
    layer table  u32 count, then per layer:
                   u16 length + UTF-8 kind
                   u32 length + UTF-8 JSON configuration (sorted keys)
    tensors      u32 count, then per tensor (see below)
    adam flag    u8, 1 if an optimizer state follows
    adam state   u64 step, u64 skipped, f64 beta1, f64 beta2, f64 eps,
                 then the first moments and the second moments, each as a
                 tensor block like the parameters

A tensor record is a u16 length + UTF-8 name, a u8 type code (0 for 32-bit and
1 for 64-bit floats), a u8 trainable flag, a u8 rank, a u32 per dimension, and
the row-major little-endian data.
"""

import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple, Union

import numpy as np

from .network import Network
from .optim import AdamState
from ..utils import CheckpointFormatError

__all__ = [
    "MAGIC",
    "VERSION",
    "Checkpoint",
    "save_checkpoint",
    "read_checkpoint",
    "load_checkpoint",
    "network_from_checkpoint",
]

logger = logging.getLogger(__name__)

MAGIC = b"SALSRCKP"
VERSION = 1

DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}
CODE_DTYPES = {code: dtype.newbyteorder("<") for dtype, code in DTYPE_CODES.items()}

ADAM_HEADER = struct.Struct("<QQddd")


class Checkpoint(NamedTuple):
    """The decoded contents of a checkpoint file."""

    metadata: Dict[str, Any]
    layers: List[Tuple[str, Dict[str, Any]]]
    #: Parameter data by name
    tensors: Dict[str, np.ndarray]
    #: Whether each parameter is trainable, by name
    trainable: Dict[str, bool]
    adam: Optional[AdamState]


def _dumps(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _normalize_table(table) -> List[Tuple[str, Dict[str, Any]]]:
    return [(kind, json.loads(_dumps(config))) for kind, config in table]


class _Writer:
    def __init__(self):
        self.chunks: List[bytes] = []

    def pack(self, fmt: str, *values) -> None:
        self.chunks.append(struct.pack("<" + fmt, *values))

    def blob(self, data: bytes, length_format: str = "I") -> None:
        self.pack(length_format, len(data))
        self.chunks.append(data)

    def tensors(self, tensors: Mapping[str, np.ndarray], trainable: Mapping[str, bool]) -> None:
        self.pack("I", len(tensors))
        for name, array in tensors.items():
            array = np.asarray(array)
            code = DTYPE_CODES.get(array.dtype)
            if code is None:
                raise CheckpointFormatError(f"unsupported tensor type {array.dtype} for {name}")
            self.blob(name.encode("utf-8"), "H")
            self.pack("BBB", code, int(trainable.get(name, True)), array.ndim)
            self.pack(f"{array.ndim}I", *array.shape)
            self.chunks.append(np.ascontiguousarray(array, dtype=CODE_DTYPES[code]).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self.chunks)


class _Reader:
    def __init__(self, payload: bytes, path: Path):
        self.payload = payload
        self.offset = 0
        self.path = path

    def take(self, size: int) -> bytes:
        end = self.offset + size
        if end > len(self.payload):
            raise CheckpointFormatError(f"{self.path} is truncated at byte {self.offset}")
        rv = self.payload[self.offset : end]
        self.offset = end
        return rv

    def unpack(self, fmt: str):
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def blob(self, length_format: str = "I") -> bytes:
        (length,) = self.unpack(length_format)
        return self.take(length)

    def json(self):
        try:
            return json.loads(self.blob().decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointFormatError(f"{self.path} has malformed JSON: {e}") from e

    def tensors(self) -> Tuple[Dict[str, np.ndarray], Dict[str, bool]]:
        (count,) = self.unpack("I")
        tensors, trainable = {}, {}
        for _ in range(count):
            name = self.blob("H").decode("utf-8")
            code, flag, ndim = self.unpack("BBB")
            if code not in CODE_DTYPES:
                raise CheckpointFormatError(f"{self.path} has unknown type code {code} for {name}")
            shape = self.unpack(f"{ndim}I")
            dtype = CODE_DTYPES[code]
            size = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            data = np.frombuffer(self.take(size), dtype=dtype).reshape(shape)
            tensors[name] = data.astype(dtype.newbyteorder("="))
            trainable[name] = bool(flag)
        return tensors, trainable


def save_checkpoint(
    net: Network,
    path: Union[str, Path],
    adam_state: Optional[AdamState] = None,
    metadata: Optional[Mapping[str, Any]] = None,
) -> Path:
    """Write a network's layer table and parameters, and optionally an Adam state.

    :param net: The network
    :param path: The output file
    :param adam_state: The optimizer state to store alongside
    :param metadata: JSON-serializable information such as the network spec
    :returns: The path that was written
    """
    path = Path(path)
    writer = _Writer()
    writer.pack("8sH", MAGIC, VERSION)
    writer.blob(_dumps(dict(metadata or {})))
    table = net.layer_table()
    writer.pack("I", len(table))
    for kind, config in table:
        writer.blob(kind.encode("utf-8"), "H")
        writer.blob(_dumps(config))
    named = list(net.named_parameters())
    writer.tensors(
        {name: param.data for name, param in named},
        {name: param.trainable for name, param in named},
    )
    if adam_state is None:
        writer.pack("B", 0)
    else:
        writer.pack("B", 1)
        writer.chunks.append(
            ADAM_HEADER.pack(
                adam_state.step,
                adam_state.skipped,
                adam_state.beta1,
                adam_state.beta2,
                adam_state.eps,
            )
        )
        writer.tensors(adam_state.m, {})
        writer.tensors(adam_state.v, {})
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(writer.getvalue())
    return path


def read_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Decode a checkpoint file.

    :raises CheckpointFormatError: if the file is missing, truncated, or malformed
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointFormatError(f"checkpoint {path} does not exist")
    reader = _Reader(path.read_bytes(), path)
    magic, version = reader.unpack("8sH")
    if magic != MAGIC:
        raise CheckpointFormatError(f"{path} is not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointFormatError(f"{path} has unsupported version {version}")
    metadata = reader.json()
    (count,) = reader.unpack("I")
    layers = []
    for _ in range(count):
        kind = reader.blob("H").decode("utf-8")
        layers.append((kind, reader.json()))
    tensors, trainable = reader.tensors()
    (has_adam,) = reader.unpack("B")
    adam = None
    if has_adam:
        step, skipped, beta1, beta2, eps = reader.unpack("QQddd")
        m, _ = reader.tensors()
        v, _ = reader.tensors()
        adam = AdamState(m=m, v=v, step=step, skipped=skipped, beta1=beta1, beta2=beta2, eps=eps)
    if reader.offset != len(reader.payload):
        raise CheckpointFormatError(f"{path} has trailing bytes after offset {reader.offset}")
    return Checkpoint(metadata, layers, tensors, trainable, adam)


def load_checkpoint(net: Network, path: Union[str, Path]) -> Checkpoint:
    """Copy the parameters stored in a checkpoint into a network of the same architecture.

    :param net: The network to fill, in place
    :param path: The checkpoint file
    :returns: The decoded checkpoint, including its metadata and optimizer state
    :raises CheckpointFormatError: if the file is malformed or its layers or
        parameters do not match the network
    """
    checkpoint = read_checkpoint(path)
    if _normalize_table(checkpoint.layers) != _normalize_table(net.layer_table()):
        raise CheckpointFormatError(f"{path} stores a different layer table than the network")
    named = dict(net.named_parameters())
    if set(named) != set(checkpoint.tensors):
        raise CheckpointFormatError(f"{path} stores different parameters than the network")
    dtypes = set()
    for name, param in named.items():
        data = checkpoint.tensors[name]
        if data.shape != param.shape:
            raise CheckpointFormatError(f"{path} stores {name} with shape {data.shape}")
        param.assign(data.copy())
        dtypes.add(data.dtype)
    if len(dtypes) == 1:
        net.dtype = dtypes.pop()
    logger.debug("loaded %d tensors from %s", len(named), path)
    return checkpoint


def network_from_checkpoint(path: Union[str, Path], **kwargs) -> Tuple[Network, Checkpoint]:
    """Rebuild a network from a checkpoint's layer table and fill in its parameters."""
    checkpoint = read_checkpoint(path)
    try:
        net = Network.from_layer_table(checkpoint.layers, **kwargs)
    except (TypeError, KeyError, ValueError) as e:
        raise CheckpointFormatError(f"{path} has an unusable layer table: {e}") from e
    return net, load_checkpoint(net, path)
