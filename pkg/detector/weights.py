"""
Weight files: a small binary tensor container

Layout (all little-endian):
    b"SRNW" | version u32 | tensor count u32
    per tensor: name length u16 | UTF-8 name | rank u8 | dims u32 x rank
                | float32 data
    CRC-32 (zlib) of every preceding byte, u32

The same container stores model checkpoints (parameters, running
statistics and a "config" vector), optimizer moments ("<ckpt>.adam") and
cached LFCC maps ("handle_data.py").
"""

import logging
import struct
import zlib
from collections import OrderedDict

import numpy as np
import torch

from .data_utility import atomic_write
from .exceptions import CorruptContainer, CountMismatch, VersionUnsupported
from .model import EXPECTED_PARAMETERS, SpecRNetConfig, build, count_parameters

MAGIC = b"SRNW"
VERSION = 1
CONFIG_KEY = "config"
OPTIMIZER_SUFFIX = ".adam"


def _as_array(tensor):
    if isinstance(tensor, torch.Tensor):
        tensor = tensor.detach().cpu().numpy()
    return np.ascontiguousarray(tensor, dtype="<f4")


def encode_container(tensors):
    """bytes of an ordered {name: array or tensor} mapping"""
    body = bytearray(MAGIC)
    body += struct.pack("<II", VERSION, len(tensors))
    for name, tensor in tensors.items():
        array = _as_array(tensor)
        encoded = name.encode("utf-8")
        body += struct.pack("<H", len(encoded)) + encoded
        body += struct.pack(f"<B{array.ndim}I", array.ndim, *array.shape)
        body += array.tobytes()
    body += struct.pack("<I", zlib.crc32(body))
    return bytes(body)


def decode_container(data):
    """OrderedDict {name: float32 array} from container bytes"""
    if len(data) < 16 or data[:4] != MAGIC:
        raise CorruptContainer("not a SRNW container")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise CorruptContainer("CRC mismatch (truncated or damaged file)")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise VersionUnsupported(f"container version {version}, expected {VERSION}")

    tensors = OrderedDict()
    offset, end = 12, len(data) - 4
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset: offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", data, offset)
            offset += 1
            shape = struct.unpack_from(f"<{rank}I", data, offset)
            offset += 4 * rank
            nbytes = 4 * int(np.prod(shape, dtype=np.int64))
            if offset + nbytes > end:
                raise CorruptContainer(f"tensor {name} overruns the container")
            tensors[name] = np.frombuffer(
                data, dtype="<f4", count=nbytes // 4, offset=offset
            ).reshape(shape).copy()
            offset += nbytes
    except (struct.error, UnicodeDecodeError) as err:
        raise CorruptContainer(f"unreadable tensor record: {err}") from err
    if offset != end:
        raise CorruptContainer(f"{end - offset} unexpected trailing bytes")
    return tensors


def write_container(path, tensors):
    with atomic_write(path, "wb") as f:
        f.write(encode_container(tensors))


def read_container(path):
    with open(path, "rb") as f:
        return decode_container(f.read())


# ------------ model checkpoints ------------
def save_weights(model, path):
    """Writes config, parameters and running statistics (as float32)"""
    tensors = OrderedDict([(CONFIG_KEY, np.asarray(model.cfg.to_vector()))])
    for name, param in model.named_parameters().items():
        tensors[name] = param.value
    write_container(path, tensors)
    logging.debug(f"Weights saved to {path}")


def load_weights(path, dtype=torch.float32):
    """Rebuilds the SpecRNet stored in a weight file

    Returns:
        (SpecRNet): model with the stored values

    Raises:
        CountMismatch: extra, missing or wrongly-sized tensors, or a
                        default-architecture file whose trainable count is
                        not 277,963
    """
    tensors = read_container(path)
    if CONFIG_KEY not in tensors:
        raise CountMismatch(f"{path}: no '{CONFIG_KEY}' tensor")
    cfg = SpecRNetConfig.from_vector(tensors.pop(CONFIG_KEY).reshape(-1))
    model = build(cfg, seed=0, dtype=dtype)
    params = model.named_parameters()

    extra = sorted(set(tensors) - set(params))
    missing = sorted(set(params) - set(tensors))
    if extra or missing:
        raise CountMismatch(f"{path}: extra tensors {extra}, missing tensors {missing}")
    for name, param in params.items():
        if tuple(tensors[name].shape) != tuple(param.value.shape):
            raise CountMismatch(
                f"{path}: {name} has shape {tensors[name].shape}, "
                f"expected {tuple(param.value.shape)}"
            )
        param.value = torch.from_numpy(tensors[name]).to(dtype)
        param.grad = torch.zeros_like(param.value)
    if cfg == SpecRNetConfig() and count_parameters(model) != EXPECTED_PARAMETERS:
        raise CountMismatch(
            f"{path}: {count_parameters(model)} trainable parameters, "
            f"expected {EXPECTED_PARAMETERS}"
        )
    return model


# ------------ optimizer state ------------
def optimizer_path(checkpoint_path):
    return f"{checkpoint_path}{OPTIMIZER_SUFFIX}"


def save_optimizer(optimizer, checkpoint_path):
    """Writes the Adam moments next to a checkpoint"""
    write_container(optimizer_path(checkpoint_path), optimizer.state_tensors())


def load_optimizer(optimizer, checkpoint_path):
    """Restores Adam moments saved by save_optimizer()"""
    tensors = read_container(optimizer_path(checkpoint_path))
    optimizer.load_state_tensors(
        {name: torch.from_numpy(array) for name, array in tensors.items()}
    )
    return optimizer
