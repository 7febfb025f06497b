"""Binary checkpoint container.

Layout::

    b"BLIMPQR1" | u32 version | u64 header length | JSON header | array payload | sha256

All integers little-endian. The header lists every array with its shape and
byte offset into the payload; arrays are float64. The trailing digest covers
everything before it, so truncation and bit flips are caught before any
agent object is built.
"""
from __future__ import annotations

import hashlib
import json
import struct
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import CheckpointFormatError, UnsupportedVersionError
from .agent import AgentConfig, QRDQNAgent
from .network import PARAM_NAMES

MAGIC = b"BLIMPQR1"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQ")
_DIGEST_LEN = 32
_REQUIRED = ("format", "config", "config_hash", "update_count", "env_steps",
             "adam_t", "rng_state", "arrays")


def _groups(agent):
    return {"online": agent.params, "target": agent.target_params,
            "adam_m": agent.adam_m, "adam_v": agent.adam_v}


def checkpoint_bytes(agent):
    arrays, chunks, offset = [], [], 0
    for group, tensors in _groups(agent).items():
        for name in PARAM_NAMES:
            a = np.ascontiguousarray(tensors[name], dtype="<f8")
            arrays.append({"name": f"{group}/{name}", "shape": list(a.shape),
                           "offset": offset, "nbytes": a.nbytes})
            chunks.append(a.tobytes())
            offset += a.nbytes
    header = {
        "format": "blimplab-qrdqn",
        "config": asdict(agent.config),
        "config_hash": agent.config.config_hash(),
        "update_count": agent.update_count,
        "env_steps": agent.env_steps,
        "adam_t": agent.adam_t,
        "rng_state": agent.rng.bit_generator.state,
        "arrays": arrays,
    }
    hdr = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(hdr)) + hdr + b"".join(chunks)
    return body + hashlib.sha256(body).digest()


def save_checkpoint(agent, path):
    data = checkpoint_bytes(agent)
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return path


def parse_checkpoint(data, expected_config_hash=None):
    if len(data) < _PREFIX.size + _DIGEST_LEN:
        raise CheckpointFormatError("file too short for a checkpoint", field="header")
    magic, version, hlen = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointFormatError("bad magic header", field="magic")
    if version > FORMAT_VERSION:
        raise UnsupportedVersionError(f"checkpoint format version {version} is newer than "
                                      f"supported version {FORMAT_VERSION}", field="version")
    if version < 1:
        raise CheckpointFormatError(f"invalid format version {version}", field="version")
    body, digest = data[:-_DIGEST_LEN], data[-_DIGEST_LEN:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointFormatError("checksum mismatch (truncated or corrupt file)", field="checksum")
    start = _PREFIX.size
    try:
        header = json.loads(body[start:start + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointFormatError(f"unreadable header: {exc}", field="header") from None
    for key in _REQUIRED:
        if key not in header:
            raise CheckpointFormatError(f"missing field {key!r}", field=key)
    payload = body[start + hlen:]

    try:
        config = AgentConfig(**header["config"])
    except (TypeError, ValueError) as exc:
        raise CheckpointFormatError(f"invalid config: {exc}", field="config") from None
    agent = QRDQNAgent(config)
    tensors = {}
    for entry in header["arrays"]:
        name, shape, off, nbytes = entry["name"], tuple(entry["shape"]), entry["offset"], entry["nbytes"]
        if off + nbytes > len(payload) or nbytes != 8 * int(np.prod(shape)):
            raise CheckpointFormatError(f"array {name} out of bounds", field=name)
        tensors[name] = np.frombuffer(payload, dtype="<f8", count=nbytes // 8,
                                      offset=off).reshape(shape).astype(float)
    for group, dest in _groups(agent).items():
        for pname in PARAM_NAMES:
            key = f"{group}/{pname}"
            if key not in tensors:
                raise CheckpointFormatError(f"missing array {key!r}", field=key)
            if tensors[key].shape != dest[pname].shape:
                raise CheckpointFormatError(f"array {key!r} has wrong shape", field=key)
            dest[pname] = tensors[key]

    agent.update_count = int(header["update_count"])
    agent.env_steps = int(header["env_steps"])
    agent.adam_t = int(header["adam_t"])
    try:
        agent.rng.bit_generator.state = header["rng_state"]
    except (TypeError, ValueError, KeyError) as exc:
        raise CheckpointFormatError(f"invalid rng state: {exc}", field="rng_state") from None
    if header["config_hash"] != config.config_hash():
        raise CheckpointFormatError("config hash does not match stored config", field="config_hash")
    if expected_config_hash is not None and expected_config_hash != header["config_hash"]:
        agent.config_mismatch = True
        warnings.warn("checkpoint config hash differs from the expected configuration",
                      stacklevel=2)
    return agent


def load_checkpoint(path, expected_config_hash=None):
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise CheckpointFormatError(f"no checkpoint at {path}", field="path") from None
    return parse_checkpoint(data, expected_config_hash)
