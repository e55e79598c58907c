"""Checkpoint files: a JSON header (format, version, config) and named parameter blocks."""

from __future__ import annotations

import io
import json
from pathlib import Path

import torch

from .net import AnchorNet, ModelConfig

FORMAT = "anchorsql-checkpoint"
VERSION = 1


def save(model: AnchorNet, path: str | Path, extra: dict | None = None) -> None:
    header = {"format": FORMAT, "version": VERSION, "config": model.cfg.to_json(), "extra": extra or {}}
    buf = io.BytesIO()
    torch.save({k: v.detach().cpu() for k, v in model.state_dict().items()}, buf)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        line = json.dumps(header, sort_keys=True).encode() + b"\n"
        fh.write(line)
        fh.write(buf.getvalue())


def read_header(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
    if header.get("format") != FORMAT:
        raise ValueError(f"{path}: not a checkpoint file")
    if header.get("version") != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    return header


def load(path: str | Path) -> AnchorNet:
    header = read_header(path)
    with open(path, "rb") as fh:
        fh.readline()
        state = torch.load(io.BytesIO(fh.read()), weights_only=True)
    model = AnchorNet(ModelConfig(**header["config"]))
    model.load_state_dict(state)
    model.eval()
    return model
