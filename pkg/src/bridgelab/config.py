"""Run configuration: a typed INI file with one section per module.

Unknown sections or keys are errors, so a typo never silently falls back to
a default.
"""
from __future__ import annotations

import configparser
import io
import zlib
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .objective import LossWeights
from .process import DEFAULT_C, DEFAULT_GAMMA, DEFAULT_K, DiffusionCoeff, ProcessSpec, TimeGrid
from .signal import StftConfig
from .simulate import SimConfig

__all__ = ["RunConfig", "SCHEMA", "derive_seed"]


def _floats(text: str) -> list:
    text = text.strip()
    if not text:
        return []
    return [float(v) for v in text.replace(",", " ").split()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text: str) -> Optional[float]:
    text = text.strip().lower()
    return None if text in ("", "none", "random") else float(text)


_PARSERS = {
    "float": float,
    "int": int,
    "bool": _bool,
    "str": str.strip,
    "floats": _floats,
    "opt_float": _opt_float,
}

# section -> key -> (type, default)
SCHEMA = {
    "run": {"seed": ("int", 0), "output_dir": ("str", "bridgelab_out")},
    "process": {
        "kind": ("str", "ouve"),
        "gamma": ("float", DEFAULT_GAMMA),
        "c": ("float", DEFAULT_C),
        "k": ("float", DEFAULT_K),
    },
    "grid": {"n_steps": ("int", 30), "t_min": ("float", 0.0)},
    "sim": {"dt": ("float", 1e-3), "n_paths": ("int", 10_000)},
    "stft": {
        "win_len": ("int", 510),
        "hop": ("int", 128),
        "fft_len": ("int", 510),
        "center_pad": ("bool", True),
        "beta": ("float", 0.5),
        "scale": ("float", 0.15),
    },
    "loss": {
        "lambda_kind": ("str", "unit"),
        "alpha": ("float", 0.0),
        "alpha_p": ("float", 0.0),
        "reduction": ("str", "mean"),
    },
    "train": {
        "loss_kind": ("str", "denoise"),
        "steps": ("int", 20_000),
        "lr": ("float", 1e-2),
        "t": ("opt_float", 0.5),
        "t_min": ("float", 0.03),
        "m0": ("floats", [1.0]),
        "s0sq": ("float", 0.25),
        "y": ("floats", [0.0]),
    },
    "sample": {
        "denoiser": ("str", "oracle-x0"),
        "source": ("str", "gaussian"),
        "duration": ("float", 1.0),
        "sample_rate": ("int", 16000),
        "snr_db": ("float", 5.0),
        "record": ("bool", False),
        "trajectory_dims": ("int", 16),
        "affine_file": ("str", ""),
    },
    "verify": {
        "corrupt_variance": ("float", 0.0),
        "threshold": ("float", 4.0),
        "table_t": ("floats", [0.0, 0.25, 0.5, 0.75, 1.0]),
    },
}


def _format(kind: str, value) -> str:
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "opt_float":
        return "random" if value is None else repr(float(value))
    if kind == "float":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    return str(value)


def derive_seed(seed: int, stream: str) -> int:
    """64-bit seed of the named sub-stream (``"sim"``, ``"train"``, ...)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(stream.encode()),))
    lo, hi = ss.generate_state(2, np.uint32)
    return int(lo) | (int(hi) << 32)


class RunConfig:
    """Validated configuration values, ``cfg[section][key]``."""

    def __init__(self, values: Optional[dict] = None):
        self.values = {sec: {k: d for k, (_, d) in keys.items()} for sec, keys in SCHEMA.items()}
        for sec, keys in (values or {}).items():
            for key, val in keys.items():
                self.set(sec, key, val)
        self.validate()

    def __getitem__(self, section):
        return self.values[section]

    def set(self, section: str, key: str, value) -> None:
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        if key not in SCHEMA[section]:
            raise ConfigurationError(f"unknown config key {section}.{key}")
        kind = SCHEMA[section][key][0]
        if isinstance(value, str):
            try:
                value = _PARSERS[kind](value)
            except ValueError as exc:
                raise ConfigurationError(f"{section}.{key}: {exc}") from None
        self.values[section][key] = value

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigurationError(f"malformed config: {exc}") from None
        return cls({sec: dict(parser.items(sec)) for sec in parser.sections()})

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_text(Path(path).read_text())

    def to_text(self) -> str:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for sec, keys in SCHEMA.items():
            parser[sec] = {k: _format(kind, self.values[sec][k]) for k, (kind, _) in keys.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    def validate(self) -> None:
        """Build every derived object once so invariants fail at load time."""
        try:
            self.process_spec()
            self.grid()
            self.sim("sim")
            self.stft()
            self.loss_weights()
        except DomainError as exc:
            raise ConfigurationError(str(exc)) from None
        if self["loss"]["alpha_p"] > 0:
            raise ConfigurationError("loss.alpha_p > 0 needs a perceptual plugin, which a config file cannot supply")
        if self["loss"]["lambda_kind"] == "custom":
            raise ConfigurationError("loss.lambda_kind = custom is only available through the Python API")
        if self["train"]["loss_kind"] not in ("denoise", "score", "sb"):
            raise ConfigurationError(f"unknown train.loss_kind {self['train']['loss_kind']!r}")
        if len(self["train"]["m0"]) != len(self["train"]["y"]):
            raise ConfigurationError("train.m0 and train.y must have equal length")

    @property
    def seed(self) -> int:
        return int(self["run"]["seed"])

    def process_spec(self, kind: Optional[str] = None) -> ProcessSpec:
        p = self["process"]
        kind = kind or p["kind"]
        if kind == "ouve":
            return ProcessSpec("ouve", p["gamma"], DiffusionCoeff(p["c"], p["k"]))
        if kind == "sbve":
            return ProcessSpec("sbve", 0.0, DiffusionCoeff(p["c"], p["k"]))
        raise DomainError(f"process.kind must be 'ouve' or 'sbve', got {kind!r}")

    def grid(self) -> TimeGrid:
        return TimeGrid(self["grid"]["n_steps"], self["grid"]["t_min"])

    def sim(self, stream: str = "sim") -> SimConfig:
        s = self["sim"]
        return SimConfig(s["dt"], s["n_paths"], derive_seed(self.seed, stream))

    def stft(self) -> StftConfig:
        s = self["stft"]
        return StftConfig(s["win_len"], s["hop"], s["fft_len"], s["center_pad"])

    def loss_weights(self) -> LossWeights:
        s = self["loss"]
        return LossWeights(s["lambda_kind"], s["alpha"], s["alpha_p"], reduction=s["reduction"])
