"""Experiment configuration files.

Format version 1 is YAML with four sections::

    version: 1
    experiment: beam_pattern   # aclr_sweep | rate_sweep | validate_linearization | custom
    seed: 2021
    output_dir: results/beam
    workers: 1
    system:
      n_fft: 1024              # required
      n_streams_tx: 16
      n_ant_tx: 16
      n_ant_rx: 8
      n_streams_rx: 8
      bands: [512, 512]        # contiguous sub-band sizes, first is the signal band
      covariances:             # one entry per band
        - {kind: beam, angle: 0.7853981633974483}
        - {kind: zero}
      precoder: identity       # or a .npy / .csv file holding W_tx
      combiner: identity       # or a file holding W_rx
      dac_bits: 3              # integer >= 1 or "inf"
      dac_step: null           # null = MSE-optimal per stream
      adc_bits: 3
      adc_step: null
      channel: rayleigh        # rayleigh | identity | path to a file holding H
      resample_channel: true   # fresh Rayleigh H per trial
      snr_db: 10               # or noise_std; snr_db wins when both are set
      noise_std: 0.0
      transform: haar          # haar | fft
      pin_v: false
      trials: 100
      calibration_samples: 200000
    sweep:
      bits: [1, 2, 3, 4, 5, 6, inf]
      snr_db: [-20, -15, -10, -5, 0, 5, 10, 15, 20]
      n_angles: 181
    tolerances:
      s_rel_frobenius: 0.05
      beam_rel_peak: 0.05
      aclr_db: 0.5
      rate_slack: 0.01
      model_rel_frobenius: 0.05

Covariance kinds: ``beam`` (``e(angle) e(angle)^H / n_ant_tx``), ``identity``
(optional ``scale``), ``zero``. Omitted sections take the defaults above,
except that ``covariances`` defaults to ``[identity, zero]`` for rate_sweep,
validate_linearization and custom runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .quantizer import parse_bits

__all__ = ["CONFIG_VERSION", "EXPERIMENTS", "ConfigError", "ExperimentConfig", "load_config", "parse_config"]

CONFIG_VERSION = 1
EXPERIMENTS = ("beam_pattern", "aclr_sweep", "rate_sweep", "validate_linearization", "custom")


class ConfigError(ValueError):
    pass


@dataclass
class SystemSection:
    n_fft: int
    n_streams_tx: int = 16
    n_ant_tx: int = 16
    n_ant_rx: int = 8
    n_streams_rx: int = 8
    bands: list | None = None
    covariances: list | None = None
    precoder: str = "identity"
    combiner: str = "identity"
    dac_bits: Any = 3
    dac_step: float | None = None
    adc_bits: Any = 3
    adc_step: float | None = None
    channel: str = "rayleigh"
    resample_channel: bool = True
    snr_db: float | None = None
    noise_std: float = 0.0
    transform: str = "haar"
    pin_v: bool = False
    trials: int = 100
    calibration_samples: int = 200_000


@dataclass
class SweepSection:
    bits: list = field(default_factory=lambda: [1, 2, 3, 4, 5, 6, math.inf])
    snr_db: list = field(default_factory=lambda: [-20, -15, -10, -5, 0, 5, 10, 15, 20])
    n_angles: int = 181


@dataclass
class Tolerances:
    s_rel_frobenius: float = 0.05
    beam_rel_peak: float = 0.05
    aclr_db: float = 0.5
    rate_slack: float = 0.01
    model_rel_frobenius: float = 0.05


@dataclass
class ExperimentConfig:
    experiment: str
    system: SystemSection
    sweep: SweepSection = field(default_factory=SweepSection)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output_dir: str = "results"
    seed: int = 0
    workers: int = 1
    version: int = CONFIG_VERSION
    base_dir: str = field(default=".", repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")

        def clean(v):
            if isinstance(v, float) and math.isinf(v):
                return "inf"
            if isinstance(v, list):
                return [clean(x) for x in v]
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            return v

        return clean(d)

    def resolve_path(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path


def _line_index(text: str) -> dict:
    """Map dotted key paths to 1-based line numbers."""
    index = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return index

    def walk(node, prefix):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                path = f"{prefix}.{k.value}" if prefix else str(k.value)
                index[path] = k.start_mark.line + 1
                walk(v, path)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                path = f"{prefix}[{i}]"
                index[path] = v.start_mark.line + 1
                walk(v, path)

    if root is not None:
        walk(root, "")
    return index


class _Checker:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def fail(self, path: str, msg: str):
        probe = path
        while probe and probe not in self.lines:
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
        where = f"{self.source}:{self.lines[probe]}" if probe else self.source
        raise ConfigError(f"{where}: {path}: {msg}")

    def section(self, raw, path: str, cls):
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            self.fail(path, "expected a mapping")
        known = {f.name for f in fields(cls)} - {"base_dir"}
        for k in raw:
            if k not in known:
                self.fail(f"{path}.{k}" if path else k, f"unknown field (allowed: {', '.join(sorted(known))})")
        return raw

    def integer(self, value, path, minimum=None):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(path, f"expected an integer, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(path, f"must be >= {minimum}, got {value}")
        return value

    def number(self, value, path, minimum=None):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            self.fail(path, f"expected a finite number, got {value!r}")
        if minimum is not None and value < minimum:
            self.fail(path, f"must be >= {minimum}, got {value}")
        return float(value)

    def bits(self, value, path):
        try:
            return parse_bits(value)
        except (ValueError, TypeError) as exc:
            self.fail(path, str(exc))


def parse_config(raw: dict, source: str = "<config>", text: str | None = None, base_dir: str = ".") -> ExperimentConfig:
    ck = _Checker(source, _line_index(text) if text else {})
    raw = ck.section(raw, "", ExperimentConfig)

    version = raw.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        ck.fail("version", f"unsupported config version {version!r} (this build reads {CONFIG_VERSION})")
    if "experiment" not in raw:
        ck.fail("experiment", f"required field missing (one of {', '.join(EXPERIMENTS)})")
    experiment = raw["experiment"]
    if experiment not in EXPERIMENTS:
        ck.fail("experiment", f"unknown experiment {experiment!r} (one of {', '.join(EXPERIMENTS)})")

    sys_raw = ck.section(raw.get("system"), "system", SystemSection)
    if "n_fft" not in sys_raw:
        ck.fail("system.n_fft", "required field missing")
    s = SystemSection(**sys_raw)
    for name in ("n_fft", "n_streams_tx", "n_ant_tx", "n_ant_rx", "n_streams_rx", "trials"):
        ck.integer(getattr(s, name), f"system.{name}", 1)
    ck.integer(s.calibration_samples, "system.calibration_samples", 1000)
    s.dac_bits = ck.bits(s.dac_bits, "system.dac_bits")
    s.adc_bits = ck.bits(s.adc_bits, "system.adc_bits")
    for name in ("dac_step", "adc_step"):
        if getattr(s, name) is not None and ck.number(getattr(s, name), f"system.{name}") <= 0:
            ck.fail(f"system.{name}", "must be positive")
    s.noise_std = ck.number(s.noise_std, "system.noise_std", 0.0)
    if s.snr_db is not None:
        s.snr_db = ck.number(s.snr_db, "system.snr_db")
    if s.transform not in ("haar", "fft"):
        ck.fail("system.transform", f"must be 'haar' or 'fft', got {s.transform!r}")
    for name in ("resample_channel", "pin_v"):
        if not isinstance(getattr(s, name), bool):
            ck.fail(f"system.{name}", "expected true or false")

    if s.bands is None:
        s.bands = [s.n_fft // 2, s.n_fft - s.n_fft // 2]
    if not isinstance(s.bands, list) or not s.bands:
        ck.fail("system.bands", "expected a non-empty list of band sizes")
    for i, b in enumerate(s.bands):
        ck.integer(b, f"system.bands[{i}]", 0)
    if sum(s.bands) != s.n_fft:
        ck.fail("system.bands", f"band sizes sum to {sum(s.bands)}, expected n_fft = {s.n_fft}")
    if s.covariances is None:
        first = {"kind": "beam", "angle": math.pi / 4} if experiment in ("beam_pattern", "aclr_sweep") else {"kind": "identity"}
        s.covariances = [first] + [{"kind": "zero"} for _ in s.bands[1:]]
    if not isinstance(s.covariances, list) or len(s.covariances) != len(s.bands):
        ck.fail("system.covariances", f"expected one entry per band ({len(s.bands)})")
    for i, c in enumerate(s.covariances):
        path = f"system.covariances[{i}]"
        if not isinstance(c, dict) or c.get("kind") not in ("beam", "identity", "zero"):
            ck.fail(path, "expected {kind: beam|identity|zero, ...}")
        extra = set(c) - {"kind", "angle", "scale"}
        if extra:
            ck.fail(path, f"unknown keys {sorted(extra)}")
        if c["kind"] == "beam":
            if "angle" not in c:
                ck.fail(path, "beam covariance needs an angle (radians)")
            ck.number(c["angle"], f"{path}.angle")
            if s.n_streams_tx != s.n_ant_tx:
                ck.fail(path, "beam covariance needs n_streams_tx == n_ant_tx")
        if "scale" in c:
            ck.number(c["scale"], f"{path}.scale", 0.0)

    sw_raw = ck.section(raw.get("sweep"), "sweep", SweepSection)
    sw = SweepSection(**sw_raw)
    if not isinstance(sw.bits, list) or not sw.bits:
        ck.fail("sweep.bits", "expected a non-empty list")
    sw.bits = [ck.bits(b, f"sweep.bits[{i}]") for i, b in enumerate(sw.bits)]
    if not isinstance(sw.snr_db, list) or not sw.snr_db:
        ck.fail("sweep.snr_db", "expected a non-empty list")
    sw.snr_db = [ck.number(v, f"sweep.snr_db[{i}]") for i, v in enumerate(sw.snr_db)]
    ck.integer(sw.n_angles, "sweep.n_angles", 2)

    tol_raw = ck.section(raw.get("tolerances"), "tolerances", Tolerances)
    tol = Tolerances(**tol_raw)
    for f in fields(Tolerances):
        setattr(tol, f.name, ck.number(getattr(tol, f.name), f"tolerances.{f.name}", 0.0))

    seed = ck.integer(raw.get("seed", 0), "seed", 0)
    workers = ck.integer(raw.get("workers", 1), "workers", 1)
    output_dir = raw.get("output_dir", "results")
    if not isinstance(output_dir, str):
        ck.fail("output_dir", "expected a path string")

    cfg = ExperimentConfig(
        experiment=experiment, system=s, sweep=sw, tolerances=tol,
        output_dir=output_dir, seed=seed, workers=workers, base_dir=base_dir,
    )
    for name, label in (("precoder", "system.precoder"), ("combiner", "system.combiner")):
        val = getattr(s, name)
        if val != "identity" and not cfg.resolve_path(val).is_file():
            ck.fail(label, f"'identity' or an existing .npy/.csv file, got {val!r}")
    if s.channel not in ("rayleigh", "identity") and not cfg.resolve_path(s.channel).is_file():
        ck.fail("system.channel", f"'rayleigh', 'identity' or an existing file, got {s.channel!r}")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ConfigError(f"{where}: YAML syntax error: {getattr(exc, 'problem', exc)}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return parse_config(raw, str(path), text, str(path.parent))


def load_matrix(path: Path) -> np.ndarray:
    """Complex matrix from .npy, or from .csv with entries like ``1+2j``."""
    if path.suffix == ".npy":
        return np.atleast_2d(np.load(path)).astype(complex)
    rows = [line.split(",") for line in path.read_text().splitlines() if line.strip()]
    return np.array([[complex(x.strip().replace(" ", "")) for x in r] for r in rows])
