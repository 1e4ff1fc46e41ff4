"""Serializable run configuration shared by the CLI and the scripts."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .classifiers import AlgoConfig
from .errors import InvalidConfig
from .features import OVERLAP, WINDOW_SIZES
from .pipelines import PipelineKind

ADAPTERS = ("canonical", "zenodo")


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on besides the dataset bytes.

    ``pipelines``, ``algos`` and ``windows`` are lists so one config can
    drive a comparison grid; single-configuration commands use the first
    entry of each.
    """

    data: str | None = None
    adapter: str = "canonical"
    windows: tuple[int, ...] = (300,)
    pipelines: tuple[str, ...] = ("ReEv",)
    algos: tuple[str, ...] = ("SVM_L",)
    hyperparams: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    stage2_candidates: tuple[str, ...] = ()
    standardize: bool = True
    tune: bool = True
    seed: int = 0
    loso_seed: int | None = None
    out: str = "runs/out"
    jobs: int = 1
    cache_dir: str | None = None
    synth: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        def tup(v):
            return tuple(v) if isinstance(v, (list, tuple)) else (v,)

        object.__setattr__(self, "windows", tuple(int(w) for w in tup(self.windows)))
        object.__setattr__(self, "pipelines", tuple(PipelineKind.parse(p).value for p in tup(self.pipelines)))
        try:
            object.__setattr__(self, "algos", tuple(AlgoConfig(a).kind for a in tup(self.algos)))
            object.__setattr__(self, "stage2_candidates",
                               tuple(AlgoConfig(a).kind for a in tup(self.stage2_candidates)))
        except ValueError as exc:
            raise InvalidConfig(str(exc)) from exc
        bad = [w for w in self.windows if w not in WINDOW_SIZES]
        if bad:
            raise InvalidConfig(f"window sizes must be in {WINDOW_SIZES}, got {bad}")
        if self.adapter not in ADAPTERS:
            raise InvalidConfig(f"adapter must be one of {ADAPTERS}")
        if self.jobs < 1:
            raise InvalidConfig("jobs must be >= 1")
        for kind, hp in self.hyperparams.items():
            try:
                AlgoConfig(kind, dict(hp))
            except ValueError as exc:
                raise InvalidConfig(str(exc)) from exc

    @property
    def overlap(self) -> float:
        return OVERLAP

    def algo_config(self, kind: str) -> AlgoConfig:
        cfg = AlgoConfig(kind)
        hp = self.hyperparams.get(cfg.kind) or self.hyperparams.get(cfg.cli_name) or {}
        return AlgoConfig(cfg.kind, dict(hp))

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("windows", "pipelines", "algos", "stage2_candidates"):
            d[k] = list(d[k])
        d["hyperparams"] = {k: dict(v) for k, v in self.hyperparams.items()}
        d["synth"] = dict(self.synth)
        d["overlap"] = OVERLAP
        return d

    @classmethod
    def from_mapping(cls, data: Mapping) -> "RunConfig":
        data = dict(data)
        data.pop("overlap", None)
        for single, plural in (("window", "windows"), ("pipeline", "pipelines"), ("algo", "algos")):
            if single in data:
                data[plural] = data.pop(single)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(data, Mapping):
            raise InvalidConfig(f"{path}: expected a mapping at top level")
        return cls.from_mapping(data)

    def override(self, **kw) -> "RunConfig":
        """Copy with every non-``None`` keyword applied."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})
