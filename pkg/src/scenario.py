"""Scenario files: strict, sectioned YAML or JSON describing one pipeline run."""

import json
import logging
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import yaml

from .errors import ScenarioError
from .models import model_defaults

log = logging.getLogger(__name__)

PIPELINES = ("splitting", "sigma", "theta", "roughness", "fine-structure", "pde")
SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"

KeyLines = Dict[Tuple[str, ...], int]


def _reject_unknown(section: str, data: Dict[str, Any], allowed: List[str], lines: KeyLines) -> None:
    for key in data:
        if key not in allowed:
            raise ScenarioError(
                f"unknown key '{key}' in section [{section}]; allowed: {', '.join(allowed)}",
                line=lines.get((section, key)),
            )


def _section_keys(cls) -> List[str]:
    return [f.name for f in fields(cls)]


@dataclass
class ScenarioInfo:
    name: str
    pipeline: str
    seed: int = 0

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ValueError(f"unknown pipeline {self.pipeline!r}; choose one of {', '.join(PIPELINES)}")
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ScenarioInfo":
        return cls(name=str(data["name"]), pipeline=str(data["pipeline"]), seed=data.get("seed", 0))

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "pipeline": self.pipeline, "seed": self.seed}


@dataclass
class ModelSection:
    id: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        defaults = model_defaults(self.id)
        unknown = sorted(set(self.params) - set(defaults))
        if unknown:
            raise ValueError(f"unknown parameter(s) for model {self.id!r}: {', '.join(unknown)}")
        self.params = {**defaults, **self.params}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelSection":
        return cls(id=str(data["id"]), params=dict(data.get("params") or {}))

    def to_dict(self) -> Dict[str, Any]:
        return {"id": self.id, "params": dict(self.params)}


@dataclass
class GridSection:
    t_min: float = 0.0
    t_max: float = 2.0
    n_steps: int = 4
    window: float = 3.0
    extents: Optional[List[float]] = None
    counts: List[int] = field(default_factory=lambda: [21])
    h: float = 0.02
    grid_slack: float = 0.05
    samples: int = 8

    def __post_init__(self):
        self.t_min, self.t_max = float(self.t_min), float(self.t_max)
        self.n_steps, self.samples = int(self.n_steps), int(self.samples)
        if not self.t_max > self.t_min:
            raise ValueError(f"grid needs t_max > t_min, got [{self.t_min}, {self.t_max}]")
        if self.n_steps < 1 or self.samples < 1:
            raise ValueError("grid n_steps and samples must be at least 1")
        for name in ("window", "h"):
            if not getattr(self, name) > 0:
                raise ValueError(f"grid {name} must be positive, got {getattr(self, name)}")
        if self.grid_slack < 0:
            raise ValueError(f"grid_slack must be non-negative, got {self.grid_slack}")
        self.counts = [int(c) for c in self.counts]
        if any(c < 2 for c in self.counts):
            raise ValueError(f"graph axes need at least 2 points, got {self.counts}")
        if self.extents is not None:
            self.extents = [float(e) for e in self.extents]

    def resolve(self, model: ModelSection) -> None:
        """Graph extents default to the cut-off reach R + w of the model."""
        if self.extents is None:
            params = model.params
            reach = params["radius"] + params["width"] if "radius" in params else params.get("extent", 1.0)
            self.extents = [float(reach)]

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GridSection":
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class Tolerances:
    fixed_point: float = 1e-10
    invariance: float = 1e-4
    oracle: float = 5e-3
    rate: float = 0.05
    splitting: float = 1e-6
    commutation: float = 1e-6
    nesting: float = 1e-8
    projection: float = 1e-6
    pullback: float = 1e-8
    margin: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not value > 0:
                raise ValueError(f"tolerance '{f.name}' must be strictly positive, got {value}")
            setattr(self, f.name, value)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Tolerances":
        return cls(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class OutputSection:
    dir: str = ""
    tables: bool = True

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "OutputSection":
        return cls(dir=str(data.get("dir", "")), tables=bool(data.get("tables", True)))

    def to_dict(self) -> Dict[str, Any]:
        return {"dir": self.dir, "tables": self.tables}


SECTIONS = {
    "scenario": ScenarioInfo,
    "model": ModelSection,
    "grid": GridSection,
    "tolerances": Tolerances,
    "output": OutputSection,
}


@dataclass
class Scenario:
    """One run: which pipeline, on which model, with which grids and tolerances."""

    scenario: ScenarioInfo
    model: ModelSection
    grid: GridSection = field(default_factory=GridSection)
    tolerances: Tolerances = field(default_factory=Tolerances)
    output: OutputSection = field(default_factory=OutputSection)
    source: Optional[Path] = None

    def __post_init__(self):
        self.grid.resolve(self.model)
        if not self.output.dir:
            self.output.dir = str(Path("runs") / self.scenario.name)

    @property
    def name(self) -> str:
        return self.scenario.name

    @property
    def pipeline(self) -> str:
        return self.scenario.pipeline

    @staticmethod
    def _load_config_data(config_file: str | Path) -> Dict[str, Any]:
        config_file = Path(config_file).expanduser().resolve()

        if not config_file.exists():
            raise FileNotFoundError(f"Config file not found: {config_file}")

        suffix = config_file.suffix.lower()
        if suffix == ".json":
            with open(config_file, "r", encoding="utf-8") as f:
                try:
                    return json.load(f)
                except json.JSONDecodeError as exc:
                    raise ScenarioError(f"{config_file.name}: {exc.msg}", line=exc.lineno) from exc
        elif suffix in [".yaml", ".yml"]:
            with open(config_file, "r", encoding="utf-8") as f:
                try:
                    data = yaml.safe_load(f)
                except yaml.YAMLError as exc:
                    mark = getattr(exc, "problem_mark", None)
                    line = None if mark is None else mark.line + 1
                    raise ScenarioError(f"{config_file.name}: {exc}", line=line) from exc
            return {} if data is None else data
        else:
            raise ValueError(f"Unsupported config file format: {suffix}, only .json, .yaml, .yml are supported")

    @staticmethod
    def _deep_merge_dicts(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        merged = dict(base)
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = Scenario._deep_merge_dicts(merged[key], value)
            else:
                merged[key] = value
        return merged

    @staticmethod
    def _key_lines(config_file: str | Path) -> KeyLines:
        """1-based source line of every mapping key, keyed by its path."""
        config_file = Path(config_file)
        if config_file.suffix.lower() not in (".yaml", ".yml"):
            return {}
        root = yaml.compose(config_file.read_text(encoding="utf-8"))
        lines: KeyLines = {}

        def walk(node: Any, path: Tuple[str, ...]) -> None:
            if isinstance(node, yaml.MappingNode):
                for key_node, value_node in node.value:
                    key_path = path + (str(key_node.value),)
                    lines[key_path] = key_node.start_mark.line + 1
                    walk(value_node, key_path)

        if root is not None:
            walk(root, ())
        return lines

    @classmethod
    def from_file(cls, config_file: str | Path, overlay_files: Optional[List[str | Path]] = None) -> "Scenario":
        """Load a scenario from YAML or JSON, applying overlays in order."""
        config_file = Path(config_file).expanduser().resolve()
        data = cls._load_config_data(config_file)
        lines = cls._key_lines(config_file)
        for overlay_file in overlay_files or []:
            data = cls._deep_merge_dicts(data, cls._load_config_data(overlay_file))
        scenario = cls.from_dict(data, lines)
        scenario.source = config_file
        return scenario

    @classmethod
    def from_dict(cls, data: Dict[str, Any], lines: Optional[KeyLines] = None) -> "Scenario":
        lines = lines or {}
        if not isinstance(data, dict):
            raise ScenarioError("scenario file must hold a mapping of sections", line=1)
        for key in data:
            if key not in SECTIONS:
                raise ScenarioError(
                    f"unknown section [{key}]; allowed: {', '.join(SECTIONS)}", line=lines.get((str(key),))
                )
        for required in ("scenario", "model"):
            if required not in data:
                raise ScenarioError(f"missing required section [{required}]")
        sections: Dict[str, Any] = {}
        for name, section_cls in SECTIONS.items():
            raw = data.get(name) or {}
            if not isinstance(raw, dict):
                raise ScenarioError(f"section [{name}] must be a mapping", line=lines.get((name,)))
            _reject_unknown(name, raw, _section_keys(section_cls), lines)
            try:
                sections[name] = section_cls.from_dict(raw)
            except KeyError as exc:
                raise ScenarioError(f"section [{name}] is missing '{exc.args[0]}'", line=lines.get((name,))) from exc
            except (TypeError, ValueError) as exc:
                raise ScenarioError(f"[{name}] {exc}", line=_first_line(lines, name, exc)) from exc
        try:
            return cls(**sections)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc)) from exc

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name).to_dict() for name in SECTIONS}

    def save(self, config_file: str | Path) -> None:
        config_file = Path(config_file)
        suffix = config_file.suffix.lower()
        data = self.to_dict()

        if suffix == ".json":
            with open(config_file, "w", encoding="utf-8") as f:
                json.dump(data, f, indent=2, ensure_ascii=False)
        elif suffix in [".yaml", ".yml"]:
            with open(config_file, "w", encoding="utf-8") as f:
                yaml.safe_dump(data, f, default_flow_style=False, sort_keys=False)
        else:
            raise ValueError(f"Unsupported config file format: {suffix}")

        log.info("scenario saved to %s", config_file)


def _first_line(lines: KeyLines, section: str, exc: Exception) -> Optional[int]:
    """Line of the deepest key named in the message, else of the section header."""
    text = str(exc)
    paths = sorted((p for p in lines if p[0] == section and len(p) > 1), key=len, reverse=True)
    for path in paths:
        if re.search(rf"\b{re.escape(path[-1])}\b", text):
            return lines[path]
    return lines.get((section,))


def bundled_scenarios() -> List[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.yaml"))


def resolve_config(config: str | Path) -> Path:
    """A path to an existing file, or the name of a bundled scenario."""
    path = Path(config).expanduser()
    if path.exists():
        return path
    bundled = SCENARIO_DIR / f"{config}.yaml"
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"Config file not found: {config} (bundled: {', '.join(bundled_scenarios())})")
