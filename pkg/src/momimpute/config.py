"""Scenario configuration files (TOML with [model], [mechanism], [study])."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .datagen import CovariateDist, MissingnessMechanism, PopulationModel
from .errors import ConfigError
from .estimators import Estimand

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["ScenarioConfig", "load_config", "parse_config", "builtin_config", "BUILTIN_CONFIGS"]


@dataclass(frozen=True)
class ScenarioConfig:
    model: PopulationModel
    mechanism: MissingnessMechanism
    n: int
    imputations: tuple[int, ...]
    replicates: int
    estimands: tuple[Estimand, ...]
    levels: tuple[float, ...] = (0.90, 0.95)
    root_seed: int = 0
    name: str = "scenario"
    workers: int = field(default=1, compare=False)

    def __post_init__(self):
        if self.replicates < 2:
            raise ConfigError("study.replicates", "study.replicates must be at least 2")
        if not self.imputations or min(self.imputations) < 2:
            raise ConfigError("study.imputations", "study.imputations must all be at least 2")
        if self.n < 4:
            raise ConfigError("study.n", "study.n must be at least 4")
        if any(not 0.0 < lv < 1.0 for lv in self.levels):
            raise ConfigError("study.levels", "study.levels must lie in (0, 1)")

    @property
    def M(self) -> int:
        return max(self.imputations)

    def with_overrides(self, seed=None, replicates=None, imputations=None, workers=None):
        kw = {}
        if seed is not None:
            kw["root_seed"] = int(seed)
        if replicates is not None:
            kw["replicates"] = int(replicates)
        if imputations is not None:
            kw["imputations"] = _as_int_tuple(imputations)
        if workers is not None:
            kw["workers"] = int(workers)
        return replace(self, **kw)


def _as_int_tuple(v):
    if isinstance(v, (list, tuple)):
        return tuple(int(x) for x in v)
    return (int(v),)


def _section(doc, name):
    sec = doc.get(name)
    if not isinstance(sec, dict):
        raise ConfigError(name, f"missing [{name}] section")
    return sec


def _get(sec, section, key, default=None, required=True):
    if key in sec:
        return sec[key]
    if required and default is None:
        raise ConfigError(f"{section}.{key}", f"missing key {section}.{key}")
    return default


def _parse_model(sec) -> PopulationModel:
    intercept = bool(_get(sec, "model", "intercept", False))
    beta = _get(sec, "model", "beta")
    if not isinstance(beta, list):
        beta = [beta]
    kind = str(_get(sec, "model", "covariate")).lower()
    try:
        if kind == "exponential":
            cov = CovariateDist.exponential(float(_get(sec, "model", "rate", 1.0)))
        elif kind == "normal":
            cov = CovariateDist.normal(
                float(_get(sec, "model", "mean", 0.0)), float(_get(sec, "model", "variance", 1.0))
            )
        else:
            raise ConfigError("model.covariate", f"unknown covariate distribution {kind!r}")
        return PopulationModel(
            tuple(float(b) for b in beta), cov,
            float(_get(sec, "model", "error_variance")), intercept=intercept,
        )
    except ValueError as exc:
        raise ConfigError("model", f"invalid [model]: {exc}") from None


def _parse_mechanism(sec) -> MissingnessMechanism:
    kind = str(_get(sec, "mechanism", "kind")).lower()
    try:
        if kind == "mcar":
            return MissingnessMechanism.mcar(float(_get(sec, "mechanism", "response_rate")))
        if kind in ("mar", "mar_logistic"):
            return MissingnessMechanism.mar_logistic(
                float(_get(sec, "mechanism", "phi0")), float(_get(sec, "mechanism", "phi1"))
            )
    except ValueError as exc:
        raise ConfigError("mechanism", f"invalid [mechanism]: {exc}") from None
    raise ConfigError("mechanism.kind", f"unknown mechanism kind {kind!r}")


def parse_config(doc: dict, name: str = "scenario") -> ScenarioConfig:
    model = _parse_model(_section(doc, "model"))
    mechanism = _parse_mechanism(_section(doc, "mechanism"))
    study = _section(doc, "study")
    try:
        estimands = tuple(Estimand.parse(str(e)) for e in _get(study, "study", "estimands"))
    except ValueError as exc:
        raise ConfigError("study.estimands", str(exc)) from None
    try:
        return ScenarioConfig(
            model=model,
            mechanism=mechanism,
            n=int(_get(study, "study", "n")),
            imputations=_as_int_tuple(_get(study, "study", "imputations")),
            replicates=int(_get(study, "study", "replicates")),
            estimands=estimands,
            levels=tuple(float(v) for v in _get(study, "study", "levels", [0.90, 0.95])),
            root_seed=int(_get(study, "study", "seed", 0)),
            name=str(doc.get("name", name)),
            workers=int(_get(study, "study", "workers", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError("study", f"invalid [study]: {exc}") from None


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"{path}: not valid TOML ({exc})") from None
    return parse_config(doc, name=path.stem)


BUILTIN_CONFIGS = (
    "sim1_i", "sim1_ii", "sim1_i_full", "sim1_ii_full",
    "sim2_mcar", "sim2_mar",
)


def builtin_config(name: str) -> ScenarioConfig:
    """Load one of the configs shipped in ``momimpute/configs``."""
    ref = resources.files("momimpute") / "configs" / f"{name}.toml"
    with resources.as_file(ref) as p:
        return load_config(p)
