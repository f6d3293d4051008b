"""Pipeline configuration: defaults, YAML file, command-line overrides.

Precedence is flags over file over built-in defaults.  The file never
carries a credential; provider auth is taken from the environment variable
named by api_key_env at request time.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from ..divergence import DEFAULT_ALPHA, DEFAULT_EPSILON
from ..genclient import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_N_CANDIDATES,
    DEFAULT_TEMPERATURES,
    ProviderConfig,
    SweepPlan,
)
from ..pmf import WeightTable
from ..sandbox import SandboxConfig


class ConfigError(ValueError):
    """Unusable configuration: unknown keys, bad types, missing files."""


@dataclass
class DivergenceSettings:
    alpha: float = DEFAULT_ALPHA
    epsilon: float = DEFAULT_EPSILON


@dataclass
class SandboxSettings:
    per_test_timeout: float = 20.0
    max_private_tests: int = 10
    tracer_command: list[str] = field(default_factory=lambda: ["opstab-tracer"])
    workdir: Optional[str] = None


@dataclass
class ProviderSettings:
    base_url: Optional[str] = None
    model_name: Optional[str] = None
    api_key_env: str = "OPSTAB_API_KEY"
    request_timeout: float = 60.0
    max_retries: int = 3
    n_candidates: int = DEFAULT_N_CANDIDATES
    temperatures: list[float] = field(
        default_factory=lambda: list(DEFAULT_TEMPERATURES)
    )
    prompt_variant: str = "with_examples"
    max_tokens: int = DEFAULT_MAX_TOKENS


@dataclass
class PipelineConfig:
    corpus_root: Optional[str] = None
    weights: Optional[str] = None
    report_dir: str = "reports"
    divergence: DivergenceSettings = field(default_factory=DivergenceSettings)
    sandbox: SandboxSettings = field(default_factory=SandboxSettings)
    provider: ProviderSettings = field(default_factory=ProviderSettings)

    def weight_table(self) -> WeightTable:
        if self.weights is None:
            return WeightTable.shipped_default()
        path = Path(self.weights)
        if not path.is_file():
            raise ConfigError(f"weight table not found: {path}")
        try:
            return WeightTable.from_file(path)
        except ValueError as exc:
            raise ConfigError(f"bad weight table {path}: {exc}") from exc

    def sandbox_config(self, workdir: Path) -> SandboxConfig:
        try:
            return SandboxConfig(
                workdir=workdir,
                tracer_command=list(self.sandbox.tracer_command),
                per_test_timeout=self.sandbox.per_test_timeout,
                max_private_tests=self.sandbox.max_private_tests,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def provider_config(self) -> ProviderConfig:
        if self.provider.base_url is None:
            raise ConfigError("provider.base_url is required for generation")
        if self.provider.model_name is None:
            raise ConfigError("provider.model_name is required for generation")
        try:
            return ProviderConfig(
                base_url=self.provider.base_url,
                model_name=self.provider.model_name,
                api_key_env=self.provider.api_key_env,
                request_timeout=self.provider.request_timeout,
                max_retries=self.provider.max_retries,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def sweep_plan(self, temperatures: Optional[list[float]] = None) -> SweepPlan:
        temps = temperatures if temperatures is not None else self.provider.temperatures
        try:
            return SweepPlan(
                temperatures=tuple(temps),
                n_candidates=self.provider.n_candidates,
                prompt_variant=self.provider.prompt_variant,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_SECTION_TYPES = {
    "divergence": DivergenceSettings,
    "sandbox": SandboxSettings,
    "provider": ProviderSettings,
}


_CREDENTIAL_KEYS = ("api_key", "apikey", "api_token", "token", "secret")


def _reject_credentials(raw: dict) -> None:
    # Keys are enough; never echo values into the error message.
    for key, value in raw.items():
        if str(key).lower() in _CREDENTIAL_KEYS:
            raise ConfigError(f"credentials do not belong in config files (key '{key}')")
        if isinstance(value, dict):
            _reject_credentials(value)


def _coerce_section(name: str, cls: type, raw: Any) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(f"section '{name}' must be a mapping, got {type(raw).__name__}")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown keys in '{name}': {', '.join(sorted(unknown))}")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"bad section '{name}': {exc}") from exc


def load_config(path: Optional[Path]) -> PipelineConfig:
    """Parse a YAML config file; None yields pure defaults."""
    if path is None:
        return PipelineConfig()
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if raw is None:
        return PipelineConfig()
    if not isinstance(raw, dict):
        raise ConfigError(f"config root must be a mapping, got {type(raw).__name__}")
    _reject_credentials(raw)
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs: dict[str, Any] = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            kwargs[key] = _coerce_section(key, _SECTION_TYPES[key], value)
        else:
            kwargs[key] = value
    try:
        return PipelineConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def render_config_yaml(cfg: PipelineConfig) -> str:
    payload = {
        "corpus_root": cfg.corpus_root,
        "weights": cfg.weights,
        "report_dir": cfg.report_dir,
        "divergence": dataclasses.asdict(cfg.divergence),
        "sandbox": dataclasses.asdict(cfg.sandbox),
        "provider": dataclasses.asdict(cfg.provider),
    }
    return yaml.safe_dump(payload, sort_keys=False, default_flow_style=False)


def default_config_yaml() -> str:
    """Render the built-in defaults as a YAML document."""
    return render_config_yaml(PipelineConfig())
