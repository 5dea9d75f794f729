"""Run configuration read from an INI file.

Example::

    [run]
    k = 10
    seed = 0
    tokenizer = bpe
    vocab_path = /data/cl100k_base.tiktoken
    provider = local
    llm = stride
    workers = 4

    [paths]
    corpora = data/corpora
    questions = data/questions.jsonl
    cache = .cache/embeddings
    reports = reports

    [grid]
    preset = default
    names = RT100-0, FX64-12

    [provider:local]
    kind = deterministic
    dims = 64

Relative paths resolve against the file's directory. ``$CHUNKGAUGE_CONFIG``
names the file when ``--config`` is not given.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

from .chunkers import GridSpec, default_grid_spec
from .embeddings import ProviderConfig
from .errors import ConfigError

CONFIG_ENV = "CHUNKGAUGE_CONFIG"
DEFAULT_PROVIDER = "deterministic"
PATH_KEYS = ("corpora", "questions", "tasks", "cache", "reports")


@dataclass
class RunConfig:
    k: int = 10
    seed: int = 0
    tokenizer: str = "whitespace"
    vocab_path: str | None = None
    provider: str = DEFAULT_PROVIDER
    llm: str = "stride"
    workers: int = 1
    cluster_max_tokens: int = 400
    piece_size: int = 50
    paths: dict[str, Path] = field(default_factory=dict)
    providers: dict[str, ProviderConfig] = field(default_factory=dict)
    grid: GridSpec = field(default_factory=default_grid_spec)

    def __post_init__(self):
        self.providers.setdefault(DEFAULT_PROVIDER, ProviderConfig(DEFAULT_PROVIDER))
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def path(self, key: str) -> Path:
        if key not in self.paths:
            raise ConfigError(f"config has no paths.{key}")
        return self.paths[key]

    def provider_config(self, name: str | None = None) -> ProviderConfig:
        name = name or self.provider
        if name not in self.providers:
            raise ConfigError(f"unknown provider {name!r}; configured: {sorted(self.providers)}")
        return self.providers[name]

    def validate_paths(self, *keys: str) -> None:
        for key in keys:
            if not self.path(key).exists():
                raise ConfigError(f"paths.{key} does not exist: {self.paths[key]}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"expected a list of integers, got {text!r}") from None


def _pairs(text: str) -> list[tuple[int, int]]:
    out = []
    for item in text.replace(",", " ").split():
        size, _, overlap = item.partition(":")
        try:
            out.append((int(size), int(overlap or 0)))
        except ValueError:
            raise ConfigError(f"expected size:overlap pairs, got {item!r}") from None
    return out


def _grid(section: configparser.SectionProxy | None) -> GridSpec:
    if section is None:
        return default_grid_spec()
    preset = section.get("preset", "default")
    if preset == "default":
        spec = default_grid_spec()
    elif preset == "none":
        spec = GridSpec()
    else:
        raise ConfigError(f"unknown grid preset {preset!r}")
    if "fixed_sizes" in section:
        spec.fixed_sizes = _pairs(section["fixed_sizes"])
    if "recursive_sizes" in section:
        spec.recursive_sizes = _pairs(section["recursive_sizes"])
    if "overlap_size" in section:
        spec.overlap_size = int(section["overlap_size"]) if section["overlap_size"].strip() else None
    if "overlap_values" in section:
        spec.overlap_values = _ints(section["overlap_values"])
    if "kamradt_sizes" in section:
        spec.kamradt_sizes = _ints(section["kamradt_sizes"])
    if "include_cluster" in section:
        spec.include_cluster = section.getboolean("include_cluster")
    if "include_llm" in section:
        spec.include_llm = section.getboolean("include_llm")
    if "names" in section:
        spec.names = [n for n in section["names"].replace(",", " ").split() if n]
    return spec


_PROVIDER_DEFAULTS = ProviderConfig("defaults")


def _provider(name: str, section: configparser.SectionProxy) -> ProviderConfig:
    d = _PROVIDER_DEFAULTS
    max_input = section.get("max_input_tokens", str(d.max_input_tokens)).strip()
    return ProviderConfig(
        name=name,
        kind=section.get("kind", d.kind),
        model_name=section.get("model", name),
        endpoint=section.get("endpoint"),
        dims=section.getint("dims", d.dims),
        max_batch=section.getint("max_batch", d.max_batch),
        max_retries=section.getint("max_retries", d.max_retries),
        timeout=section.getfloat("timeout", d.timeout),
        max_input_tokens=None if max_input.lower() in ("", "none") else int(max_input),
    )


def load_config(path: str | os.PathLike | None = None) -> RunConfig:
    """Read ``path`` (or ``$CHUNKGAUGE_CONFIG``); with neither, return defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    base = path.parent
    try:
        run = parser["run"] if parser.has_section("run") else {}
        paths = {}
        if parser.has_section("paths"):
            for key, value in parser["paths"].items():
                if key not in PATH_KEYS:
                    raise ConfigError(f"unknown path key {key!r}")
                paths[key] = (base / value).resolve() if value else base
        providers = {}
        for section in parser.sections():
            if section.startswith("provider:"):
                name = section.split(":", 1)[1].strip()
                providers[name] = _provider(name, parser[section])
        vocab = run.get("vocab_path")
        return RunConfig(
            k=int(run.get("k", 10)),
            seed=int(run.get("seed", 0)),
            tokenizer=run.get("tokenizer", "whitespace"),
            vocab_path=str((base / vocab).resolve()) if vocab else None,
            provider=run.get("provider", DEFAULT_PROVIDER),
            llm=run.get("llm", "stride"),
            workers=int(run.get("workers", 1)),
            cluster_max_tokens=int(run.get("cluster_max_tokens", 400)),
            piece_size=int(run.get("piece_size", 50)),
            paths=paths,
            providers=providers,
            grid=_grid(parser["grid"] if parser.has_section("grid") else None),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None
