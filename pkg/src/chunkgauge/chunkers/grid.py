"""Chunker configuration grids."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigError
from .base import ChunkerConfig, Strategy, parse_short_name


@dataclass
class GridSpec:
    """Size sweep, overlap sweep, Kamradt caps and the two unsized strategies.

    ``fixed_sizes`` and ``recursive_sizes`` hold ``(chunk_size, overlap)``
    pairs. The overlap sweep crosses ``overlap_families`` with
    ``overlap_values`` at ``overlap_size`` tokens. ``names`` lists extra
    configurations by short name. Repeats inside one list are rejected;
    configurations produced by two different sweeps are kept once.
    """

    fixed_sizes: list[tuple[int, int]] = field(default_factory=list)
    recursive_sizes: list[tuple[int, int]] = field(default_factory=list)
    overlap_size: int | None = None
    overlap_values: list[int] = field(default_factory=list)
    overlap_families: tuple[str, ...] = ("FX", "RT")
    kamradt_sizes: list[int] = field(default_factory=list)
    include_cluster: bool = False
    include_llm: bool = False
    names: list[str] = field(default_factory=list)


def default_grid_spec() -> GridSpec:
    """The 25-configuration chunking grid.

    Size sweep (15): FX at ~20% overlap over 64-512 tokens, RT at 25% over
    64-512 tokens plus 100, K50-K400, CL and LLM. Overlap sweep (10): FX and
    RT at 100 tokens with 0/20/40/60/80 tokens of overlap.
    """
    return GridSpec(
        fixed_sizes=[(64, 12), (128, 25), (256, 50), (512, 100)],
        recursive_sizes=[(64, 16), (100, 25), (128, 32), (256, 64), (512, 128)],
        overlap_size=100,
        overlap_values=[0, 20, 40, 60, 80],
        kamradt_sizes=[50, 100, 200, 400],
        include_cluster=True,
        include_llm=True,
    )


def _no_repeats(label: str, items: list) -> None:
    seen = set()
    for item in items:
        if item in seen:
            raise ConfigError(f"grid spec lists {label} {item!r} more than once")
        seen.add(item)


def grid_configs(spec: GridSpec | None = None) -> list[ChunkerConfig]:
    """Expand a grid spec (the default grid when ``None``) into a deduplicated,
    order-preserving config list."""
    if spec is None:
        spec = default_grid_spec()
    for label, items in [("fixed size", spec.fixed_sizes), ("recursive size", spec.recursive_sizes),
                         ("overlap", spec.overlap_values), ("Kamradt size", spec.kamradt_sizes),
                         ("name", spec.names)]:
        _no_repeats(label, list(items))

    configs = [ChunkerConfig(Strategy.FIXED, s, o) for s, o in spec.fixed_sizes]
    configs += [ChunkerConfig(Strategy.RECURSIVE, s, o) for s, o in spec.recursive_sizes]
    if spec.overlap_size is not None:
        for family in spec.overlap_families:
            configs += [ChunkerConfig(Strategy(family), spec.overlap_size, o) for o in spec.overlap_values]
    configs += [ChunkerConfig(Strategy.KAMRADT_MODIFIED, s) for s in spec.kamradt_sizes]
    if spec.include_cluster:
        configs.append(ChunkerConfig(Strategy.CLUSTER_SEMANTIC))
    if spec.include_llm:
        configs.append(ChunkerConfig(Strategy.LLM_SEMANTIC))
    configs += [parse_short_name(n) for n in spec.names]

    out, seen = [], set()
    for c in configs:
        if c.short_name not in seen:
            seen.add(c.short_name)
            out.append(c)
    return out
