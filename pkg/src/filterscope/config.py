"""Run configuration: TOML file merged with CLI flag overrides.

Precedence: CLI flag > config file > built-in default. Every analysis
artifact embeds the effective values so runs stay reproducible.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .analytics import DEFAULT_MIN_GROUP_SIZE, GLOBAL_BASIS, PhenotypeThresholds
from .divergence import DivergenceConfig

DEFAULT_REPORT_AXES = ["task", "data_type", "architecture_family", "depth_decile"]


@dataclass
class AppConfig:
    divergence: DivergenceConfig = field(default_factory=DivergenceConfig)
    basis_scope: str = GLOBAL_BASIS
    min_group_size: int = DEFAULT_MIN_GROUP_SIZE
    exclude_degenerate: bool = True
    report_axes: List[str] = field(default_factory=lambda: list(DEFAULT_REPORT_AXES))
    phenotype: PhenotypeThresholds = field(default_factory=PhenotypeThresholds)
    kde_points: int = 256

    def snapshot(self) -> dict:
        return {
            "divergence": self.divergence.snapshot(),
            "basis_scope": self.basis_scope,
            "min_group_size": self.min_group_size,
            "exclude_degenerate": self.exclude_degenerate,
            "report_axes": list(self.report_axes),
            "phenotype": self.phenotype.to_dict(),
            "kde_points": self.kde_points,
        }


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> AppConfig:
    """Build the effective config from an optional TOML file plus overrides.

    ``overrides`` maps flat keys (bins, epsilon, weighting, mode, basis_scope,
    min_group_size, exclude_degenerate) to values; None values are ignored.
    """
    doc = {}
    if path:
        with open(Path(path), "rb") as fh:
            doc = tomllib.load(fh)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    div = doc.get("divergence", {})
    divergence = DivergenceConfig(
        bin_count=int(overrides.get("bins", div.get("bins", 70))),
        epsilon=float(overrides.get("epsilon", div.get("epsilon", 1e-8))),
        weighting=str(overrides.get("weighting", div.get("weighting", "explained-variance"))),
        scaling_mode=str(overrides.get("mode", div.get("mode", "scaled"))),
    )
    ana = doc.get("analysis", {})
    phen = doc.get("phenotype", {})
    known = {f for f in PhenotypeThresholds.__dataclass_fields__}
    unknown = set(phen) - known
    if unknown:
        raise ValueError(f"unknown phenotype config keys: {sorted(unknown)}")
    return AppConfig(
        divergence=divergence,
        basis_scope=str(overrides.get("basis_scope", ana.get("basis_scope", GLOBAL_BASIS))),
        min_group_size=int(overrides.get("min_group_size",
                                         ana.get("min_group_size", DEFAULT_MIN_GROUP_SIZE))),
        exclude_degenerate=bool(overrides.get("exclude_degenerate",
                                              ana.get("exclude_degenerate", True))),
        report_axes=list(overrides.get("report_axes", ana.get("report_axes", DEFAULT_REPORT_AXES))),
        phenotype=PhenotypeThresholds(**phen),
        kde_points=int(ana.get("kde_points", 256)),
    )
