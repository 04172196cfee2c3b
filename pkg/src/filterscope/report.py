"""Report generation: every analysis emitted as CSV/JSON plus SVG figures.

Artifacts are byte-deterministic for a fixed catalog + config: labels and
models are sorted, floats are repr-formatted, JSON keys sorted. Only the
run log carries wall-clock timestamps, so hashing the CSV/JSON artifacts
is a valid reproducibility check.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from .analytics import (
    classify_phenotype,
    distribution_from_matrix,
    fit_catalog_basis,
    fit_scaled_basis,
    group_filters,
    mean_scale_per_decile,
    shift_matrix_from_groups,
)
from .catalog import FilterCatalog
from .config import AppConfig
from .divergence import DivergenceConfig, _prepare_coefficients, build_histograms
from .errors import (
    DegenerateRange,
    EmptyResult,
    InsufficientData,
    InsufficientSamples,
    TooFewGroups,
    ZeroVariance,
)
from .pca import CoefficientSet, PcaBasis
from .records import KERNEL_CELLS
from .svg import basis_grid_svg, heatmap_svg, line_chart_svg

logger = logging.getLogger(__name__)

_trapezoid = getattr(np, "trapezoid", np.trapz)


@dataclass
class ReportBundle:
    out_dir: Path
    artifacts: List[str] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)


def provenance_line(basis: PcaBasis, config: DivergenceConfig) -> str:
    return (
        f"basis={basis.basis_id} scaling_mode={config.scaling_mode} "
        f"bins={config.bin_count} epsilon={config.epsilon!r} weighting={config.weighting}"
    )


# --- KDE export ---


def gaussian_kde_curve(values: np.ndarray, points: int = 256):
    """Gaussian KDE sampled on a uniform grid; bandwidth N^(-1/5) * stddev."""
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    if n < 2:
        raise DegenerateRange("KDE needs at least 2 values")
    std = float(x.std(ddof=1))
    if std == 0.0 or x.min() == x.max():
        raise DegenerateRange("constant coefficients have no density to estimate")
    h = n ** (-1.0 / 5.0) * std
    grid = np.linspace(x.min() - 4.0 * h, x.max() + 4.0 * h, points)
    dens = np.zeros(points)
    norm = 1.0 / (n * h * math.sqrt(2.0 * math.pi))
    for start in range(0, n, 4096):
        chunk = x[start : start + 4096]
        z = (grid[:, None] - chunk[None, :]) / h
        dens += np.exp(-0.5 * z * z).sum(axis=1)
    return grid, dens * norm


def export_ridge_data(
    groups: Dict[str, CoefficientSet],
    basis: PcaBasis,
    config: DivergenceConfig,
    points: int = 256,
) -> List[tuple]:
    """(group, component, kind, x, value) rows: shared-range histograms
    (bin-for-bin identical to the divergence module's) plus per-group KDE."""
    if not groups:
        raise EmptyResult("no groups to export")
    labels = list(groups)
    rows: List[tuple] = []
    exported = 0
    for i in range(KERNEL_CELLS):
        try:
            hists = build_histograms([groups[lb] for lb in labels], i, config)
        except DegenerateRange:
            logger.info("component %d constant across all groups; ridge rows skipped", i)
            continue
        exported += 1
        for lb, hist in zip(labels, hists):
            for x, p in zip(hist.bin_centers(), hist.probabilities):
                rows.append((lb, i, "hist", float(x), float(p)))
        for lb in labels:
            values = groups[lb].component(i)
            try:
                grid, dens = gaussian_kde_curve(values, points)
            except DegenerateRange:
                logger.info("group %r component %d: constant coefficients, KDE skipped", lb, i)
                continue
            integral = float(_trapezoid(dens, grid))
            if abs(integral - 1.0) > 1e-3:
                logger.warning(
                    "group %r component %d: KDE trapezoid integral %.6f deviates from 1",
                    lb, i, integral,
                )
            for x, d in zip(grid, dens):
                rows.append((lb, i, "kde", float(x), float(d)))
    if exported == 0:
        raise DegenerateRange("all components constant across all groups; nothing to export")
    return rows


# --- writer ---


class _Writer:
    def __init__(self, out_dir: Path, bundle: ReportBundle):
        self.out_dir = out_dir
        self.bundle = bundle

    def write(self, name: str, content: str) -> None:
        path = self.out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        self.bundle.artifacts.append(name)

    def write_json(self, name: str, doc) -> None:
        self.write(name, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def _csv(provenance: str, header: str, rows) -> str:
    lines = [f"# {provenance}", header]
    lines.extend(",".join(str(c) for c in row) for row in rows)
    return "\n".join(lines) + "\n"


def stats_csv(rows, provenance: str) -> str:
    return _csv(
        provenance,
        "group_label,model_count,layer_count,filter_count",
        [(r.label, r.model_count, r.layer_count, r.filter_count) for r in rows],
    )


def explained_variance_rows(label: str, basis: PcaBasis):
    rows = []
    cum = 0.0
    for i, q in enumerate(basis.explained_variance_ratios):
        cum += float(q)
        rows.append((label, i, repr(float(q)), repr(cum)))
    return rows


def scales_csv(catalog: FilterCatalog, provenance: str) -> str:
    rows = []
    for model_id in catalog.model_ids():
        stats = mean_scale_per_decile(model_id, catalog)
        cells = [model_id] + ["" if m is None else repr(m) for m in stats.means]
        rows.append(cells)
    header = "model_id," + ",".join(f"decile_{d}" for d in range(10))
    return _csv(provenance, header, rows)


def ridge_csv(rows, provenance: str) -> str:
    return _csv(
        provenance,
        "group,component,kind,x,value",
        [(g, c, k, repr(x), repr(v)) for g, c, k, x, v in rows],
    )


# --- full report ---


def generate_report(catalog: FilterCatalog, app: AppConfig, out_dir) -> ReportBundle:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(out_dir=out_dir)
    w = _Writer(out_dir, bundle)
    config = app.divergence

    basis = fit_catalog_basis(
        catalog, mode=config.scaling_mode, exclude_degenerate=app.exclude_degenerate
    )
    prov = provenance_line(basis, config)
    bundle.notes.append(f"global basis {basis.basis_id} on {basis.sample_count} filters")

    w.write("basis.json", basis.to_json())
    w.write(
        "basis_components.svg",
        basis_grid_svg(basis.mean, basis.components, basis.explained_variance_ratios,
                       "Principal components (global basis)", prov),
    )
    w.write(
        "explained_variance.csv",
        _csv(prov, "group,component,ratio,cumulative", explained_variance_rows("catalog", basis)),
    )

    for axis in ["model_id"] + [a for a in app.report_axes if a != "model_id"]:
        w.write(f"stats_{axis}.csv", stats_csv(catalog.stats(axis), prov))

    for axis in app.report_axes:
        groups = group_filters(catalog, axis)

        # pairwise shifts
        try:
            matrix = shift_matrix_from_groups(
                groups, basis=basis if app.basis_scope == "global" else None,
                config=config, min_group_size=app.min_group_size,
                basis_scope=app.basis_scope, axis=axis,
            )
        except TooFewGroups as e:
            bundle.notes.append(f"shift[{axis}] skipped: {e}")
            matrix = None
        if matrix is not None:
            w.write(f"shift_{axis}.csv", matrix.to_csv())
            w.write_json(f"shift_{axis}.json", matrix.to_json_dict())
            w.write(
                f"shift_{axis}.svg",
                heatmap_svg(matrix.labels, matrix.values, f"Shift D by {axis}", prov),
            )
            w.write_json(
                f"shift_{axis}_distribution.json",
                distribution_from_matrix(matrix).to_json_dict(),
            )

        # per-subset bases and cumulative explained variance
        ev_rows = []
        curves = {}
        for label, fs in groups.items():
            try:
                sub = fit_scaled_basis(fs, mode=config.scaling_mode,
                                       exclude_degenerate=app.exclude_degenerate,
                                       source=f"{axis}={label}")
            except (InsufficientSamples, ZeroVariance) as e:
                bundle.notes.append(f"basis[{axis}={label}] skipped: {e}")
                continue
            ev_rows.extend(explained_variance_rows(label, sub))
            curves[label] = (
                list(range(1, KERNEL_CELLS + 1)),
                np.cumsum(sub.explained_variance_ratios).tolist(),
            )
        if ev_rows:
            w.write(f"explained_variance_{axis}.csv",
                    _csv(prov, "group,component,ratio,cumulative", ev_rows))
        if curves:
            w.write(
                f"explained_variance_{axis}.svg",
                line_chart_svg(curves, f"Cumulative explained variance by {axis}",
                               "components", "cumulative ratio", prov, y_range=(0.0, 1.0)),
            )

        # ridge data (histograms + KDE) over the shared basis
        coeff_groups = {lb: _prepare_coefficients(fs, basis, config) for lb, fs in groups.items()}
        try:
            rows = export_ridge_data(coeff_groups, basis, config, points=app.kde_points)
            w.write(f"ridge_{axis}.csv", ridge_csv(rows, prov))
        except (DegenerateRange, EmptyResult) as e:
            bundle.notes.append(f"ridge[{axis}] skipped: {e}")

        # phenotypes per group
        phen = {}
        for label, cs in coeff_groups.items():
            try:
                result = classify_phenotype(cs, app.phenotype)
            except InsufficientData as e:
                bundle.notes.append(f"phenotype[{axis}={label}] skipped: {e}")
                continue
            phen[label] = {"phenotype": result.label, "evidence": result.evidence}
        if phen:
            w.write_json(
                f"phenotype_{axis}.json",
                {"axis": axis, "basis_id": basis.basis_id, "provenance": prov,
                 "thresholds": app.phenotype.to_dict(), "groups": phen},
            )

    w.write("scales.csv", scales_csv(catalog, f"mode=raw {prov}"))

    snapshot = app.snapshot()
    snapshot["basis_id"] = basis.basis_id
    w.write_json("config_snapshot.json", snapshot)
    w.write("runlog.txt", "".join(f"{line}\n" for line in bundle.notes) or "ok\n")
    totals = catalog.totals()
    w.write_json(
        "report_manifest.json",
        {
            "artifacts": sorted(bundle.artifacts),
            "basis_id": basis.basis_id,
            "provenance": prov,
            "catalog_totals": {
                "models": totals.model_count,
                "layers": totals.layer_count,
                "filters": totals.filter_count,
            },
        },
    )
    return bundle
