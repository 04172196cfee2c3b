"""Command-line entry point: ingest -> stats -> pca -> shift -> report.

Exit codes: 0 success, 2 usage error, 3 data error (bad files, unknown
models, empty queries), 4 compute error (analysis preconditions unmet).
Failures print one machine-readable JSON object on stderr.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from .analytics import fit_catalog_basis, group_filters, shift_matrix_from_groups
from .analytics import classify_phenotype, distribution_from_matrix
from .catalog import FilterCatalog, Query
from .config import load_config
from .divergence import _prepare_coefficients
from .errors import ComputeError, DataError, InsufficientData
from .fpack import parse_csv, read_fpack_file
from .records import ALL_AXES
from .report import generate_report, scales_csv, stats_csv
from .svg import heatmap_svg

EXIT_DATA = 3
EXIT_COMPUTE = 4


def _fail(exc: BaseException, code: int) -> None:
    doc = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(doc, sort_keys=True), err=True)
    sys.exit(code)


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataError as e:
            _fail(e, EXIT_DATA)
        except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
            _fail(e, EXIT_DATA)
        except ComputeError as e:
            _fail(e, EXIT_COMPUTE)
        except ValueError as e:
            raise click.UsageError(str(e))

    return wrapper


def _query_options(fn):
    for args in (
        ("--task",),
        ("--data-type", "data_type"),
        ("--training-set", "training_set"),
        ("--arch", "architecture_family"),
        ("--model", "model_id"),
    ):
        fn = click.option(*args, default=None)(fn)
    fn = click.option("--decile", "depth_decile", type=click.IntRange(0, 9), default=None)(fn)
    return fn


def _build_query(task, data_type, training_set, architecture_family, model_id, depth_decile):
    return Query(
        task=task,
        data_type=data_type,
        training_set=training_set,
        architecture_family=architecture_family,
        model_id=model_id,
        depth_decile=depth_decile,
    )


def _divergence_options(fn):
    fn = click.option("--bins", type=int, default=None, help="histogram bin count")(fn)
    fn = click.option("--epsilon", type=float, default=None, help="probability floor")(fn)
    fn = click.option(
        "--basis", "basis_scope", type=click.Choice(["global", "pair"]), default=None
    )(fn)
    fn = click.option("--mode", type=click.Choice(["scaled", "raw"]), default=None)(fn)
    fn = click.option("--min-group-size", type=int, default=None)(fn)
    return fn


def _emit(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@click.group()
@click.option(
    "--catalog",
    "catalog_dir",
    envvar="FILTERSCOPE_CATALOG",
    default="catalog",
    show_default=True,
    help="catalog directory (env FILTERSCOPE_CATALOG)",
)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.pass_context
def main(ctx, catalog_dir, config_path):
    """Catalog 3x3 convolution filters and measure distribution shifts."""
    ctx.ensure_object(dict)
    ctx.obj["catalog_dir"] = catalog_dir
    ctx.obj["config_path"] = config_path


def _catalog(ctx, create: bool = True) -> FilterCatalog:
    return FilterCatalog(ctx.obj["catalog_dir"], create=create)


def _config(ctx, **overrides):
    return load_config(ctx.obj["config_path"], overrides)


@main.command()
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["auto", "fpack", "csv"]), default="auto")
@click.option("--meta", "meta_path", type=click.Path(exists=True), default=None,
              help="metadata JSON (required for csv input)")
@click.pass_context
@handle_errors
def ingest(ctx, in_path, fmt, meta_path):
    """Parse an interchange file and register the model in the catalog."""
    if fmt == "auto":
        fmt = "csv" if in_path.endswith(".csv") else "fpack"
    if fmt == "fpack":
        meta, layers, filters = read_fpack_file(in_path)
    else:
        if not meta_path:
            raise click.UsageError("--meta is required for csv input")
        meta, layers, filters = parse_csv(
            Path(in_path).read_text(encoding="utf-8"),
            Path(meta_path).read_text(encoding="utf-8"),
        )
    catalog = _catalog(ctx)
    catalog.register_model(meta, layers, filters)
    click.echo(json.dumps(
        {"model_id": meta.model_id, "layers": len(layers), "filters": len(filters)},
        sort_keys=True,
    ))


@main.command()
@click.option("--group-by", "axis", required=True, type=click.Choice(ALL_AXES))
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def stats(ctx, axis, out):
    """Count models / layers / filters per group along one axis."""
    rows = _catalog(ctx, create=False).stats(axis)
    _emit(stats_csv(rows, f"axis={axis}"), out)


@main.command()
@_query_options
@click.option("--mode", type=click.Choice(["scaled", "raw"]), default=None)
@click.option("--include-degenerate", is_flag=True, default=False)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def pca(ctx, task, data_type, training_set, architecture_family, model_id, depth_decile,
        mode, include_degenerate, out):
    """Fit a PCA basis over the catalog (or a query subset) and export it."""
    app = _config(ctx, mode=mode)
    query = _build_query(task, data_type, training_set, architecture_family,
                         model_id, depth_decile)
    basis = fit_catalog_basis(
        _catalog(ctx, create=False),
        query=query,
        mode=app.divergence.scaling_mode,
        exclude_degenerate=not include_degenerate and app.exclude_degenerate,
    )
    _emit(basis.to_json(), out)


@main.command()
@click.option("--group-by", "axis", required=True, type=click.Choice(ALL_AXES))
@_divergence_options
@click.option("--out-prefix", type=click.Path(), default=None,
              help="write <prefix>.csv/.json/.svg instead of stdout CSV")
@click.pass_context
@handle_errors
def shift(ctx, axis, bins, epsilon, basis_scope, mode, min_group_size, out_prefix):
    """Pairwise shift matrix over groups along one axis."""
    app = _config(ctx, bins=bins, epsilon=epsilon, basis_scope=basis_scope, mode=mode,
                  min_group_size=min_group_size)
    catalog = _catalog(ctx, create=False)
    basis = None
    if app.basis_scope == "global":
        basis = fit_catalog_basis(catalog, mode=app.divergence.scaling_mode,
                                  exclude_degenerate=app.exclude_degenerate)
    matrix = shift_matrix_from_groups(
        group_filters(catalog, axis),
        basis=basis,
        config=app.divergence,
        min_group_size=app.min_group_size,
        basis_scope=app.basis_scope,
        axis=axis,
    )
    if out_prefix:
        prefix = Path(out_prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        prefix.with_suffix(".csv").write_text(matrix.to_csv(), encoding="utf-8")
        prefix.with_suffix(".json").write_text(
            json.dumps(matrix.to_json_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        title = f"Shift D by {axis}"
        prov = " ".join(f"{k}={v}" for k, v in sorted(matrix.config.items()))
        prefix.with_suffix(".svg").write_text(
            heatmap_svg(matrix.labels, matrix.values, title, prov), encoding="utf-8"
        )
        dist = distribution_from_matrix(matrix)
        prefix.parent.joinpath(prefix.name + "_distribution.json").write_text(
            json.dumps(dist.to_json_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
    else:
        click.echo(matrix.to_csv(), nl=False)


@main.command()
@click.option("--model", "model_id", default=None, help="one model (default: all)")
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def scales(ctx, model_id, out):
    """Mean filter weight range per layer depth decile (raw weights)."""
    catalog = _catalog(ctx, create=False)
    if model_id is not None:
        from .analytics import mean_scale_per_decile

        stats_row = mean_scale_per_decile(model_id, catalog)
        _emit(json.dumps(stats_row.to_json_dict(), sort_keys=True, indent=2) + "\n", out)
    else:
        _emit(scales_csv(catalog, "mode=raw"), out)


@main.command()
@click.option("--group-by", "axis", type=click.Choice(ALL_AXES), default=None,
              help="classify each group (default: whole catalog)")
@click.option("--mode", type=click.Choice(["scaled", "raw"]), default=None)
@click.option("--out", type=click.Path(), default=None)
@click.pass_context
@handle_errors
def phenotype(ctx, axis, mode, out):
    """Classify coefficient distributions as sun / spikes / symbols."""
    app = _config(ctx, mode=mode)
    catalog = _catalog(ctx, create=False)
    basis = fit_catalog_basis(catalog, mode=app.divergence.scaling_mode,
                              exclude_degenerate=app.exclude_degenerate)
    if axis is None:
        groups = {"catalog": catalog.query()}
    else:
        groups = group_filters(catalog, axis)
    results = {}
    skipped = {}
    for label, fs in groups.items():
        cs = _prepare_coefficients(fs, basis, app.divergence)
        try:
            res = classify_phenotype(cs, app.phenotype)
        except InsufficientData as e:
            skipped[label] = str(e)
            continue
        results[label] = {"phenotype": res.label, "evidence": res.evidence}
    if not results:
        raise InsufficientData(
            "no group has enough coefficient rows: " + "; ".join(skipped.values())
        )
    doc = {
        "axis": axis or "catalog",
        "basis_id": basis.basis_id,
        "thresholds": app.phenotype.to_dict(),
        "groups": results,
        "skipped": skipped,
    }
    _emit(json.dumps(doc, sort_keys=True, indent=2) + "\n", out)


@main.command()
@_divergence_options
@click.option("--out-dir", required=True, type=click.Path())
@click.option("--axes", multiple=True, type=click.Choice(ALL_AXES),
              help="report axes (repeatable; default from config)")
@click.pass_context
@handle_errors
def report(ctx, bins, epsilon, basis_scope, mode, min_group_size, out_dir, axes):
    """Run the full pipeline and write every artifact into --out-dir."""
    app = _config(ctx, bins=bins, epsilon=epsilon, basis_scope=basis_scope, mode=mode,
                  min_group_size=min_group_size, report_axes=list(axes) or None)
    bundle = generate_report(_catalog(ctx, create=False), app, out_dir)
    click.echo(json.dumps(
        {"out_dir": str(bundle.out_dir), "artifacts": sorted(bundle.artifacts)},
        sort_keys=True,
    ))


if __name__ == "__main__":
    main()
