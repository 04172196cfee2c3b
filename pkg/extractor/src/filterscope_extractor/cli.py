"""CLI: extract qualifying 3x3 conv kernels from a checkpoint into FPACK."""

from __future__ import annotations

import json
import sys

import click

from .errors import ExtractorError
from .extract import extract


@click.command()
@click.option("--checkpoint", required=True, type=click.Path(exists=True),
              help="trained model file (.pt/.pth/.ckpt or .h5/.keras)")
@click.option("--task", required=True)
@click.option("--data-type", "data_type", required=True)
@click.option("--training-set", "training_sets", multiple=True, required=True,
              help="repeatable: one flag per training set")
@click.option("--arch", "architecture_family", required=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--name", default=None)
@click.option("--model-id", default=None)
def main(checkpoint, task, data_type, training_sets, architecture_family,
         out_path, name, model_id):
    """Walk CHECKPOINT, keep regular 3x3 convolutions, write OUT as FPACK."""
    meta = {
        "task": task,
        "data_type": data_type,
        "training_sets": list(training_sets),
        "architecture_family": architecture_family,
        "name": name,
        "model_id": model_id,
    }
    try:
        report = extract(checkpoint, meta, out_path)
    except ExtractorError as e:
        click.echo(json.dumps({"error": type(e).__name__, "message": str(e)},
                              sort_keys=True), err=True)
        sys.exit(3)
    click.echo(json.dumps(report.to_json_dict(), sort_keys=True, indent=2))


if __name__ == "__main__":
    main()
