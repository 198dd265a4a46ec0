"""Command line front end: `extract --dataset mnist --split train ...`."""

import sys

import click

from extractor.core import DATASETS, SPLITS, ExtractionJob, extract


@click.command()
@click.option("--dataset", type=click.Choice(DATASETS), required=True)
@click.option("--split", type=click.Choice(SPLITS), required=True)
@click.option("--limit", type=int, default=None,
              help="Cap the number of rows (default: the whole split).")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--data-root", type=click.Path(file_okay=False),
              default="data-cache", show_default=True,
              help="Where dataset archives are cached.")
@click.option("--batch-size", type=int, default=64, show_default=True)
def cli(dataset: str, split: str, limit, out: str, data_root: str,
        batch_size: int) -> None:
    """Write label-first feature CSVs from a frozen image backbone."""
    job = ExtractionJob(dataset=dataset, split=split, out=out, limit=limit)
    rows = extract(job, root=data_root, batch_size=batch_size)
    click.echo(f"wrote {rows} rows to {out}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 2
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except (OSError, RuntimeError) as exc:
        # download/cache/inference failures
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
