"""Command-line entry point.

Commands: fit-sigmoid (print the polynomial activation as JSON), train
(plaintext reference trainer), train-encrypted (emulated ciphertext
pipeline), synth (write a synthetic dataset CSV).

Exit codes: 0 success, 1 input/data problems, 2 invalid configuration,
3 multiplicative budget exhausted under policy "never". Defaults
reproduce the experiment preset: eps=1e-10, lambda0=128, lambda1=1,
degree=3, logN=16, logQ=990, logp=45, 2 iterations from zero weights.
"""

import json
import os
import sys

import click
import numpy as np

from hemlr import data as data_mod
from hemlr import mlr
from hemlr.encrypted_training import (
    POLICIES,
    client_encrypt,
    decrypted_weights,
    server_train,
)
from hemlr.errors import ConfigError, DataError, HemlrError, LevelExhausted
from hemlr.he import HeContext, HeParams
from hemlr.mlr import LossKind, Optimizer
from hemlr.sigmoid_poly import (
    FitObjective,
    fit_ls,
    fit_penalized,
    fitted_surrogate,
    poly_to_json_dict,
    sigmoid,
)

METRIC_FIELDS = ("iter", "precision_train", "precision_test", "lnL2", "lnL_softmax")

OPTIMIZER_CHOICES = [o.value for o in Optimizer]
LOSS_CHOICES = [k.value for k in LossKind]


def _write_metrics(path: str, rows) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(METRIC_FIELDS) + "\n")
        for row in rows:
            fh.write(",".join(
                str(row["iter"]) if f == "iter" else repr(float(row[f]))
                for f in METRIC_FIELDS) + "\n")


def _write_model(path: str, W, c: int, d: int) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(mlr.model_to_json_dict(W, c, d), fh)


def _load_train_test(train_path, test_path):
    train_ds = data_mod.load_csv(train_path)
    test_ds = None
    if test_path:
        test_ds = data_mod.load_csv(test_path)
        if test_ds.c < train_ds.c:
            test_ds = data_mod.Dataset(
                X=test_ds.X, Y=test_ds.Y,
                Ybar=data_mod.one_hot(test_ds.Y, train_ds.c),
                n=test_ds.n, d=test_ds.d, c=train_ds.c)
        elif test_ds.c > train_ds.c:
            raise DataError("test set has labels unseen in training")
    return train_ds, test_ds


@click.group()
def cli():
    """Multiclass logistic regression over an emulated leveled ciphertext."""


@cli.command("fit-sigmoid")
@click.option("--lambda0", type=float, default=128.0, show_default=True,
              help="Weight of the value term of the fit objective.")
@click.option("--lambda1", type=float, default=1.0, show_default=True,
              help="Weight of the gradient term of the fit objective.")
@click.option("--degree", type=int, default=3, show_default=True)
@click.option("--base-degree", type=int, default=11, show_default=True,
              help="Degree of the least-squares fit the surrogate tracks.")
@click.option("--domain-lo", type=float, default=-8.0, show_default=True)
@click.option("--domain-hi", type=float, default=8.0, show_default=True)
def cmd_fit_sigmoid(lambda0, lambda1, degree, base_degree, domain_lo, domain_hi):
    """Fit the polynomial activation and print it as JSON."""
    try:
        obj = FitObjective(lambda0, lambda1)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if degree < 0 or base_degree < degree:
        raise ConfigError("need 0 <= degree <= base degree")
    base = fit_ls(sigmoid, base_degree, (domain_lo, domain_hi))
    poly = fit_penalized(base, degree, obj)
    click.echo(json.dumps(poly_to_json_dict(poly)))


@cli.command("train")
@click.option("--train", "train_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--test", "test_path", default=None,
              type=click.Path(dir_okay=False))
@click.option("--optimizer", type=click.Choice(OPTIMIZER_CHOICES),
              default=Optimizer.SIGMOID_NAG_QG.value, show_default=True)
@click.option("--activation", type=click.Choice(["sigmoid", "poly"]),
              default="sigmoid", show_default=True,
              help="Exact sigmoid or the fitted polynomial surrogate.")
@click.option("--loss", type=click.Choice(LOSS_CHOICES),
              default=LossKind.LOG_ABS_ERROR.value, show_default=True,
              help="Which loss to report on stdout after training.")
@click.option("--iters", type=int, default=2, show_default=True)
@click.option("--eps", type=float, default=1e-10, show_default=True)
@click.option("--lambda0", type=float, default=128.0, show_default=True)
@click.option("--lambda1", type=float, default=1.0, show_default=True)
@click.option("--degree", type=int, default=3, show_default=True)
@click.option("--out", "out_dir", default="out", show_default=True,
              type=click.Path(file_okay=False))
def cmd_train(train_path, test_path, optimizer, activation, loss, iters,
              eps, lambda0, lambda1, degree, out_dir):
    """Plaintext training; writes metrics.csv and model.json under --out."""
    if iters < 0:
        raise ConfigError("--iters must be >= 0")
    train_ds, test_ds = _load_train_test(train_path, test_path)
    act = None
    if activation == "poly":
        act = fitted_surrogate(degree=degree, lambda0=lambda0, lambda1=lambda1)
    W, metrics = mlr.train(train_ds, Optimizer(optimizer), activation=act,
                           kappa=iters, eps=eps, test_ds=test_ds)
    os.makedirs(out_dir, exist_ok=True)
    _write_metrics(os.path.join(out_dir, "metrics.csv"), metrics)
    _write_model(os.path.join(out_dir, "model.json"), W, train_ds.c, train_ds.d)
    kind = LossKind(loss)
    if kind is LossKind.SOFTMAX_LL:
        final = mlr.softmax_loglik(W, train_ds)
    else:
        final = mlr.sle_loss(W, train_ds, kind)
    click.echo(f"final {loss} = {final!r}")


@cli.command("train-encrypted")
@click.option("--train", "train_path", required=True,
              type=click.Path(dir_okay=False))
@click.option("--test", "test_path", default=None,
              type=click.Path(dir_okay=False))
@click.option("--optimizer", type=click.Choice(OPTIMIZER_CHOICES),
              default=Optimizer.SIGMOID_NAG_QG.value, show_default=True,
              help="The encrypted protocol carries the preconditioner, so "
                   "only sigmoid-nag-qg is supported here.")
@click.option("--iters", type=int, default=2, show_default=True)
@click.option("--policy", type=click.Choice(list(POLICIES)),
              default="never", show_default=True)
@click.option("--logn", type=int, default=16, show_default=True)
@click.option("--logq", type=int, default=990, show_default=True)
@click.option("--logp", type=int, default=45, show_default=True)
@click.option("--eps", type=float, default=1e-10, show_default=True)
@click.option("--lambda0", type=float, default=128.0, show_default=True)
@click.option("--lambda1", type=float, default=1.0, show_default=True)
@click.option("--degree", type=int, default=3, show_default=True)
@click.option("--out", "out_dir", default="out", show_default=True,
              type=click.Path(file_okay=False))
def cmd_train_encrypted(train_path, test_path, optimizer, iters, policy,
                        logn, logq, logp, eps, lambda0, lambda1, degree,
                        out_dir):
    """Emulated encrypted training; writes metrics.csv, model.json and
    trace.json under --out."""
    if optimizer != Optimizer.SIGMOID_NAG_QG.value:
        raise ConfigError("encrypted training supports only sigmoid-nag-qg")
    if iters < 1:
        raise ConfigError("--iters must be >= 1")
    try:
        params = HeParams(logN=logn, logQ=logq, logp=logp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    train_ds, test_ds = _load_train_test(train_path, test_path)
    act = fitted_surrogate(degree=degree, lambda0=lambda0, lambda1=lambda1)
    ctx = HeContext(params)
    precond = mlr.build_preconditioner(train_ds, eps=eps)
    session = client_encrypt(train_ds, precond, ctx, activation=act)
    session, report = server_train(session, iters, bootstrap_policy=policy)
    W = decrypted_weights(session)
    os.makedirs(out_dir, exist_ok=True)
    _write_metrics(os.path.join(out_dir, "metrics.csv"),
                   [mlr._metric_row(iters, W, train_ds, test_ds)])
    _write_model(os.path.join(out_dir, "model.json"), W, train_ds.c, train_ds.d)
    with open(os.path.join(out_dir, "trace.json"), "w", encoding="ascii") as fh:
        json.dump(report, fh)
    click.echo(f"completed {iters} iterations, "
               f"{report['per_op_counts']['Bootstrap']} bootstraps")


@cli.command("synth")
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--n", type=int, required=True)
@click.option("--d", type=int, required=True)
@click.option("--c", type=int, required=True)
@click.option("--out", "out_path", required=True,
              type=click.Path(dir_okay=False))
def cmd_synth(seed, n, d, c, out_path):
    """Write a deterministic synthetic dataset CSV."""
    try:
        ds = data_mod.synth_dataset(seed, n, d, c)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    data_mod.write_csv(out_path, ds)
    click.echo(f"wrote {n} rows to {out_path}")


def main(argv=None) -> int:
    """Entry point with the stable exit-code contract."""
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
    except ConfigError as exc:
        click.echo(f"error: {exc}", err=True)
        return 2
    except LevelExhausted as exc:
        click.echo(f"error: level budget exhausted: {exc}", err=True)
        return 3
    except (DataError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except HemlrError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
