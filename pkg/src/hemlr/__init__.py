"""Privacy-preserving multiclass logistic regression over an emulated
leveled SIMD ciphertext.

The package has two training paths that must agree:

* :mod:`hemlr.mlr` is the plaintext reference trainer (softmax and
  sigmoid-likelihood losses, preconditioned Nesterov updates).
* :mod:`hemlr.encrypted_training` evaluates the same update rule over
  packed ciphertexts from :mod:`hemlr.he` / :mod:`hemlr.packing`.

:mod:`hemlr.sigmoid_poly` supplies the polynomial activation used on
the encrypted path; :mod:`hemlr.data` handles CSV and synthetic data;
:mod:`hemlr.cli` ties everything together.
"""

from hemlr.he import HeParams, HeContext, CiphertextSim
from hemlr.data import Dataset, load_csv, one_hot, synth_dataset
from hemlr.mlr import (
    Optimizer,
    LossKind,
    train,
    precision,
    build_preconditioner,
)
from hemlr.sigmoid_poly import PolyApprox, fit_ls, fit_penalized, poly_eval

__all__ = [
    "HeParams",
    "HeContext",
    "CiphertextSim",
    "Dataset",
    "load_csv",
    "one_hot",
    "synth_dataset",
    "Optimizer",
    "LossKind",
    "train",
    "precision",
    "build_preconditioner",
    "PolyApprox",
    "fit_ls",
    "fit_penalized",
    "poly_eval",
]

__version__ = "0.1.0"
