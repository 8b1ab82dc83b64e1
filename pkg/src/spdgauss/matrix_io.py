"""JSON-lines matrix files: one object per line,
``{"beta": 1|2, "n": N, "re": [[...]], "im": [[...]]}`` with ``im`` omitted for
real SPD records (beta = 1). Siegel-domain records always carry ``im``.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DomainError
from .spd import check_spd


def matrix_record(Y, beta=None):
    Y = np.asarray(Y)
    beta = beta or (2 if np.iscomplexobj(Y) else 1)
    rec = {"beta": beta, "n": int(Y.shape[-1]), "re": np.real(Y).tolist()}
    if beta == 2:
        rec["im"] = np.imag(Y).tolist()
    return rec


def write_matrices(path, mats, beta=None):
    """Write a stack of matrices, one JSON object per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for Y in mats:
            fh.write(json.dumps(matrix_record(Y, beta), separators=(",", ":")) + "\n")


def _parse(line, lineno, spd):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as e:
        raise DomainError(f"line {lineno}: invalid JSON ({e.msg})") from None
    if not isinstance(rec, dict):
        raise DomainError(f"line {lineno}: expected an object")
    beta, n = rec.get("beta"), rec.get("n")
    if beta not in (1, 2):
        raise DomainError(f"line {lineno}: beta must be 1 or 2, got {beta!r}")
    if not isinstance(n, int) or n < 1:
        raise DomainError(f"line {lineno}: n must be a positive integer, got {n!r}")
    try:
        re = np.asarray(rec["re"], dtype=float)
        # Siegel points are complex for either beta, so "im" is honoured there
        want_im = beta == 2 or (not spd and "im" in rec)
        im = np.asarray(rec["im"], dtype=float) if want_im else None
    except (KeyError, TypeError, ValueError) as e:
        raise DomainError(f"line {lineno}: bad matrix entries ({e})") from None
    if re.shape != (n, n) or (im is not None and im.shape != (n, n)):
        raise DomainError(f"line {lineno}: entries do not form a {n}x{n} matrix")
    Y = re if im is None else re + 1j * im
    if spd:
        try:
            Y = check_spd(Y, beta)
        except DomainError as e:
            raise DomainError(f"line {lineno}: {e}") from None
    return beta, Y


def read_matrices(path, spd=True):
    """Read a JSON-lines matrix file.

    Parameters
    ----------
    path : str or path-like
    spd : bool
        Reject records that are not self-adjoint positive definite.

    Returns
    -------
    (int, ndarray)
        Common ``beta`` and the stack ``(m, n, n)``.

    Raises
    ------
    DomainError
        Naming the offending line for malformed, mixed or invalid records.
    """
    out = []
    beta0 = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            beta, Y = _parse(line, lineno, spd)
            if beta0 is None:
                beta0 = beta
            elif beta != beta0 or Y.shape != out[0].shape:
                raise DomainError(f"line {lineno}: record does not match beta/n of line 1")
            out.append(Y)
    if not out:
        raise DomainError(f"{path}: no matrices")
    return beta0, np.stack(out)
