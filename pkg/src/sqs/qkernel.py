"""Fidelity quantum kernels, exact and shot-sampled."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionError, UsageError
from .pauli_sim import FeatureMap, _as_rows, decode_inverse, encode, encode_batch


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``|<a|b>|**2`` for pure states."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise DimensionError(f"state shapes differ: {a.shape} vs {b.shape}")
    return float(min(1.0, abs(np.vdot(a, b)) ** 2))


def kernel_entry(fm: FeatureMap, x, x2) -> float:
    return fidelity(encode(fm, x), encode(fm, x2))


def _sample_entries(p: np.ndarray, shots: int, seed: int | None) -> np.ndarray:
    if shots < 1:
        raise UsageError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(seed)
    return rng.binomial(shots, np.clip(p, 0.0, 1.0)) / shots


def gram_matrix(fm: FeatureMap, X, shots: int | None = None, seed: int | None = None) -> np.ndarray:
    """Symmetric kernel matrix over the rows of ``X``.

    Each row is encoded once.  The upper triangle is computed and mirrored.
    With ``shots`` set, every off-diagonal entry is replaced by a binomial
    sample of the all-zero probability of its inversion test, drawn in
    row-major upper-triangle order from one ``seed``-ed stream.
    """
    X = _as_rows(fm, X)
    if X.shape[0] == 0:
        raise UsageError("cannot build a Gram matrix of an empty dataset")
    states = encode_batch(fm, X)
    K = np.abs(states.conj() @ states.T) ** 2
    iu = np.triu_indices(X.shape[0], k=1)
    upper = np.minimum(K[iu], 1.0)
    if shots is not None:
        upper = _sample_entries(upper, shots, seed)
    K = np.eye(X.shape[0])
    K[iu] = upper
    K.T[iu] = upper
    return K


def cross_gram(fm: FeatureMap, X_eval, X_train, shots: int | None = None,
               seed: int | None = None) -> np.ndarray:
    """Rectangular kernel matrix; entry ``(i, j)`` is ``k(X_eval[i], X_train[j])``."""
    X_eval = _as_rows(fm, X_eval)
    X_train = _as_rows(fm, X_train)
    a = encode_batch(fm, X_eval)
    b = encode_batch(fm, X_train)
    K = np.minimum(np.abs(a.conj() @ b.T) ** 2, 1.0)
    if shots is not None:
        K = _sample_entries(K, shots, seed)
    return K


def inversion_test_probability(fm: FeatureMap, x, x2) -> float:
    """All-zero outcome probability of ``U(x2)^dag U(x)`` applied to ``|0...0>``."""
    state = encode(fm, x)
    state = decode_inverse(fm, state, x2)
    return float(min(1.0, abs(state[0]) ** 2))


def inversion_test_estimate(fm: FeatureMap, x, x2, shots: int, seed: int | None) -> float:
    if shots < 1:
        raise UsageError(f"shots must be >= 1, got {shots}")
    p0 = inversion_test_probability(fm, x, x2)
    return float(_sample_entries(np.array(p0), shots, seed))


def write_gram(path: str | Path, K: np.ndarray, fm: FeatureMap, ids: Sequence[str] | None = None,
               shots: int | None = None, seed: int | None = None,
               extra: dict | None = None) -> Path:
    """Write ``K`` as CSV (header of sample ids) plus a ``.json`` sidecar."""
    path = Path(path)
    n = K.shape[0]
    ids = [str(i) for i in (ids if ids is not None else range(n))]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(ids)
        for row in K:
            writer.writerow([repr(float(v)) for v in row])
    sidecar = {
        "feature_map": fm.to_dict(),
        "n": int(n),
        "exact": shots is None,
        "shots": shots,
        "seed": seed if shots is not None else None,
    }
    if extra:
        sidecar.update(extra)
    meta = path.with_suffix(path.suffix + ".json")
    meta.write_text(json.dumps(sidecar, indent=2))
    return meta


def read_gram(path: str | Path) -> tuple[np.ndarray, list[str], dict]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0]
    K = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    meta = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return K, ids, meta
