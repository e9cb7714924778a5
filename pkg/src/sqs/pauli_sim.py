"""Dense statevector simulation of Pauli-word feature maps.

A feature map is a chain of genes, each gene a Pauli word with a trainable
scale ``alpha``.  A datapoint ``x`` is encoded as

    |phi(x)> = R_{P_m}(theta_m(x)) ... R_{P_1}(theta_1(x)) H^n |0...0>

with ``R_P(theta) = exp(-i theta/2 P)`` and ``theta_i(x) = alpha_i * prod x[q]``
over the qubits where ``P_i`` is not the identity.

Basis ordering is little-endian: letter ``word[q]`` acts on qubit ``q``, which
is bit ``q`` of the amplitude index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError

MAX_QUBITS = 10
PAULI_LETTERS = "IXYZ"


def _check_qubits(qubits: int) -> None:
    if not isinstance(qubits, (int, np.integer)) or not 1 <= qubits <= MAX_QUBITS:
        raise ConfigurationError(f"qubit count must be in [1, {MAX_QUBITS}], got {qubits!r}")


@dataclass(frozen=True)
class PauliWord:
    """An n-qubit Pauli string such as ``"ZXI"``; never all-identity."""

    letters: str

    def __post_init__(self):
        letters = str(self.letters).upper()
        object.__setattr__(self, "letters", letters)
        _check_qubits(len(letters))
        bad = set(letters) - set(PAULI_LETTERS)
        if bad:
            raise ConfigurationError(f"invalid Pauli letters {sorted(bad)} in {letters!r}")
        if set(letters) == {"I"}:
            raise ConfigurationError("all-identity Pauli words are not allowed")

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return self.letters

    @property
    def support(self) -> tuple[int, ...]:
        """Qubit positions carrying a non-identity letter."""
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    @property
    def weight(self) -> int:
        return len(self.support)


@dataclass(frozen=True)
class Gene:
    word: PauliWord
    alpha: float

    def __post_init__(self):
        if not isinstance(self.word, PauliWord):
            object.__setattr__(self, "word", PauliWord(self.word))
        alpha = float(self.alpha)
        if not math.isfinite(alpha):
            raise ConfigurationError(f"gene alpha must be finite, got {alpha}")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class FeatureMap:
    """Ordered gene chain acting on ``qubits`` qubits.

    Genes are applied in sequence order after the Hadamard layer.
    """

    qubits: int
    genes: tuple[Gene, ...] = field(default_factory=tuple)

    def __post_init__(self):
        _check_qubits(self.qubits)
        genes = tuple(g if isinstance(g, Gene) else Gene(*g) for g in self.genes)
        if not genes:
            raise ConfigurationError("a feature map needs at least one gene")
        for g in genes:
            if len(g.word) != self.qubits:
                raise ConfigurationError(
                    f"word {g.word} has length {len(g.word)}, expected {self.qubits}"
                )
        object.__setattr__(self, "genes", genes)

    def __len__(self) -> int:
        return len(self.genes)

    @property
    def alphas(self) -> np.ndarray:
        return np.array([g.alpha for g in self.genes], dtype=float)

    def with_alphas(self, alphas: Iterable[float]) -> "FeatureMap":
        alphas = list(alphas)
        if len(alphas) != len(self.genes):
            raise DimensionError(f"expected {len(self.genes)} alphas, got {len(alphas)}")
        return FeatureMap(self.qubits, tuple(Gene(g.word, a) for g, a in zip(self.genes, alphas)))

    @property
    def entangling_blocks(self) -> int:
        """Number of genes whose word touches two or more qubits."""
        return sum(1 for g in self.genes if g.word.weight >= 2)

    def to_dict(self) -> dict:
        return {
            "qubits": int(self.qubits),
            "genes": [{"word": g.word.letters, "alpha": g.alpha} for g in self.genes],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureMap":
        try:
            qubits = data["qubits"]
            genes = tuple(Gene(PauliWord(g["word"]), g["alpha"]) for g in data["genes"])
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed feature map: {exc}") from exc
        return cls(int(qubits), genes)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "FeatureMap":
        return cls.from_dict(json.loads(text))


@lru_cache(maxsize=4096)
def _pauli_action(letters: str) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(perm, coeff)`` with ``(P psi)[c] = coeff[c] * psi[perm[c]]``."""
    x_mask = 0
    z_mask = 0
    n_y = 0
    for q, c in enumerate(letters):
        if c in "XY":
            x_mask |= 1 << q
        if c in "ZY":
            z_mask |= 1 << q
        n_y += c == "Y"
    idx = np.arange(1 << len(letters))
    perm = idx ^ x_mask
    # Z acts first on the source index b = perm[c]; Y = i X Z per qubit
    bits = perm & z_mask
    parity = np.zeros_like(bits)
    for q in range(len(letters)):
        parity ^= (bits >> q) & 1
    coeff = (1j**n_y) * (1 - 2 * parity).astype(complex)
    perm.setflags(write=False)
    coeff.setflags(write=False)
    return perm, coeff


def _qubits_of(state: np.ndarray) -> int:
    dim = state.shape[-1]
    n = dim.bit_length() - 1
    if dim < 2 or 1 << n != dim:
        raise DimensionError(f"state dimension {dim} is not a power of two")
    return n


def init_zero_state(qubits: int) -> np.ndarray:
    _check_qubits(qubits)
    state = np.zeros(1 << qubits, dtype=complex)
    state[0] = 1.0
    return state


def apply_hadamard_layer(state: np.ndarray) -> np.ndarray:
    """Apply H to every qubit.  Works on a single state or a batch ``(..., 2**n)``."""
    state = np.asarray(state, dtype=complex)
    n = _qubits_of(state)
    lead = state.shape[:-1]
    out = state.reshape(lead + (2,) * n)
    s = 1.0 / math.sqrt(2.0)
    for axis in range(len(lead), len(lead) + n):
        a = np.take(out, 0, axis=axis)
        b = np.take(out, 1, axis=axis)
        out = np.stack(((a + b) * s, (a - b) * s), axis=axis)
    return out.reshape(state.shape)


def apply_pauli_rotation(state: np.ndarray, word: PauliWord | str, theta) -> np.ndarray:
    """Apply ``exp(-i theta/2 P)``.

    ``theta`` may be a scalar or an array matching the batch dimensions of
    ``state``.
    """
    state = np.asarray(state, dtype=complex)
    if not isinstance(word, PauliWord):
        word = PauliWord(word)
    n = _qubits_of(state)
    if len(word) != n:
        raise DimensionError(f"word {word} has length {len(word)} but state has {n} qubits")
    theta = np.asarray(theta, dtype=float)[..., None]
    perm, coeff = _pauli_action(word.letters)
    p_state = coeff * state[..., perm]
    return np.cos(theta / 2) * state - 1j * np.sin(theta / 2) * p_state


def angle_for_gene(gene: Gene, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (len(gene.word),):
        raise DimensionError(f"datapoint has shape {x.shape}, expected ({len(gene.word)},)")
    return float(gene.alpha * np.prod(x[list(gene.word.support)]))


def _gene_angles(gene: Gene, X: np.ndarray) -> np.ndarray:
    return gene.alpha * np.prod(X[:, list(gene.word.support)], axis=1)


def _as_rows(fm: FeatureMap, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != fm.qubits:
        raise DimensionError(f"data has shape {X.shape}, expected (N, {fm.qubits})")
    return X


def encode_batch(fm: FeatureMap, X: Sequence[Sequence[float]] | np.ndarray) -> np.ndarray:
    """Encode every row of ``X``; returns an ``(N, 2**qubits)`` array of states."""
    X = _as_rows(fm, X)
    dim = 1 << fm.qubits
    states = np.full((X.shape[0], dim), 1.0 / math.sqrt(dim), dtype=complex)
    for gene in fm.genes:
        states = apply_pauli_rotation(states, gene.word, _gene_angles(gene, X))
    return states


def encode(fm: FeatureMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (fm.qubits,):
        raise DimensionError(f"datapoint has shape {x.shape}, expected ({fm.qubits},)")
    state = apply_hadamard_layer(init_zero_state(fm.qubits))
    for gene in fm.genes:
        state = apply_pauli_rotation(state, gene.word, angle_for_gene(gene, x))
    return state


def decode_inverse(fm: FeatureMap, state: np.ndarray, x) -> np.ndarray:
    """Apply the adjoint of the full encoding circuit for ``x`` (rotations reversed, then H)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (fm.qubits,):
        raise DimensionError(f"datapoint has shape {x.shape}, expected ({fm.qubits},)")
    for gene in reversed(fm.genes):
        state = apply_pauli_rotation(state, gene.word, -angle_for_gene(gene, x))
    return apply_hadamard_layer(state)
