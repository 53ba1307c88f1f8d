"""Quantum and classical fidelity between target and reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IntegrityError, ValidationError
from .networks import TTDistribution
from .sampling import SampleSet


@dataclass(frozen=True)
class FidelityResult:
    """A fidelity value plus how much negative spectral mass was clipped.

    ``clipped_mass`` sums the magnitudes of the negative eigenvalues dropped
    inside the square-root evaluations; it is zero for valid states and for
    the classical estimator. The fidelity itself is reported as computed,
    without truncation to [0, 1].
    """

    fidelity: float
    clipped_mass: float = 0.0

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity


def _clipped_sqrt_eigh(matrix: np.ndarray):
    """Eigendecomposition with negatives clipped; returns (vals, vecs, clipped)."""
    vals, vecs = np.linalg.eigh(matrix)
    clipped = float(-vals[vals < 0.0].sum()) + 0.0
    return np.clip(vals, 0.0, None), vecs, clipped


def quantum_fidelity(rho1: np.ndarray, rho2: np.ndarray) -> FidelityResult:
    """Uhlmann fidelity tr(sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2.

    Both inputs are symmetrized before their eigendecompositions. Negative
    eigenvalues encountered under a square root are clipped to zero (not
    renormalized) and their total magnitude is recorded.
    """
    rho1 = np.asarray(rho1, dtype=complex)
    rho2 = np.asarray(rho2, dtype=complex)
    if rho1.shape != rho2.shape or rho1.ndim != 2 or rho1.shape[0] != rho1.shape[1]:
        raise ValidationError(f"incompatible shapes {rho1.shape} and {rho2.shape}")
    herm1 = (rho1 + rho1.conj().T) / 2.0
    herm2 = (rho2 + rho2.conj().T) / 2.0
    vals1, vecs1, clipped = _clipped_sqrt_eigh(herm1)
    sqrt1 = (vecs1 * np.sqrt(vals1)) @ vecs1.conj().T
    mid = sqrt1 @ herm2 @ sqrt1
    mid = (mid + mid.conj().T) / 2.0
    vals2, _, clipped_mid = _clipped_sqrt_eigh(mid)
    fidelity = float(np.sqrt(vals2).sum() ** 2)
    return FidelityResult(fidelity=fidelity, clipped_mass=clipped + clipped_mid)


def _as_prob_fn(obj, L: int):
    """Accept a callable, a tensor train, or a dense distribution vector."""
    if callable(obj):
        return obj
    if isinstance(obj, TTDistribution):
        if obj.length != L:
            raise ValidationError(f"train length {obj.length} does not match strings of length {L}")
        return obj.evaluate
    dense = np.asarray(obj, dtype=float)
    if dense.ndim != 1 or dense.size != 4**L:
        raise ValidationError(f"dense distribution must have length {4**L}")

    def lookup(strings: np.ndarray) -> np.ndarray:
        codes = np.asarray(strings, dtype=np.int64) @ (
            4 ** np.arange(L - 1, -1, -1, dtype=np.int64)
        )
        return dense[codes]

    return lookup


def classical_fidelity(model, ideal, test: SampleSet) -> FidelityResult:
    """Estimate sum_a sqrt(P_model(a) P_ideal(a)) from a test sample.

    The estimator averages sqrt(P_model / P_ideal) over the test draws:
    sum_j (n_j / N) sqrt(P_model(a_j) / P_ideal(a_j)). ``model`` and
    ``ideal`` may each be a callable on string arrays, a tensor train, or a
    dense distribution vector. A test string with nonpositive ideal
    probability cannot have been drawn from the ideal distribution and
    raises IntegrityError.
    """
    model_fn = _as_prob_fn(model, test.L)
    ideal_fn = _as_prob_fn(ideal, test.L)
    p_model = np.asarray(model_fn(test.strings), dtype=float)
    p_ideal = np.asarray(ideal_fn(test.strings), dtype=float)
    if np.any(p_ideal <= 0.0):
        bad = int(np.argmax(p_ideal <= 0.0))
        raise IntegrityError(
            f"test string index {bad} has nonpositive ideal probability {p_ideal[bad]}"
        )
    # Model values can round off to tiny negatives on exactly-mapped trains.
    ratio = np.clip(p_model, 0.0, None) / p_ideal
    fidelity = float(test.weights @ np.sqrt(ratio))
    return FidelityResult(fidelity=fidelity)
