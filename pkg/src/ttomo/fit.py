"""Nonnegative tensor-train fitting of empirical outcome distributions.

The train is fitted by alternating multiplicative updates over left-right
sweeps. A site update multiplies the core elementwise by the ratio of two
tensors assembled from cached partial contractions:

* the data term: a sample-weighted outer product of the boundary overlap
  vectors of the chain with each observed string, restricted per outcome
  symbol to the samples showing that symbol at the site;
* the model term: the core contracted with the left and right Gram matrices
  of the rest of the chain.

The ratio update never increases the quadratic loss and preserves
nonnegativity; entries that reach zero stay zero, so the support can only
shrink. A small ``eps`` is added to the denominator only.

Boundary position ``p`` in 0..L splits the chain between cores ``p - 1`` and
``p``: left quantities cover cores ``0 .. p-1``, right quantities cover cores
``p .. L-1``.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .networks import TTDistribution
from .sampling import SampleSet
from .tensor import DEFAULT_EPS, hadamard_div


@dataclass(frozen=True)
class FitConfig:
    """Knobs of a multi-trial fit.

    A trial stops once the loss improvement over the trailing
    ``stop_window`` sweeps drops below ``stop_rtol`` relative to the current
    loss magnitude, or after ``max_sweeps`` sweeps. Trial ``t`` initializes
    from seed ``seed + t``.
    """

    bond_dim: int = 10
    max_sweeps: int = 2000
    stop_window: int = 10
    stop_rtol: float = 1e-8
    eps: float = DEFAULT_EPS
    trials: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bond_dim < 1:
            raise ValidationError(f"bond dimension must be >= 1, got {self.bond_dim}")
        if self.max_sweeps < 1:
            raise ValidationError(f"max_sweeps must be >= 1, got {self.max_sweeps}")
        if self.stop_window < 1:
            raise ValidationError(f"stop_window must be >= 1, got {self.stop_window}")
        if self.trials < 1:
            raise ValidationError(f"trials must be >= 1, got {self.trials}")
        if self.stop_rtol < 0.0:
            raise ValidationError(f"stop_rtol must be >= 0, got {self.stop_rtol}")
        if self.eps <= 0.0:
            raise ValidationError(f"eps must be > 0, got {self.eps}")


def bond_profile(L: int, bond_dim: int) -> tuple:
    """Bond extents min(D, 4^p, 4^(L-p)) at every boundary position."""
    dims = []
    for p in range(L + 1):
        exponent = min(p, L - p)
        dims.append(bond_dim if exponent >= 16 else min(bond_dim, 4**exponent))
    return tuple(dims)


def init_tt(L: int, bond_dim: int, seed: int) -> TTDistribution:
    """Random strictly positive train with the capped bond profile.

    Entries are uniform on (0, 1); a strictly positive start keeps the
    multiplicative updates from freezing entries at zero from the outset.
    """
    if L < 1:
        raise ValidationError(f"length must be >= 1, got {L}")
    if bond_dim < 1:
        raise ValidationError(f"bond dimension must be >= 1, got {bond_dim}")
    dims = bond_profile(L, bond_dim)
    rng = np.random.default_rng(seed)
    cores = [rng.random((4, dims[p], dims[p + 1])) for p in range(L)]
    return TTDistribution(cores)


class EnvCache:
    """Partial contractions of a train with itself and with the samples.

    Gram matrices (train against train) are stored for every boundary
    position. Per-sample overlap vectors (train against one observed string)
    are stored only at anchor positions spaced ``anchor_spacing`` apart plus
    the position the sweep last refreshed; others are rebuilt from the
    nearest stored position on demand. Entries invalidated by a core update
    are dropped until a refresh recomputes them, so everything readable
    always equals its from-scratch definition.
    """

    def __init__(self, tt: TTDistribution, samples: SampleSet, anchor_spacing: int | None = None):
        if samples.L != tt.length:
            raise ValidationError(
                f"sample length {samples.L} does not match train length {tt.length}"
            )
        self.tt = tt
        self.samples = samples
        L = tt.length
        if anchor_spacing is None:
            anchor_spacing = max(1, math.ceil(L / 4))
        if anchor_spacing < 1:
            raise ValidationError(f"anchor spacing must be >= 1, got {anchor_spacing}")
        self.anchor_spacing = int(anchor_spacing)
        self._left_gram = [None] * (L + 1)
        self._right_gram = [None] * (L + 1)
        self._left_valid = -1
        self._right_valid = L + 1
        self._left_overlap = {}
        self._right_overlap = {}
        self.rebuild()

    # -- construction -----------------------------------------------------

    def _is_anchor(self, p: int) -> bool:
        return p % self.anchor_spacing == 0 or p in (0, self.tt.length)

    def rebuild(self) -> None:
        """Recompute every stored quantity from the current cores."""
        L = self.tt.length
        ns = self.samples.n_distinct
        self._left_overlap.clear()
        self._right_overlap.clear()
        gram = np.ones((1, 1))
        overlap = np.ones((ns, 1))
        self._left_gram[0] = gram
        self._left_overlap[0] = overlap
        for p in range(L):
            gram, overlap = self._step_left(p, gram, overlap)
            self._left_gram[p + 1] = gram
            if self._is_anchor(p + 1):
                self._left_overlap[p + 1] = overlap
        gram = np.ones((1, 1))
        overlap = np.ones((ns, 1))
        self._right_gram[L] = gram
        self._right_overlap[L] = overlap
        for p in range(L - 1, -1, -1):
            gram, overlap = self._step_right(p, gram, overlap)
            self._right_gram[p] = gram
            if self._is_anchor(p):
                self._right_overlap[p] = overlap
        self._left_valid = L
        self._right_valid = 0

    def _overlap_step(self, p: int, overlap: np.ndarray, transpose: bool) -> np.ndarray:
        """Absorb the sample-selected slices of core p into overlap vectors."""
        core = self.tt.cores[p]
        sym = self.samples.strings[:, p]
        width = core.shape[1] if transpose else core.shape[2]
        new = np.empty((overlap.shape[0], width))
        for s in range(4):
            mask = sym == s
            if mask.any():
                slab = core[s].T if transpose else core[s]
                new[mask] = overlap[mask] @ slab
        return new

    def _step_left(self, p: int, gram: np.ndarray, overlap: np.ndarray):
        """Extend position-p left quantities across core p."""
        core = self.tt.cores[p]
        new_gram = sum(core[s].T @ gram @ core[s] for s in range(4))
        return new_gram, self._overlap_step(p, overlap, transpose=False)

    def _step_right(self, p: int, gram: np.ndarray, overlap: np.ndarray):
        """Extend position-(p+1) right quantities across core p."""
        core = self.tt.cores[p]
        new_gram = sum(core[s] @ gram @ core[s].T for s in range(4))
        return new_gram, self._overlap_step(p, overlap, transpose=True)

    # -- reads -------------------------------------------------------------

    @property
    def valid_left_positions(self) -> range:
        return range(0, self._left_valid + 1)

    @property
    def valid_right_positions(self) -> range:
        return range(self._right_valid, self.tt.length + 1)

    @property
    def stored_left_overlap_positions(self) -> list:
        return sorted(self._left_overlap)

    @property
    def stored_right_overlap_positions(self) -> list:
        return sorted(self._right_overlap)

    def left_gram(self, p: int) -> np.ndarray:
        if not 0 <= p <= self._left_valid:
            raise IndexError(f"left position {p} is not valid (have 0..{self._left_valid})")
        return self._left_gram[p]

    def right_gram(self, p: int) -> np.ndarray:
        if not self._right_valid <= p <= self.tt.length:
            raise IndexError(
                f"right position {p} is not valid (have {self._right_valid}..{self.tt.length})"
            )
        return self._right_gram[p]

    def left_overlaps(self, p: int) -> np.ndarray:
        """Per-sample left overlap at position p, rebuilt from an anchor if needed."""
        if not 0 <= p <= self._left_valid:
            raise IndexError(f"left position {p} is not valid (have 0..{self._left_valid})")
        start = max(q for q in self._left_overlap if q <= p)
        overlap = self._left_overlap[start]
        for q in range(start, p):
            overlap = self._overlap_step(q, overlap, transpose=False)
        return overlap

    def right_overlaps(self, p: int) -> np.ndarray:
        """Per-sample right overlap at position p, rebuilt from an anchor if needed."""
        if not self._right_valid <= p <= self.tt.length:
            raise IndexError(
                f"right position {p} is not valid (have {self._right_valid}..{self.tt.length})"
            )
        start = min(q for q in self._right_overlap if q >= p)
        overlap = self._right_overlap[start]
        for q in range(start - 1, p - 1, -1):
            overlap = self._overlap_step(q, overlap, transpose=True)
        return overlap

    # -- writes ------------------------------------------------------------

    def note_core_changed(self, k: int) -> None:
        """Drop every cached quantity that depends on core ``k``."""
        self._left_valid = min(self._left_valid, k)
        self._right_valid = max(self._right_valid, k + 1)
        for q in [q for q in self._left_overlap if q > k]:
            del self._left_overlap[q]
        for q in [q for q in self._right_overlap if q < k + 1]:
            del self._right_overlap[q]

    def refresh_left(self, k: int) -> None:
        """Recompute position k+1 left quantities from the current core k."""
        if not 0 <= k < self.tt.length:
            raise IndexError(f"core index {k} out of range")
        gram, overlap = self._step_left(k, self.left_gram(k), self.left_overlaps(k))
        self._left_gram[k + 1] = gram
        self._left_valid = k + 1
        self._store_left_overlap(k + 1, overlap)

    def refresh_right(self, k: int) -> None:
        """Recompute position k right quantities from the current core k."""
        if not 0 <= k < self.tt.length:
            raise IndexError(f"core index {k} out of range")
        gram, overlap = self._step_right(k, self.right_gram(k + 1), self.right_overlaps(k + 1))
        self._right_gram[k] = gram
        self._right_valid = k
        self._store_right_overlap(k, overlap)

    def _store_left_overlap(self, p: int, overlap: np.ndarray) -> None:
        # Keep anchors plus the freshest position; evict the previous
        # non-anchor entry so memory stays bounded.
        for q in [q for q in self._left_overlap if not self._is_anchor(q) and q != p]:
            del self._left_overlap[q]
        self._left_overlap[p] = overlap

    def _store_right_overlap(self, p: int, overlap: np.ndarray) -> None:
        for q in [q for q in self._right_overlap if not self._is_anchor(q) and q != p]:
            del self._right_overlap[q]
        self._right_overlap[p] = overlap


def update_core(
    tt: TTDistribution,
    cache: EnvCache,
    samples: SampleSet,
    k: int,
    eps: float = DEFAULT_EPS,
) -> np.ndarray:
    """Multiplicative update of core ``k`` in place; returns the new core.

    The cache must hold valid left quantities at position ``k`` and right
    quantities at position ``k + 1``.
    """
    if not 0 <= k < tt.length:
        raise IndexError(f"core index {k} out of range for length {tt.length}")
    core = tt.cores[k]
    left_gram = cache.left_gram(k)
    right_gram = cache.right_gram(k + 1)
    left_ovl = cache.left_overlaps(k)
    right_ovl = cache.right_overlaps(k + 1)
    weights = samples.weights
    sym = samples.strings[:, k]
    numer = np.zeros_like(core)
    for s in range(4):
        mask = sym == s
        if mask.any():
            numer[s] = (left_ovl[mask] * weights[mask, None]).T @ right_ovl[mask]
    denom = np.stack([left_gram @ core[s] @ right_gram.T for s in range(4)])
    new = core * hadamard_div(numer, denom, eps)
    tt.cores[k] = new
    cache.note_core_changed(k)
    return new


def sweep(
    tt: TTDistribution,
    cache: EnvCache,
    samples: SampleSet,
    eps: float = DEFAULT_EPS,
    on_update=None,
) -> TTDistribution:
    """One full left-to-right then right-to-left pass of site updates.

    Going right, cores 0 .. L-2 are updated and the left environments follow;
    going left, cores L-1 .. 1 are updated and the right environments follow,
    so interior cores are updated twice per sweep and the edge cores once.
    ``on_update`` is called with the core index after each update.
    """
    L = tt.length
    if L == 1:
        update_core(tt, cache, samples, 0, eps)
        if on_update is not None:
            on_update(0)
        return tt
    for k in range(L - 1):
        update_core(tt, cache, samples, k, eps)
        cache.refresh_left(k)
        if on_update is not None:
            on_update(k)
    for k in range(L - 1, 0, -1):
        update_core(tt, cache, samples, k, eps)
        cache.refresh_right(k)
        if on_update is not None:
            on_update(k)
    return tt


def loss(tt: TTDistribution, samples: SampleSet) -> float:
    """Shifted quadratic loss <P, P> - 2 <P, P_s>.

    The self term runs the Gram chain of the train; the data term evaluates
    the train on the observed strings only. Neither enumerates all 4^L
    strings. At the perfect fit the value is -sum((n_j / N)^2).
    """
    if samples.L != tt.length:
        raise ValidationError(
            f"sample length {samples.L} does not match train length {tt.length}"
        )
    gram = np.ones((1, 1))
    for core in tt.cores:
        gram = sum(core[s].T @ gram @ core[s] for s in range(4))
    self_term = float(gram[0, 0])
    data_term = float(samples.weights @ tt.evaluate(samples.strings))
    return self_term - 2.0 * data_term


@dataclass
class TrialResult:
    """Outcome of one fitting trial."""

    trial: int
    seed: int
    tt: TTDistribution
    losses: np.ndarray
    wall_times: np.ndarray
    converged: bool

    @property
    def final_loss(self) -> float:
        return float(self.losses[-1])

    @property
    def sweeps_run(self) -> int:
        return len(self.losses) - 1


@dataclass
class FitResult:
    """All trials of a fit; the best trial has the lowest final loss."""

    trials: list

    @property
    def final_losses(self) -> np.ndarray:
        return np.array([t.final_loss for t in self.trials])

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.final_losses))

    @property
    def best(self) -> TrialResult:
        return self.trials[self.best_index]


def fit_single(samples: SampleSet, config: FitConfig, seed: int, trial: int = 0) -> TrialResult:
    """Run one trial: random init, sweeps, windowed stopping rule.

    ``losses[i]`` is the loss after ``i`` sweeps; index 0 is the initial
    value. Wall times are cumulative seconds since the trial started.
    """
    if samples.total < 1 or samples.n_distinct < 1:
        raise ValidationError("cannot fit an empty sample set")
    tt = init_tt(samples.L, config.bond_dim, seed)
    cache = EnvCache(tt, samples)
    start = time.perf_counter()
    losses = [loss(tt, samples)]
    walls = [0.0]
    converged = False
    for _ in range(config.max_sweeps):
        sweep(tt, cache, samples, config.eps)
        losses.append(loss(tt, samples))
        walls.append(time.perf_counter() - start)
        if len(losses) > config.stop_window:
            gain = losses[-1 - config.stop_window] - losses[-1]
            if gain <= config.stop_rtol * max(abs(losses[-1]), 1e-300):
                converged = True
                break
    return TrialResult(
        trial=trial,
        seed=seed,
        tt=tt,
        losses=np.array(losses),
        wall_times=np.array(walls),
        converged=converged,
    )


def _fit_task(args) -> TrialResult:
    samples, config, trial = args
    return fit_single(samples, config, config.seed + trial, trial)


def fit(samples: SampleSet, config: FitConfig, jobs: int = 1) -> FitResult:
    """Run ``config.trials`` independent trials; trial t uses seed ``seed + t``.

    Trials are independent, so with ``jobs > 1`` they run in worker
    processes; results are collected in trial order either way.
    """
    if samples.total < 1 or samples.n_distinct < 1:
        raise ValidationError("cannot fit an empty sample set")
    tasks = [(samples, config, t) for t in range(config.trials)]
    if jobs <= 1 or config.trials == 1:
        results = [_fit_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_task, tasks))
    return FitResult(trials=results)
