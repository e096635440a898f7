"""ADMM solver for low-rank plus sparse tensor decomposition.

The observed tensor is split as ``P_obs[L + S] = P_obs[Y]`` where the
low-rank part L is penalized by a per-mode weighted nuclear norm (and
optionally by per-mode graph smoothness energies), while the sparse part S
is penalized by an l1 norm (and optionally by the l1 norm of its circular
first differences along mode 0, i.e. a total-variation term).

Four named variants toggle the regularizers:

========  ============  ==========  ===========  =============
variant   nuclear       sparsity    temporal TV  graph
========  ============  ==========  ===========  =============
gloss     weighted      yes         yes          yes
loss      weighted      yes         yes          no
whorpca   weighted      yes         no           no
horpca    unweighted    yes         no           no
========  ============  ==========  ===========  =============

All variants run the same iteration; branches inert for a variant are
skipped entirely (keyed off zero weights), so e.g. a ``gloss`` configuration
with ``graph_weight == 0`` produces bit-identical iterates to ``loss``.

The splitting introduces one auxiliary copy of L per mode for the nuclear
norm (``spectral_aux``), one per mode for the graph term (``graph_aux``), a
consensus copy W of S for the TV term (``sparse_aux``) and its differenced
copy Z (``diff_aux``), each with a scaled dual variable updated by gradient
ascent.

A note on the sparsity-weight regime: whenever the sparsity weight is below
roughly ``4 * min(nuclear_weights) / sqrt(#elements)``, the exact optimum of
the convex program is the degenerate split ``L = 0, S = Y`` (a sign tensor
scaled by the sparsity weight fits inside the nuclear-norm subdifferential
at zero).  The data-driven defaults for gloss/loss/whorpca sit far below
that threshold, so converged runs place the entire signal in the sparse
part; structured low-rank/sparse splits appear only along the early,
non-converged iterates.  Weights above the threshold behave classically.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .graphs import ModeGraph, laplacian_energy
from .prox import (
    CachedInverse,
    DiffOperator,
    build_diff_operator,
    precompute_graph_inverse,
    precompute_tv_inverse,
    soft_threshold,
    svt,
)
from .tensors import (
    check_finite,
    fold,
    frobenius_norm,
    l1_norm,
    mode_n_product,
    project,
    unfold,
)

VARIANTS = ("gloss", "loss", "whorpca", "horpca")


class NonFiniteIterateError(RuntimeError):
    """An iterate became NaN/Inf; carries the iteration index."""

    def __init__(self, iteration: int, what: str):
        super().__init__(f"non-finite values in {what} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """All hyperparameters and variant flags of one decomposition run.

    ``penalties`` are the five quadratic coupling weights of the splitting:
    data fit, nuclear consensus, graph consensus, TV consensus, and the
    S/W consensus, in that order.
    """

    variant: str
    sparsity_weight: float
    tv_weight: float
    graph_weight: float
    nuclear_weights: tuple
    penalties: tuple
    max_iters: int = 200
    tol: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "variant", str(self.variant).lower())
        object.__setattr__(self, "nuclear_weights", tuple(float(w) for w in self.nuclear_weights))
        object.__setattr__(self, "penalties", tuple(float(b) for b in self.penalties))
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if len(self.nuclear_weights) != 4:
            raise ValueError("nuclear_weights must have 4 entries")
        if len(self.penalties) != 5:
            raise ValueError("penalties must have 5 entries")
        for name in ("sparsity_weight", "tv_weight", "graph_weight"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if any(w < 0 for w in self.nuclear_weights):
            raise ValueError("nuclear weights must be nonnegative")
        if any(b <= 0 for b in self.penalties):
            raise ValueError("penalties must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.variant in ("loss", "whorpca", "horpca") and self.graph_weight != 0:
            raise ValueError(f"variant {self.variant} requires graph_weight == 0")
        if self.variant in ("whorpca", "horpca") and self.tv_weight != 0:
            raise ValueError(f"variant {self.variant} requires tv_weight == 0")
        if self.variant == "horpca" and any(w != 1.0 for w in self.nuclear_weights):
            raise ValueError("variant horpca requires all nuclear weights equal to 1")

    def to_json_dict(self) -> dict:
        return {
            "variant": self.variant,
            "sparsity_weight": self.sparsity_weight,
            "tv_weight": self.tv_weight,
            "graph_weight": self.graph_weight,
            "nuclear_weights": list(self.nuclear_weights),
            "penalties": list(self.penalties),
            "max_iters": self.max_iters,
            "tol": self.tol,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SolverConfig":
        required = {
            "variant",
            "sparsity_weight",
            "tv_weight",
            "graph_weight",
            "nuclear_weights",
            "penalties",
        }
        allowed = required | {"max_iters", "tol"}
        if not isinstance(d, dict):
            raise ValueError("solver config must be a JSON object")
        missing = required - d.keys()
        if missing:
            raise ValueError(f"solver config missing keys: {sorted(missing)}")
        unknown = d.keys() - allowed
        if unknown:
            raise ValueError(f"solver config has unknown keys: {sorted(unknown)}")
        return cls(
            variant=d["variant"],
            sparsity_weight=float(d["sparsity_weight"]),
            tv_weight=float(d["tv_weight"]),
            graph_weight=float(d["graph_weight"]),
            nuclear_weights=tuple(d["nuclear_weights"]),
            penalties=tuple(d["penalties"]),
            max_iters=int(d.get("max_iters", 200)),
            tol=float(d.get("tol", 1e-6)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SolverConfig":
        return cls.from_json_dict(json.loads(text))

    def with_overrides(self, **kwargs) -> "SolverConfig":
        """Copy with fields replaced; ``nuclear_weight_i`` keys patch one entry."""
        psi = list(self.nuclear_weights)
        plain = {}
        for key, value in kwargs.items():
            if key.startswith("nuclear_weight_"):
                idx = int(key.rsplit("_", 1)[1])
                if not 0 <= idx < 4:
                    raise ValueError(f"nuclear weight index out of range in {key!r}")
                psi[idx] = float(value)
            elif key == "max_iters":
                plain[key] = int(value)
            else:
                plain[key] = value
        return replace(self, nuclear_weights=tuple(psi), **plain)


def _mode_covariance_trace_sqrt(m: np.ndarray) -> float:
    """Trace of the matrix square root of the row covariance of ``m``."""
    if m.shape[1] < 2:
        return 0.0
    cov = np.atleast_2d(np.cov(m))
    eigvals = np.linalg.eigvalsh((cov + cov.T) / 2.0)
    return float(np.sum(np.sqrt(np.clip(eigvals, 0.0, None))))


def default_hyperparameters(y: np.ndarray, omega: np.ndarray, variant: str) -> SolverConfig:
    """Data-driven hyperparameter defaults for each variant.

    All five penalties are ``1 / (5 * std)`` of the vectorized observed
    tensor.  The sparsity weight is ``1 / nnz`` for gloss (with the TV weight
    equal to it), ``1 / max(I_n)`` for loss and whorpca, and
    ``1 / sqrt(max(I_n))`` for horpca.  Nuclear weights are inversely
    proportional to the trace of the square root of each mode unfolding's
    row covariance, scaled so the smallest weight is 1 (all 1 for horpca);
    the graph weight is the geometric mean of the nuclear weights for gloss
    and 0 otherwise.
    """
    variant = str(variant).lower()
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    observed = project(y, omega)
    std = float(np.std(observed))
    if std == 0.0:
        raise ValueError("observed tensor has zero variance; penalties undefined")
    beta = 1.0 / (5.0 * std)
    max_extent = max(y.shape)

    if variant == "horpca":
        psi = (1.0, 1.0, 1.0, 1.0)
    else:
        traces = [_mode_covariance_trace_sqrt(unfold(observed, n)) for n in range(y.ndim)]
        if min(traces) <= 0.0:
            raise ValueError("degenerate mode covariance; nuclear weights undefined")
        scale = max(traces)
        psi = tuple(scale / t for t in traces)

    if variant == "gloss":
        nnz = int(np.count_nonzero(observed))
        if nnz == 0:
            raise ValueError("observed tensor has no nonzero entries")
        lam = 1.0 / nnz
        gamma = lam
        theta = float(np.prod(psi) ** 0.25)
    elif variant == "loss":
        lam = 1.0 / max_extent
        gamma = lam
        theta = 0.0
    elif variant == "whorpca":
        lam = 1.0 / max_extent
        gamma = 0.0
        theta = 0.0
    else:  # horpca
        lam = 1.0 / np.sqrt(max_extent)
        gamma = 0.0
        theta = 0.0

    return SolverConfig(
        variant=variant,
        sparsity_weight=lam,
        tv_weight=gamma,
        graph_weight=theta,
        nuclear_weights=psi,
        penalties=(beta,) * 5,
    )


@dataclass
class SolverState:
    """All primal and dual iterates; every tensor shares the data shape."""

    low_rank: np.ndarray
    sparse: np.ndarray
    sparse_aux: np.ndarray
    diff_aux: np.ndarray
    spectral_aux: list
    graph_aux: list
    dual_data: np.ndarray
    dual_spectral: list
    dual_graph: list
    dual_diff: np.ndarray
    dual_sparse: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "SolverState":
        shape = tuple(shape)
        n = len(shape)
        z = lambda: np.zeros(shape)
        return cls(
            low_rank=z(),
            sparse=z(),
            sparse_aux=z(),
            diff_aux=z(),
            spectral_aux=[z() for _ in range(n)],
            graph_aux=[z() for _ in range(n)],
            dual_data=z(),
            dual_spectral=[z() for _ in range(n)],
            dual_graph=[z() for _ in range(n)],
            dual_diff=z(),
            dual_sparse=z(),
        )


@dataclass(frozen=True)
class IterationRecord:
    """Per-iteration convergence diagnostics."""

    iteration: int
    feasibility: float
    rel_change: float
    spectral_gap: float
    sparse_gap: float
    objective: float
    wall_ms: float


@dataclass
class DecompositionResult:
    low_rank: np.ndarray
    sparse: np.ndarray
    diagnostics: list
    iterations: int
    converged: bool


def diagnostics_to_csv(records: Sequence[IterationRecord], f=None) -> Optional[str]:
    """Write diagnostics as CSV to file object ``f``, or return the text."""
    out = f if f is not None else io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["iteration", "feasibility", "rel_change", "spectral_gap", "sparse_gap", "objective", "wall_ms"])
    for r in records:
        writer.writerow([r.iteration, r.feasibility, r.rel_change, r.spectral_gap, r.sparse_gap, r.objective, r.wall_ms])
    if f is None:
        return out.getvalue()
    return None


def update_low_rank(state: SolverState, y: np.ndarray, omega: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Closed-form minimizer of the quadratic coupling terms in L.

    Observed entries average the data-fit target with the per-mode consensus
    targets; unobserved entries see only the consensus terms.  When the graph
    term is off, its contributions drop from numerator and divisor alike.
    """
    b1, b2, b3 = cfg.penalties[0], cfg.penalties[1], cfg.penalties[2]
    n_modes = y.ndim
    t1 = y - state.sparse + state.dual_data
    t2 = sum(state.spectral_aux[n] - state.dual_spectral[n] for n in range(n_modes))
    if cfg.graph_weight > 0:
        t3 = sum(state.graph_aux[n] + state.dual_graph[n] for n in range(n_modes))
        observed = (b1 * t1 + b2 * t2 + b3 * t3) / (b1 + n_modes * (b2 + b3))
        hidden = (b2 * t2 + b3 * t3) / (n_modes * (b2 + b3))
    else:
        observed = (b1 * t1 + b2 * t2) / (b1 + n_modes * b2)
        hidden = t2 / n_modes
    return np.where(omega, observed, hidden)


def update_spectral_aux(state: SolverState, cfg: SolverConfig, mode: int) -> np.ndarray:
    """Spectral shrinkage of the mode-n unfolding of ``L + dual``."""
    shape = state.low_rank.shape
    target = unfold(state.low_rank + state.dual_spectral[mode], mode)
    thresh = cfg.nuclear_weights[mode] / cfg.penalties[1]
    return fold(svt(target, thresh), mode, shape)


def update_graph_aux(state: SolverState, cfg: SolverConfig, graph_inv: CachedInverse, mode: int) -> np.ndarray:
    """Graph-smoothed copy of L: solves (theta*Phi + b3*I) X = b3 (L - dual)."""
    b3 = cfg.penalties[2]
    shape = state.low_rank.shape
    target = unfold(state.low_rank - state.dual_graph[mode], mode)
    return fold(b3 * (graph_inv.matrix @ target), mode, shape)


def update_sparse(state: SolverState, y: np.ndarray, omega: np.ndarray, cfg: SolverConfig) -> np.ndarray:
    """Elementwise shrinkage toward the data-fit / consensus blend.

    With the TV branch active, observed entries blend the data residual with
    the W-consensus target and unobserved entries track W alone.  Without it
    only the data-fit term remains, so unobserved entries shrink to zero.
    """
    b1, b5 = cfg.penalties[0], cfg.penalties[4]
    lam = cfg.sparsity_weight
    residual = y - state.low_rank + state.dual_data
    if cfg.tv_weight > 0:
        consensus = state.sparse_aux + state.dual_sparse
        blended = (b1 * residual + b5 * consensus) / (b1 + b5)
        s_obs = soft_threshold(blended, lam / (b1 + b5))
        s_hid = soft_threshold(consensus, lam / b5)
        return np.where(omega, s_obs, s_hid)
    s_obs = soft_threshold(residual, lam / b1)
    return np.where(omega, s_obs, 0.0)


def update_sparse_aux(state: SolverState, cfg: SolverConfig, tv_inv: CachedInverse, diff: DiffOperator) -> np.ndarray:
    """Consensus copy W of S, pulled toward small first differences."""
    b4, b5 = cfg.penalties[3], cfg.penalties[4]
    shape = state.sparse.shape
    rhs = b5 * unfold(state.sparse - state.dual_sparse, 0)
    rhs += b4 * (diff.matrix.T @ unfold(state.dual_diff + state.diff_aux, 0))
    return fold(tv_inv.matrix @ rhs, 0, shape)


def update_diff_aux(state: SolverState, cfg: SolverConfig, diff: DiffOperator) -> np.ndarray:
    """Shrinkage of the circular differences of W along mode 0."""
    target = mode_n_product(state.sparse_aux, diff.matrix, 0) - state.dual_diff
    return soft_threshold(target, cfg.tv_weight / cfg.penalties[3])


def update_duals(state: SolverState, y: np.ndarray, omega: np.ndarray, cfg: SolverConfig, diff: Optional[DiffOperator]) -> None:
    """Gradient-ascent step on every active constraint's dual, in place."""
    n_modes = y.ndim
    state.dual_data -= project(state.low_rank + state.sparse - y, omega)
    for n in range(n_modes):
        state.dual_spectral[n] = state.dual_spectral[n] - (state.spectral_aux[n] - state.low_rank)
    if cfg.graph_weight > 0:
        for n in range(n_modes):
            state.dual_graph[n] = state.dual_graph[n] - (state.low_rank - state.graph_aux[n])
    if cfg.tv_weight > 0:
        assert diff is not None
        w_diff = mode_n_product(state.sparse_aux, diff.matrix, 0)
        state.dual_diff -= w_diff - state.diff_aux
        state.dual_sparse -= state.sparse - state.sparse_aux


def objective(
    low_rank: np.ndarray,
    sparse: np.ndarray,
    cfg: SolverConfig,
    graphs: Optional[Sequence[ModeGraph]] = None,
    diff: Optional[DiffOperator] = None,
) -> float:
    """Value of the regularized decomposition objective at (L, S).

    Sum of the weighted nuclear norms of L's unfoldings, the graph smoothness
    energy of L, the l1 norm of S, and the l1 norm of S's circular mode-0
    differences, each with its configured weight.
    """
    value = 0.0
    for n in range(low_rank.ndim):
        s = np.linalg.svd(unfold(low_rank, n), compute_uv=False)
        value += cfg.nuclear_weights[n] * float(np.sum(s))
    if cfg.graph_weight > 0:
        if graphs is None:
            raise ValueError("graph term requested but no graphs supplied")
        value += laplacian_energy(low_rank, graphs, cfg.graph_weight)
    value += cfg.sparsity_weight * l1_norm(sparse)
    if cfg.tv_weight > 0:
        if diff is None:
            diff = build_diff_operator(sparse.shape[0])
        value += cfg.tv_weight * l1_norm(mode_n_product(sparse, diff.matrix, 0))
    return value


def solve(
    y: np.ndarray,
    omega: np.ndarray,
    cfg: SolverConfig,
    graphs: Optional[Sequence[ModeGraph]] = None,
    progress: Optional[Callable[[IterationRecord], None]] = None,
) -> DecompositionResult:
    """Run the alternating update loop until tolerance or ``max_iters``.

    Parameters
    ----------
    y : ndarray
        4-mode data tensor; must be finite.
    omega : ndarray of bool
        Observed-entry mask, same shape as ``y``.
    cfg : SolverConfig
        Hyperparameters and variant; see :func:`default_hyperparameters`.
    graphs : list of ModeGraph, required iff variant is "gloss"
        One graph per mode, vertex counts matching the extents.
    progress : callable, optional
        Invoked with each :class:`IterationRecord` as it is produced.

    The run stops early once both the relative feasibility residual on the
    observed entries and the relative change of L fall below ``cfg.tol``.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 4:
        raise ValueError(f"solver expects a 4-mode tensor, got {y.ndim} modes")
    check_finite(y, "data tensor")
    omega = np.asarray(omega)
    if omega.dtype != np.bool_ or omega.shape != y.shape:
        raise ValueError("omega must be a boolean mask with the data tensor's shape")
    if (cfg.variant == "gloss") != (graphs is not None):
        raise ValueError("graphs must be supplied iff variant is 'gloss'")
    if graphs is not None:
        if len(graphs) != y.ndim:
            raise ValueError(f"expected {y.ndim} mode graphs, got {len(graphs)}")
        for n, g in enumerate(graphs):
            if g.laplacian.shape[0] != y.shape[n]:
                raise ValueError(
                    f"graph {n} has {g.laplacian.shape[0]} vertices, mode extent is {y.shape[n]}"
                )

    use_graph = cfg.graph_weight > 0
    use_tv = cfg.tv_weight > 0
    n_modes = y.ndim

    graph_invs = None
    if use_graph:
        graph_invs = [
            precompute_graph_inverse(graphs[n].laplacian, cfg.graph_weight, cfg.penalties[2])
            for n in range(n_modes)
        ]
    diff = None
    tv_inv = None
    if use_tv:
        diff = build_diff_operator(y.shape[0])
        tv_inv = precompute_tv_inverse(diff, cfg.penalties[3], cfg.penalties[4])

    state = SolverState.zeros(y.shape)
    with np.errstate(over="ignore"):
        denom = frobenius_norm(project(y, omega))
    if denom == 0.0:
        denom = 1.0

    records: list[IterationRecord] = []
    converged = False
    obj_graphs = graphs if use_graph else None

    for t in range(1, cfg.max_iters + 1):
        tic = time.perf_counter()
        prev_low_rank = state.low_rank

        with np.errstate(over="ignore", invalid="ignore"):
            state.low_rank = update_low_rank(state, y, omega, cfg)
            if not np.isfinite(state.low_rank).all():
                raise NonFiniteIterateError(t, "low-rank iterate")
            for n in range(n_modes):
                state.spectral_aux[n] = update_spectral_aux(state, cfg, n)
            if use_graph:
                for n in range(n_modes):
                    state.graph_aux[n] = update_graph_aux(state, cfg, graph_invs[n], n)
            state.sparse = update_sparse(state, y, omega, cfg)
            if not np.isfinite(state.sparse).all():
                raise NonFiniteIterateError(t, "sparse iterate")
            if use_tv:
                state.sparse_aux = update_sparse_aux(state, cfg, tv_inv, diff)
                state.diff_aux = update_diff_aux(state, cfg, diff)
            update_duals(state, y, omega, cfg, diff)
        state.iteration = t

        feas = frobenius_norm(project(state.low_rank + state.sparse - y, omega)) / denom
        rel_change = frobenius_norm(state.low_rank - prev_low_rank) / max(1.0, frobenius_norm(prev_low_rank))
        spectral_gap = max(frobenius_norm(state.spectral_aux[n] - state.low_rank) for n in range(n_modes))
        sparse_gap = frobenius_norm(state.sparse - state.sparse_aux) if use_tv else 0.0
        obj = objective(state.low_rank, state.sparse, cfg, obj_graphs, diff)
        wall_ms = (time.perf_counter() - tic) * 1000.0

        record = IterationRecord(
            iteration=t,
            feasibility=feas,
            rel_change=rel_change,
            spectral_gap=spectral_gap,
            sparse_gap=sparse_gap,
            objective=obj,
            wall_ms=wall_ms,
        )
        records.append(record)
        if progress is not None:
            progress(record)

        if feas < cfg.tol and rel_change < cfg.tol:
            converged = True
            break

    return DecompositionResult(
        low_rank=state.low_rank,
        sparse=state.sparse,
        diagnostics=records,
        iterations=state.iteration,
        converged=converged,
    )
