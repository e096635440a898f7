"""Shared independent oracles for the solver update rules.

Each function evaluates the exact subproblem objective that one update step
is supposed to minimize, written directly from the penalty terms rather than
from the closed-form solutions, so perturbation tests are independent of the
implementation under test.
"""

import numpy as np

from gloss.solver import SolverState
from gloss.tensors import l1_norm, mode_n_product, project, unfold


def random_state(shape, rng, scale=1.0):
    state = SolverState.zeros(shape)
    state.low_rank = scale * rng.standard_normal(shape)
    state.sparse = scale * rng.standard_normal(shape)
    state.sparse_aux = scale * rng.standard_normal(shape)
    state.diff_aux = scale * rng.standard_normal(shape)
    for n in range(len(shape)):
        state.spectral_aux[n] = scale * rng.standard_normal(shape)
        state.graph_aux[n] = scale * rng.standard_normal(shape)
        state.dual_spectral[n] = scale * rng.standard_normal(shape)
        state.dual_graph[n] = scale * rng.standard_normal(shape)
    state.dual_data = scale * rng.standard_normal(shape)
    state.dual_diff = scale * rng.standard_normal(shape)
    state.dual_sparse = scale * rng.standard_normal(shape)
    return state


def sq(t):
    return float(np.sum(t * t))


def low_rank_objective(candidate, state, y, omega, cfg):
    b1, b2, b3 = cfg.penalties[0], cfg.penalties[1], cfg.penalties[2]
    value = b1 / 2 * sq(project(candidate + state.sparse - y - state.dual_data, omega))
    for n in range(y.ndim):
        value += b2 / 2 * sq(state.spectral_aux[n] - candidate - state.dual_spectral[n])
        if cfg.graph_weight > 0:
            value += b3 / 2 * sq(candidate - state.graph_aux[n] - state.dual_graph[n])
    return value


def spectral_objective(candidate, mode, state, cfg):
    b2 = cfg.penalties[1]
    nuclear = float(np.sum(np.linalg.svd(unfold(candidate, mode), compute_uv=False)))
    return cfg.nuclear_weights[mode] * nuclear + b2 / 2 * sq(
        candidate - state.low_rank - state.dual_spectral[mode]
    )


def graph_objective(candidate, mode, laplacian, state, cfg):
    # the printed closed form solves the half-weighted smoothness subproblem:
    # stationarity theta*Phi*X + b3*(X - (L - dual)) = 0
    b3 = cfg.penalties[2]
    u = unfold(candidate, mode)
    smooth = cfg.graph_weight / 2 * float(np.sum((laplacian @ u) * u))
    return smooth + b3 / 2 * sq(state.low_rank - candidate - state.dual_graph[mode])


def sparse_objective(candidate, state, y, omega, cfg):
    b1, b5 = cfg.penalties[0], cfg.penalties[4]
    value = cfg.sparsity_weight * l1_norm(candidate)
    value += b1 / 2 * sq(project(candidate + state.low_rank - y - state.dual_data, omega))
    if cfg.tv_weight > 0:
        value += b5 / 2 * sq(candidate - state.sparse_aux - state.dual_sparse)
    return value


def sparse_aux_objective(candidate, state, diff, cfg):
    b4, b5 = cfg.penalties[3], cfg.penalties[4]
    value = b4 / 2 * sq(mode_n_product(candidate, diff.matrix, 0) - state.diff_aux - state.dual_diff)
    value += b5 / 2 * sq(state.sparse - candidate - state.dual_sparse)
    return value


def diff_objective(candidate, state, diff, cfg):
    b4 = cfg.penalties[3]
    value = cfg.tv_weight * l1_norm(candidate)
    value += b4 / 2 * sq(mode_n_product(state.sparse_aux, diff.matrix, 0) - candidate - state.dual_diff)
    return value


def assert_perturbation_minimal(objective, minimizer, rng, n_directions=20, eps=1e-4, slack=1e-12):
    """No random perturbation may decrease the subproblem objective."""
    base = objective(minimizer)
    for _ in range(n_directions):
        d = rng.standard_normal(minimizer.shape)
        d /= np.linalg.norm(d)
        assert objective(minimizer + eps * d) >= base - slack
