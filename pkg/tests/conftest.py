import numpy as np
import pytest

from conebarrier.cones import ORTHANT, Cone


def random_interior_point(cone: Cone, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Strictly interior sample with a healthy margin in every block."""
    x = np.empty(cone.total_dim)
    for block, sl in cone.slices():
        if block.kind == ORTHANT:
            x[sl] = scale * np.exp(0.5 * rng.standard_normal(block.dim))
        else:
            u = rng.standard_normal(block.dim - 1)
            x[sl][1:] = u
            x[sl.start] = np.linalg.norm(u) + scale * (0.2 + np.abs(rng.standard_normal()))
    return x


def dense_operators(A: np.ndarray, lower: np.ndarray):
    """Explicit projection/multiplier matrices for small problems.

    Returns (M, Q, P, R) assembled densely from the factor and constraints,
    independent of the workspace's triangular-solve path.
    """
    m_mat = np.linalg.inv(lower).T
    if A.shape[0] == 0:
        n = lower.shape[0]
        return m_mat, np.eye(n), m_mat.copy(), np.zeros((0, n))
    n_mat = m_mat.T @ A.T
    schur = A @ m_mat @ m_mat.T @ A.T
    schur_inv = np.linalg.inv(schur)
    q_mat = np.eye(lower.shape[0]) - n_mat @ schur_inv @ n_mat.T
    p_mat = m_mat @ q_mat
    r_mat = -schur_inv @ A @ m_mat @ m_mat.T
    return m_mat, q_mat, p_mat, r_mat


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
