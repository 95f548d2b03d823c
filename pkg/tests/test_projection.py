import math

import numpy as np
import pytest

from so3embed.embedding import EmbeddingSpec, embed, radius, registry_lookup
from so3embed.projection import (
    DegenerateConfigurationError,
    DegenerateInputError,
    gradient,
    kabsch,
    objective,
    project,
)
from so3embed.so3 import (
    Rotation,
    as_coset,
    coset_distance,
    geodesic_distance,
    group_elements,
    random_rotation,
)
from so3embed.tensors import rotate_tuple, tuple_norm


def _noisy_target(spec, r, scale, rng):
    pt = embed(spec, r)
    noise = [rng.normal(size=t.shape) for t in pt.value]
    n = math.sqrt(sum(float(np.sum(x * x)) for x in noise))
    return tuple(t + (scale * radius(spec) / n) * x for t, x in zip(pt.value, noise))


# ---------------------------------------------------------------------------
# kabsch


def test_kabsch_identity_on_matching_sets(rng):
    us = rng.normal(size=(5, 3))
    r = kabsch(us, us)
    assert np.abs(r.matrix - np.eye(3)).max() < 1e-12


def test_kabsch_recovers_exact_rotation(rng):
    for _ in range(20):
        q = random_rotation(rng)
        us = rng.normal(size=(4, 3))
        r = kabsch(us, us @ q.matrix.T)
        assert np.abs(r.matrix - q.matrix).max() < 1e-12


def test_kabsch_two_point_minimal_case(rng):
    q = random_rotation(rng)
    us = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    r = kabsch(us, us @ q.matrix.T)
    assert np.abs(r.matrix - q.matrix).max() < 1e-12


def test_kabsch_beats_random_rotations(rng):
    # optimality: no sampled rotation aligns better than the returned one
    us = rng.normal(size=(6, 3))
    vs = us @ random_rotation(rng).matrix.T + 0.05 * rng.normal(size=(6, 3))
    best = kabsch(us, vs)
    score = float(np.sum((us @ best.matrix.T) * vs))
    for _ in range(300):
        other = random_rotation(rng)
        assert float(np.sum((us @ other.matrix.T) * vs)) <= score + 1e-12


def test_kabsch_rejects_degenerate_directions(rng):
    us = np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])  # collinear
    with pytest.raises(DegenerateConfigurationError):
        kabsch(us, us)
    with pytest.raises(ValueError):
        kabsch(np.ones((1, 3)), np.ones((1, 3)))
    with pytest.raises(ValueError):
        kabsch(np.ones((2, 3)), np.ones((3, 3)))


# ---------------------------------------------------------------------------
# objective and gradient


def test_objective_at_embedded_point_is_radius_squared(rng, registered_spec):
    r = random_rotation(rng)
    pt = embed(registered_spec, r)
    got = objective(registered_spec, r, pt.value)
    assert got == pytest.approx(radius(registered_spec) ** 2, rel=1e-12)


def test_objective_is_bounded_by_cauchy_schwarz(rng, registered_spec):
    target = _noisy_target(registered_spec, random_rotation(rng), 0.3, rng)
    bound = radius(registered_spec) * tuple_norm(target)
    for _ in range(10):
        assert objective(registered_spec, random_rotation(rng), target) <= bound + 1e-10


def test_gradient_matches_finite_differences(rng, registered_spec):
    # central differences along the tangent basis directions (rotations about
    # e1, -e2 and e3 composed on the left) at h = 1e-5
    h = 1e-5
    axes = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    for _ in range(5):
        r = random_rotation(rng)
        target = _noisy_target(registered_spec, random_rotation(rng), 0.2, rng)
        g = gradient(registered_spec, r, target)
        fd = np.empty(3)
        for ell in range(3):
            step = Rotation.from_axis_angle(axes[ell], h)
            fwd = objective(registered_spec, step @ r, target)
            bwd = objective(registered_spec, step.inverse() @ r, target)
            fd[ell] = (fwd - bwd) / (2.0 * h)
        assert np.abs(g - fd).max() < 1e-6


def test_gradient_vanishes_at_perfect_alignment(rng, registered_spec):
    r = random_rotation(rng)
    g = gradient(registered_spec, r, embed(registered_spec, r).value)
    assert np.linalg.norm(g) < 1e-10


# ---------------------------------------------------------------------------
# projection


def test_project_round_trip(rng, registered_spec):
    for i in range(8):
        r = random_rotation(rng)
        pt = embed(registered_spec, r)
        result = project(registered_spec, pt.value, seed=i)
        err = coset_distance(as_coset(r, registered_spec.group), result.coset)
        assert err < 1e-8
        assert result.residual < 1e-7 * radius(registered_spec)
        assert result.converged


def test_project_result_objective_and_residual_are_consistent(rng):
    spec = registry_lookup("D3")
    target = _noisy_target(spec, random_rotation(rng), 0.1, rng)
    result = project(spec, target, seed=0)
    expect_sq = tuple_norm(target) ** 2 + radius(spec) ** 2 - 2.0 * result.objective
    assert result.residual**2 == pytest.approx(expect_sq, rel=1e-9)
    direct = embed(spec, result.coset)
    gap = math.sqrt(
        sum(float(np.sum((x - y) ** 2)) for x, y in zip(target, direct.value))
    )
    assert result.residual == pytest.approx(gap, rel=1e-12)


def test_project_is_stationary_at_the_result(rng, registered_spec):
    target = _noisy_target(registered_spec, random_rotation(rng), 0.05, rng)
    result = project(registered_spec, target, seed=3)
    g = gradient(registered_spec, result.coset.rep, target)
    assert np.linalg.norm(g) < 1e-8 * max(1.0, tuple_norm(target))


def test_project_handles_one_percent_noise(rng):
    spec = registry_lookup("T")
    hits = 0
    for i in range(25):
        r = random_rotation(rng)
        target = _noisy_target(spec, r, 0.01, rng)
        result = project(spec, target, seed=i)
        err = coset_distance(as_coset(r, spec.group), result.coset)
        hits += err < 0.05
    assert hits >= 24


def test_project_is_equivariant(rng):
    spec = registry_lookup("D4")
    target = _noisy_target(spec, random_rotation(rng), 0.05, rng)
    q = random_rotation(rng)
    plain = project(spec, target, seed=0)
    moved = project(spec, rotate_tuple(q, target), seed=0)
    expected = as_coset(q @ plain.coset.rep, spec.group)
    assert coset_distance(expected, moved.coset) < 1e-8


def test_project_c1_agrees_with_kabsch(rng):
    spec = registry_lookup("C1")
    target = _noisy_target(spec, random_rotation(rng), 0.02, rng)
    result = project(spec, target, seed=0)
    us = np.array(spec.u)
    vs = np.array([spec.beta[i] * target[i] for i in range(3)])
    direct = kabsch(us, vs)
    assert geodesic_distance(result.coset.rep, direct) < 1e-10
    assert result.iterations == 0


def test_project_deterministic_for_fixed_seed(rng):
    spec = registry_lookup("O")
    target = _noisy_target(spec, random_rotation(rng), 0.2, rng)
    a = project(spec, target, seed=5)
    b = project(spec, target, seed=5)
    assert np.array_equal(a.coset.rep.quat, b.coset.rep.quat)
    assert a.objective == b.objective and a.iterations == b.iterations


def test_project_rejects_zero_and_misshaped_targets():
    spec = registry_lookup("C4")
    zero = tuple(np.zeros((3,) * a) for a in spec.alpha)
    with pytest.raises(DegenerateInputError):
        project(spec, zero)
    with pytest.raises(ValueError):
        project(spec, (np.ones(3),))


def test_project_far_target_still_lands_on_manifold(rng):
    # a random tensor tuple far from the image still projects somewhere valid
    spec = registry_lookup("C6")
    target = tuple(rng.normal(size=(3,) * a) for a in spec.alpha)
    result = project(spec, target, seed=1)
    pt = embed(spec, result.coset)
    assert pt.norm == pytest.approx(radius(spec), rel=1e-10)
    assert result.residual > 0.0
