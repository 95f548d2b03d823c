"""End-to-end acceptance suite: one test per numbered acceptance criterion.

Each test prints a single ``criterion NN <label>: PASS|FAIL`` summary line
(with per-item detail on failure), checks the stated numerical tolerance and
enforces a runtime cap.  Two reference table targets are not reproducible by
the quantities they claim to describe; those tests fail genuinely and the
mismatches are documented in README.md under "Known discrepancies".
"""

import math
import time

import numpy as np
import pytest

from so3embed.analysis import (
    b_norms_closed_form,
    bound_ratio_table,
    derive_beta,
    differential_at_identity,
    global_bounds,
    isometry_check,
    mean_check,
    rank_check,
)
from so3embed.embedding import (
    TABLE_GROUPS,
    embed,
    equivariance_defect,
    radius,
    registry_lookup,
)
from so3embed.projection import gradient, kabsch, objective, project
from so3embed.so3 import (
    Rotation,
    as_coset,
    coset_distance,
    geodesic_distance,
    random_rotation,
)
from so3embed.tensors import (
    binom_identity_check,
    inner,
    invariant_tensor,
    outer_power,
)

pytestmark = pytest.mark.acceptance


def _finish(number, label, failures, started, cap_seconds):
    """Print the one-line verdict, then assert correctness and the time cap."""
    elapsed = time.perf_counter() - started
    verdict = "PASS" if not failures else "FAIL"
    print(f"criterion {number:2d} {label}: {verdict} ({elapsed:.1f} s)")
    for item in failures:
        print(f"    {item}")
    assert not failures, "; ".join(failures)
    assert elapsed < cap_seconds, f"runtime {elapsed:.1f} s exceeds {cap_seconds} s cap"


def _noisy_target(spec, r, scale, rng):
    pt = embed(spec, r)
    noise = [rng.normal(size=t.shape) for t in pt.value]
    n = math.sqrt(sum(float(np.sum(x * x)) for x in noise))
    return tuple(t + (scale * radius(spec) / n) * x for t, x in zip(pt.value, noise))


def test_criterion_01_local_isometry():
    # tangent Gram matrix equals the identity for every registered spec
    started = time.perf_counter()
    failures = []
    for name in TABLE_GROUPS:
        report = isometry_check(registry_lookup(name))
        if report.max_defect >= 1e-10:
            failures.append(f"{name}: Gram defect {report.max_defect:.2e} >= 1e-10")
    _finish(1, "local isometry", failures, started, 10.0)


def test_criterion_02_invariant_tensor_identities():
    # <(x)^a (R u), M_a> = 1 and ||M_a||^2 = a + 1 for even a up to 10
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(2026)
    for alpha in (2, 4, 6, 8, 10):
        m = invariant_tensor(alpha)
        norm_gap = abs(inner(m, m) - (alpha + 1))
        if norm_gap > 1e-12:
            failures.append(f"alpha={alpha}: ||M||^2 off by {norm_gap:.2e} > 1e-12")
        worst = 0.0
        for _ in range(100):
            u = rng.normal(size=3)
            u /= np.linalg.norm(u)
            r = random_rotation(rng)
            worst = max(worst, abs(inner(outer_power(r.matrix @ u, alpha), m) - 1.0))
        if worst > 1e-11:
            failures.append(f"alpha={alpha}: <t, M> off by {worst:.2e} > 1e-11")
    _finish(2, "invariant tensor identities", failures, started, 5.0)


def test_criterion_03_sphere_and_equivariance():
    # constant norm and E(q r) = rho(q) E(r) over 1000 rotations per spec
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(3033)
    for name in TABLE_GROUPS:
        spec = registry_lookup(name)
        r0 = radius(spec)
        dev = defect = 0.0
        for _ in range(1000):
            r = random_rotation(rng)
            dev = max(dev, abs(embed(spec, r).norm - r0))
            defect = max(defect, equivariance_defect(spec, r, random_rotation(rng)))
        if dev >= 1e-10:
            failures.append(f"{name}: radius deviation {dev:.2e} >= 1e-10")
        if defect >= 1e-10:
            failures.append(f"{name}: equivariance defect {defect:.2e} >= 1e-10")
    _finish(3, "sphere radius and equivariance", failures, started, 30.0)


def test_criterion_04_subspace_dimension():
    # sampled rank of the component maps against the reference dimensions
    started = time.perf_counter()
    failures = []
    expected = {
        "C1": 9, "C2": 13, "C3": 13, "C4": 17, "C6": 30, "D2": 15,
        "D3": 15, "D4": 19, "D6": 32, "T": 10, "O": 14, "Y": 65,
    }
    for name in TABLE_GROUPS:
        got = rank_check(registry_lookup(name), n_samples=500, seed=0)
        if got != expected[name]:
            detail = f"{name}: rank {got} vs table value {expected[name]}"
            if name == "D2":
                detail += (
                    "; the three directions form an orthonormal frame, so"
                    " sum_i (R e_i) (x) (R e_i) = I constrains the image by"
                    " five dimensions for every rotation and the span is 10"
                    " at any sample size; see README.md, Known discrepancies"
                )
            failures.append(detail)
    _finish(4, "subspace dimension", failures, started, 60.0)


def test_criterion_05_centered_mean():
    # Monte Carlo mean of each centered embedding within 5 r / sqrt(N)
    started = time.perf_counter()
    failures = []
    n = 100_000
    for name in TABLE_GROUPS:
        spec = registry_lookup(name)
        value = mean_check(spec, n_samples=n, seed=505)
        bound = 5.0 * radius(spec) / math.sqrt(n)
        if value >= bound:
            failures.append(f"{name}: mean norm {value:.2e} >= {bound:.2e}")
    _finish(5, "centered mean", failures, started, 60.0)


def test_criterion_06_gradient_finite_difference():
    # central differences along the tangent directions at h = 1e-5
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(606)
    h = 1e-5
    axes = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]])
    for name in TABLE_GROUPS:
        spec = registry_lookup(name)
        worst = 0.0
        for _ in range(50):
            r = random_rotation(rng)
            target = _noisy_target(spec, random_rotation(rng), 0.2, rng)
            g = gradient(spec, r, target)
            fd = np.empty(3)
            for ell in range(3):
                step = Rotation.from_axis_angle(axes[ell], h)
                fwd = objective(spec, step @ r, target)
                bwd = objective(spec, step.inverse() @ r, target)
                fd[ell] = (fwd - bwd) / (2.0 * h)
            worst = max(worst, float(np.abs(g - fd).max()))
        if worst >= 1e-6:
            failures.append(f"{name}: gradient FD gap {worst:.2e} >= 1e-6")
    _finish(6, "gradient finite differences", failures, started, 30.0)


def test_criterion_07_projection_round_trip():
    # embed -> project recovers the coset; C1 reduces to the SVD alignment
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(707)
    for name in TABLE_GROUPS:
        spec = registry_lookup(name)
        worst = 0.0
        for i in range(100):
            r = random_rotation(rng)
            result = project(spec, embed(spec, r).value, seed=i)
            err = coset_distance(as_coset(r, spec.group), result.coset)
            worst = max(worst, err)
        if worst >= 1e-8:
            failures.append(f"{name}: round-trip coset error {worst:.2e} >= 1e-8")
    spec = registry_lookup("C1")
    us = np.array(spec.u)
    worst = 0.0
    for i in range(20):
        target = _noisy_target(spec, random_rotation(rng), 0.02, rng)
        result = project(spec, target, seed=i)
        vs = np.array([spec.beta[j] * target[j] for j in range(3)])
        worst = max(worst, geodesic_distance(result.coset.rep, kabsch(us, vs)))
    if worst >= 1e-10:
        failures.append(f"C1 vs direct alignment: distance {worst:.2e} >= 1e-10")
    _finish(7, "projection round trip", failures, started, 120.0)


def test_criterion_08_closed_form_norms():
    # closed-form tangent norms for C_k, u = e2, and the derived weights
    started = time.perf_counter()
    failures = []
    from so3embed.embedding import EmbeddingSpec
    from so3embed.so3 import group_elements

    for k in range(3, 9):
        spec = EmbeddingSpec(
            group_elements("C", k), ((0.0, 1.0, 0.0),), (k,), (1.0,), centered=False
        )
        tangents = differential_at_identity(spec)
        diag = np.array([inner(tangents[ell], tangents[ell]) for ell in range(3)])
        gap = float(np.abs(diag - b_norms_closed_form(k)).max())
        if gap >= 1e-10:
            failures.append(f"k={k}: norm gap {gap:.2e} >= 1e-10")
    for family, k, name in (
        ("C", 3, "C3"), ("C", 4, "C4"), ("C", 6, "C6"),
        ("D", 3, "D3"), ("D", 4, "D4"), ("D", 6, "D6"),
    ):
        got = np.array(derive_beta(family, k))
        gap = float(np.abs(got - registry_lookup(name).beta).max())
        if gap >= 1e-12:
            failures.append(f"{name}: derived weights off by {gap:.2e} >= 1e-12")
    _finish(8, "closed-form norms and weights", failures, started, 10.0)


def test_criterion_09_global_bounds():
    # sampled distance-distortion constants for the registered embeddings
    started = time.perf_counter()
    failures = []
    c_min_targets = {
        "C1": 2.0 / math.pi, "C2": 0.452, "C3": 0.583, "C4": 0.452,
        "C6": 0.186, "D2": 0.590, "D3": 0.581, "D4": 0.546, "D6": 0.443,
        "O": 0.604, "T": 0.609,
    }
    for name, target in c_min_targets.items():
        tol = 0.005 if name == "C1" else 0.01
        est = global_bounds(registry_lookup(name), n_pairs=100_000, seed=909)
        if abs(est.c_min - target) > tol:
            failures.append(
                f"{name}: c_min {est.c_min:.4f} vs {target:.4f} (tol {tol})"
            )
        if abs(est.c_max - 1.0) > 0.005:
            failures.append(f"{name}: c_max {est.c_max:.4f} vs 1.0 (tol 0.005)")
    _finish(9, "global distortion bounds", failures, started, 600.0)


def test_criterion_10_weighted_bound_ratios():
    # c_max / c_min for the alternative weight choices
    started = time.perf_counter()
    failures = []
    rows = (
        ("C2", (1.0, 0.5, 0.5), 1.92),
        ("C3", (1.0, 0.67), 1.68),
        ("C4", (1.0, 0.6), 1.91),
        ("C6", (1.0, 0.93), 2.15),
        ("D3", (1.0, 1.03), 1.72),
        ("D4", (1.0, 1.11), 1.80),
        ("D6", (1.0, 1.65), 1.95),
    )
    for name, beta, target in rows:
        ratio, _ = bound_ratio_table(name, beta, n_pairs=100_000, seed=1010)
        if abs(ratio - target) > 0.05:
            detail = f"{name} beta={beta}: ratio {ratio:.3f} vs table {target:.2f}"
            if name == "C4":
                detail += (
                    "; the short-distance slope pins c_max at 1.1662 and a"
                    " witness pair caps c_min at 0.5402, so the true ratio is"
                    " at least 2.16 for these weights; see README.md, Known"
                    " discrepancies"
                )
            failures.append(detail)
    _finish(10, "weighted bound ratios", failures, started, 300.0)


def test_criterion_11_binomial_identity():
    # exact integer equality of the two binomial sums for even ranks
    started = time.perf_counter()
    failures = []
    for alpha in range(2, 31, 2):
        lhs, rhs = binom_identity_check(alpha)
        if lhs != rhs:
            failures.append(f"alpha={alpha}: {lhs} != {rhs}")
    _finish(11, "binomial identity", failures, started, 1.0)
