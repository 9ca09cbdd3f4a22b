import itertools

import numpy as np
import pytest

from detnmf import (ExplosionGuard, RankDeficient, SecondOrderCone, ZeroVector,
                    check_separability, check_sufficiently_scattered,
                    dual_cone_extreme_rays, refute_by_sampling, soc_member)
from detnmf.geometry import BOUNDARY, INTERIOR, NO, OUTSIDE, UNKNOWN, YES, boundary_samples_of_C

from oracles import dual_rays_bruteforce, same_directions


def perms(v):
    return np.array(sorted(set(itertools.permutations(v))), dtype=float)


def unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def test_soc_member_examples():
    assert soc_member(np.array([1.0, 0.0]), SecondOrderCone(2, "C")) == BOUNDARY
    assert soc_member(np.ones(3), SecondOrderCone(3, "C")) == INTERIOR
    assert soc_member(np.array([-1.0, 2.0, 2.0]), SecondOrderCone(3, "Cstar")) == BOUNDARY
    assert soc_member(np.array([-1.0, 1.0, 0.0]), SecondOrderCone(3, "C")) == OUTSIDE
    with pytest.raises(ZeroVector):
        soc_member(np.zeros(3), SecondOrderCone(3, "C"))


def test_boundary_samples_lie_on_C():
    pts = boundary_samples_of_C(4, 50, np.random.default_rng(0))
    cone = SecondOrderCone(4, "C")
    assert all(soc_member(x, cone) == BOUNDARY for x in pts)


def test_rays_identity():
    rays = dual_cone_extreme_rays(np.eye(3)).rays
    assert same_directions(rays, list(np.eye(3)))


def test_rays_redundant_row():
    rays = dual_cone_extreme_rays(np.array([[1.0, 0], [0, 1], [1, 1]])).rays
    assert same_directions(rays, [np.array([1.0, 0]), np.array([0, 1.0])])


def test_rays_two_by_two():
    rays = dual_cone_extreme_rays(np.array([[2.0, 1], [1, 2]])).rays
    assert same_directions(rays, [unit([2, -1]), unit([-1, 2])])


def test_rays_310():
    rays = dual_cone_extreme_rays(perms((3, 1, 0))).rays
    expected = list(np.eye(3)) + [unit(v) for v in ((-1, 3, 3), (3, -1, 3), (3, 3, -1))]
    assert same_directions(rays, expected)


def test_rays_sorted_and_unit():
    rays = dual_cone_extreme_rays(perms((3, 1, 0))).rays
    assert np.allclose(np.linalg.norm(rays, axis=1), 1.0)
    keys = [tuple(np.round(r, 9)) for r in rays]
    assert keys == sorted(keys, reverse=True)


def test_rays_rank_deficient():
    with pytest.raises(RankDeficient):
        dual_cone_extreme_rays(np.array([[1.0, 1.0], [2.0, 2.0]]))


def test_rays_explosion_guard():
    H = np.random.default_rng(0).uniform(size=(30, 6))
    with pytest.raises(ExplosionGuard):
        dual_cone_extreme_rays(H, max_rays=5)


def test_random_vs_bruteforce():
    rng = np.random.default_rng(5)
    for _ in range(40):
        r = int(rng.integers(2, 5))
        N = int(rng.integers(r, 13))
        H = rng.uniform(size=(N, r))
        H[rng.uniform(size=H.shape) < 0.3] = 0.0
        if np.linalg.matrix_rank(H) < r:
            continue
        rays = dual_cone_extreme_rays(H).rays
        assert same_directions(rays, dual_rays_bruteforce(H))


def test_separability_examples():
    ok, wit = check_separability(np.array([[1.0, 0], [0, 1], [1, 1]]))
    assert ok and wit == {0: 0, 1: 1}
    assert not check_separability(np.array([[2.0, 1], [1, 2]]))[0]
    assert not check_separability(perms((3, 1, 0)))[0]


@pytest.mark.parametrize("r", [2, 3, 5])
def test_scattered_identity(r):
    v = check_sufficiently_scattered(np.eye(r))
    assert v.status == YES and v.separable


def test_scattered_two_by_two_refuted():
    v = check_sufficiently_scattered(np.array([[2.0, 1], [1, 2]]))
    assert v.status == NO
    assert v.certificate["kind"] == "ray_outside_cstar"
    ray = v.certificate["ray"]
    assert any(np.allclose(ray, unit(x)) for x in ((2, -1), (-1, 2)))
    assert v.certificate["margin"] == pytest.approx((1 - np.sqrt(5)) / np.sqrt(5))


def test_scattered_310_yes():
    v = check_sufficiently_scattered(perms((3, 1, 0)))
    assert v.status == YES
    assert not v.separable
    for y, m, cls in zip(v.certificate["rays"], v.certificate["margins"], v.certificate["classes"]):
        if np.min(y) < -1e-9:
            assert cls == INTERIOR
            assert m == pytest.approx((5 - np.sqrt(19)) / np.sqrt(19))
        else:
            assert cls == BOUNDARY


def test_scattered_210_no():
    v = check_sufficiently_scattered(perms((2, 1, 0)))
    assert v.status == NO
    assert v.certificate["kind"] == "noncoordinate_boundary_ray"
    ray = v.certificate["ray"]
    assert any(np.allclose(ray, unit(x)) for x in ((-1, 2, 2), (2, -1, 2), (2, 2, -1)))


def test_scattered_rank_deficient_is_no():
    v = check_sufficiently_scattered(np.array([[1.0, 1.0], [2.0, 2.0]]))
    assert v.status == NO and v.certificate["kind"] == "lineality"


def test_scattered_negative_input():
    with pytest.raises(ValueError):
        check_sufficiently_scattered(np.array([[1.0, -1.0], [0.0, 1.0]]))


def test_sampling_identity_unknown():
    v = refute_by_sampling(np.eye(3), 500, seed=0)
    assert v.status == UNKNOWN and v.mode == "sampling"


def test_sampling_two_by_two_refuted():
    v = refute_by_sampling(np.array([[2.0, 1], [1, 2]]), 100, seed=0)
    assert v.status == NO
    assert v.certificate["sample"] < 100


def test_sampling_generated_factor():
    rng = np.random.default_rng(3)
    H = rng.uniform(size=(200, 5))
    H.flat[rng.permutation(1000)[:350]] = 0.0
    assert refute_by_sampling(H, 1000, seed=1).status == UNKNOWN


def test_verdict_to_dict_is_json():
    import json
    d = check_sufficiently_scattered(perms((3, 1, 0))).to_dict()
    json.dumps(d)
    assert d["sufficiently_scattered"] == YES and d["separable"] is False
