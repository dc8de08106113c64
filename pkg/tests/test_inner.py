import numpy as np
import pytest

from conftest import (
    cube_image_overlap,
    families_missing_at,
    in_town_cube_count,
)
from kstfit.inner import (
    build_inner_family,
    eval_phi,
    eval_z,
    forward_superpose,
    gap_width,
    load_inner_family,
    make_kl_function,
    save_inner_family,
    superposition_weights,
    _build_cached,
)


def test_weights_distinct_in_unit_interval():
    for d in (1, 2, 3, 5):
        lam = superposition_weights(d)
        assert lam.shape == (d,)
        assert np.all((lam > 0) & (lam <= 1))
        assert len(np.unique(lam)) == d


def test_build_d2_k1_has_five_increasing_tables():
    fam = build_inner_family(2, 1)
    assert len(fam.phis) == 5
    for tab in fam.phis:
        assert np.all(np.diff(tab[:, 0]) > 0)
        assert np.all(np.diff(tab[:, 1]) > 0)


@pytest.mark.parametrize("d,rank", [(2, 3), (3, 2)])
def test_town_cube_images_disjoint(d, rank):
    fam = build_inner_family(d, rank)
    for k in range(1, rank + 1):
        for q in range(fam.n_phi):
            worst = cube_image_overlap(fam, k, q)
            assert worst < 0, f"rank {k}, family {q}: overlap {worst:.3e}"


def test_d3_grid_points_in_at_least_d_plus_1_cubes():
    fam = build_inner_family(3, 2)
    grid = np.linspace(0, 1, 21)
    for k in (1, 2):
        counts = in_town_cube_count(fam, k, grid)
        assert counts.min() >= fam.d + 1


def test_gap_miss_at_most_one_family_per_rank():
    for d in (1, 2, 3):
        fam = build_inner_family(d, 2)
        for k in (1, 2):
            for x in np.linspace(0, 1, 101):
                assert families_missing_at(fam, k, x) <= 1


def test_phi_anchors_and_domain():
    fam = build_inner_family(2, 2)
    for q in range(5):
        assert eval_phi(fam, q, 0.0) == 0.0
        assert eval_phi(fam, q, 1.0) == 1.0
    with pytest.raises(ValueError):
        eval_phi(fam, 0, 1.5)
    with pytest.raises(ValueError):
        eval_phi(fam, 0, -0.1)
    with pytest.raises(IndexError):
        eval_phi(fam, 5, 0.5)


def test_phi_strictly_increasing_on_samples():
    fam = build_inner_family(2, 3)
    x = np.linspace(0, 1, 1001)
    for q in range(5):
        v = eval_phi(fam, q, x)
        assert np.all(np.diff(v) >= 0)
        # strict increase across town boundaries at table nodes
        tab = fam.phis[q]
        assert np.all(np.diff(tab[:, 1]) > 0)


def test_phi_stable_under_rank_refinement():
    for d in (2, 3):
        k = 2
        coarse = build_inner_family(d, k)
        fine = build_inner_family(d, k + 1)
        toler = 2 * d * gap_width(d, k)
        for q in range(2 * d + 1):
            assert abs(eval_phi(coarse, q, 0.5) - eval_phi(fine, q, 0.5)) <= toler


def test_z_corners_and_composition():
    fam = build_inner_family(2, 2)
    assert eval_z(fam, 0, np.zeros(2)) == 0.0
    top = eval_z(fam, 1, np.ones(2))
    assert top == pytest.approx(fam.lambda_sum, abs=1e-14)
    lam = fam.lambdas
    want = lam[0] * eval_phi(fam, 2, 0.3) + lam[1] * eval_phi(fam, 2, 0.7)
    assert eval_z(fam, 2, np.array([0.3, 0.7])) == pytest.approx(want, abs=1e-15)
    with pytest.raises(ValueError):
        eval_z(fam, 0, np.array([0.5, 1.2]))


def test_z_vectorized_matches_scalar():
    fam = build_inner_family(2, 2)
    pts = np.random.default_rng(3).random((50, 2))
    vec = eval_z(fam, 3, pts)
    scal = np.array([eval_z(fam, 3, p) for p in pts])
    assert np.allclose(vec, scal, rtol=0, atol=1e-15)


def test_superpose_constant_is_exact():
    for d in (2, 3):
        fam = build_inner_family(d, 2)
        pts = np.random.default_rng(7).random((1000, d))
        out = forward_superpose(fam, lambda t: np.ones_like(t), pts)
        assert np.all(out == 2 * d + 1)


def test_superpose_identity_matches_double_loop():
    fam = build_inner_family(2, 2)
    pts = np.random.default_rng(11).random((40, 2))
    got = forward_superpose(fam, lambda t: t, pts)
    want = np.zeros(len(pts))
    for i, p in enumerate(pts):
        for q in range(5):
            for j in range(2):
                want[i] += fam.lambdas[j] * eval_phi(fam, q, p[j])
    assert np.allclose(got, want, atol=1e-13)


def test_kl_factory():
    fam = build_inner_family(2, 2)
    zero = make_kl_function(fam, "linear", scale=0.0)
    assert zero(np.array([0.3, 0.9])) == 0.0
    lin = make_kl_function(fam, "linear", scale=1.0)
    assert lin(np.ones(2)) == pytest.approx(5 * fam.lambda_sum, rel=1e-13)
    for kind in ("sin", "exp", "chirp"):
        f = make_kl_function(fam, kind, scale=2.0)
        assert np.isfinite(f(np.array([0.2, 0.4])))
    with pytest.raises(ValueError):
        make_kl_function(fam, "tanh")


def test_build_rejects_bad_arguments():
    with pytest.raises(ValueError):
        build_inner_family(0)
    with pytest.raises(ValueError):
        build_inner_family(2, 0)
    with pytest.raises(ValueError):
        build_inner_family(2, 40)  # town widths below double precision


def test_deterministic_rebuild():
    fam1 = build_inner_family(2, 2)
    _build_cached.cache_clear()
    fam2 = build_inner_family(2, 2)
    assert len(fam1.phis) == len(fam2.phis)
    for a, b in zip(fam1.phis, fam2.phis):
        assert np.array_equal(a, b)


def test_serialization_roundtrip(tmp_path):
    fam = build_inner_family(2, 2)
    path = tmp_path / "family.ksti"
    save_inner_family(fam, path)
    back = load_inner_family(path)
    assert back.d == fam.d and back.rank == fam.rank
    assert np.array_equal(back.lambdas, fam.lambdas)
    for a, b in zip(fam.phis, back.phis):
        assert np.array_equal(a, b)


def test_serialization_rejects_corruption(tmp_path):
    fam = build_inner_family(2, 1)
    path = tmp_path / "family.ksti"
    save_inner_family(fam, path)
    raw = path.read_bytes()
    (tmp_path / "bad_magic.ksti").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ValueError, match="magic"):
        load_inner_family(tmp_path / "bad_magic.ksti")
    (tmp_path / "short.ksti").write_bytes(raw[: len(raw) // 2])
    with pytest.raises(ValueError):
        load_inner_family(tmp_path / "short.ksti")
