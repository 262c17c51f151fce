import numpy as np
import pytest

from rankrpca import (
    Prng,
    SyntheticSpec,
    add_gaussian,
    corrupt_image,
    corrupt_sparse,
    make_low_rank,
    make_mask,
    make_problem,
)
from rankrpca.imageio import builtin_image


def test_rank_one_minors_vanish():
    L = make_low_rank(SyntheticSpec(m=8, n=9, r=1, seed=3))
    scale = np.abs(L).max() ** 2
    for i in range(7):
        for j in range(8):
            det = L[i, j] * L[i + 1, j + 1] - L[i, j + 1] * L[i + 1, j]
            assert abs(det) <= 1e-8 * scale


def test_rank_25_on_500():
    L = make_low_rank(SyntheticSpec(m=500, n=500, r=25, seed=1))
    s = np.linalg.svd(L, compute_uv=False)
    assert int(np.sum(s > 1e-8 * s[0])) == 25


def test_low_rank_deterministic():
    spec = SyntheticSpec(m=30, n=20, r=4, seed=99)
    assert make_low_rank(spec).tobytes() == make_low_rank(spec).tobytes()


def test_corrupt_sparse_zero_percent():
    L = make_low_rank(SyntheticSpec(m=20, n=20, r=2, seed=0))
    D, mask = corrupt_sparse(L, 0.0, Prng(1))
    np.testing.assert_array_equal(D, L)
    assert not mask.any()


def test_corrupt_sparse_full_range():
    L = make_low_rank(SyntheticSpec(m=20, n=30, r=2, seed=0))
    c = np.abs(L).mean()
    D, mask = corrupt_sparse(L, 100.0, Prng(1))
    assert mask.all()
    assert D.min() >= -3 * c and D.max() <= 3 * c


def test_corrupt_sparse_exact_count():
    L = make_low_rank(SyntheticSpec(m=500, n=500, r=5, seed=0))
    D, mask = corrupt_sparse(L, 20.0, Prng(2))
    assert int(mask.sum()) == 50_000
    np.testing.assert_array_equal(D[~mask], L[~mask])


def test_gaussian_noise():
    M = np.zeros((500, 500))
    np.testing.assert_array_equal(add_gaussian(M, 0.0, Prng(1)), M)
    noisy = add_gaussian(M, 0.05, Prng(1))
    assert 0.0495 <= (noisy - M).std() <= 0.0505
    assert add_gaussian(M, 0.05, Prng(1)).tobytes() == noisy.tobytes()


def test_mask_counts():
    rng_op = make_mask(500, 500, 0.5, Prng(4))
    assert int((~rng_op.mask).sum()) == 125_000
    empty = make_mask(10, 10, 0.0, Prng(4))
    M = np.arange(100.0).reshape(10, 10)
    np.testing.assert_array_equal(empty.apply(M), M)
    once = rng_op.apply(np.ones((500, 500)))
    np.testing.assert_array_equal(rng_op.apply(once), once)


def test_problem_regeneration_is_bitwise():
    spec = SyntheticSpec(m=40, n=30, r=3, s_pct=10, sigma=0.1, missing_ratio=0.2, seed=8)
    a, b = make_problem(spec), make_problem(spec)
    assert a.D.tobytes() == b.D.tobytes()
    assert a.L_star.tobytes() == b.L_star.tobytes()
    np.testing.assert_array_equal(a.op.mask, b.op.mask)
    assert np.all(a.D[~a.op.mask] == 0.0)


def test_problem_save(tmp_path):
    from rankrpca import read_mask, read_matrix

    pr = make_problem(SyntheticSpec(m=12, n=10, r=2, missing_ratio=0.3, seed=1))
    pr.save(tmp_path)
    np.testing.assert_array_equal(read_matrix(tmp_path / "D.txt"), pr.D)
    np.testing.assert_array_equal(read_mask(tmp_path / "observed_mask.txt"), pr.op.mask)


@pytest.mark.parametrize("kw", [dict(r=0), dict(r=30, m=30), dict(s_pct=101), dict(sigma=-1),
                                dict(missing_ratio=1.0)])
def test_invalid_specs(kw):
    base = dict(m=40, n=40, r=3)
    base.update(kw)
    with pytest.raises(ValueError):
        SyntheticSpec(**base)


def test_corrupt_image_identity_cases(rng):
    img = rng.uniform(0, 255, (32, 32))
    truth, corrupted = corrupt_image(img, 32, 0.0, 0.0, Prng(0))
    np.testing.assert_array_equal(truth, img)
    np.testing.assert_array_equal(corrupted, truth)
    truth, _ = corrupt_image(img, None, 0.0, 0.0, Prng(0))
    np.testing.assert_array_equal(truth, img)


def test_salt_and_pepper_values(rng):
    img = rng.uniform(10, 240, (40, 40))
    truth, corrupted = corrupt_image(img, None, 20.0, 0.0, Prng(3))
    changed = corrupted != truth
    assert int(changed.sum()) == 320
    assert set(np.unique(corrupted[changed]).tolist()) <= {0.0, 255.0}


def test_cameraman_truncation():
    img = builtin_image("cameraman")
    assert img.shape == (256, 256)
    truth, _ = corrupt_image(img, 37, 20.0, 4.0, Prng(0))
    s = np.linalg.svd(truth, compute_uv=False)
    assert s[37] < 1e-8 * s[0]


def test_image_range_checked():
    with pytest.raises(ValueError):
        corrupt_image(np.full((4, 4), 300.0), None, 0, 0, Prng(0))
