"""Dump format, alignment scores, projection sketch, and the analytic check."""

import numpy as np
import pytest

from s2h_forge.gradalign import (
    SPLIT_HARD,
    SPLIT_SIMPLE,
    GradError,
    GradientDump,
    QuadraticExample,
    QuadraticFamily,
    adam_update_alignment,
    alignment_score,
    cosine_score,
    first_order_ratio_check,
    project,
    projection_table,
    random_quadratic_family,
    read_dump,
    read_manifest,
    write_dump,
)


def make_dump(simple, hard):
    simple = np.atleast_2d(np.asarray(simple, dtype=np.float32))
    hard = np.atleast_2d(np.asarray(hard, dtype=np.float32))
    values = np.vstack([simple, hard])
    splits = np.array([SPLIT_SIMPLE] * len(simple) + [SPLIT_HARD] * len(hard), np.uint8)
    ids = [f"v{i}" for i in range(len(values))]
    return GradientDump(values.shape[1], ids, splits, values)


# ---------------------------------------------------------------------------
# dump format


def test_dump_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    dump = make_dump(rng.normal(size=(3, 5)), rng.normal(size=(2, 5)))
    path = tmp_path / "g.bin"
    write_dump(path, dump)
    loaded = read_dump(path, checkpoint_tag="ck", loss_kind="solution_given_text")
    assert loaded.ids == dump.ids
    assert loaded.checkpoint_tag == "ck"
    assert loaded.loss_kind == "solution_given_text"
    np.testing.assert_array_equal(loaded.splits, dump.splits)
    np.testing.assert_array_equal(loaded.values, dump.values)


def test_dump_rejects_bad_magic_and_trailing_bytes(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(GradError):
        read_dump(path)
    good = tmp_path / "good.bin"
    write_dump(good, make_dump([[1.0, 0.0]], [[0.0, 1.0]]))
    good.write_bytes(good.read_bytes() + b"\x00")
    with pytest.raises(GradError):
        read_dump(good)


def test_dump_validation():
    with pytest.raises(GradError):
        GradientDump(3, ["a"], np.array([0], np.uint8), np.zeros((1, 2), np.float32))
    with pytest.raises(GradError):
        GradientDump(2, ["a"], np.array([7], np.uint8), np.zeros((1, 2), np.float32))


def test_manifest_round_trip(tmp_path):
    dump = make_dump([[1.0, 0.0]], [[0.0, 1.0]])
    write_dump(tmp_path / "a.bin", dump)
    write_dump(tmp_path / "b.bin", dump)
    (tmp_path / "manifest.json").write_text(
        '{"step1": "a.bin", "step2": {"file": "b.bin", "loss_kind": "answer_only"}}'
    )
    dumps = read_manifest(tmp_path / "manifest.json")
    assert set(dumps) == {"step1", "step2"}
    assert dumps["step1"].checkpoint_tag == "step1"
    assert dumps["step2"].loss_kind == "answer_only"


# ---------------------------------------------------------------------------
# scores


def test_identity_alignment_is_one():
    rng = np.random.default_rng(1)
    g = rng.normal(size=(4, 8))
    dump = make_dump(g, g)
    assert abs(alignment_score(dump) - 1.0) <= 1e-12
    assert abs(cosine_score(dump) - 1.0) <= 1e-12
    assert abs(adam_update_alignment(dump) - 1.0) <= 1e-12


def test_orthogonal_alignment_is_zero():
    dump = make_dump([[1.0, 0.0]], [[0.0, 1.0]])
    assert abs(alignment_score(dump)) <= 1e-12
    assert abs(cosine_score(dump)) <= 1e-12


def test_doubled_simple_gradients_score_two():
    rng = np.random.default_rng(2)
    hard = rng.normal(size=(3, 6))
    dump = make_dump(2.0 * hard, hard)
    assert abs(alignment_score(dump) - 2.0) <= 1e-12
    # cosine ignores the scaling
    assert abs(cosine_score(dump) - 1.0) <= 1e-12


def test_opposite_means_have_cosine_minus_one():
    g = np.array([[1.0, 2.0, 3.0]])
    assert abs(cosine_score(make_dump(-g, g)) + 1.0) <= 1e-12


def test_adam_dim2_hand_case():
    # simple = {(1,0)}, hard = {(1,0)}, beta1=beta2=0, eps=0:
    # h(g) = g/|g| elementwise with 0/0 -> 0, so h((1,0)) = (1,0) and the
    # numerator equals the denominator
    dump = make_dump([[1.0, 0.0]], [[1.0, 0.0]])
    score = adam_update_alignment(dump, beta1=0.0, beta2=0.0, eps=0.0)
    assert abs(score - 1.0) <= 1e-9


def test_adam_dim2_sign_normalized_case():
    # simple = {(1,0),(0,1)}, hard = {(1,1)}; with beta1=beta2=eps=0 the
    # update is the elementwise sign, so the score is 1/2
    dump = make_dump([[1.0, 0.0], [0.0, 1.0]], [[1.0, 1.0]])
    score = adam_update_alignment(dump, beta1=0.0, beta2=0.0, eps=0.0)
    assert abs(score - 0.5) <= 1e-9


def test_scores_require_both_splits():
    values = np.ones((2, 3), np.float32)
    dump = GradientDump(3, ["a", "b"], np.array([0, 0], np.uint8), values)
    for fn in (alignment_score, cosine_score, adam_update_alignment):
        with pytest.raises(GradError):
            fn(dump)


def test_zero_hard_mean_is_an_error():
    dump = make_dump([[1.0, 0.0]], [[0.0, 0.0]])
    with pytest.raises(GradError):
        alignment_score(dump)


# ---------------------------------------------------------------------------
# projection


def test_projection_is_linear_and_deterministic():
    rng = np.random.default_rng(3)
    a = rng.normal(size=2000)
    b = rng.normal(size=2000)
    pa = project(a, seed=1, out_dim=64)
    assert np.array_equal(pa, project(a, seed=1, out_dim=64))
    assert not np.array_equal(pa, project(a, seed=2, out_dim=64))
    np.testing.assert_allclose(
        project(a + b, seed=1, out_dim=64), pa + project(b, seed=1, out_dim=64),
        atol=1e-9,
    )
    assert np.array_equal(project(np.zeros(100), seed=1, out_dim=64), np.zeros(64))


def test_projection_table_matches_streaming_path():
    rng = np.random.default_rng(4)
    vec = rng.normal(size=5000)
    table = projection_table(5000, seed=9, out_dim=128)
    np.testing.assert_array_equal(
        project(vec, seed=9, out_dim=128, table=table),
        project(vec, seed=9, out_dim=128),
    )


def test_projection_preserves_inner_products_on_average():
    # Monte-Carlo sketch calibration: 1,000 random pairs in dim 1e6
    rng = np.random.default_rng(5)
    dim, out_dim, trials = 10**6, 4096, 1000
    table = projection_table(dim, seed=11, out_dim=out_dim)
    errors = []
    for _ in range(trials):
        a = rng.standard_normal(dim, dtype=np.float32)
        b = rng.standard_normal(dim, dtype=np.float32)
        pa = project(a, 11, out_dim, table)
        pb = project(b, 11, out_dim, table)
        errors.append(
            abs(pa @ pb - float(a @ b)) / (np.linalg.norm(a) * np.linalg.norm(b))
        )
    assert np.mean(errors) < 0.05


# ---------------------------------------------------------------------------
# analytic first-order check


def test_identical_family_ratio_is_one():
    family = random_quadratic_family(seed=0)
    same = QuadraticFamily(simple=family.hard, hard=family.hard, theta=family.theta)
    result = first_order_ratio_check(same, eta=1e-6)
    assert abs(result["score"] - 1.0) <= 1e-12
    assert abs(result["ratio"] - 1.0) <= 1e-3


def test_random_families_match_to_first_order():
    for seed in range(5):
        family = random_quadratic_family(seed=seed)
        result = first_order_ratio_check(family, eta=1e-6)
        assert result["abs_diff"] <= 1e-3


def test_abs_diff_shrinks_with_eta():
    family = random_quadratic_family(seed=7)
    diffs = [first_order_ratio_check(family, eta=eta)["abs_diff"]
             for eta in (1e-3, 1e-4, 1e-5, 1e-6)]
    assert diffs[-1] < diffs[0]


def test_family_dump_export():
    family = random_quadratic_family(seed=8, dim=4, n_simple=3, n_hard=2)
    dump = family.to_dump("toy")
    assert dump.dim == 4
    assert (dump.splits == SPLIT_SIMPLE).sum() == 3
    assert (dump.splits == SPLIT_HARD).sum() == 2
    assert alignment_score(dump) == pytest.approx(
        first_order_ratio_check(family)["score"], abs=1e-6
    )


def test_quadratic_example_gradient_matches_finite_difference():
    ex = QuadraticExample(np.array([[2.0, 0.5], [0.5, 1.0]]), np.array([0.3, -0.2]))
    theta = np.array([1.0, 2.0])
    grad = ex.grad(theta)
    eps = 1e-6
    for i in range(2):
        d = np.zeros(2)
        d[i] = eps
        fd = (ex.loss(theta + d) - ex.loss(theta - d)) / (2 * eps)
        assert abs(fd - grad[i]) < 1e-5
