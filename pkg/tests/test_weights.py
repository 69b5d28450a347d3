import numpy as np
import pytest

from bmlab import linalg
from bmlab.linalg import NumericError
from bmlab.weights import (MatrixWeightSpec, WeightDomainError,
                           ellipticity_check, eval_weight)


def test_identity_eval():
    spec = MatrixWeightSpec.identity(3, 2)
    pt = eval_weight(spec, [0.4, -1.2])
    assert np.allclose(pt.matrix, np.eye(3))
    assert pt.small_w == pytest.approx(1.0)
    assert pt.big_w == pytest.approx(1.0)


def test_scalar_power_eval():
    spec = MatrixWeightSpec.scalar_power(2.0, 1, 1)
    pt = eval_weight(spec, [3.0])
    assert pt.matrix[0, 0] == pytest.approx(9.0)
    assert pt.small_w == pytest.approx(9.0)
    assert pt.big_w == pytest.approx(9.0)


def test_diagonal_power_eval():
    spec = MatrixWeightSpec.diagonal_power((1.0, -0.5), 1)
    pt = eval_weight(spec, [4.0])
    assert np.allclose(np.diag(pt.matrix), [4.0, 0.5])
    assert pt.small_w == pytest.approx(0.5)
    assert pt.big_w == pytest.approx(4.0)
    assert np.allclose(pt.inverse @ pt.matrix, np.eye(2), atol=1e-12)


def test_conjugated_diagonal_family():
    u = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)
    spec = MatrixWeightSpec.diagonal_power((2.0, 0.0), 1, basis=u)
    pt = eval_weight(spec, [2.0])
    lam = linalg.hermitian_eig(pt.matrix).eigenvalues
    assert np.allclose(lam, [1.0, 4.0])


def test_nonunitary_basis_rejected():
    with pytest.raises(NumericError):
        MatrixWeightSpec.diagonal_power((1.0, 1.0), 1, basis=np.array([[1, 1], [0, 1.0]]))


def test_integrability_guard():
    with pytest.raises(WeightDomainError):
        MatrixWeightSpec.scalar_power(-1.0, 1, 1)
    with pytest.raises(WeightDomainError):
        MatrixWeightSpec.diagonal_power((0.5, -2.5), 2)


def test_singular_point_rejected():
    spec = MatrixWeightSpec.diagonal_power((1.0, -0.5), 1)
    with pytest.raises(WeightDomainError):
        eval_weight(spec, [0.0])


def test_scalar_table_interpolation():
    spec = MatrixWeightSpec.scalar_table([0.0], 0.5, [1.0, 2.0, 4.0], 1)
    assert eval_weight(spec, [0.25]).big_w == pytest.approx(1.5)
    assert eval_weight(spec, [0.5]).big_w == pytest.approx(2.0)
    # edge clamp outside the grid
    assert eval_weight(spec, [5.0]).big_w == pytest.approx(4.0)


def test_gamma_zero_matches_identity():
    zero = MatrixWeightSpec.scalar_power(0.0, 2, 1)
    ident = MatrixWeightSpec.identity(2, 1)
    rng = np.random.default_rng(0)
    pts = rng.uniform(-3, 3, size=(50, 1))
    assert np.allclose(zero.norm_batch(pts), ident.norm_batch(pts))
    vecs = rng.standard_normal((50, 2)) + 1j * rng.standard_normal((50, 2))
    assert np.allclose(zero.apply_power_batch(pts, 0.7, vecs), vecs)
    assert zero.is_identity_like()


def test_positive_definite_everywhere():
    rng = np.random.default_rng(21)
    specs = [
        MatrixWeightSpec.identity(2, 2),
        MatrixWeightSpec.scalar_power(1.5, 2, 2),
        MatrixWeightSpec.diagonal_power((1.0, -0.5, 0.25), 2),
        MatrixWeightSpec.scalar_table([-1.0, -1.0], 1.0, rng.uniform(0.5, 2.0, (3, 3)), 2),
    ]
    for spec in specs:
        for _ in range(20):
            x = rng.uniform(-2, 2, size=2)
            if np.allclose(x, 0):
                continue
            lam = linalg.hermitian_eig(eval_weight(spec, x).matrix).eigenvalues
            assert lam[0] > 0


def test_ellipticity_examples():
    ident = MatrixWeightSpec.identity(2, 1)
    xi = np.array([1.0, 1.0]) / np.sqrt(2)
    lhs, mid, rhs = ellipticity_check(ident, 2.0, [0.3], xi)
    assert lhs == pytest.approx(1.0)
    assert mid == pytest.approx(1.0)
    assert rhs == pytest.approx(1.0)

    diag = MatrixWeightSpec.diagonal_power((2.0, 0.0), 1)  # diag(4,1) at |x|=2
    lhs, mid, rhs = ellipticity_check(diag, 2.0, [2.0], [1.0, 0.0])
    assert (lhs, mid, rhs) == pytest.approx((1.0, 4.0, 4.0))


def test_ellipticity_sandwich_seeded_sweep():
    rng = np.random.default_rng(1234)
    specs = [
        MatrixWeightSpec.identity(3, 1),
        MatrixWeightSpec.scalar_power(0.75, 2, 1),
        MatrixWeightSpec.diagonal_power((1.0, -0.5), 1),
        MatrixWeightSpec.diagonal_power(
            (2.0, -0.25, 0.5), 2,
            basis=np.linalg.qr(rng.standard_normal((3, 3))
                               + 1j * rng.standard_normal((3, 3)))[0]),
    ]
    checked = 0
    while checked < 1000:
        spec = specs[int(rng.integers(len(specs)))]
        x = rng.uniform(-3, 3, size=spec.n)
        if np.linalg.norm(x) < 1e-6:
            continue
        xi = rng.standard_normal(spec.d) + 1j * rng.standard_normal(spec.d)
        p = float(rng.choice([1.0, 2.0, 3.0]))
        lhs, mid, rhs = ellipticity_check(spec, p, x, xi)
        slack = 1e-10 * max(rhs, 1.0)
        assert lhs <= mid + slack <= rhs + 2 * slack
        checked += 1


def test_pair_power_norm_matches_generic_linalg():
    rng = np.random.default_rng(77)
    u = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
    spec = MatrixWeightSpec.diagonal_power((1.0, -0.5), 1, basis=u)
    xs = rng.uniform(0.2, 2.0, size=(5, 1))
    ys = rng.uniform(0.2, 2.0, size=(4, 1))
    fast = spec.pair_power_norm_batch(xs, ys, 0.5, -0.5)
    for i, x in enumerate(xs):
        wx = linalg.matrix_power(eval_weight(spec, x).matrix, 0.5)
        for j, y in enumerate(ys):
            wy = linalg.matrix_power(eval_weight(spec, y).matrix, -0.5)
            assert fast[i, j] == pytest.approx(linalg.spectral_norm(wx @ wy), rel=1e-9)


def test_power_reparam_is_pointwise_power():
    spec = MatrixWeightSpec.diagonal_power((1.0, -0.5), 1)
    dual = spec.power_reparam(-0.5)
    pt = eval_weight(dual, [2.0])
    base = eval_weight(spec, [2.0])
    assert np.allclose(np.diag(pt.matrix), np.diag(base.matrix) ** -0.5)


def test_power_reparam_guards_integrability():
    # the dual exponent leaves the locally integrable range: not a weight
    spec = MatrixWeightSpec.diagonal_power((1.0, -0.5), 1)
    with pytest.raises(WeightDomainError):
        spec.power_reparam(-2.0)


def test_json_roundtrip_bit_exact():
    rng = np.random.default_rng(3)
    u = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))[0]
    specs = [
        MatrixWeightSpec.identity(2, 2),
        MatrixWeightSpec.scalar_power(1.0 / 3.0, 1, 1),
        MatrixWeightSpec.diagonal_power((0.1234567890123456, -0.5), 1, basis=u),
        MatrixWeightSpec.scalar_table([0.0], 0.25, rng.uniform(0.5, 2, 7), 1),
        MatrixWeightSpec.operator_norm_of(MatrixWeightSpec.diagonal_power((1.0, -0.5), 2)),
    ]
    for spec in specs:
        again = MatrixWeightSpec.from_json(spec.to_json())
        assert again == spec
        assert again.to_json() == spec.to_json()
