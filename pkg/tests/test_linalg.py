import numpy as np
import pytest

from bmlab.linalg import (DEFAULT_POLICY, NumericError, hermitian_eig,
                          matrix_power, spectral_norm, vector_norm)


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


def random_spd(rng, d, shift=0.5):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return a @ a.conj().T + shift * np.eye(d)


def test_eig_identity():
    pair = hermitian_eig(np.eye(2))
    assert np.allclose(pair.eigenvalues, [1.0, 1.0])
    assert np.allclose(pair.basis @ pair.basis.conj().T, np.eye(2))


def test_eig_diagonal():
    pair = hermitian_eig(np.diag([9.0, 4.0]))
    assert np.allclose(pair.eigenvalues, [4.0, 9.0])


def test_eig_reconstruction_residual():
    rng = np.random.default_rng(42)
    for d in range(1, 9):
        for _ in range(20):
            a = random_hermitian(rng, d)
            pair = hermitian_eig(a)
            rebuilt = (pair.basis * pair.eigenvalues) @ pair.basis.conj().T
            scale = max(np.linalg.norm(a), 1e-30)
            assert np.linalg.norm(rebuilt - a) <= 1e-12 * scale
            assert np.all(np.diff(pair.eigenvalues) >= 0)
            assert np.linalg.norm(pair.basis @ pair.basis.conj().T - np.eye(d)) < 1e-12


def test_eig_matches_numpy_oracle():
    rng = np.random.default_rng(7)
    for _ in range(25):
        a = random_hermitian(rng, 4)
        ours = hermitian_eig(a).eigenvalues
        ref = np.linalg.eigvalsh(a)
        assert np.allclose(ours, ref, atol=1e-11 * max(1, np.abs(ref).max()))


def test_eig_rejects_non_hermitian():
    with pytest.raises(NumericError):
        hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_eigenvalues_invariant_under_unitary_conjugation():
    rng = np.random.default_rng(12)
    for _ in range(20):
        a = random_hermitian(rng, 3)
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        lam1 = hermitian_eig(a).eigenvalues
        lam2 = hermitian_eig(q @ a @ q.conj().T).eigenvalues
        assert np.allclose(lam1, lam2, atol=1e-10 * max(1, np.abs(lam1).max()))


def test_matrix_power_diagonal_sqrt():
    assert np.allclose(matrix_power(np.diag([4.0, 9.0]), 0.5), np.diag([2.0, 3.0]))


def test_matrix_power_zero_exponent():
    rng = np.random.default_rng(1)
    a = random_spd(rng, 3)
    assert np.allclose(matrix_power(a, 0.0), np.eye(3))


def test_matrix_power_roundtrips():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        d = int(rng.integers(1, 5))
        a = random_spd(rng, d)
        scale = np.linalg.norm(a)
        cube = matrix_power(matrix_power(a, 1.0 / 3.0), 3.0)
        assert np.linalg.norm(cube - a) <= 1e-10 * scale
        for alpha in (0.25, 0.5, 1.0):
            prod = matrix_power(a, alpha) @ matrix_power(a, -alpha)
            assert np.linalg.norm(prod - np.eye(d)) <= 1e-10


def test_matrix_power_rejects_near_singular():
    bad = np.diag([1.0, 1e-16])
    with pytest.raises(NumericError):
        matrix_power(bad, 0.5)


def test_spectral_norm_examples():
    assert spectral_norm(np.eye(5)) == pytest.approx(1.0)
    assert spectral_norm(np.diag([2.0, -5.0])) == pytest.approx(5.0)


def test_spectral_norm_direction_sampling_oracle():
    """10^4 sampled directions bound the norm from below; polishing the
    best sample with power iterations (independent of the Jacobi route)
    pins it to 1e-6."""
    rng = np.random.default_rng(99)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    z = rng.standard_normal((10_000, 3)) + 1j * rng.standard_normal((10_000, 3))
    z /= np.linalg.norm(z, axis=1)[:, None]
    gains = np.linalg.norm(z @ a.T, axis=1)
    ours = spectral_norm(a)
    assert np.max(gains) <= ours * (1 + 1e-12)

    v = z[int(np.argmax(gains))]
    gram = a.conj().T @ a
    for _ in range(200):
        v = gram @ v
        v /= np.linalg.norm(v)
    polished = float(np.linalg.norm(a @ v))
    assert ours == pytest.approx(polished, rel=1e-6)


def test_spectral_norm_rectangular():
    a = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
    assert spectral_norm(a) == pytest.approx(2.0)


def test_spectral_norm_submultiplicative():
    rng = np.random.default_rng(31)
    for _ in range(30):
        a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        assert spectral_norm(a @ b) <= spectral_norm(a) * spectral_norm(b) * (1 + 1e-12)


def test_vector_norm_examples():
    assert vector_norm([3.0, 4.0], 2) == pytest.approx(5.0)
    assert vector_norm([1.0, 1.0, 1.0], np.inf) == pytest.approx(1.0)
    assert vector_norm([1.0, 1.0, 1.0], 1) == pytest.approx(3.0)


def test_vector_norm_rejects_q_below_one():
    with pytest.raises(ValueError):
        vector_norm([1.0], 0.5)


def test_vector_norm_equivalence_chain():
    rng = np.random.default_rng(8)
    for _ in range(100):
        d = int(rng.integers(1, 7))
        x = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        p = float(rng.uniform(1.0, 4.0))
        q = float(rng.uniform(p, 8.0))
        nq, np_, ninf = vector_norm(x, q), vector_norm(x, p), vector_norm(x, np.inf)
        slack = 1 + 1e-12
        assert nq <= np_ * slack
        assert np_ <= d ** (1.0 / p) * ninf * slack
        assert ninf <= nq * slack


def test_policy_defaults_centralized():
    assert DEFAULT_POLICY.hermitian_tol == 1e-10
    assert DEFAULT_POLICY.pd_clip_floor == 1e-14
