from itertools import permutations

import numpy as np
import pytest

from qctrap.field import FieldGrid, PiecewiseField
from qctrap.numerics import expm_unitary
from qctrap.objective import (
    bare_value,
    converged,
    evaluate,
    landscape_extrema,
    unitary_gradient,
)
from qctrap.system import ObjectiveSpec, random_unitary_target

P_IVA = [0.6, 0.4, 0, 0, 0, 0]
THETA_IVA = [0, 0, 0, 0.1, 0.2, 0.7]


def rand_unitary(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return expm_unitary((a + a.conj().T) / 2, 1.0)


def test_worked_values():
    assert bare_value(ObjectiveSpec.state_transition(3, 1, 1), np.eye(3)) == pytest.approx(1.0)
    W = random_unitary_target(4, 3)
    jw = ObjectiveSpec.evolution_operator(W)
    assert bare_value(jw, W) == pytest.approx(0.0, abs=1e-15)
    assert bare_value(jw, -W) == pytest.approx(1.0)
    jt = ObjectiveSpec.observable(3, [1, 0, 0], [1, 0, 0])
    assert bare_value(jt, np.eye(3)) == pytest.approx(1.0)


def test_values_within_landscape_bounds():
    jt = ObjectiveSpec.observable(6, P_IVA, THETA_IVA)
    ext = landscape_extrema(jt)
    for seed in range(200):
        v = bare_value(jt, rand_unitary(6, seed))
        assert ext.j_min - 1e-12 <= v <= ext.j_max + 1e-12


def test_penalty():
    obj = ObjectiveSpec.state_transition(2, 0, 0, penalty_weight=0.5)
    f = PiecewiseField(FieldGrid(1.0, 4), np.ones(4))
    assert evaluate(obj, np.eye(2), f) == pytest.approx(1.0 - 0.5)
    with pytest.raises(ValueError):
        evaluate(obj, np.eye(2))
    with pytest.raises(ValueError):
        landscape_extrema(obj)


@pytest.mark.parametrize("obj", [
    ObjectiveSpec.state_transition(4, 0, 3),
    ObjectiveSpec.observable(4, [0.5, 0.3, 0.2, 0], [0, 0.1, 0.4, 1.0]),
    ObjectiveSpec.evolution_operator(random_unitary_target(4, 9)),
])
def test_unitary_gradient_vs_finite_difference(obj):
    # dJ along U -> U exp(i h K) equals Re Tr(G^dag U i K)
    U = rand_unitary(4, 1)
    rng = np.random.default_rng(2)
    for _ in range(5):
        k = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        K = (k + k.conj().T) / 2
        h = 1e-6
        fd = (bare_value(obj, U @ expm_unitary(K, -h)) - bare_value(obj, U @ expm_unitary(K, h))) / (2 * h)
        an = np.trace(unitary_gradient(obj, U).conj().T @ U @ (1j * K)).real
        assert an == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_extrema_observable_brute_force():
    ext = landscape_extrema(ObjectiveSpec.observable(6, P_IVA, THETA_IVA))
    brute = {round(sum(P_IVA[s[k]] * THETA_IVA[k] for k in range(6)), 12)
             for s in permutations(range(6))}
    assert ext.j_max == pytest.approx(max(brute)) == pytest.approx(0.5)
    assert ext.j_min == pytest.approx(min(brute)) == pytest.approx(0.0)
    assert set(ext.critical_values) == brute
    assert ext.default_eta() == pytest.approx(5e-4)


def test_extrema_other_objectives():
    ext = landscape_extrema(ObjectiveSpec.evolution_operator(np.eye(5)))
    assert np.allclose(ext.critical_values, [0, 0.2, 0.4, 0.6, 0.8, 1.0])
    assert (ext.j_min, ext.j_max) == (0.0, 1.0)
    ext = landscape_extrema(ObjectiveSpec.state_transition(3, 0, 2))
    assert (ext.j_min, ext.j_max) == (0.0, 1.0)


def test_converged():
    ext = landscape_extrema(ObjectiveSpec.state_transition(2, 0, 1))
    eta = ext.default_eta()
    assert converged(1.0, ext)
    assert not converged(1.0 - 2 * eta, ext)
    assert converged(eta / 2, ext, maximize=False)
    assert not converged(2 * eta, ext, maximize=False)
    with pytest.raises(ValueError):
        converged(0.5, ext, eta=0.0)
