import itertools
import math

import numpy as np
import pytest

from elliptope.instances import fixtures, gen_goe, gen_maxcut, gen_z2sync
from elliptope.refsdp import (RefConfig, brute_force_sdp, closed_form_2x2, is_rank_deficient,
                              reference_rank, sdp_reference)
from elliptope.symmat import SymMatrix


def random_sym(gen, n):
    m = gen.uniform(-1, 1, (n, n))
    return SymMatrix.from_dense(np.tril(m) + np.tril(m, -1).T)


def test_reference_rank():
    assert [reference_rank(n) for n in (1, 2, 8, 50, 200)] == [1, 2, 5, 11, 21]


@pytest.mark.parametrize("fx", fixtures(), ids=lambda f: f.name)
def test_fixture_references(fx):
    ref = sdp_reference(fx.a)
    assert ref.certified
    assert ref.value == pytest.approx(fx.sdp_value, abs=1e-6)
    assert ref.value <= ref.upper_bound
    assert ref.certified_error == pytest.approx(ref.upper_bound - ref.value)


@pytest.mark.parametrize("fx", [f for f in fixtures() if f.a.n <= 4], ids=lambda f: f.name)
def test_brute_force_fixtures(fx):
    assert brute_force_sdp(fx.a) == pytest.approx(fx.sdp_value, abs=1e-6)


def test_closed_form_2x2_matches_brute_force_and_reference():
    gen = np.random.default_rng(0)
    for _ in range(10):
        a = random_sym(gen, 2)
        want = closed_form_2x2(a)
        assert brute_force_sdp(a) == pytest.approx(want, abs=1e-9)
        assert sdp_reference(a).value == pytest.approx(want, abs=1e-8)
    with pytest.raises(ValueError):
        closed_form_2x2(SymMatrix.from_dense(np.eye(3)))


def test_brute_force_vs_reference_random_n3():
    gen = np.random.default_rng(1)
    for _ in range(20):
        a = random_sym(gen, 3)
        ref = sdp_reference(a)
        assert ref.certified
        assert brute_force_sdp(a) == pytest.approx(ref.value, abs=1e-4)


def test_brute_force_is_a_lower_bound_of_dual():
    gen = np.random.default_rng(2)
    a = random_sym(gen, 4)
    ref = sdp_reference(a)
    assert brute_force_sdp(a) <= ref.upper_bound + 1e-12


def test_brute_force_rank1_cut_lower_bound():
    # every +-1 vector is a feasible point, so the max over cuts bounds SDP from below
    gen = np.random.default_rng(3)
    a = random_sym(gen, 4)
    cut = max(np.array(x) @ a.dense() @ np.array(x) for x in itertools.product((-1.0, 1.0), repeat=4))
    assert brute_force_sdp(a) >= cut - 1e-12


def test_brute_force_limits():
    with pytest.raises(ValueError):
        brute_force_sdp(SymMatrix.from_dense(np.eye(6)))
    assert brute_force_sdp(SymMatrix.from_dense([[2.5]])) == 2.5


def test_five_cycle_brute_force():
    a = gen_maxcut([(i, (i + 1) % 5) for i in range(5)])
    assert brute_force_sdp(a) == pytest.approx(10 * math.cos(math.pi / 5), abs=1e-6)


def test_goe_references_are_certified():
    for n in (50, 100):
        ref = sdp_reference(gen_goe(n, n))
        assert ref.certified and ref.certified_error <= 1e-6 * n
        assert ref.method == "highrank_bm" and ref.k_used == reference_rank(n)


@pytest.mark.slow
def test_z2sync_reference_scale():
    ref = sdp_reference(gen_z2sync(400, 3.0, 1).a)
    assert 2.9 <= ref.value / 400 <= 3.4
    assert ref.certified_error / 400 <= 0.01


def test_escalation_and_best_out():
    a = gen_goe(30, 3)
    out = []
    ref = sdp_reference(a, RefConfig(restarts=2), best_out=out)
    assert len(out) == 1 and out[0].objective == ref.value


def test_rank_deficiency():
    sigma = np.zeros((5, 3))
    sigma[:, 0] = 1.0
    assert is_rank_deficient(sigma, 1e-3)
    assert not is_rank_deficient(np.eye(3), 1e-3)
    assert is_rank_deficient(np.eye(4)[:2], 1e-3)
