import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellselect import protocols as pr
from bellselect import quantum as qc
from bellselect.protocols import CHSH_STRATEGY, Geometry, SettingStrategy
from bellselect.quantum import BellLabel
from bellselect.stats import compare_to_analytic, corr, homogeneity, tabulate

import oracles

N = 200_000
RUNNERS = {
    "v_fixed": lambda **kw: pr.run_v_fixed("C0", **kw),
    "v_random": pr.run_v_random,
    "w_swap": pr.run_w_swap,
    "charlie": pr.run_classical_charlie,
    "hopper": pr.run_hopper_sort,
}


def assert_same(e1, e2):
    for col in pr.Ensemble.COLUMNS:
        np.testing.assert_array_equal(getattr(e1, col), getattr(e2, col), err_msg=col)


@pytest.mark.parametrize("name", sorted(RUNNERS))
def test_determinism_across_workers_and_chunks(name):
    run = RUNNERS[name]
    base = run(trials=5000, seed=42)
    assert_same(base, run(trials=5000, seed=42, workers=4, chunk_size=333))
    assert_same(base, run(trials=5000, seed=42, workers=3, chunk_size=1 << 16))
    other = run(trials=5000, seed=43)
    assert not np.array_equal(base.A, other.A)


def test_strategy_validation():
    with pytest.raises(ValueError):
        SettingStrategy((), (0.0,))
    with pytest.raises(ValueError):
        SettingStrategy((0.0,), (0.0,), [[0.5]])
    with pytest.raises(ValueError):
        SettingStrategy((0.0, 1.0), (0.0,), [[0.5], [0.6]])
    s = SettingStrategy((0.0, 1.0), (2.0,), [[0.25], [0.75]])
    assert SettingStrategy.from_dict(s.to_dict()) == s
    assert not s.is_uniform and CHSH_STRATEGY.is_uniform


def test_classical_filters_need_two_by_two():
    with pytest.raises(ValueError):
        pr.run_classical_charlie(SettingStrategy((0.0,), (0.0,)), trials=10)
    with pytest.raises(ValueError):
        pr.run_hopper_sort(SettingStrategy((0.0, 1.0), (0.0, 1.0), [[0.7, 0.1], [0.1, 0.1]]), trials=10)


def test_weighted_settings_follow_weights():
    s = SettingStrategy((0.0, 1.0), (0.5,), [[0.2], [0.8]])
    ens = pr.run_v_fixed("C1", s, trials=100_000, seed=1)
    assert np.mean(ens.a_idx == 1) == pytest.approx(0.8, abs=5 * math.sqrt(0.16 / 1e5))


def test_ensemble_records_and_select():
    ens = pr.run_w_swap(trials=100, seed=3)
    rec = ens.record(0)
    assert rec.protocol == "w_swap" and rec.prep is None and rec.hopper is None
    assert isinstance(rec.m_outcome, BellLabel)
    sub = ens.select(lambda r: r.m_outcome is BellLabel.C0)
    assert len(sub) == int(np.sum(ens.m == 0))
    assert len(list(ens)) == 100
    with pytest.raises(ValueError):
        ens.mask(np.ones(3, dtype=bool))


def test_v_fixed_matches_oracle():
    ens = pr.run_v_fixed("C0", trials=N, seed=5)
    assert compare_to_analytic(tabulate(ens), "C0").passed()


def super_null(ens):
    t = tabulate(ens)
    return all(abs(corr(t, p).value) < 5 * corr(t, p).stderr for p in t.pairs)


@pytest.mark.parametrize("run", [pr.run_v_random, pr.run_w_swap, pr.run_classical_charlie], ids=["v_random", "w_swap", "charlie"])
def test_super_ensemble_nullity_over_seeds(run):
    passed = sum(super_null(run(trials=20_000, seed=s)) for s in range(100))
    assert passed >= 99


@pytest.mark.parametrize("run,column", [(pr.run_v_random, "prep"), (pr.run_w_swap, "m")])
def test_sub_ensemble_emergence(run, column):
    ens = run(trials=N, seed=8)
    cmp = compare_to_analytic(tabulate(ens, by=column))
    assert cmp.passed() and not cmp.empty_strata


def test_w_equal_settings_never_agree_given_c0():
    s = SettingStrategy((0.7,), (0.7,))
    ens = pr.run_w_swap(Geometry.M_PAST, s, trials=50_000, seed=2)
    sel = ens.m == BellLabel.C0
    assert sel.sum() > 10_000
    assert np.all(ens.A[sel] == -ens.B[sel])


@pytest.mark.parametrize("geometry", list(Geometry))
def test_w_joint_matches_brute_force(geometry):
    for a, b in [(0.0, 0.0), (0.3, 2.2), (math.pi / 2, 3 * math.pi / 4)]:
        np.testing.assert_allclose(pr.w_joint_distribution(geometry, a, b), oracles.w_joint(a, b), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 6.28), st.floats(0, 6.28))
def test_geometry_invariance_analytic(a, b):
    ref = pr.w_joint_distribution(Geometry.M_FUTURE, a, b)
    for g in (Geometry.M_PAST, Geometry.M_INTERMEDIATE):
        np.testing.assert_allclose(pr.w_joint_distribution(g, a, b), ref, atol=1e-12)


def test_geometry_invariance_empirical():
    tables = [tabulate(pr.run_w_swap(g, trials=N, seed=17), by="m") for g in Geometry]
    assert homogeneity(tables).passed()


def test_geometry_order():
    assert Geometry("MPast").order == ("M", "A", "B")
    assert Geometry.M_FUTURE.order[-1] == "M"
    with pytest.raises(ValueError):
        Geometry("MSideways")


def test_charlie_kept_subensemble_matches_singlet():
    ens = pr.run_classical_charlie(trials=N, seed=4)
    assert np.mean(ens.kept) == pytest.approx(0.25, abs=5 * math.sqrt(0.25 * 0.75 / N))
    assert compare_to_analytic(tabulate(ens, where=ens.kept), "C0").passed()


def test_hopper_weights_equal_forward_conditionals():
    w = pr.hopper_weights(CHSH_STRATEGY)
    for i, a in enumerate(CHSH_STRATEGY.a_choices):
        for j, b in enumerate(CHSH_STRATEGY.b_choices):
            for lab in range(4):
                forward = oracles.joint(oracles.BELL[lab], a, b)
                # brute-force Bayes with a uniform prior
                evidence = sum(oracles.joint(oracles.BELL[k], a, b) for k in range(4)) / 4
                np.testing.assert_allclose(w[i, j, :, :, lab], 0.25 * forward / evidence, atol=1e-12)
                np.testing.assert_allclose(w[i, j, :, :, lab], forward, atol=1e-9)


def test_hopper_sort_keeps_everything_and_matches_labels():
    ens = pr.run_hopper_sort(trials=N, seed=6)
    assert ens.kept.all() and np.all(ens.hopper >= 0)
    cmp = compare_to_analytic(tabulate(ens, by="hopper"))
    assert cmp.passed()


def test_zero_probability_combos():
    combos = pr.zero_probability_combos(Geometry.M_FUTURE, [(0.0, 0.0)])
    assert (0.0, 0.0, 1, 1, BellLabel.C0) in combos
    # at equal angles each label forbids exactly two of the four outcome cells
    assert len(combos) == 8
    assert pr.zero_probability_combos("MPast", [(0.0, math.pi / 2)]) == []
    assert pr.zero_probability_combos("MPast", []) == []
    grid = [(0.0, 0.0), (1.0, 1.0), (0.0, math.pi / 2)]
    assert pr.zero_probability_combos("MFuture", grid) == pr.zero_probability_combos("MPast", grid[::-1])


def test_zero_combos_never_observed():
    s = SettingStrategy((0.0, 1.0), (0.0, 1.0))
    combos = pr.zero_probability_combos("MIntermediate", s.pairs)
    ens = pr.run_w_swap("MIntermediate", s, trials=100_000, seed=12)
    for a, b, A, B, m in combos:
        hit = (ens.a == a) & (ens.b == b) & (ens.A == A) & (ens.B == B) & (ens.m == m)
        assert not hit.any()


def test_equivalence_map():
    v = pr.run_v_random(trials=10, seed=1)
    w = pr.run_w_swap(trials=10, seed=1)
    assert pr.equivalence_map(v, w).tv < 1e-12
    single = SettingStrategy((0.0,), (0.0,))
    assert pr.equivalence_map(pr.run_v_random(single, trials=10), pr.run_w_swap(strategy=single, trials=10)).tv < 1e-12
    wrong = pr.equivalence_map(pr.run_v_random(single, trials=10), pr.run_w_swap(strategy=single, trials=10), (1, 0, 2, 3))
    assert wrong.tv > 0.1
    with pytest.raises(ValueError):
        pr.equivalence_map(v, pr.run_w_swap(strategy=single, trials=10))
    with pytest.raises(ValueError):
        pr.equivalence_map(w, v)
    with pytest.raises(ValueError):
        pr.equivalence_map(v, w, (0, 0, 1, 2))


def test_v_random_label_frequencies():
    ens = pr.run_v_random(trials=N, seed=21)
    freq = np.bincount(ens.prep, minlength=4) / N
    np.testing.assert_allclose(freq, 0.25, atol=5 * math.sqrt(0.25 * 0.75 / N))
