import numpy as np
import pytest

import kneescout


def reference_curve():
    # q reaches 0.6 at cycle 820
    return kneescout.generate(n_cycles=1200, a=1e-3, b=0.07, c=0.01, n_k=600, knee_width=150)


def test_identify_matches_ground_truth():
    cycles, capacity, truth = reference_curve()
    assert truth is not None
    report = kneescout.identify_knees(cycles, capacity, 1.1, cell_id="ref")
    assert report["method"] == "curvature_rea"
    assert report["cell_id"] == "ref"
    assert abs(report["onset_cycle"] - truth["onset_cycle"]) <= 36
    assert abs(report["knee_cycle"] - truth["knee_cycle"]) <= 36
    assert "cac_min_knee" in report["diagnostics"]


def test_dbw_report_is_ordered():
    cycles, capacity, _ = reference_curve()
    report = kneescout.identify_knees_dbw(cycles, capacity, 1.1)
    assert report["method"] == "double_bacon_watts"
    assert report["onset_cycle"] < report["knee_cycle"]


def test_curvature_of_a_line_is_zero():
    line = 1.0 - 2e-4 * np.arange(300)
    k = kneescout.approximate_curvature(kneescout.savgol_smooth(line), 3)
    assert k.shape == (298,)
    assert np.max(np.abs(k)) < 1e-12


def test_stamp_finds_planted_motif():
    rng = np.random.default_rng(3)
    s = rng.normal(size=300)
    motif = np.array([0, 3, 6, 9, 6, 3, 0, -3, -6, -3], dtype=float)
    s[40:50] = motif
    s[210:220] = motif
    P, I = kneescout.stamp(s, 10, threads=2)
    assert I[40] == 210 and I[210] == 40
    assert P[40] < 1e-6
    d = kneescout.mass(s[40:50], s)
    assert d[210] < 1e-6


def test_fluss_and_rea():
    ac, iac, cac = kneescout.fluss(np.array([2, 3, 0, 1]))
    assert list(ac) == [0, 2, 2, 0]
    assert cac[0] == 1.0
    c = np.ones(500)
    c[100], c[400] = 0.1, 0.2
    assert kneescout.rea(c, 2, 15) == [100, 400]


def test_pearson():
    x = np.arange(10.0)
    assert kneescout.pearson(x, 2 * x + 3) == pytest.approx(1.0)


def test_errors_carry_codes():
    with pytest.raises(kneescout.KneeScoutError) as info:
        kneescout.identify_knees_dbw(np.arange(1, 6), np.linspace(1.1, 1.06, 5), 1.1)
    assert info.value.code == "TooShort"
    with pytest.raises(kneescout.KneeScoutError) as info:
        kneescout.savgol_smooth(np.ones(10), 4, 2)
    assert info.value.code == "EvenWindow"
    assert not info.value.numerical
