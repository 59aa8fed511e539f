import math

import pytest

import visifrac as vf


def test_builtins_and_content():
    assert "carpet" in vf.builtin_names()
    square = vf.builtin_set("square", 4)
    assert len(square) == 256
    assert vf.dyadic_content(square, 2.0) == pytest.approx(1.0, abs=1e-12)
    assert vf.covering_number(square, 2) == 16
    assert vf.builtin_dimension("carpet") == pytest.approx(
        math.log(8.0) / math.log(3.0)
    )


def test_dyset_round_trip():
    carpet = vf.builtin_set("carpet", 4)
    back = vf.parse_dyset(vf.write_dyset(carpet))
    assert back.codes() == carpet.codes()


def test_measures_and_energy():
    square = vf.builtin_set("square", 4)
    leb = vf.frostman_dyadic(square, 2.0)
    assert leb.total_mass == pytest.approx(1.0, abs=1e-12)
    assert min(leb.weights) == pytest.approx(1.0 / 256.0, abs=1e-12)
    assert vf.riesz_energy(leb, 0.5) > 0.0


def test_visible_cells_top_row():
    square = vf.builtin_set("square", 4)
    vis = vf.visible_cells(square, [0.0, 1.0])
    assert len(vis) == 16
    assert all(c[1] == 15 for c in vis.cell_coords())


def test_solve_parameters():
    p = vf.solve_parameters(2.0, 2, 0.0, "regular", 8)
    assert p["alpha"] == pytest.approx(0.1835034190722738, abs=1e-9)
    assert 2.0 * p["kappa"] + 3.0 * p["alpha"] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(Exception):
        vf.solve_parameters(1.0, 2, 0.01, "regular", 8)


def test_decompose_partitions():
    carpet = vf.builtin_set("carpet", 6)
    s = math.log(8.0) / math.log(3.0)
    rep = vf.decompose(carpet, [0.3, 1.0], s, 0.01)
    merged = sorted(
        rep["EH"].codes() + rep["EL"].codes() + rep["EB"].codes() + rep["EG"].codes()
    )
    assert merged == carpet.codes()
    assert rep["stats"]["missing_substantial"] == 0


def test_heavy_set_and_slices():
    carpet = vf.builtin_set("carpet", 6)
    s = math.log(8.0) / math.log(3.0)
    mu = vf.frostman_dyadic(carpet, s)
    small = vf.heavy_set(carpet, mu, [1.0, 0.0], 6.0 * mu.total_mass, s, 0.01)
    big = vf.heavy_set(carpet, mu, [1.0, 0.0], 24.0 * mu.total_mass, s, 0.01)
    assert set(big["fm"].codes()) <= set(small["fm"].codes())
    rows = vf.slice_spectrum(carpet, [1.0, 0.0], s, 0.1, [4, 6])
    assert len(rows) == 2
    assert 0.0 <= rows[0]["fraction_heavy"] <= 1.0


def test_calibration_and_experiment():
    assert vf.calibrate_grid_constant(1, 300, 11) <= 8.0
    s = math.log(8.0) / math.log(3.0)
    out = vf.direction_average_experiment("carpet", s, 0.05, "regular", 3, 5, [4, 5])
    assert len(out["average"]) == 2
    rerun = vf.direction_average_experiment("carpet", s, 0.05, "regular", 3, 5, [4, 5])
    assert out["csv"] == rerun["csv"]
