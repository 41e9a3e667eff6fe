"""Output formats: CSV trace, VTK snapshots, event log, dt replay."""

import numpy as np
import pytest

from shellfrac.dynamics import TimeControl
from shellfrac.outputs import (CSV_HEADER, EventLog, append_csv_row,
                               write_csv_header, write_mesh_dump,
                               write_parametric_mesh_vtk, write_vtk_snapshot)
from shellfrac.runner import replay_dt_sequence
from shellfrac.scenarios import build_scenario, compute_surface_tension


@pytest.fixture(scope="module")
def tiny_scenario():
    return build_scenario({"scenario": "shear2d", "nu_el": 4, "nv_el": 4,
                           "depth": 1, "l0": 0.05})


def test_csv_header_fixed(tmp_path):
    f = tmp_path / "trace.csv"
    write_csv_header(f)
    assert f.read_text().splitlines()[0] == "t,dt,n_nr,pi_el,pi_frac,n_cp"
    append_csv_row(f, 0.1, 0.01, 3, 1.25e-3, 4e-5, 121)
    line = f.read_text().splitlines()[1]
    assert line == "0.1,0.01,3,0.00125,4e-05,121"


def test_empty_run_header_only(tmp_path):
    f = tmp_path / "trace.csv"
    write_csv_header(f)
    assert f.read_text() == CSV_HEADER + "\n"


def test_event_log_roundtrip(tmp_path):
    f = tmp_path / "events.log"
    log = EventLog(f)
    log.emit(event="accepted", step=3, t=0.125, dt=1e-3, n_nr=4, refined=0)
    log.emit(event="rejected", step=4, t=0.125, dt=1e-3, reason="no_convergence")
    recs = EventLog.parse(f)
    assert recs[0]["event"] == "accepted"
    assert recs[0]["dt"] == pytest.approx(1e-3)
    assert recs[0]["n_nr"] == 4
    assert recs[1]["reason"] == "no_convergence"


def test_vtk_snapshot_structure(tmp_path, tiny_scenario):
    sc = tiny_scenario
    f = tmp_path / "snap.vtk"
    gam = compute_surface_tension(sc.cache, sc.x0, sc.phi0, sc.H0)
    write_vtk_snapshot(f, sc.mesh, sc.cache, sc.x0, sc.phi0, gam, sc.H0,
                       density=2)
    text = f.read_text()
    assert text.startswith("# vtk DataFile Version 3.0")
    assert "DATASET UNSTRUCTURED_GRID" in text
    assert "SCALARS phi double 1" in text
    assert "SCALARS gamma double 1" in text
    assert "SCALARS depth int 1" in text
    assert "SCALARS H_max double 1" in text
    npts = int(text.split("POINTS ")[1].split()[0])
    assert npts == 9 * len(sc.mesh.elements)


def test_vtk_cracked_element_removal(tmp_path, tiny_scenario):
    sc = tiny_scenario
    phi = sc.phi0.copy()
    # force one element's neighborhood fully cracked
    el = sc.mesh.elements[0]
    for fct in el.funcs:
        phi[fct.idx] = 0.0
    fall = tmp_path / "all.vtk"
    fcut = tmp_path / "cut.vtk"
    write_vtk_snapshot(fall, sc.mesh, sc.cache, sc.x0, phi, None, None)
    write_vtk_snapshot(fcut, sc.mesh, sc.cache, sc.x0, phi, None, None,
                       remove_cracked=True, crack_threshold=1e-3)
    n_all = int(fall.read_text().split("CELLS ")[1].split()[0])
    n_cut = int(fcut.read_text().split("CELLS ")[1].split()[0])
    assert n_cut < n_all


def test_parametric_vtk_and_dump(tmp_path, tiny_scenario):
    sc = tiny_scenario
    f = tmp_path / "param.vtk"
    write_parametric_mesh_vtk(f, sc.mesh)
    assert "DATASET POLYDATA" in f.read_text()
    d = tmp_path / "mesh.txt"
    write_mesh_dump(d, sc.mesh)
    assert "# lrmesh degree=(2,2)" in d.read_text()


# ----------------------------------------------------------------------
# dt replay
# ----------------------------------------------------------------------
def test_replay_dt_sequence_synthetic():
    tc = TimeControl(dt0=0.01, dt_max=0.1)
    recs = [
        {"event": "accepted", "dt": 0.01, "n_nr": 3, "refined": 0},
        {"event": "accepted", "dt": 0.015, "n_nr": 4, "refined": 0},
        {"event": "accepted", "dt": 0.0165, "n_nr": 5, "refined": 0},
        {"event": "rejected", "dt": 0.00825},
        {"event": "accepted", "dt": 0.004125, "n_nr": 2, "refined": 1},
        {"event": "accepted", "dt": 0.000825, "n_nr": 2, "refined": 0},
    ]
    seq = replay_dt_sequence(recs, tc)
    for logged, predicted in seq:
        assert logged == pytest.approx(predicted, rel=1e-15)


def test_replay_flags_mismatch():
    tc = TimeControl(dt0=0.01, dt_max=0.1)
    recs = [
        {"event": "accepted", "dt": 0.01, "n_nr": 3, "refined": 0},
        {"event": "accepted", "dt": 0.02, "n_nr": 3, "refined": 0},  # wrong
    ]
    seq = replay_dt_sequence(recs, tc)
    assert any(abs(a - b) > 1e-12 for a, b in seq)
