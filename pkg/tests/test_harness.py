import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dgrelax.export import (fmt, read_report_csv, write_fields_csv,
                            write_profile_csv, write_report_csv,
                            write_trace_csv, write_vtk)
from dgrelax.harness import (COMPRESSION_F0, FIELD_HEADER, RunConfig, RunRecord,
                             affine_map, error_norms, load_config,
                             run_experiment, twowell_data_gradient,
                             wells_fraction)
from dgrelax.mesh import build_crisscross_mesh
from dgrelax.minimize import MinimizeResult
from dgrelax.models import model_twowell, solve_twinning, stretch_matrix
from dgrelax.space import DGField, DGSpace, interpolate


def make_record(seed):
    rng = np.random.default_rng(seed)
    vals = {}
    for f in dataclasses.fields(RunRecord):
        if f.type == "float":
            vals[f.name] = float(rng.standard_normal() * 10.0 ** rng.integers(-12, 12))
        elif f.type == "int":
            vals[f.name] = int(rng.integers(0, 5000))
        elif f.type == "bool":
            vals[f.name] = bool(rng.integers(0, 2))
        else:
            vals[f.name] = f"tag_{seed}"
    return RunRecord(**vals)


def test_report_round_trip_is_bit_exact(tmp_path):
    records = [make_record(s) for s in range(4)]
    path = tmp_path / "report.csv"
    write_report_csv(records, path)
    back = read_report_csv(path, RunRecord)
    assert back == records


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_seventeen_digit_format_round_trips(x):
    assert float(fmt(x)) == x


def test_config_toml_sections_are_flattened(tmp_path):
    cfg_text = """
experiment = "compression"
output_dir = "results"

[mesh]
resolutions = [[4, 4], [8, 8]]

[energy]
penalty_variant = "convex_style"
alphas = [20, 40]
stable_rewrite = true

[minimize]
max_iterations = 250
g_tol = 1e-7
"""
    path = tmp_path / "run.toml"
    path.write_text(cfg_text)
    cfg = load_config(str(path))
    assert cfg.experiment == "compression"
    assert cfg.resolutions == ((4, 4), (8, 8))
    assert cfg.alphas == (20, 40)
    assert cfg.penalty_variant == "convex_style"
    assert cfg.stable_rewrite is True
    assert cfg.max_iterations == 250
    assert cfg.g_tol == 1e-7


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('experiment = "twowell"\nmesh_spacing = 3\n')
    with pytest.raises(ValueError, match="mesh_spacing"):
        load_config(str(path))


# -- error norms -----------------------------------------------------------


def affine_exact(x):
    return x @ COMPRESSION_F0.T


def test_error_norms_vanish_for_interpolated_affine():
    space = DGSpace(build_crisscross_mesh(3, 3), 1)
    u = interpolate(space, affine_exact)
    l1, l2, w11 = error_norms(u, affine_exact, COMPRESSION_F0)
    assert l1 < 1e-12 and l2 < 1e-12 and w11 < 1e-12


def test_error_norms_constant_shift():
    space = DGSpace(build_crisscross_mesh(3, 3), 1)
    u = interpolate(space, affine_exact)
    c = np.array([0.3, -0.4])
    shifted = DGField(space, u.coeffs + c)
    l1, l2, w11 = error_norms(shifted, affine_exact, COMPRESSION_F0)
    assert l1 == pytest.approx(0.5, abs=1e-12)   # |c| times unit area
    assert l2 == pytest.approx(0.5, abs=1e-12)
    assert w11 == pytest.approx(0.0, abs=1e-12)


def test_error_norms_single_element_bump():
    # a constant deviation c on one triangle of a 2x2 criss-cross mesh:
    # L1 = |c| h^2/4, L2 = |c| h/2, and the W^{1,1} jump part integrates
    # |c| over the element's two internal edges of length h/sqrt(2)
    n, tri = 2, 0
    space = DGSpace(build_crisscross_mesh(n, n), 1)
    u = interpolate(space, affine_exact)
    c = np.array([0.24, -0.07])
    coeffs = u.coeffs.copy()
    coeffs[tri] += c
    bumped = DGField(space, coeffs)
    l1, l2, w11 = error_norms(bumped, affine_exact, COMPRESSION_F0)
    h = 1.0 / n
    cn = float(np.hypot(*c))
    assert l1 == pytest.approx(cn * h * h / 4.0, rel=1e-10)
    assert l2 == pytest.approx(cn * h / 2.0, rel=1e-10)
    assert w11 == pytest.approx(cn * math.sqrt(2.0) * h, rel=1e-10)


# -- two-well helpers ------------------------------------------------------


def test_twowell_data_gradient_is_rank_one_midpoint():
    V = stretch_matrix(0.9)
    sys1, _ = solve_twinning(V)
    F = twowell_data_gradient(0.9)
    assert np.allclose(F, 0.5 * np.eye(2) + 0.5 * sys1.rotation @ V, atol=1e-14)
    assert model_twowell(0.9).W(F[None])[0] == pytest.approx(3.288041e-4, rel=1e-5)


def test_wells_fraction_pure_phases():
    space = DGSpace(build_crisscross_mesh(2, 2), 1)
    at_identity = interpolate(space, lambda x: x)
    f1, f2, both = wells_fraction(at_identity)
    assert (f1, f2, both) == (1.0, 0.0, 1.0)
    V = stretch_matrix(0.9)
    at_stretch = interpolate(space, affine_map(V))
    f1, f2, both = wells_fraction(at_stretch)
    assert (f1, f2, both) == (0.0, 1.0, 1.0)
    off = interpolate(space, affine_map(np.diag([1.05, 0.5])))
    assert wells_fraction(off) == (0.0, 0.0, 0.0)


# -- file exports ----------------------------------------------------------


def test_trace_and_profile_files(tmp_path):
    res = MinimizeResult(x=np.zeros(2), energy=1.0, iterations=2, reason="max-iter",
                         trace_energy=np.array([3.0, 2.0, 1.0]),
                         trace_grad_inf=np.array([1.0, 0.5, 0.2]),
                         trace_step=np.array([0.0, 1.0, 0.5]))
    tpath = tmp_path / "trace.csv"
    write_trace_csv(res, tpath)
    lines = tpath.read_text().strip().splitlines()
    assert lines[0] == "iteration,energy,grad_inf,step"
    assert len(lines) == 4

    ppath = tmp_path / "profile.csv"
    ts = np.linspace(0.0, 1.0, 5)
    pts = np.column_stack([ts, ts])
    write_profile_csv(ts, pts, np.abs(ts - 0.5), ppath)
    lines = ppath.read_text().strip().splitlines()
    assert lines[0] == "t,x,y,u_abs"
    assert len(lines) == 6


def test_vtk_layout(tmp_path):
    mesh = build_crisscross_mesh(2, 1)
    data = {"det_grad": np.arange(mesh.num_triangles, dtype=float)}
    path = tmp_path / "fields.vtk"
    write_vtk(mesh, data, path)
    text = path.read_text().splitlines()
    assert text[0].startswith("# vtk DataFile")
    assert f"POINTS {mesh.num_vertices} double" in text
    assert f"CELLS {mesh.num_triangles} {4 * mesh.num_triangles}" in text
    assert f"CELL_DATA {mesh.num_triangles}" in text
    assert "SCALARS det_grad double 1" in text


def test_compression_smoke_run_writes_reports(tmp_path):
    cfg = RunConfig(experiment="compression", output_dir=str(tmp_path / "out"),
                    resolutions=((2, 2),), variants=("energy_based",),
                    alphas=(5.0,), max_iterations=25, g_tol=1e-3)
    records = run_experiment(cfg)
    assert len(records) == 1
    rec = records[0]
    assert rec.experiment == "compression"
    assert rec.triangles == 16
    for f in dataclasses.fields(rec):
        v = getattr(rec, f.name)
        if isinstance(v, float):
            assert np.isfinite(v), f.name

    out = tmp_path / "out"
    report = out / "report.csv"
    assert report.exists()
    assert read_report_csv(report, RunRecord) == records
    trace = out / f"trace_{rec.run_id}.csv"
    fields = out / f"fields_{rec.run_id}.csv"
    assert trace.exists() and fields.exists()
    header = fields.read_text().splitlines()[0]
    assert header == ",".join(FIELD_HEADER)


def test_twowell_smoke_run_sets_well_fraction(tmp_path):
    cfg = RunConfig(experiment="twowell", output_dir=str(tmp_path / "out"),
                    resolutions=(2,), max_iterations=15, g_tol=1e-3)
    records = run_experiment(cfg)
    assert len(records) == 1
    rec = records[0]
    assert 0.0 <= rec.lam_frac_wells <= 1.0
    assert rec.penalty_variant == "energy_based"
    assert rec.stable_rewrite is True
    assert (tmp_path / "out" / f"profile_{rec.run_id}.csv").exists()


def test_unknown_experiment_rejected():
    with pytest.raises(ValueError):
        run_experiment(RunConfig(experiment="bifurcation", output_dir=""))
