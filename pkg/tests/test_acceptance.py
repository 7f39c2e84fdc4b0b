"""Acceptance criteria, each run at its stated tolerance.

Every test records a verdict before asserting, and the terminal summary
prints one PASS/FAIL line per criterion.
"""

import json
import math
import os

import numpy as np
import pytest

from slabmhd import diagnostics as diag
from slabmhd import mhd2d
from slabmhd import pressure as pr
from slabmhd.fields import Family, InitialParams, make_initial, read_snapshot
from slabmhd.grid import Parity, GridSpec, characteristic_coords, make_grid, weight
from slabmhd.harness import load_config, run_experiment, run_sweep
from slabmhd.harness.experiments import agreement_case, manufactured_residual, neumann_check
from slabmhd.integrator import StepperConfig, run
from slabmhd.scaling import compare_functionals, verify_norm_identities

from conftest import record

pytestmark = pytest.mark.slow

SQRT5, SQRT3 = math.sqrt(5.0), math.sqrt(3.0)


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    """Default sheet run (64x16x16, T = 2, eps = 1e-3) at half the reference cadence."""
    out = tmp_path_factory.mktemp("run3d")
    cfg = load_config(None, {"stepper.snapshot_cadence": "0.05"})
    summary = run_experiment(cfg, str(out))
    return cfg, summary, out


def test_criterion_01_green_bound():
    ratios = pr.sample_green_bound(1000, np.random.default_rng(1))
    worst = float(np.max(ratios))
    ok = len(ratios) >= 1000 and worst <= 0.1875 * (1 + 1e-3)
    record(1, "Green bound", ok, f"max delta*rho*|grad G| = {worst:.6f} over {len(ratios)} samples")
    assert ok


def test_criterion_02_neumann():
    rng = np.random.default_rng(2)
    wall = neumann_check(rng, n=50, tol=1e-9)
    man = manufactured_residual()
    g = make_grid(GridSpec(Lx=6.0, Ly=np.pi, delta=0.2, Nx=32, Ny=8, Nz=8))
    p = pr.solve_pressure(make_initial(Family.TUBE, g, InitialParams(eps=0.1, center_plus=0.5, center_minus=-0.5)))
    # even parity by construction, so d3 p of the interpolant vanishes on the walls
    d3 = g.ifft(g.deriv_hat(g.fft(p.values, p.field.parity), 0, 0, 1))
    pts = np.array([[0.3, 0.2, -g.delta], [-1.1, 0.7, g.delta], [2.0, -0.4, g.delta]])
    spec_wall = np.abs(g.interpolate(d3, Parity.ODD, pts)).max() / np.abs(d3).max()
    even = p.field.parity is Parity.EVEN and spec_wall <= 1e-12
    ok = wall <= 1e-8 and man <= 1e-9 and even
    record(2, "Neumann condition", ok,
           f"max |d3 G| at walls {wall:.2e}, manufactured residual {man:.2e}, spectral d3 p at walls {spec_wall:.1e}")
    assert ok


def test_criterion_03_green_vs_spectral():
    coarse = agreement_case(0.5, 16, 8, 1e-7)
    fine = agreement_case(0.5, 32, 16, 1e-7)
    e0, e1 = float(np.max(coarse["rel_err"])), float(np.max(fine["rel_err"]))
    ok = e0 <= 0.02 and e1 < e0
    record(3, "Green vs spectral pressure", ok, f"16x16x8 {e0:.3%}, 32x32x16 {e1:.3%}")
    assert ok


def test_criterion_04_conservation(default_run):
    cfg, s, out = default_run
    drift = s["energy_drift_per_time"]
    div = s["trajectory"]["max_divergence"]
    # parity: z^3 and d3 z^h vanish on both walls of the final snapshot
    snaps = sorted(os.listdir(out / "snapshots"))
    final = read_snapshot(out / "snapshots" / snaps[-1])
    g = final.grid
    rng = np.random.default_rng(4)
    pts = np.column_stack([rng.uniform(-2, 2, 8), rng.uniform(-1, 1, 8), np.tile([-g.delta, g.delta], 4)])
    scale = max(np.abs(final.zp.values).max(), np.abs(final.zm.values).max())
    wall = 0.0
    for z in (final.zp, final.zm):
        wall = max(wall, np.abs(g.interpolate(z.values[2], z.parity[2], pts)).max())
        for i in range(2):
            d3 = g.ifft(g.deriv_hat(g.fft(z.values[i], z.parity[i]), 0, 0, 1))
            wall = max(wall, np.abs(g.interpolate(d3, Parity.ODD, pts)).max() * g.hz)
    tags = final.zp.parity == (Parity.EVEN, Parity.EVEN, Parity.ODD)
    ok = drift <= 1e-6 and div <= 1e-10 and wall <= 1e-12 * scale and tags and not s["trajectory"]["aborted"]
    record(4, "Conservation and constraints", ok,
           f"drift/time {drift:.2e}, max divergence {div:.2e}, wall residual {wall / scale:.1e}")
    assert ok


def test_criterion_05_transport_and_weight(default_run):
    cfg, s, _ = default_run
    T = cfg.stepper.t_end
    c = s["centroids"]
    vp = (c["plus"][1] - c["plus"][0]) / T
    vm = (c["minus"][1] - c["minus"][0]) / T
    var = s["E_plus_00_variation"]
    ok = abs(vp + 1) <= 0.02 and abs(vm - 1) <= 0.02 and var <= 0.01
    record(5, "Alfven transport and weight", ok, f"speeds {vp:+.5f} / {vm:+.5f}, E+^(0,0) variation {var:.2e}")
    assert ok


def test_criterion_06_projection_identities():
    g = make_grid(GridSpec(Lx=2.0, Ly=1.5, delta=0.3, Nx=16, Ny=8, Nz=16))
    rng = np.random.default_rng(6)
    f = rng.standard_normal(g.shape)
    M = lambda v: diag.lift(diag.mean_project(v), g)
    mf = M(f)
    e1 = np.abs(M(mf) - mf).max() / np.abs(mf).max()
    e2 = np.abs(M(f - mf)).max() / np.abs(f).max()
    # wall-vanishing f: odd reflection parity
    odd = rng.standard_normal(g.shape)
    d3 = g.ifft(g.deriv_hat(g.fft(odd, Parity.ODD), 0, 0, 1))
    e3 = np.abs(M(d3)).max() / np.abs(d3).max()
    worst = max(e1, e2, e3)
    ok = worst <= 1e-12
    record(6, "Projection identities", ok, f"M^2-M {e1:.1e}, M(I-M) {e2:.1e}, M d3 {e3:.1e}")
    assert ok


def test_criterion_07_rescaling_identities():
    worst = 0.0
    for delta in (0.2, 0.05):
        g = make_grid(GridSpec(Lx=6.0, Ly=np.pi, delta=delta, Nx=32, Ny=8, Nz=8))
        for fam, eta in ((Family.TUBE, 0.0), (Family.SHEET, 0.0), (Family.LIFTED, 0.5)):
            st = make_initial(fam, g, InitialParams(eta=eta))
            worst = max(worst, verify_norm_identities(st, delta, 4).max_discrepancy)
            worst = max(worst, max(compare_functionals(st, 4).values()))
    ok = worst <= 1e-12
    record(7, "Rescaling identities", ok, f"max relative discrepancy {worst:.2e}")
    assert ok


def test_criterion_08_z3_gain():
    worst, n = 0.0, 0
    for delta in (0.2, 0.1, 0.05, 0.025):
        g = make_grid(GridSpec(Lx=8.0, Ly=np.pi, delta=delta, Nx=64, Ny=16, Nz=8))
        suite = [make_initial(Family.TUBE, g, InitialParams(ny_mode=q, m=m)) for q in (1, 2) for m in (1, 2)]
        suite.append(make_initial(Family.LIFTED, g, InitialParams(eta=1.0)))
        suite.append(make_initial(Family.LIFTED, g, InitialParams(eta=delta, center_plus=1.0, center_minus=-1.0)))
        evolved = run(suite[0], StepperConfig(t_end=0.5, snapshot_cadence=0.5), diagnostics=False).final
        suite.append(evolved)
        for st in suite:
            worst = max(worst, max(diag.z3_gain_ratios(st, 3).values()))
            n += 1
    ok = worst <= 4.0
    record(8, "z3 gain", ok, f"max ratio {worst:.3f} over {n} states")
    assert ok


def test_criterion_09_2d_oracle():
    cfg = load_config(None, {"stepper.t_end": "1.0"})
    g = make_grid(cfg.grid_spec())
    s3 = make_initial(Family.SHEET, g, cfg.initial_params(g.delta))
    pair = mhd2d.run_paired(s3, mhd2d.state2d_from_mean(s3), cfg.stepper_config())
    worst = 0.0
    for a, b in zip(pair.snaps3d, pair.traj2d.snapshots):
        for z3, z2 in ((a.zp.values, b.zp), (a.zm.values, b.zm)):
            worst = max(worst, np.abs(z3[:2] - z2[..., None]).max() / np.abs(z2).max())
    ok = pair.snaps3d[-1].t == 1.0 and not pair.aborted and worst <= 1e-8
    record(9, "3D/2D oracle", ok, f"max slice-wise relative difference {worst:.2e}")
    assert ok


@pytest.fixture(scope="module")
def sweeps(tmp_path_factory):
    out = {}
    for power in (0, 1):
        d = tmp_path_factory.mktemp(f"sweep_p{power}")
        cfg = load_config(None, {"initial.family": "lifted2d_plus_delta_perturbation",
                                 "initial.eta_coeff": "1.0", "initial.eta_power": str(power)})
        run_sweep(cfg, str(d))
        out[power] = json.loads((d / "slopes.json").read_text()), (d / "sweep.csv").read_text()
    return out


def _rows(csv_text):
    lines = csv_text.strip().splitlines()
    head = lines[0].split(",")
    return [dict(zip(head, ln.split(","))) for ln in lines[1:]]


def test_criterion_10_uniform_bounds(sweeps):
    slopes, csv = sweeps[0]
    rows = _rows(csv)
    wh = max(float(r["wh_ratio"]) for r in rows)
    w3 = [float(r["w3_scaled_max"]) for r in rows]
    var = max(w3) / min(w3) if min(w3) > 0 else math.inf
    ran = all(r["aborted"] in ("False", "0") for r in rows) and len(rows) == 4
    ok = ran and wh <= 4.0 and var <= 2.0
    record(10, "Uniform-in-delta bounds", ok, f"max w^h ratio {wh:.6f}, delta^-2 w^3 variation x{var:.4f}")
    assert ok


def test_criterion_11_convergence_rates(sweeps):
    slopes, _ = sweeps[1]
    fd, fz = slopes["slopes"]["diff"], slopes["slopes"]["z3"]
    ok = fd["slope"] >= 0.9 and fd["r2"] >= 0.9 and fz["slope"] >= 1.8 and fz["r2"] >= 0.9
    record(11, "Convergence to 2D", ok,
           f"diff slope {fd['slope']:.3f} (R2 {fd['r2']:.4f}), z3 slope {fz['slope']:.3f} (R2 {fz['r2']:.4f})")
    assert ok


def test_criterion_12_flux_surface(default_run):
    _, s, _ = default_run
    fs = s["flux_surface"]
    # the run cadence is 0.05, so the coarse route at 0.1 is the reference cadence
    ref = max(v["rel_diff_coarse"] for v in fs.values())
    fine = max(v["rel_diff"] for v in fs.values())
    ok = set(fs) == {"+", "-"} and ref <= 0.02 and fine < ref
    record(12, "Flux-surface identity", ok, f"cadence 0.1: {ref:.3%}, cadence 0.05: {fine:.3%}")
    assert ok


def test_criterion_13_weight_bounds():
    rng = np.random.default_rng(13)
    n = 100_000
    t = rng.uniform(0, 20, n)
    xh = rng.uniform(-60, 60, (n, 2))
    # near field: |x_h - y_h| <= 2, constant sqrt(5)
    r = 2 * np.sqrt(rng.uniform(0, 1, n))
    th = rng.uniform(0, 2 * np.pi, n)
    yh = xh + np.column_stack([r * np.cos(th), r * np.sin(th)])
    near = 0
    for sign in (0, 1):
        ux, uy = characteristic_coords(t, xh[:, 0])[sign], characteristic_coords(t, yh[:, 0])[sign]
        near += int(np.count_nonzero(weight(ux, 0.0) > SQRT5 * weight(uy, 0.0)))
    # far field: |x_h - y_h| >= 1, constant sqrt(3) |x_h - y_h|
    r = rng.uniform(1, 30, n)
    yh = xh + np.column_stack([r * np.cos(th), r * np.sin(th)])
    dist = np.linalg.norm(xh - yh, axis=1)
    far = 0
    for sign in (0, 1):
        ux, uy = characteristic_coords(t, xh[:, 0])[sign], characteristic_coords(t, yh[:, 0])[sign]
        far += int(np.count_nonzero(weight(ux, 0.0) > SQRT3 * dist * weight(uy, 0.0)))
    ok = near == 0 and far == 0
    record(13, "Weight bounds", ok, f"sqrt5 violations {near}/{2 * n}, sqrt3 violations {far}/{2 * n}")
    assert near == 0, f"{near} samples exceed sqrt(5); the sharp constant is 1 + sqrt(2)"
    assert far == 0
