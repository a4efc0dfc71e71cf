"""Acceptance criteria at their stated tolerances; one summary line per criterion is printed at the end."""
import math

import numpy as np
import pytest

from idsclt.cli_io.cli import COMMANDS, main
from idsclt.disorder import AlloyMap, SingleSite, SiteDistribution, counter_uniforms
from idsclt.experiments import (bc_difference, combes_thomas_profile, decomposition_residual, fixed_operator,
                                ids_estimate, interior_trace_gap, moment_scan, normality_test, positivity_check,
                                run_ensemble, variance_estimate, variance_formula)
from idsclt.geometry import BoxSpec, annuli_plan, index_set
from idsclt.magnetic import MagneticField, assemble, plaquette_fluxes
from idsclt.scenarios import point_mass_control, reference_spec, zero_site_control
from idsclt.spectral import eigenvalues, hellmann_feynman_check, trace_function, trace_resolvent_power
from idsclt.testfun import (LaurentPoly, antiderivative_lift, exp_decay, identity, laurent_fit, resolvent_power,
                            tilde_transform)

pytestmark = pytest.mark.slow

SCENARIO_L = (32, 64, 128, 256)
N_BOOT = 1000


def combined(*se):
    return math.sqrt(sum(s * s for s in se))


def random_field(rng, d):
    B = np.zeros((d, d))
    iu = np.triu_indices(d, 1)
    B[iu] = rng.uniform(-2, 2, len(iu[0]))
    return MagneticField(B - B.T)


def random_alloy(rng, box, H0):
    kind = rng.integers(3)
    dist = (SiteDistribution.uniform(*sorted(rng.uniform(-1, 1, 2))),
            SiteDistribution.two_point(*sorted(rng.uniform(-1, 1, 2)), rng.uniform()),
            SiteDistribution.point_mass(rng.uniform(-1, 1)))[kind]
    if rng.integers(2):
        u = SingleSite.indicator(box.d, box.q, rng.uniform(0.2, 2))
    else:
        h = rng.uniform(-1, 1)
        u = SingleSite.from_function(lambda x: h * max(0.0, 1 - float(np.max(np.abs(x)))), 1.0, box.d, box.q)
    idx = index_set(box.region(), u.radius)
    alloy = AlloyMap(idx.points, u, H0.labels)
    return alloy.apply(dist.transform(counter_uniforms(int(rng.integers(2**32)), (0,), idx.points)))


@pytest.fixture(scope="session")
def scenario():
    """Reference-scenario ensembles for both boundary conditions, sharing every omega_j."""
    out = {}
    for L in SCENARIO_L:
        spec = reference_spec(L)
        out[L, "dirichlet"] = run_ensemble(spec)
        out[L, "neumann"] = run_ensemble(spec, "neumann")
    return out


@pytest.fixture(scope="session")
def direct_estimates(scenario):
    return {key: variance_estimate(r, N_BOOT, 0) for key, r in scenario.items()}


@pytest.fixture(scope="session")
def formula_estimate():
    return variance_formula(reference_spec(256))


def test_criterion_01_free_spectrum(report):
    worst = 0.0
    for L in range(6, 65):
        lam = eigenvalues(assemble(BoxSpec(1, L), MagneticField.zero(1)))
        n = len(lam)
        worst = max(worst, np.max(np.abs(lam - (2 - 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))))))
    report(1, worst <= 1e-10, f"max eigenvalue deviation {worst:.1e} over L=6..64")


def test_criterion_02_structural_invariants(report):
    rng = np.random.default_rng(2)
    herm, floor, flux = 0.0, -np.inf, 0.0
    for _ in range(100):
        d = int(rng.integers(1, 3))
        q = int(rng.integers(1, 3))
        box = BoxSpec(d, int(rng.integers(4, 8 if d == 2 else 24)), q, str(rng.choice(["dirichlet", "neumann"])))
        field = random_field(rng, d)
        H0 = assemble(box, field)
        H = H0.with_potential(random_alloy(rng, box, H0))
        herm = max(herm, H.hermiticity_residual())
        vmax = float(np.max(np.abs(H.potential)))
        floor = max(floor, -vmax - eigenvalues(H)[0])
        if d == 2:
            flux = max(flux, float(np.max(np.abs(plaquette_fluxes(H) + field.B[0, 1] / q**2))))
    ok = herm == 0.0 and floor <= 1e-9 and flux <= 1e-12
    report(2, ok, f"hermiticity {herm:.1e}, floor excess {floor:.1e}, plaquette flux error {flux:.1e}")


def test_criterion_03_magnetic_covariance(report):
    rng = np.random.default_rng(3)
    box, field = BoxSpec(2, 10), MagneticField.planar(0.7)
    sites = box.integer_sites()
    worst = 0.0
    for j in range(20):
        m = rng.integers(-4, 5, 2)
        omega = SiteDistribution.uniform().transform(counter_uniforms(99, (j,), sites))
        V = {tuple(k): v for k, v in zip(sites, omega)}
        Vs = {tuple(np.array(k) + m): v for k, v in V.items()}
        a = eigenvalues(assemble(box, field, V))
        b = eigenvalues(assemble(box.shifted(m), field, Vs))
        worst = max(worst, float(np.max(np.abs(a - b))))
    report(3, worst <= 1e-9, f"max spectral deviation {worst:.1e} over 20 shifts")


def test_criterion_04_hellmann_feynman(report):
    rng = np.random.default_rng(4)
    H = assemble(BoxSpec(1, 32), MagneticField.zero(1), lambda x: rng.uniform(0, 1, len(x)))
    W = rng.uniform(0, 1, H.N)
    errs = []
    for f in (resolvent_power(-2.0, 3), identity()):
        a, n = hellmann_feynman_check(H, W, f, step=1e-4)
        errs.append(abs(a - n) / abs(a))
    report(4, max(errs) <= 1e-6, f"relative errors {errs[0]:.1e} (resolvent), {errs[1]:.1e} (identity)")


def test_criterion_05_backend_concordance(report):
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(50):
        d = int(rng.integers(1, 3))
        box = BoxSpec(d, int(rng.integers(4, 9 if d == 2 else 48)), int(rng.integers(1, 3)))
        H0 = assemble(box, random_field(rng, d))
        H = H0.with_potential(random_alloy(rng, box, H0))
        E = -float(np.max(np.abs(H.potential))) - rng.uniform(0.5, 2)
        m = int(rng.integers(1, 6))
        a = trace_function(H, resolvent_power(E, m))
        b = trace_resolvent_power(H, E, m)
        worst = max(worst, abs(a - b) / abs(a))
    report(5, worst <= 1e-8, f"max relative disagreement {worst:.1e} over 50 instances")


def test_criterion_06_normality(report, scenario):
    reps = {L: normality_test(scenario[L, "dirichlet"], N_BOOT, 6) for L in (64, 128, 256)}
    top = reps[256]
    ok = top.p_value >= 0.01 and abs(top.skewness) <= 0.2 and abs(top.excess_kurtosis) <= 0.4
    trend = True
    for a, b in ((64, 128), (128, 256)):
        ra, rb = reps[a], reps[b]
        n = rb.n
        for stat, se in (("ks", combined(ra.ks_null_sd, rb.ks_null_sd)),
                         ("skewness", combined(math.sqrt(6 / n), math.sqrt(6 / n))),
                         ("excess_kurtosis", combined(math.sqrt(24 / n), math.sqrt(24 / n)))):
            va, vb = abs(getattr(ra, stat)), abs(getattr(rb, stat))
            trend &= vb <= va or vb - va <= se
    detail = ", ".join(f"L={L}: p={r.p_value:.3f} skew={r.skewness:+.3f} kurt={r.excess_kurtosis:+.3f}"
                       for L, r in reps.items())
    report(6, ok and trend, detail + ("" if trend else "; statistics worsen beyond SE"))


def test_criterion_07_variance_convergence(report, direct_estimates):
    a, b = direct_estimates[128, "dirichlet"], direct_estimates[256, "dirichlet"]
    gap, se = abs(b.value - a.value), combined(a.se, b.se)
    report(7, gap <= 4 * se, f"sigma2(128)={a.value:.4e}, sigma2(256)={b.value:.4e}, gap {gap / se:.2f} SE")


def test_criterion_08_boundary_independence(report, scenario):
    diffs = [bc_difference(scenario[L, "dirichlet"], scenario[L, "neumann"], N_BOOT, 0) for L in (64, 128, 256)]
    vals = [c.value for c in diffs]
    dec = all(b < a for a, b in zip(vals, vals[1:]))
    top = diffs[-1]
    gap = abs(top.var_neumann.value - top.var_dirichlet.value)
    se = combined(top.var_neumann.se, top.var_dirichlet.se)
    report(8, dec and gap <= 3 * se,
           f"coupled differences {', '.join(f'{v:.2e}' for v in vals)}; N vs D at L=256 {gap / se:.2f} SE")


def test_criterion_09_formula_concordance(report, direct_estimates, formula_estimate):
    d, f = direct_estimates[256, "dirichlet"], formula_estimate
    gap, se = abs(d.value - f.value), combined(d.se, f.se)
    report(9, gap <= 3 * se, f"formula {f.value:.4e} +- {f.se:.1e}, direct {d.value:.4e}, gap {gap / se:.2f} SE")


def test_criterion_10_decomposition(report):
    res = [decomposition_residual(reference_spec(L, 1000), annuli_plan(1, L, 0.75, 0.25, R=1.0))
           for L in (81, 256, 625)]
    vals = [r.value for r in res]
    dec = all(b < a for a, b in zip(vals, vals[1:]))
    worst = max(abs(c.z) for r in res for c in r.cross)
    report(10, dec and worst <= 4,
           f"E[G^2]/L {', '.join(f'{v:.2e}' for v in vals)}; max cross-covariance |z| {worst:.2f}")


def test_criterion_11_interior_gap_decay(report):
    profiles = interior_trace_gap(reference_spec(128, 2), (2, 4, 8, 16))
    ok = all(p.fit is not None and p.fit.slope < 0 and p.fit.r2 >= 0.9 for p in profiles.values())
    detail = "; ".join(f"{k}: slope {p.fit.slope:.2f}, r2 {p.fit.r2:.4f}" for k, p in profiles.items() if p.fit)
    report(11, ok, detail)


def test_criterion_12_combes_thomas(report):
    H = fixed_operator(reference_spec(128, 2))
    fit = combes_thomas_profile(H, -2.0, 3, list(range(2, 21, 2)))
    report(12, fit.slope < 0 and fit.r2 >= 0.95, f"slope {fit.slope:.3f}, r2 {fit.r2:.4f}")


def test_criterion_13_moment_boundedness(report, scenario):
    _, spread = moment_scan([scenario[L, "dirichlet"] for L in SCENARIO_L])
    ok = spread["second"] < 10 and spread["fourth"] < 10
    report(13, ok, f"max/min second {spread['second']:.2f}, fourth {spread['fourth']:.2f}")


def test_criterion_14_positivity(report, direct_estimates, formula_estimate):
    verdict = positivity_check(direct_estimates[256, "dirichlet"], formula_estimate, k=3.0)
    controls = []
    for spec in (point_mass_control(64, 200), zero_site_control(64, 200)):
        controls.append(variance_estimate(run_ensemble(spec), 200).value)
        controls.append(variance_formula(spec, L_p=32, N_out=20, N_in=4, Q=4).value)
    ok = verdict.positive and all(v == 0.0 for v in controls)
    report(14, ok, f"positive by both estimators: {verdict.positive}; control values {controls}")


def test_criterion_15_ids(report, scenario):
    rows, changes = ids_estimate([scenario[L, "dirichlet"] for L in (128, 256)])
    a = rows[-1].value
    b = scenario[256, "neumann"].mean / scenario[256, "neumann"].volume
    bc_rel = abs(a - b) / abs(a)
    report(15, changes[0] <= 0.01 and bc_rel <= 0.01,
           f"change 128->256 {100 * changes[0]:.2f}%, Dirichlet vs Neumann at 256 {100 * bc_rel:.2f}%")


def test_criterion_16_laurent_machinery(report):
    P = LaurentPoly(-2.0, 3, (1.0, -0.5, 0.25))
    round_trip = laurent_fit(P, -2.0, 3, 2, lower=-1.0).sup_error
    g = tilde_transform(exp_decay(1.0), -2.0, 1)
    errs = [laurent_fit(g, -2.0, 3, p, lower=-1.0).sup_error for p in (2, 6, 12)]
    x = np.linspace(-1.0, 100.0, 401)
    lift = max(float(np.max(np.abs(antiderivative_lift(P, d).derivative()(x) - (x + 2.0) ** -(1 + d // 2) * P(x))))
               for d in (1, 2, 3))
    ok = round_trip <= 1e-10 and errs[0] > errs[1] > errs[2] and lift <= 1e-10
    report(16, ok, f"round-trip {round_trip:.1e}; fit errors {', '.join(f'{e:.1e}' for e in errs)}; lift {lift:.1e}")


SMALL_RUN = """
d: 1
L: [32, 48]
ssd: {kind: uniform}
site: {kind: indicator}
f: {kind: resolvent-power, E: -2.0, m: 3}
samples: 240
bootstrap: 100
chunk: 60
plan: {L: [81, 256], samples: 20}
formula: {L_p: 16, N_out: 8, N_in: 4, Q: 4}
decay: {L: 64, ells: [2, 4, 8], distances: [2, 4, 6, 8]}
"""


def test_criterion_17_reproducibility(report, tmp_path, capsys):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(SMALL_RUN)
    mismatched = []
    for cmd in COMMANDS:
        dirs = [tmp_path / cmd / k for k in ("a", "b")]
        for d in dirs:
            assert main([cmd, "--config", str(cfg), "--out", str(d)]) in (0,), cmd
        for p in dirs[0].iterdir():
            if p.suffix in (".csv", ".json", ".svg") and p.name != "manifest.json":
                if p.read_bytes() != (dirs[1] / p.name).read_bytes():
                    mismatched.append(f"{cmd}/{p.name}")
    base = ["clt", "--config", str(cfg)]
    resumed = tmp_path / "resumed"
    interrupted = main(base + ["--out", str(resumed), "--max-chunks", "3"])
    main(base + ["--out", str(resumed), "--resume"])
    for name in ("stats.json", "qq.svg", "ensemble_L48_dirichlet.csv"):
        if (resumed / name).read_bytes() != (tmp_path / "clt" / "a" / name).read_bytes():
            mismatched.append(f"resume/{name}")
    capsys.readouterr()
    ok = not mismatched and interrupted == 5
    report(17, ok, f"{len(COMMANDS)} subcommands rerun byte-identical, resume exact" if ok
           else f"mismatches {mismatched}, interrupt exit {interrupted}")
