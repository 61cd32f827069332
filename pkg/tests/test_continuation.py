import math

import numpy as np
import pytest

import torusgc as t
from torusgc.continuation import CSV_COLUMNS, ContinuationRecord


@pytest.fixture(scope="module")
def small_sweep(p32):
    captured = []
    cfg = t.SweepConfig(escalate=False,
                        on_solution=lambda lam, p, res: captured.append((lam, res)))
    recs = t.sweep(p32, [0.5, 0.4, 0.3], cfg)
    return recs, captured


def stub(lam, beta, **kw):
    base = dict(lam=lam, beta=beta, mu=1.0, vol=1.0, lambda_times_vol=lam,
                total_curvature=1.0, gb_residual=0.0, u_max=0.5, u_min=-0.5,
                w_sup=0.5, blowup_point=None, converged=True)
    base.update(kw)
    return ContinuationRecord(**base)


def test_sweep_follows_schedule(small_sweep):
    recs, _ = small_sweep
    assert [r.lam for r in recs] == [0.5, 0.4, 0.3]
    assert all(r.converged for r in recs)


def test_gauss_bonnet_identity(small_sweep):
    recs, _ = small_sweep
    assert max(r.gb_residual for r in recs) < 1e-10


def test_record_matches_recomputation(small_sweep, p32):
    recs, captured = small_sweep
    for rec, (lam, res) in zip(recs, captured):
        e2u = np.exp(2 * res.u.values)
        fl = t.f_lambda(p32, lam).values
        assert abs(rec.vol - np.mean(e2u)) < 1e-12
        assert abs(rec.lambda_times_vol - lam * rec.vol) < 1e-12
        assert abs(rec.total_curvature - np.mean(np.abs(fl) * e2u)) < 1e-12
        assert abs(rec.gb_residual - abs(np.mean(fl * e2u))) < 1e-14
        assert abs(rec.u_max - res.u.values.max()) < 1e-14
        assert abs(rec.u_min - res.u.values.min()) < 1e-14
        assert abs(rec.w_sup - np.abs(res.w.values).max()) < 1e-14
        assert abs(rec.beta - res.beta) < 1e-14
        assert abs(rec.mu - res.mu) < 1e-14


def test_blowup_point_marks_peak(small_sweep, p32):
    recs, _ = small_sweep
    # u_max > 1 throughout this range, so the argmax is recorded; for the
    # symmetric cosine datum it sits on the f0 maximum
    for rec in recs:
        assert rec.blowup_point is not None
        assert np.max(np.abs(np.asarray(rec.blowup_point))) < 2 * p32.grid.h


def test_csv_header_and_row(small_sweep):
    recs, _ = small_sweep
    assert CSV_COLUMNS == ("lambda", "beta", "mu", "vol", "lambda_times_vol",
                           "total_curvature", "gb_residual", "u_max", "u_min",
                           "w_sup", "blowup_point", "converged")
    row = recs[0].csv_row()
    assert len(row) == len(CSV_COLUMNS)
    assert float(row[0]) == recs[0].lam
    assert float(row[1]) == recs[0].beta
    assert row[-1] == "1"
    xy = row[-2].split()
    assert len(xy) == 2
    float(xy[0]), float(xy[1])


def test_unconverged_record_row():
    r = stub(0.1, 2.0, converged=False, blowup_point=None)
    row = r.csv_row()
    assert row[-1] == "0"
    assert row[-2] == ""


def test_beta_prime_constant_is_zero():
    recs = [stub(lam, 7.0) for lam in (0.4, 0.3, 0.2, 0.1)]
    pairs = t.estimate_beta_prime(recs)
    assert len(pairs) == 2
    assert all(abs(d) < 1e-12 for _, d in pairs)


def test_beta_prime_log_profile():
    # beta = log(1/lam) has lam * beta' = -1; the nonuniform stencil should
    # land within the truncation error of the geometric grid
    lams = [0.5 * 0.8**k for k in range(10)]
    recs = [stub(lam, math.log(1.0 / lam)) for lam in lams]
    pairs = t.estimate_beta_prime(recs)
    for lam, d in pairs:
        assert abs(lam * d + 1.0) < 0.02
    c0 = t.empirical_c0(pairs, lam_cut=0.5)
    assert abs(c0 - 1.0) < 0.02


def test_beta_prime_needs_three_records():
    with pytest.raises(ValueError):
        t.estimate_beta_prime([stub(0.2, 1.0), stub(0.1, 2.0)])


def test_parse_schedule_geometric():
    assert t.parse_schedule("geo:0.1:0.5:0.5", 1.0) == [0.5, 0.25, 0.125, 0.1]


def test_parse_schedule_list_and_frac():
    assert t.parse_schedule("list:0.3,0.2", 1.0) == [0.3, 0.2]
    got = t.parse_schedule("frac:0.9,0.5", 2.0)
    assert np.allclose(got, [1.8, 1.0])


def test_parse_schedule_rejects_garbage():
    for bad in ("wat:1", "geo:0.5:0.1:0.7", "geo:0.1:0.5:1.2", "list:abc"):
        with pytest.raises(ValueError):
            t.parse_schedule(bad, 1.0)


def test_slice_s0_cosine(p32):
    sl = t.slice_construct(p32, 0.9)
    # s0 = -1 / (2 int (f0 - f0bar)^2) = -2 for the half-amplitude cosine
    assert abs(sl.s0 + 2.0) < 1e-12
    assert abs(t.mean(sl.v_lambda)) < 1e-12
    assert sl.energy_upper >= 0
    assert sl.theta_norm >= 0


def test_slice_correction_vanishes_at_lambda_max(p32):
    ratios = []
    for lam in (0.9, 0.99, 0.999):
        sl = t.slice_construct(p32, lam)
        ratios.append(sl.theta_norm / (p32.lambda_max - lam))
    assert ratios[0] > ratios[1] > ratios[2]


def test_slice_at_lambda_max_is_flat(p32):
    sl = t.slice_construct(p32, p32.lambda_max)
    assert np.max(np.abs(sl.v_lambda.values)) < 1e-15


def test_slice_upper_bounds_minimum(p32):
    lam = 0.95
    res = t.minimize(p32, lam)
    sl = t.slice_construct(p32, lam)
    assert res.beta <= sl.energy_upper + 1e-12


def test_lambda_max_report_trends(p32):
    lams = [0.9, 0.99, 0.999]
    recs = t.sweep(p32, lams, t.SweepConfig(escalate=False))
    report = t.lambda_max_report(p32, recs)
    assert report["pass"]
    assert all(report["verdicts"].values())
    assert len(report["rows"]) == 3


def test_lambda_max_report_needs_three(p32):
    recs = t.sweep(p32, [0.9, 0.99], t.SweepConfig(escalate=False))
    with pytest.raises(ValueError):
        t.lambda_max_report(p32, recs)


def test_escalation_raises_resolution(p32):
    # an unreachable residual target forces doubling up to the cap
    recs = t.sweep(p32, [0.5],
                   t.SweepConfig(escalate=True, res_tol=1e-13, n_cap=64))
    assert recs[0].n == 64


def test_failed_lambda_keeps_sweep_alive(p32):
    # lambda beyond lambda_max cannot satisfy the constraint; the record
    # must come back unconverged while later lambdas still run
    cfg = t.SweepConfig(escalate=False)
    recs = t.sweep(p32, [0.5, 1.7, 0.4], cfg)
    assert [r.lam for r in recs] == [0.5, 1.7, 0.4]
    assert recs[0].converged and recs[2].converged
    assert not recs[1].converged
    assert math.isnan(recs[1].beta)
