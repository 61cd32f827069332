import numpy as np
import pytest
from scipy.integrate import solve_ivp

import torusgc as t


def torus_d2(grid, cx, cy):
    xx, yy = grid.axes()
    dx = xx - cx
    dy = yy - cy
    dx -= np.round(dx)
    dy -= np.round(dy)
    return dx * dx + dy * dy


def exact_bubble(n=256, s=0.02, lam=0.25, c=1.0, center=(0.5, 0.5)):
    """u = log(2s/(sqrt(c)(s^2+d^2))) solves -Delta u = c e^{2u} exactly,
    with f0 identically c - lam so the analyzer sees datum value c at the peak.
    """
    g = t.Grid(n)
    d2 = torus_d2(g, *center)
    u = t.Field(g, np.log(2 * s / np.sqrt(c)) - np.log(s * s + d2))
    p = t.problem_from_field(t.constant(g, c - lam), "flat")
    return p, u


@pytest.fixture(scope="module")
def synth1():
    p, u = exact_bubble()
    peaks = t.locate_peaks(u, p)
    assert len(peaks) == 1
    return p, u, t.classify_and_rescale(p, u, 0.25, peaks[0])


@pytest.fixture(scope="module")
def synth2():
    """Radial shooting oracle for the weak-core scaling.

    The model profile solves -(v'' + v'/r) = (1 + a r^2) e^{2v}; gluing it
    into the flat background at d ~ 0.2 gives a field whose rescaling at
    scale sqrt(lambda) must reproduce the profile itself.
    """
    lam, w0, a, n = 0.002, 1.5, -0.1, 1024
    d1, d2 = 0.19, 0.23
    rt = np.sqrt(lam)
    r0 = 1e-8
    y0 = [w0 - np.exp(2 * w0) * r0 * r0 / 4, -np.exp(2 * w0) * r0 / 2]

    def rhs(r, y):
        return [y[1], -y[1] / r - (1 + a * r * r) * np.exp(2 * y[0])]

    sol = solve_ivp(rhs, (r0, d2 / rt + 0.1), y0, rtol=1e-12, atol=1e-14,
                    dense_output=True)
    g = t.Grid(n)
    d2grid = torus_d2(g, 0.5, 0.5)
    d = np.sqrt(d2grid)
    rr = np.clip(d / rt, r0, d2 / rt + 0.1)
    w_of_r = sol.sol(rr.ravel())[0].reshape(rr.shape)

    # C-infinity blend to the constant so the field stays smooth on the torus
    tt = np.clip((d2 - d) / (d2 - d1), 0.0, 1.0)

    def gexp(v):
        out = np.zeros_like(v)
        pos = v > 1e-12
        out[pos] = np.exp(-1.0 / v[pos])
        return out

    chi = gexp(tt) / (gexp(tt) + gexp(1.0 - tt))
    far = float(sol.sol(0.5 * (d1 + d2) / rt)[0])
    u = t.Field(g, chi * w_of_r + (1 - chi) * far - np.log(lam))
    p = t.problem_from_field(t.Field(g, a * d2grid), "dsq")
    peaks = t.locate_peaks(u, p)
    assert len(peaks) == 1
    return p, u, lam, t.classify_and_rescale(p, u, lam, peaks[0])


def test_model_profile_identity():
    # -(w'' + w'/r) = e^{2w} for w = log(2/(1+r^2)), checked by central FD
    h = 1e-4

    def w(r):
        return np.log(2.0 / (1.0 + r * r))

    for r in (0.3, 1.0, 2.7):
        lap = (w(r + h) - 2 * w(r) + w(r - h)) / h**2 \
            + (w(r + h) - w(r - h)) / (2 * h * r)
        assert abs(-lap - np.exp(2 * w(r))) < 1e-6


def test_regime1_classification(synth1):
    _, _, rep = synth1
    assert rep.regime == 1
    # r1 = s exactly for the closed-form bubble, so ratio = s/sqrt(lambda)
    assert abs(rep.ratio - 0.02 / 0.5) < 1e-3
    assert abs(rep.r_n - 0.02) < 1e-6
    assert abs(rep.u_peak - np.log(2.0 / 0.02)) < 1e-6
    assert abs(np.asarray(rep.p_n)[0] - 0.5) < 1e-6
    assert abs(np.asarray(rep.p_n)[1] - 0.5) < 1e-6


def test_regime1_profile_deviation(synth1):
    _, _, rep = synth1
    prof = np.asarray(rep.profile)
    inner = prof[prof[:, 0] <= 2.0]
    assert inner.size
    assert np.max(np.abs(inner[:, 1] - inner[:, 2])) < 1e-3
    assert rep.sup_dev < 1e-3


def test_regime1_center_anchoring(synth1):
    _, _, rep = synth1
    prof = np.asarray(rep.profile)
    at_zero = prof[prof[:, 0] == 0.0]
    assert at_zero.size
    # w_n(0) = log 2 by the normalization u(p_n) - u_peak + log 2
    assert np.max(np.abs(at_zero[:, 1] - np.log(2.0))) < 1e-12


def test_regime1_mass(synth1):
    _, _, rep = synth1
    # closed form: mass over d <= R is 4pi R^2/(s^2+R^2); here R = 0.2
    want = 4 * np.pi * 0.04 / (0.02**2 + 0.04)
    assert abs(rep.local_mass - want) / want < 0.01


def test_mass_monotone_in_radius(synth1):
    p, u, rep = synth1
    center = rep.p_n
    masses = [t.curvature_mass(p, u, 0.25, center, r)
              for r in (0.05, 0.1, 0.2)]
    assert masses[0] < masses[1] < masses[2]


def test_regime2_classification(synth2):
    _, _, _, rep = synth2
    assert rep.regime == 2
    assert rep.ratio > 0.2
    assert abs(rep.r_n - np.sqrt(0.002)) < 1e-15


def test_regime2_profile(synth2):
    _, _, _, rep = synth2
    assert abs(rep.c_fit) < 1e-6
    assert rep.sup_dev < 1e-5
    assert rep.rescaled_residual < 1e-3


def test_locate_two_bubbles():
    g = t.Grid(128)
    s = 0.05
    vals = np.log(2 * s) - np.log(s * s + torus_d2(g, 0.25, 0.25))
    vals = np.maximum(vals, np.log(2 * s) - np.log(s * s + torus_d2(g, 0.75, 0.75)))
    u = t.Field(g, vals)
    p = t.build_problem(t.cosine(0.5), g)
    peaks = t.locate_peaks(u, p)
    assert len(peaks) == 2
    pts = sorted(tuple(np.asarray(pk.point)) for pk in peaks)
    assert abs(pts[0][0] - 0.25) < g.h and abs(pts[0][1] - 0.25) < g.h
    assert abs(pts[1][0] - 0.75) < g.h and abs(pts[1][1] - 0.75) < g.h
    for pk in peaks:
        assert abs(pk.dist_to_f0max - 0.25 * np.sqrt(2)) < 2 * g.h


def test_weak_peak_rejected():
    g = t.Grid(64)
    u = t.Field(g, 0.3 * np.exp(-torus_d2(g, 0.5, 0.5) / 0.02))
    p = t.build_problem(t.cosine(0.5), g)
    pk = t.PeakInfo(point=(0.5, 0.5), value=0.3, dist_to_f0max=float("nan"))
    with pytest.raises(t.PeakTooWeak):
        t.classify_and_rescale(p, u, 0.25, pk)


def test_chart_limit_in_classify():
    # huge requested radius at sqrt-lambda scale leaves < 2 usable rings
    g = t.Grid(64)
    vals = 1.0 * np.exp(-torus_d2(g, 0.0, 0.0) / 0.01)
    u = t.Field(g, vals)
    p = t.build_problem(t.cosine(0.5), g)
    pk = t.locate_peaks(u, p, prominence=0.5)[0]
    with pytest.raises(t.ChartTooLarge):
        t.classify_and_rescale(p, u, 0.04, pk, R=100.0)


def _floored_solutions(p, floors):
    # tail of this bubble sits near -3.2 on the far side, below every floor
    g = p.grid
    s = 0.01
    bubble = np.log(2 * s) - np.log(s * s + torus_d2(g, 0.0, 0.0))
    out = []
    for lam, floor in floors:
        out.append((lam, t.Field(g, np.maximum(bubble, floor))))
    return out


def test_dichotomy_case_i(p64):
    lams = [0.1, 0.05, 0.02, 0.01]
    sols = _floored_solutions(p64, [(l, 0.5 * np.log(l)) for l in lams])
    res = t.dichotomy_detect(p64, sols)
    assert res.case == "i"
    assert res.slope < -0.2


def test_dichotomy_case_ii(p64):
    lams = [0.1, 0.05, 0.02, 0.01]
    sols = _floored_solutions(p64, [(l, -1.0) for l in lams])
    res = t.dichotomy_detect(p64, sols)
    assert res.case == "ii"
    assert abs(res.slope) < 0.05


def test_dichotomy_inconclusive(p64):
    lams = [0.1, 0.05, 0.02, 0.01]
    floors = [(l, -1.0 + (0.5 if k % 2 else -0.5)) for k, l in enumerate(lams)]
    sols = _floored_solutions(p64, floors)
    assert t.dichotomy_detect(p64, sols).case == "inconclusive"


def test_dichotomy_needs_three(p64):
    sols = _floored_solutions(p64, [(0.1, -1.0), (0.05, -1.0)])
    with pytest.raises(ValueError):
        t.dichotomy_detect(p64, sols)
