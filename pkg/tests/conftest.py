import numpy as np
import pytest

import torusgc as t


@pytest.fixture(scope="session")
def p32():
    return t.build_problem(t.cosine(0.5), t.Grid(32))


@pytest.fixture(scope="session")
def p64():
    return t.build_problem(t.cosine(0.5), t.Grid(64))


@pytest.fixture(scope="session")
def min64_lam01(p64):
    """Minimizer at lambda = 0.1 on the 64 grid, shared by the h-probe tests."""
    res = t.minimize(p64, 0.1)
    assert res.converged
    return res


def manufactured_problem(n, lam0=0.1):
    """Problem whose exact solution is u* = 0.1cos(2pix) + 0.05cos(2piy).

    The datum is read off the equation: f = -Delta(u*) e^{-2u*}, then split
    as f0 = f - lam0 so that u* solves the lam0 problem.
    """
    g = t.Grid(n)
    xx, yy = g.axes()
    vals = 0.1 * np.cos(2 * np.pi * xx) + 0.05 * np.cos(2 * np.pi * yy)
    ustar = t.Field(g, vals)
    f0 = t.Field(g, -t.laplacian(ustar).values * np.exp(-2 * vals) - lam0)
    return t.problem_from_field(f0, "manufactured"), ustar, lam0
