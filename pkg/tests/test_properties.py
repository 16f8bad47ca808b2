"""Randomized invariants of the transforms, the decision rule and the config round trip."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from risinvest.config import dump_config, parse_config
from risinvest.laplace import b_upsilon, lt_beam_power
from risinvest.model import ClusterRing, SystemParams
from risinvest.planner import CostModel, InvestmentState, decide

RING = ClusterRing(20.0, 30.0)

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
positive = st.floats(min_value=1e-6, max_value=1e6)


@given(e_bs=finite, e_ris=finite, scale=positive,
       lam_ris=st.floats(min_value=0.0, max_value=0.01), j=st.floats(min_value=1.01, max_value=50.0))
def test_decision_is_scale_invariant(e_bs, e_ris, scale, lam_ris, j):
    state = InvestmentState(1e-5, lam_ris)
    cost = CostModel(cost_ratio_j=j)
    assert decide(e_bs, e_ris, state, cost, RING) == decide(scale * e_bs, scale * e_ris, state, cost, RING)


@settings(max_examples=40, deadline=None)
@given(lam=st.floats(min_value=1.0, max_value=40.0), ris=st.floats(min_value=0.0, max_value=10.0),
       r=st.floats(min_value=60.0, max_value=400.0), u=st.floats(min_value=1e-3, max_value=1e3))
def test_transform_on_imaginary_axis_is_bounded(lam, ris, r, u):
    p = SystemParams(lambda_bs=lam * 1e-6, lambda_ris=ris / RING.area)
    s = u / (p.p0 * p.beta * (r + 1.0) ** -p.alpha)
    value = b_upsilon(-1j * s, 1.0, r, p)
    assert abs(value) <= 1.0 + 1e-8
    np.testing.assert_allclose(b_upsilon(1j * s, 1.0, r, p), np.conj(value), rtol=1e-10, atol=1e-14)


@given(s=st.floats(min_value=0.0, max_value=1e-3), m=st.integers(min_value=1, max_value=2000))
def test_beam_transform_is_a_probability_transform(s, m):
    value = lt_beam_power(s, m, math.pi / 4, 1 - math.pi ** 2 / 16)
    assert value.imag == 0.0
    assert 0.0 <= value.real <= 1.0


@settings(max_examples=30, deadline=None)
@given(lam=st.floats(min_value=0.5, max_value=100.0), ris=st.floats(min_value=0.0, max_value=20.0),
       k_db=st.floats(min_value=0.0, max_value=10.0), j=st.floats(min_value=1.5, max_value=20.0))
def test_config_round_trip(lam, ris, k_db, j):
    text = (f"system: {{lambda_bs_per_km2: {lam!r}, ris_per_cluster: {ris!r}, penalty_k_db: {k_db!r}}}\n"
            f"cost: {{cost_ratio_j: {j!r}}}\n")
    cfg = parse_config(text)
    assert parse_config(dump_config(cfg)) == cfg
