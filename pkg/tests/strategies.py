"""Hypothesis strategies shared by the test modules."""
import math

from hypothesis import assume
from hypothesis import strategies as st

from fibertractor import Injection, SimpleFourPortParams


@st.composite
def beads(draw, max_r=0.95):
    t12 = draw(st.floats(0.0, 1.0))
    r_max = min(max_r, math.sqrt(max(0.0, 1 - t12 * t12)))
    r12 = draw(st.floats(0.0, r_max)) * (1 - 1e-12)
    return SimpleFourPortParams(t12, r12, draw(st.floats(-math.pi, math.pi)))


amplitude = st.builds(complex, st.floats(-1, 1), st.floats(-1, 1))


@st.composite
def injections(draw, two_sided=False):
    a = [draw(amplitude) for _ in range(4 if two_sided else 2)]
    a += [0j] * (4 - len(a))
    assume(sum(abs(v) ** 2 for v in a) > 1e-3)
    return Injection(*a)
