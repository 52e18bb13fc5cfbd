import sys

import numpy as np
import pytest
from hypothesis import settings

from blockloci.systems import RationalTF, StaticNL, ff_fb_parallel

settings.register_profile("ci", deadline=None, max_examples=40)
settings.load_profile("ci")

G1 = RationalTF((0.15, 0.1), (1.0, -0.9))
G2 = RationalTF((0.12, 0.11), (1.0, -0.77))
G3 = RationalTF((0.2, 0.15), (1.0, -0.72), delay=1)
F1 = StaticNL.polynomial([0.0, 1.0, 0.0, -0.3])
F2 = StaticNL.polynomial([0.0, 1.0, 0.5, 0.5])
F3 = StaticNL.polynomial([0.0, 1.0, 0.2, 0.8])
SWEEP = tuple(np.round(np.arange(11) * 0.1, 12))


def ref_loop_graph(g3=G3, f1=F1, f2=F2, f3=F3):
    return ff_fb_parallel([[("G1", G1), ("f1", f1)], [("G2", G2), ("f2", f2)]],
                          [[("G3", g3), ("f3", f3)]])


@pytest.fixture(scope="session")
def ref_loop():
    return ref_loop_graph()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[k])
