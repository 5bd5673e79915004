import numpy as np
import pytest

from mpc_topo.pdap import Pdap
from mpc_topo.pipeline import cluster_pdap
from mpc_topo.synth import demo_scene, generate_pdap

DEMO_THRESHOLD_DB = -120.0


def paraboloid_pdap(peaks, delay=(0.0, 40.0, 0.5), angle=(100.0, 200.0, 1.0), floor=-140.0):
    """Max of dB paraboloids ``(tau0, phi0, peak_db, s_tau, s_phi)`` over a flat floor."""
    d = np.arange(delay[0], delay[1] + 1e-9, delay[2])
    a = np.arange(angle[0], angle[1] + 1e-9, angle[2])
    tt, pp = np.meshgrid(d, a, indexing="ij")
    power = np.full(tt.shape, floor)
    for t0, p0, pk, st, sp in peaks:
        power = np.maximum(power, pk - 0.5 * (((tt - t0) / st) ** 2 + ((pp - p0) / sp) ** 2))
    return Pdap(d, a, power)


@pytest.fixture(scope="session")
def demo():
    """Seed-0 demo scene, its synthetic PDAP and the proposed pipeline at -120 dB."""
    synth = generate_pdap(demo_scene(0))
    out = cluster_pdap(synth.pdap, DEMO_THRESHOLD_DB)
    return synth, out


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
