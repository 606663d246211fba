import numpy as np
import pytest

from txbeam.geometry import Medium, Probe, build_field_grid

#: the 192-element test probe; kerf and band are configuration choices
FULL_PROBE = dict(num_element_pairs=96, pitch=0.245e-3, kerf=0.03e-3, element_height=5e-3,
                   geometric_focus_depth=25e-3, f_min=1e6, f_max=8e6)


@pytest.fixture
def full_probe():
    return Probe(**FULL_PROBE)


@pytest.fixture
def small_probe():
    """Coarse sub-grid so kernels and oracles stay fast."""
    return Probe(8, 0.245e-3, 0.03e-3, 5e-3, 25e-3, 1e6, 8e6, sub_nx=2, sub_ny=4)


@pytest.fixture
def medium():
    return Medium(1540.0, 0.0)


@pytest.fixture
def small_grid(small_probe):
    return build_field_grid(small_probe, 2, 1e-3, 5e-3, 14e-3, half_width_elements=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


TINY_TOML = """\
seed = 3
threads = 1

[probe]
elements = 16
sub_nx = 2
sub_ny = 4

[grid]
L = 2
half_width_elements = 6
z_min = 5e-3
z_max = 15e-3
dz = 0.5e-3

[time]
num_samples = 1024

[pulse]
f0 = 3e6

[transmit]
elements = 8
focus = 10e-3

[sweep]
f0 = [3e6, 4.5e6]
elements = [4, 8]
focus = [8e-3, 10e-3, 12e-3]

[paths]
map_store = "{store}"
out = "{out}"
"""


@pytest.fixture
def tiny_config(tmp_path, monkeypatch):
    """A 16-element probe on a 24 x 21 grid, with its store and output under ``tmp_path``."""
    monkeypatch.delenv("TXBEAM_MAP_STORE", raising=False)
    path = tmp_path / "run.toml"
    path.write_text(TINY_TOML.format(store=tmp_path / "maps", out=tmp_path / "out"))
    return path


# acceptance reporting: one line per criterion at the end of the run

_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    number, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.failed:
        msg = rep.longrepr.reprcrash.message if hasattr(rep.longrepr, "reprcrash") else str(rep.longrepr)
        detail = msg.splitlines()[0] if msg else detail
    _CRITERIA[number] = ("PASS" if rep.passed else "SKIP" if rep.skipped else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:>2} {status}: {title}" + (f" ({detail})" if detail else ""))
